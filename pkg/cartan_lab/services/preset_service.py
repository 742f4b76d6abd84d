"""Built-in Cartan structures used for acceptance runs."""

from dataclasses import dataclass

from cartan_lab.utils.errors import ConfigError


@dataclass(frozen=True)
class Preset:
    """A named fundamental function with its sampling region.

    Attributes:
        name: Identifier accepted by ``--preset``
        k_expr: Expression of K
        n: Dimension of the base
        c: Constant curvature of the base (used as the default c)
        domain: (lo, hi) per coordinate x1..xn
        p_annulus: (r_min, r_max) for |p|
        riemannian: Whether K^2 is quadratic in p
    """
    name: str
    k_expr: str
    n: int
    c: float
    domain: tuple
    p_annulus: tuple
    riemannian: bool
    description: str


PRESETS = {
    'euclidean': Preset(
        name='euclidean',
        k_expr='sqrt(p1^2+p2^2)',
        n=2,
        c=0.0,
        domain=((-1.0, 1.0), (-1.0, 1.0)),
        p_annulus=(0.5, 2.0),
        riemannian=True,
        description='Flat plane',
    ),
    'hyperbolic-half-plane': Preset(
        name='hyperbolic-half-plane',
        k_expr='sqrt(x2^2*(p1^2+p2^2))',
        n=2,
        c=-1.0,
        domain=((-1.0, 1.0), (0.5, 2.0)),
        p_annulus=(0.5, 2.0),
        riemannian=True,
        description='Poincare half-plane, curvature -1',
    ),
    'sphere-patch': Preset(
        name='sphere-patch',
        k_expr='sqrt(p1^2+p2^2/sin(x1)^2)',
        n=2,
        c=1.0,
        # |sin x1| >= 0.2 keeps the chart away from the poles
        domain=((0.3, 2.8), (-1.0, 1.0)),
        p_annulus=(0.1, 0.6),
        riemannian=True,
        description='Unit sphere in polar coordinates, curvature +1',
    ),
    'randers': Preset(
        name='randers',
        k_expr='sqrt(p1^2+p2^2)+0.3*p1',
        n=2,
        c=0.0,
        domain=((-1.0, 1.0), (-1.0, 1.0)),
        p_annulus=(0.5, 2.0),
        riemannian=False,
        description='Randers-type norm, flat and non-Riemannian',
    ),
}


def get_preset(name):
    """Look up a preset by name.

    Raises:
        ConfigError: If the name is unknown
    """
    preset = PRESETS.get(name)
    if preset is None:
        raise ConfigError(f"Unknown preset '{name}'; choose one of: {', '.join(sorted(PRESETS))}")
    return preset
