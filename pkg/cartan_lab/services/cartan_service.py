"""Cartan space service module.

This module computes the base tensors of a Cartan space (M, K) around a
point of the punctured cotangent bundle: the fiber metric g^ij and its
inverse, the Cartan tensor, the formal Christoffel symbols, the Miron
nonlinear connection N_ij, the canonical metrical connection (H, C), the
P-tensor and the R-curvature of the nonlinear connection. Every tensor is
kept as a jet so that later stages can keep differentiating it along the
adapted frame (delta_i, dv^i).

Index layout of the arrays:
    gU[i, j] = g^ij           gL[i, j] = g_ij
    C3[i, j, k] = C^ijk       Cmix[i, j, k] = C^jk_i
    gamma[i, j, k] = gamma^i_jk
    N[i, j] = N_ij            dN[r, j, k] = dv^r N_jk
    H[i, j, k] = H^i_jk       P[i, j, k] = P^i_jk
    R[k, i, j] = R_kij, the coefficient in [delta_i, delta_j] = R_kij dv^k
"""

from dataclasses import dataclass

import numpy as np

from cartan_lab.services.expression_service import squared
from cartan_lab.services.jet_service import expand
from cartan_lab.utils.errors import DomainError, SingularMetric, ValenceMismatch
from cartan_lab.utils.jets import Jet, jet_concatenate, jet_einsum

# Jet order that leaves every base tensor with at least its value part.
BASE_ORDER = 4

VALENCES = {
    'K2': '',
    'p': 'l',
    'pU': 'u',
    'gU': 'uu',
    'gL': 'll',
    'C3': 'uuu',
    'N': 'll',
}


@dataclass(frozen=True)
class CotangentPoint:
    """Point (x, p) of T*M with p != 0."""
    x: tuple
    p: tuple

    def __post_init__(self):
        if len(self.x) != len(self.p):
            raise ValueError(f"x has {len(self.x)} entries but p has {len(self.p)}")
        if all(momentum == 0.0 for momentum in self.p):
            raise DomainError("The zero section p = 0 is excluded")

    @property
    def n(self):
        return len(self.x)

    def scaled(self, factor):
        return CotangentPoint(self.x, tuple(factor * momentum for momentum in self.p))

    def as_dict(self):
        return {'x': [float(v) for v in self.x], 'p': [float(v) for v in self.p]}


@dataclass(frozen=True)
class CartanContext:
    """Values of the base tensors at one point."""
    x: np.ndarray
    p: np.ndarray
    K2: float
    tau: float
    pU: np.ndarray
    gU: np.ndarray
    gL: np.ndarray
    C3: np.ndarray
    Cmix: np.ndarray
    I: np.ndarray
    gamma: np.ndarray
    N: np.ndarray
    H: np.ndarray
    P: np.ndarray
    R: np.ndarray

    @property
    def n(self):
        return len(self.p)


@dataclass(frozen=True)
class CartanFields:
    """Jets of the base tensors around one point.

    Orders drop with every derivative taken: for K^2 expanded to order m,
    pU has order m-1, the metrics m-2, C3/gamma/N/H m-3, and dN/P/R m-4.
    """
    k2_ast: object
    point: CotangentPoint
    n: int
    order: int
    k2: Jet
    p: Jet
    pU: Jet
    gU: Jet
    gL: Jet
    C3: Jet
    Cmix: Jet
    gamma: Jet
    N: Jet
    dN: Jet
    H: Jet
    P: Jet
    R: Jet

    def context(self):
        pU = self.pU.value
        k2 = float(self.k2.value)
        return CartanContext(
            x=np.array(self.point.x, dtype=float),
            p=np.array(self.point.p, dtype=float),
            K2=k2,
            tau=0.5 * k2,
            pU=pU,
            gU=self.gU.value,
            gL=self.gL.value,
            C3=self.C3.value,
            Cmix=self.Cmix.value,
            I=np.einsum('sjs->j', self.Cmix.value),
            gamma=self.gamma.value,
            N=self.N.value,
            H=self.H.value,
            P=self.P.value,
            R=self.R.value,
        )


def max_abs(array):
    """Largest absolute entry, 0.0 for empty arrays."""
    array = np.asarray(array, dtype=float)
    return float(np.max(np.abs(array))) if array.size else 0.0


def momentum_jets(point, order):
    """The momenta p_1..p_n as a (n,) jet, seeded in directions n..2n-1."""
    n = point.n
    jet = Jet.constant(np.array(point.p, dtype=float), order, 2 * n)
    for k in range(n):
        if order >= 1:
            jet.coeffs[k, 1 + n + k] = 1.0
    return jet


def frame_derivative(tensor, N):
    """Derivatives along the adapted frame, stacked on a new leading axis.

    Entry A < n is delta_A = d_A + N_Aj dv^j; entry n + i is dv^i.
    """
    n = N.shape[0]
    d = tensor.partials()
    flat = d.reshape(d.shape[0], -1)
    horizontal = flat[:n] + jet_einsum('ij,jk->ik', N, flat[n:])
    stacked = jet_concatenate([horizontal, flat[n:]], axis=0)
    return stacked.reshape(*d.shape)


def adapted(tensor, N):
    """delta_i of a tensor field, on a new leading axis i."""
    return frame_derivative(tensor, N)[:N.shape[0]]


def _christoffel(gU, derivative):
    """1/2 g^is (d_j g_sk + d_k g_js - d_s g_jk) from derivative[s, j, k] = d_s g_jk."""
    bracket = derivative.transpose(1, 0, 2) + derivative.transpose(2, 1, 0) - derivative
    return 0.5 * jet_einsum('is,sjk->ijk', gU, bracket)


def build_fields(k_ast, point, order=BASE_ORDER):
    """Expand K^2 at a point and derive the base tensor jets.

    Args:
        k_ast (ExprAst): Expression of K (squared internally)
        point (CotangentPoint): Base point, p != 0
        order (int): Jet order of K^2, at least 4

    Returns:
        CartanFields: Jets of all base tensors

    Raises:
        SingularMetric: If g^ij is not symmetric positive definite
        DomainError: If K cannot be differentiated at the point
    """
    if order < BASE_ORDER:
        raise ValueError(f"Base tensors need jets of order >= {BASE_ORDER}, got {order}")
    n = point.n
    k2_ast = squared(k_ast)
    k2 = expand(k2_ast, point, order)
    p = momentum_jets(point, order)

    pU = 0.5 * k2.partials()[n:]
    hessian = pU.partials()[n:]
    asymmetry = max_abs(hessian.value - hessian.value.T)
    if asymmetry > 1e-10:
        raise SingularMetric(f"Fiber Hessian is not symmetric (asymmetry {asymmetry:.3e})")
    gU = 0.5 * (hessian + hessian.transpose(1, 0))
    try:
        np.linalg.cholesky(gU.value)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("Fiber metric g^ij is not positive definite") from exc
    gL = gU.inv()

    fiber_gU = gU.partials()[n:]
    C3 = -0.5 * fiber_gU.transpose(1, 2, 0)
    Cmix = jet_einsum('is,sjk->ijk', gL, C3)

    gamma = _christoffel(gU, gL.partials()[:n])
    gamma_p = jet_einsum('hij,h->ij', gamma, p)
    gamma_pp = jet_einsum('hj,j->h', gamma_p, pU)
    N = gamma_p - 0.5 * jet_einsum('h,hij->ij', gamma_pp, gL.partials()[n:])

    dN = N.partials()[n:]
    H = _christoffel(gU, adapted(gL, N))
    P = H - dN
    hN = adapted(N, N)
    R = (hN - hN.transpose(1, 0, 2)).transpose(2, 0, 1)

    return CartanFields(
        k2_ast=k2_ast, point=point, n=n, order=order, k2=k2, p=p, pU=pU, gU=gU, gL=gL,
        C3=C3, Cmix=Cmix, gamma=gamma, N=N, dN=dN, H=H, P=P, R=R,
    )


def build_context(k_ast, point):
    """Base tensor values at a point (jets of K^2 to order 4)."""
    return build_fields(k_ast, point, BASE_ORDER).context()


def _field(fields, name):
    if name not in VALENCES:
        raise ValenceMismatch(f"Unknown field '{name}'; known fields: {', '.join(VALENCES)}")
    return fields.k2 if name == 'K2' else getattr(fields, name)


def adapted_derivative(fields, name, i):
    """delta_i f = d_i f + N_ij dv^j f of a named field, at the point."""
    return adapted(_field(fields, name), fields.N).value[i]


def _covariant(fields, name, valence, derivative, upper, lower):
    """derivative + sum over indices of the connection terms.

    ``upper[i, s, k]`` and ``lower[i, s, k]`` are the coefficients contracted
    with an upper (added) or lower (subtracted) index in slot s.
    """
    tensor = _field(fields, name)
    declared = VALENCES[name]
    if valence is not None and valence != declared:
        raise ValenceMismatch(f"Field '{name}' has valence '{declared}', not '{valence}'")
    values = tensor.value
    result = np.moveaxis(derivative(tensor).value, 0, -1)
    for axis, kind in enumerate(declared):
        moved = np.moveaxis(values, axis, -1)
        term = np.einsum('...s,isk->...ik', moved, upper if kind == 'u' else lower)
        if kind == 'l':
            term = -term
        result = result + np.moveaxis(term, -2, axis)
    return result


def h_covariant(fields, name, valence=None):
    """h-covariant derivative T_{...|k} of a named field with the connection H.

    Upper indices gain +T^{..s..} H^i_sk, lower indices -T_{..s..} H^s_ik; the
    derivative index comes last.

    Raises:
        ValenceMismatch: If ``valence`` differs from the field's declared one
    """
    H = fields.H.value
    return _covariant(fields, name, valence, lambda t: adapted(t, fields.N), H, H.transpose(1, 0, 2))


def v_covariant(fields, name, valence=None):
    """v-covariant derivative T_{...}|^k with the connection coefficients C^jk_i."""
    n = fields.n
    Cmix = fields.Cmix.value
    return _covariant(fields, name, valence, lambda t: t.partials()[n:], Cmix.transpose(1, 0, 2), Cmix)


def fiber_metric(k2_ast, point):
    """g^ij at a point from second-order jets of K^2."""
    n = point.n
    k2 = expand(k2_ast, point, 2)
    return 0.5 * k2.partials()[n:].partials()[n:].value


def base_residuals(fields):
    """Residuals of the structural identities of a Cartan space at one point.

    Returns:
        dict: check name -> max |residual| at the point
    """
    ctx = fields.context()
    n = fields.n
    eye = np.eye(n)
    p, pU, gU, gL = ctx.p, ctx.pU, ctx.gU, ctx.gL
    C3, Cmix, H, P, R, N = ctx.C3, ctx.Cmix, ctx.H, ctx.P, ctx.R, ctx.N
    delta_gL = adapted(fields.gL, fields.N).value
    scaled = [fiber_metric(fields.k2_ast, fields.point.scaled(factor)) for factor in (0.5, 2.0)]

    return {
        'inverse_metric': max_abs(gU @ gL - eye),
        'euler_momentum': max_abs(pU - gU @ p),
        'squared_norm': abs(float(p @ pU) - ctx.K2),
        'metric_homogeneity': max(max_abs(g - gU) for g in scaled),
        'cartan_symmetry': max(max_abs(C3 - C3.transpose(axes)) for axes in ((1, 0, 2), (0, 2, 1), (2, 1, 0))),
        'cartan_contraction': max(max_abs(np.einsum(spec, C3, p)) for spec in ('ijk,k->ij', 'ikj,k->ij', 'kij,k->ij')),
        'mean_torsion_contraction': abs(float(ctx.I @ p)),
        'nonlinear_symmetry': max_abs(N - N.T),
        'squared_norm_v_derivative': max_abs(fields.k2.partials().value[n:] - 2.0 * pU),
        'momentum_v_derivative': max_abs(v_covariant(fields, 'p') - eye),
        'v_torsion': max_abs(Cmix - Cmix.transpose(0, 2, 1)),
        'deflection': max_abs(N - np.einsum('k,kij->ij', p, H)),
        'r_curvature_contraction': max_abs(np.einsum('kij,k->ij', R, pU)),
        'p_tensor_contraction': max_abs(np.einsum('ijk,j->ik', P, pU)),
        'p_tensor_trace': max_abs(np.einsum('i,ijk->jk', p, P)),
        'metric_h_derivative': max_abs(
            delta_gL - np.einsum('sji,sk->ijk', H, gL) - np.einsum('ski,js->ijk', H, gL)),
        'metricity': max_abs(h_covariant(fields, 'gU')),
        'momentum_h_derivative': max(max_abs(h_covariant(fields, 'p')), max_abs(h_covariant(fields, 'pU'))),
        'squared_norm_h_derivative': max_abs(h_covariant(fields, 'K2')),
        'adapted_momentum': max_abs(adapted(fields.p, fields.N).value - N),
        'h_torsion': max_abs(H - H.transpose(0, 2, 1)),
        'riemannian_nonlinear': max_abs(N - np.einsum('kij,k->ij', ctx.gamma, p)),
    }


def verify_base_identities(k_ast, samples, order=BASE_ORDER):
    """Largest residual of every base identity over the samples."""
    worst = {}
    for point in samples:
        for name, value in base_residuals(build_fields(k_ast, point, order)).items():
            worst[name] = max(worst.get(name, 0.0), value)
    return worst
