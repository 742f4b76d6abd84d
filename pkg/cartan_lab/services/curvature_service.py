"""Curvature service module.

This module computes the Levi-Civita connection of the lifted metric G on
the adapted frame, its curvature, Ricci tensor and the covariant derivative
of the curvature, together with the closed forms those objects take for the
Kähler lift.

Array layout (frame indices A, B, ... run over delta_0..delta_{n-1},
dv^0..dv^{n-1}):
    Gamma[A, B, D]: nabla_{E_A} E_B = Gamma[A, B, D] E_D
    K[A, B, C, F]: K(E_A, E_B) E_C = K[A, B, C, F] E_F
    DK[E, A, B, C, F]: (nabla_{E_E} K)(E_A, E_B) E_C
"""

from dataclasses import dataclass

import numpy as np

from cartan_lab.services.cartan_service import frame_derivative, max_abs
from cartan_lab.utils.errors import NotRiemannian
from cartan_lab.utils.jets import Jet, jet_einsum

CONNECTION_ORDER = 4
CURVATURE_ORDER = 5
SYMMETRY_ORDER = 6
RIEMANNIAN_TOLERANCE = 1e-8

_FAMILY = {'h': 0, 'v': 1}


@dataclass(frozen=True)
class ConnectionBlocks:
    """Connection coefficients on the adapted frame.

    ``block('v', 'h')`` returns the delta- and dv-parts (each [i, j, h]) of
    nabla_{dv^i} delta_j.
    """
    frame: np.ndarray

    @property
    def n(self):
        return self.frame.shape[0] // 2

    def block(self, first, second):
        n = self.n
        a = slice(_FAMILY[first] * n, (_FAMILY[first] + 1) * n)
        b = slice(_FAMILY[second] * n, (_FAMILY[second] + 1) * n)
        part = self.frame[a, b]
        return part[..., :n], part[..., n:]

    @classmethod
    def from_blocks(cls, blocks):
        """Assemble from {(first, second): (delta_part, dv_part)}."""
        n = next(iter(blocks.values()))[0].shape[0]
        frame = np.zeros((2 * n, 2 * n, 2 * n))
        for (first, second), (horizontal, vertical) in blocks.items():
            a, b = _FAMILY[first] * n, _FAMILY[second] * n
            frame[a:a + n, b:b + n, :n] = horizontal
            frame[a:a + n, b:b + n, n:] = vertical
        return cls(frame)


@dataclass(frozen=True)
class CurvatureBlocks:
    """Curvature values K(E_A, E_B) E_C on the adapted frame."""
    tensor: np.ndarray

    @property
    def n(self):
        return self.tensor.shape[0] // 2

    def family(self, first, second, third):
        """K(X, Y) Z for X, Y, Z ranging over one frame family each, output on the full frame."""
        n = self.n
        a, b, c = (slice(_FAMILY[f] * n, (_FAMILY[f] + 1) * n) for f in (first, second, third))
        return self.tensor[a, b, c]

    def apply(self, X, Y, Z):
        components = np.einsum('a,b,c,abcf->f', X.as_array(), Y.as_array(), Z.as_array(), self.tensor)
        return components[:self.n], components[self.n:]


@dataclass(frozen=True)
class RicciMatrix:
    """Ricci tensor as a 2n by 2n matrix in the adapted frame."""
    matrix: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0] // 2

    def mixed(self):
        n = self.n
        return self.matrix[:n, n:], self.matrix[n:, :n]


@dataclass(frozen=True)
class ConnectionFields:
    """Jets of the Levi-Civita connection built on a LiftFields."""
    lift: object
    Gamma: Jet
    Ginv: Jet
    dG: Jet


def build_connection(lift):
    """Solve the Koszul formula on the adapted frame.

    2 G(nabla_a E_b, E_c) = E_a G_bc + E_b G_ca - E_c G_ab
                            + G([E_a, E_b], E_c) - G([E_b, E_c], E_a) + G([E_c, E_a], E_b)

    Raises:
        SingularMetric: If the frame metric cannot be inverted
    """
    Gf, cst = lift.Gf, lift.cst
    dG = frame_derivative(Gf, lift.base.N)
    cG = jet_einsum('dab,dc->abc', cst, Gf)
    lowered = 0.5 * (dG + dG.transpose(1, 0, 2) - dG.transpose(1, 2, 0)
                     + cG - cG.transpose(2, 0, 1) + cG.transpose(1, 2, 0))
    Ginv = Gf.inv()
    Gamma = jet_einsum('abc,cd->abd', lowered, Ginv)
    return ConnectionFields(lift=lift, Gamma=Gamma, Ginv=Ginv, dG=dG)


def connection_koszul(connection):
    """Christoffel symbols of the Levi-Civita connection of the lift, in frame blocks."""
    return ConnectionBlocks(connection.Gamma.value)


def connection_closed_form(lift):
    """The four connection blocks written with H, P, C and the blocks of G.

    The expressions hold for the Kähler case, i.e. linked parameters on a
    base of constant curvature c.
    """
    ctx = lift.base.context()
    params = lift.params
    beta, u = params.beta, params.c * params.beta
    metric = lift.metric()
    GL, GU = metric.GL, metric.GU
    p, gU, gL = ctx.p, ctx.gU, ctx.gL
    H, P, Cmix = ctx.H, ctx.P, ctx.Cmix
    lowered_C = np.einsum('ia,jb,kc,abc->ijk', gL, gL, gL, ctx.C3)

    Q = np.einsum('ikr,rj->ijk', P, gU)
    vv = (
        0.5 * beta ** 2 * np.einsum('ijk,hk->ijh', Q + Q.transpose(1, 0, 2), gU),
        -Cmix.transpose(1, 2, 0) + u * np.einsum('ij,h->ijh', GU, p),
    )
    hv = (
        Cmix - u * np.einsum('jh,i->ijh', GU, p),
        0.5 * P.transpose(1, 0, 2) - 0.5 * np.einsum('kir,rj,kh->ijh', P, GU, GL) - H.transpose(1, 0, 2),
    )
    vh = (
        Cmix.transpose(1, 0, 2) - u * np.einsum('ih,j->ijh', GU, p),
        -0.5 * (P + np.einsum('kjr,ri,kh->ijh', P, GU, GL)),
    )
    hh = (
        H.transpose(1, 2, 0),
        -lowered_C / beta ** 2 + u * np.einsum('hj,i->ijh', GL, p),
    )
    return ConnectionBlocks.from_blocks({('v', 'v'): vv, ('h', 'v'): hv, ('v', 'h'): vh, ('h', 'h'): hh})


def connection_residuals(connection):
    """Torsion and metricity of the Koszul connection, plus the closed-form gap."""
    lift = connection.lift
    Gamma = connection.Gamma.value
    Gf = lift.Gf.value
    cst = lift.cst.value
    dG = connection.dG.value
    torsion = Gamma - Gamma.transpose(1, 0, 2) - cst.transpose(1, 2, 0)
    metricity = dG - np.einsum('abd,dc->abc', Gamma, Gf) - np.einsum('acd,bd->abc', Gamma, Gf)
    closed = connection_closed_form(lift).frame
    return {
        'torsion': max_abs(torsion),
        'metricity': max_abs(metricity),
        'closed_form': max_abs(closed - Gamma),
    }


def curvature_jet(connection):
    """K(E_a, E_b) E_c = nabla_a nabla_b E_c - nabla_b nabla_a E_c - nabla_[E_a, E_b] E_c as a jet."""
    Gamma = connection.Gamma
    cst = connection.lift.cst
    dGamma = frame_derivative(Gamma, connection.lift.base.N)
    quadratic = jet_einsum('bcd,adf->abcf', Gamma, Gamma)
    return (dGamma - dGamma.transpose(1, 0, 2, 3) + quadratic - quadratic.transpose(1, 0, 2, 3)
            - jet_einsum('dab,dcf->abcf', cst, Gamma))


def curvature(connection):
    """Riemann tensor of the connection at the base point, in frame blocks."""
    return CurvatureBlocks(curvature_jet(connection).value)


def _require_riemannian(ctx):
    norm = max_abs(ctx.C3)
    if norm > RIEMANNIAN_TOLERANCE:
        raise NotRiemannian(norm)


def riemannian_closed_forms(ctx, metric, params):
    """Curvature of the Kähler lift of a Riemannian base of constant curvature c.

    Raises:
        NotRiemannian: If the Cartan tensor does not vanish at the point
    """
    _require_riemannian(ctx)
    n = ctx.n
    c, u = params.c, params.c * params.beta
    GL, GU, gL, p = metric.GL, metric.GU, ctx.gL, ctx.p
    eye = np.eye(n)
    K = np.zeros((2 * n,) * 4)
    h, v = slice(0, n), slice(n, 2 * n)

    K[h, h, h, h] = u * (np.einsum('kj,si->ijks', GL, eye) - np.einsum('ki,sj->ijks', GL, eye))
    K[v, h, h, v] = u * np.einsum('sk,ij->ijks', GL, eye)
    K[h, v, h, v] = -u * np.einsum('sk,ij->jiks', GL, eye)
    K[v, v, v, v] = u * (np.einsum('jk,is->ijks', GU, eye) - np.einsum('ik,js->ijks', GU, eye))
    K[h, v, v, h] = u * np.einsum('ks,ji->ijks', GU, eye)
    K[v, h, v, h] = -u * np.einsum('ks,ij->ijks', GU, eye)
    K[h, h, v, v] = (c * (np.einsum('si,kj->ijks', gL, eye) - np.einsum('sj,ki->ijks', gL, eye))
                     - u * np.einsum('hij,hk,s->ijks', ctx.R, GU, p))
    K[v, v, h, h] = u * (np.einsum('is,jk->ijks', GU, eye) - np.einsum('js,ik->ijks', GU, eye))
    return CurvatureBlocks(K)


def ricci(curvature_blocks, Gf):
    """Ric(E_b, E_c) = G^{ha} G(K(E_a, E_b) E_c, E_h)."""
    K = curvature_blocks.tensor
    return RicciMatrix(np.einsum('abcf,fh,ha->bc', K, Gf, np.linalg.inv(Gf)))


def curvature_residuals(connection, riemannian):
    """Antisymmetry, first Bianchi identity and (for Riemannian bases) the closed-form gap."""
    blocks = curvature(connection)
    K = blocks.tensor
    residuals = {
        'antisymmetry': max_abs(K + K.transpose(1, 0, 2, 3)),
        'bianchi': max_abs(K + K.transpose(2, 0, 1, 3) + K.transpose(1, 2, 0, 3)),
    }
    if riemannian:
        lift = connection.lift
        closed = riemannian_closed_forms(lift.base.context(), lift.metric(), lift.params)
        residuals['riemannian_closed_form'] = max_abs(closed.tensor - K)
    return residuals


def einstein_residuals(connection):
    """Ricci symmetry, Ric - c n beta G, mean Cartan torsion and the mixed Ricci blocks."""
    lift = connection.lift
    params = lift.params
    n = lift.base.n
    Gf = lift.Gf.value
    ric = ricci(curvature(connection), Gf)
    upper, lower = ric.mixed()
    return {
        'ricci_symmetry': max_abs(ric.matrix - ric.matrix.T),
        'einstein_residual': max_abs(ric.matrix - params.c * n * params.beta * Gf),
        'mean_torsion': max_abs(lift.base.context().I),
        'mixed_ricci': max(max_abs(upper), max_abs(lower)),
    }


def nabla_curvature(connection):
    """Covariant derivative of the curvature on the frame, DK[e, a, b, c, f]."""
    Gamma = connection.Gamma
    K = curvature_jet(connection)
    dK = frame_derivative(K, connection.lift.base.N).value
    G, Kv = Gamma.value, K.value
    return (dK
            + np.einsum('abcd,edf->eabcf', Kv, G)
            - np.einsum('ead,dbcf->eabcf', G, Kv)
            - np.einsum('ebd,adcf->eabcf', G, Kv)
            - np.einsum('ecd,abdf->eabcf', G, Kv))


def contracted_symmetry_identity(nabla, ctx, params):
    """p^j p_i M^{uiks}_j - 2(1 - c beta^2 tau) C^kus, with M the delta-part of (nabla_{dv^u} K)(dv^i, delta_j) dv^k."""
    n = ctx.n
    block = nabla[n:, n:, :n, n:, :n]
    contracted = np.einsum('uijks,i,j->uks', block, ctx.p, ctx.pU)
    return contracted - 2.0 * (1.0 - params.c * params.beta ** 2 * ctx.tau) * ctx.C3


def symmetry_residuals(connection):
    lift = connection.lift
    nabla = nabla_curvature(connection)
    identity = contracted_symmetry_identity(nabla, lift.base.context(), lift.params)
    return {
        'nabla_curvature': max_abs(nabla),
        'contracted_identity': max_abs(identity),
    }
