"""Kähler lift service module.

This module lifts a Cartan space to the punctured cotangent bundle: the
metric G = G_ij dx^i dx^j + G^ij dp_i dp_j (dp_i taken along the adapted
coframe), the almost complex structure J, the fundamental form theta, the
obstruction tensors A and B and the Nijenhuis tensor of J.

Frame conventions:
    E_A for A < n is delta_A, E_{n+i} is dv^i.
    Frame vectors are component arrays [h; v] with X = h^i delta_i + v_i dv^i.
    Jm[A, C] is component C of J(E_A); as a matrix on components J is Jm.T.
    cst[C, A, B] is the structure function in [E_A, E_B] = cst[C, A, B] E_C.
"""

import math
from dataclasses import dataclass

import numpy as np

from cartan_lab.services.cartan_service import frame_derivative, max_abs
from cartan_lab.utils.errors import ConfigError, NotApplicable, NotPositiveDefinite
from cartan_lab.utils.jets import Jet, jet_block_diag, jet_concatenate, jet_einsum


@dataclass(frozen=True)
class LiftParams:
    """Constants of the lift.

    Attributes:
        alpha, beta: positive scale constants
        v: constant weight of the p_i p_j term
        c: target scalar curvature of the base
        linked: True when v = -c alpha beta^2 was derived from c
    """
    alpha: float = 1.0
    beta: float = 1.0
    v: float = 0.0
    c: float = 0.0
    linked: bool = False

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ConfigError(f"alpha and beta must be positive, got alpha={self.alpha}, beta={self.beta}")
        if self.linked and self.v != -self.c * self.alpha * self.beta ** 2:
            raise ConfigError("Linked parameters need v = -c alpha beta^2")

    @classmethod
    def linked_to(cls, c, alpha=1.0, beta=1.0):
        # adding 0.0 turns -0.0 (c = 0) into 0.0
        return cls(alpha=alpha, beta=beta, v=-c * alpha * beta ** 2 + 0.0, c=c, linked=True)

    def tau_bound(self):
        """Largest tau with alpha + 2 tau v > 0 (inf when every tau qualifies)."""
        return -self.alpha / (2.0 * self.v) if self.v < 0.0 else math.inf

    def admissible(self, tau):
        return self.alpha + 2.0 * tau * self.v > 0.0

    def as_dict(self):
        return {'alpha': self.alpha, 'beta': self.beta, 'v': self.v, 'c': self.c, 'linked': self.linked}


@dataclass(frozen=True)
class LiftedFrameMetric:
    """Blocks of G on the adapted frame: GL on delta, GU on dv."""
    GL: np.ndarray
    GU: np.ndarray

    @property
    def n(self):
        return self.GL.shape[0]

    def frame_matrix(self):
        n = self.n
        return np.block([[self.GL, np.zeros((n, n))], [np.zeros((n, n)), self.GU]])

    def j_matrix(self):
        """J acting on component vectors [h; v]."""
        n = self.n
        return np.block([[np.zeros((n, n)), -self.GU], [self.GL, np.zeros((n, n))]])


@dataclass(frozen=True)
class FrameVector:
    """Tangent vector of T*M by its horizontal and vertical frame components."""
    h: np.ndarray
    v: np.ndarray

    @classmethod
    def from_array(cls, components):
        components = np.asarray(components, dtype=float)
        n = len(components) // 2
        return cls(components[:n], components[n:])

    def as_array(self):
        return np.concatenate([np.asarray(self.h, dtype=float), np.asarray(self.v, dtype=float)])


@dataclass(frozen=True)
class LiftFields:
    """Jets of the lifted structure around one point (built on CartanFields)."""
    base: object
    params: LiftParams
    GL: Jet
    GU: Jet
    Gf: Jet
    Jm: Jet
    cst: Jet

    def metric(self):
        return LiftedFrameMetric(self.GL.value, self.GU.value)


def _check_positive(tau, params):
    if not params.admissible(tau):
        raise NotPositiveDefinite(tau, params.tau_bound())


def lifted_metric(ctx, params):
    """Frame blocks of the lifted metric at a point.

    Args:
        ctx (CartanContext): Base tensors at the point
        params (LiftParams): Lift constants

    Returns:
        LiftedFrameMetric: G_ij = g_ij/beta + v/(alpha beta) p_i p_j and its
        closed-form inverse G^ij = beta g^ij - v beta/(alpha + 2 tau v) p^i p^j

    Raises:
        NotPositiveDefinite: If alpha + 2 tau v <= 0
    """
    _check_positive(ctx.tau, params)
    alpha, beta, v = params.alpha, params.beta, params.v
    GL = ctx.gL / beta + (v / (alpha * beta)) * np.outer(ctx.p, ctx.p)
    GU = beta * ctx.gU - (v * beta / (alpha + 2.0 * ctx.tau * v)) * np.outer(ctx.pU, ctx.pU)
    return LiftedFrameMetric(GL, GU)


def linked_components(ctx, params):
    """G_ij and G^ij written with c for linked parameters (v = -c alpha beta^2)."""
    beta, c = params.beta, params.c
    GL = ctx.gL / beta - c * beta * np.outer(ctx.p, ctx.p)
    GU = beta * ctx.gU + (c * beta ** 3 / (1.0 - 2.0 * c * beta ** 2 * ctx.tau)) * np.outer(ctx.pU, ctx.pU)
    return LiftedFrameMetric(GL, GU)


def coordinate_metric(ctx, metric):
    """G in the natural coframe (dx^i, dp_i), using delta p_i = dp_i - N_ji dx^j."""
    n = ctx.n
    lift = np.hstack([-ctx.N.T, np.eye(n)])
    horizontal = np.block([[metric.GL, np.zeros((n, n))], [np.zeros((n, n)), np.zeros((n, n))]])
    return horizontal + lift.T @ metric.GU @ lift


def apply_J(metric, X):
    """J(delta_i) = G_ik dv^k, J(dv^i) = -G^ik delta_k, extended linearly."""
    return FrameVector(-metric.GU @ np.asarray(X.v, dtype=float), metric.GL @ np.asarray(X.h, dtype=float))


def inner(metric, X, Y):
    """G(X, Y) of two frame vectors."""
    return float(X.as_array() @ metric.frame_matrix() @ Y.as_array())


def fundamental_form(metric, X, Y):
    """theta(X, Y) = G(X, JY)."""
    return inner(metric, X, apply_J(metric, Y))


def canonical_pairing(n):
    """Frame matrix of the canonical symplectic form: theta(dv^i, delta_j) = delta^i_j."""
    return np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])


def tube_predicate(ctx, params):
    """Whether K^2 < 1/(c beta^2) at the point.

    Raises:
        NotApplicable: If c <= 0 (no tube restriction)
    """
    if params.c <= 0.0:
        raise NotApplicable(f"The tube condition needs c > 0, got c={params.c}")
    return ctx.K2 < 1.0 / (params.c * params.beta ** 2)


def constant_curvature_residual(ctx, c):
    """Residuals of R_kij = c(g_jk p_i - g_ik p_j) and of its contraction.

    Returns:
        tuple: (residual[k, i, j], contracted[h, k]) where the contracted form
        is R_hjk p^j - c(K^2 g_hk - p_h p_k)
    """
    gL, p = ctx.gL, ctx.p
    model = np.einsum('jk,i->kij', gL, p) - np.einsum('ik,j->kij', gL, p)
    contracted = np.einsum('hjk,j->hk', ctx.R, ctx.pU) - c * (ctx.K2 * gL - np.outer(p, p))
    return ctx.R - c * model, contracted


def build_lift(fields, params):
    """Jets of G, J and the frame brackets around the point of ``fields``.

    Raises:
        NotPositiveDefinite: If alpha + 2 tau v <= 0 at the point
    """
    n = fields.n
    alpha, beta, v = params.alpha, params.beta, params.v
    tau = 0.5 * fields.k2
    _check_positive(float(tau.value), params)

    GL = fields.gL * (1.0 / beta) + jet_einsum('i,j->ij', fields.p, fields.p) * (v / (alpha * beta))
    GU = fields.gU * beta - jet_einsum('i,j->ij', fields.pU, fields.pU) * (v * beta) / (tau * (2.0 * v) + alpha)
    Gf = jet_block_diag(GL, GU)

    zero = Jet.zeros((n, n), GL.order, GL.dim)
    Jm = jet_concatenate([jet_concatenate([zero, GL], axis=1), jet_concatenate([-GU, zero], axis=1)], axis=0)

    blocks = Jet.zeros((n, n, n), fields.R.order, fields.R.dim)
    dN = fields.dN
    vertical = jet_concatenate([
        jet_concatenate([fields.R, -dN.transpose(2, 1, 0)], axis=2),
        jet_concatenate([dN.transpose(2, 0, 1), blocks], axis=2),
    ], axis=1)
    cst = jet_concatenate([Jet.zeros((n, 2 * n, 2 * n), vertical.order, vertical.dim), vertical], axis=0)
    return LiftFields(base=fields, params=params, GL=GL, GU=GU, Gf=Gf, Jm=Jm, cst=cst)


def obstruction_tensors(lift):
    """Obstructions to integrability of J in the horizontal-horizontal block.

    Returns:
        tuple: (A, B_direct, B_closed), each indexed [k, i, j], with
            A_kij = delta_i G_jk - delta_j G_ik + G_ir dv^r N_jk - G_jr dv^r N_ik
            B_kij = G_ir dv^r G_jk - G_jr dv^r G_ik
            B_kij = v/(alpha beta^2) (g_ik p_j - g_jk p_i)
    """
    fields, params = lift.base, lift.params
    n = fields.n
    dGL = frame_derivative(lift.GL, fields.N).value
    GL = lift.GL.value

    first = dGL[:n] + np.einsum('ir,rjk->ijk', GL, fields.dN.value)
    A = (first - first.transpose(1, 0, 2)).transpose(2, 0, 1)

    second = np.einsum('ir,rjk->ijk', GL, dGL[n:])
    B_direct = (second - second.transpose(1, 0, 2)).transpose(2, 0, 1)

    gL, p = fields.gL.value, fields.p.value
    coef = params.v / (params.alpha * params.beta ** 2)
    B_closed = coef * (np.einsum('ik,j->kij', gL, p) - np.einsum('jk,i->kij', gL, p))
    return A, B_direct, B_closed


def nijenhuis(lift, X=None, Y=None):
    """Nijenhuis tensor N_J(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y] on the frame.

    Returns:
        numpy.ndarray or FrameVector: the array NJ[A, B, C] (component C of
        N_J(E_A, E_B)) when X and Y are omitted, otherwise N_J(X, Y) for
        frame vectors with constant components
    """
    Jm = lift.Jm.value
    EJ = frame_derivative(lift.Jm, lift.base.N).value
    cst = lift.cst.value

    t1 = np.einsum('ad,dbc->abc', Jm, EJ)
    both = t1 - t1.transpose(1, 0, 2) + np.einsum('bf,acf->abc', Jm, np.einsum('ad,cdf->acf', Jm, cst))
    left = -EJ.transpose(1, 0, 2) + np.einsum('ad,cdb->abc', Jm, cst)
    right = EJ + np.einsum('bf,caf->abc', Jm, cst)
    plain = cst.transpose(1, 2, 0)
    tensor = both - np.einsum('abd,dc->abc', left + right, Jm) - plain
    if X is None and Y is None:
        return tensor
    return FrameVector.from_array(np.einsum('a,b,abc->c', X.as_array(), Y.as_array(), tensor))


def kahler_residuals(lift):
    """Residuals of the lift identities at one point.

    Returns:
        dict: check name -> max |residual| at the point
    """
    fields, params = lift.base, lift.params
    ctx = fields.context()
    n = fields.n
    metric = lift.metric()
    Gf = metric.frame_matrix()
    Jmat = metric.j_matrix()
    theta = Gf @ Jmat
    A, B_direct, B_closed = obstruction_tensors(lift)
    closed = lifted_metric(ctx, params)
    _, contracted = constant_curvature_residual(ctx, params.c)

    residuals = {
        'hermitian': max_abs(Jmat.T @ Gf @ Jmat - Gf),
        'complex_structure': max_abs(Jmat @ Jmat + np.eye(2 * n)),
        'symplectic_form': max_abs(theta - canonical_pairing(n)),
        'form_antisymmetry': max_abs(theta + theta.T),
        'metric_inverse': max_abs(metric.GL @ metric.GU - np.eye(n)),
        'inverse_closed_form': max_abs(closed.GU - np.linalg.solve(closed.GL, np.eye(n))),
        'obstruction_a': max_abs(A),
        'obstruction_b': max_abs(B_direct - B_closed),
        'nijenhuis': max_abs(nijenhuis(lift)),
        'constant_curvature_contracted': max_abs(contracted),
    }
    if params.linked:
        linked = linked_components(ctx, params)
        residuals['linked_components'] = max(max_abs(linked.GL - metric.GL), max_abs(linked.GU - metric.GU))
    if params.c > 0.0 and params.linked:
        agrees = tube_predicate(ctx, params) == params.admissible(ctx.tau)
        residuals['tube'] = 0.0 if agrees else 1.0
    return residuals
