"""Verification service module.

This module runs the selected suites over the sampled points and turns the
worst residual of every identity into a check record. Per-point work is
pure and fans out over a thread pool; the reduction is a max per check, so
the outcome does not depend on the thread count or on completion order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from flask import current_app

from cartan_lab.services.cartan_service import base_residuals, build_fields, max_abs
from cartan_lab.services.config_service import SUITES
from cartan_lab.services.curvature_service import (
    RIEMANNIAN_TOLERANCE,
    build_connection,
    connection_residuals,
    curvature_residuals,
    einstein_residuals,
    symmetry_residuals,
)
from cartan_lab.services.expression_service import check_homogeneity, parse
from cartan_lab.services.kahler_service import build_lift, constant_curvature_residual, kahler_residuals
from cartan_lab.services.sampling_service import sample_points
from cartan_lab.utils.errors import NotHomogeneous

HARD = 'hard'
VERDICT = 'verdict'
CONTRAST = 'contrast'
INFO = 'info'

CONTRAST_MARGIN = 1e-3

# Reference of every check in the report: the result of the lift theory it verifies
ANCHORS = {
    'preflight.homogeneity': 'fundamental function: 1-homogeneity of K in p',
    'preflight.cartan_tensor': 'Cartan tensor C^ijk',
    'preflight.constant_curvature': 'constant curvature: R_kij of a space form',
    'base.inverse_metric': 'fundamental tensor g^ij',
    'base.euler_momentum': 'fundamental tensor g^ij: Euler identities',
    'base.squared_norm': 'fundamental tensor g^ij: Euler identities',
    'base.metric_homogeneity': 'fundamental tensor g^ij: 0-homogeneity',
    'base.cartan_symmetry': 'Cartan tensor C^ijk',
    'base.cartan_contraction': 'Cartan tensor C^ijk',
    'base.mean_torsion_contraction': 'mean Cartan torsion I^j',
    'base.nonlinear_symmetry': 'canonical nonlinear connection N_ij',
    'base.squared_norm_v_derivative': 'v-covariant derivative',
    'base.momentum_v_derivative': 'v-covariant derivative',
    'base.v_torsion': 'v-covariant derivative: torsion C_i^jk',
    'base.deflection': 'canonical metrical connection: deflection',
    'base.r_curvature_contraction': 'curvature R_kij of the nonlinear connection',
    'base.p_tensor_contraction': 'hv-torsion P^i_jk',
    'base.p_tensor_trace': 'hv-torsion P^i_jk',
    'base.metric_h_derivative': 'canonical metrical connection H^i_jk',
    'base.metricity': 'h-covariant derivative: metricity',
    'base.momentum_h_derivative': 'h-covariant derivative',
    'base.squared_norm_h_derivative': 'h-covariant derivative',
    'base.adapted_momentum': 'adapted frame delta_i',
    'base.h_torsion': 'canonical metrical connection H^i_jk',
    'base.riemannian_nonlinear': 'Riemannian reduction of N_ij',
    'kahler.hermitian': 'lifted metric G: J-invariance',
    'kahler.complex_structure': 'almost complex structure J',
    'kahler.symplectic_form': 'fundamental form theta',
    'kahler.form_antisymmetry': 'fundamental form theta',
    'kahler.metric_inverse': 'lifted metric G',
    'kahler.inverse_closed_form': 'lifted metric G: inverse components',
    'kahler.obstruction_a': 'integrability of J: tensors A and B',
    'kahler.obstruction_b': 'integrability of J: tensors A and B',
    'kahler.linked_components': 'Kahler condition v = -c alpha beta^2',
    'kahler.nijenhuis': 'integrability of J: Nijenhuis tensor',
    'kahler.constant_curvature_contracted': 'constant curvature: contracted R_hjk',
    'kahler.tube': 'Kahler tube K^2 < 1/(c beta^2)',
    'connection.torsion': 'Levi-Civita connection of G',
    'connection.metricity': 'Levi-Civita connection of G',
    'connection.closed_form': 'Levi-Civita connection of G: frame blocks',
    'curvature.antisymmetry': 'curvature of G',
    'curvature.bianchi': 'curvature of G',
    'curvature.riemannian_closed_form': 'curvature of G: constant-curvature blocks',
    'einstein.ricci_symmetry': 'Ricci tensor of G',
    'einstein.einstein_residual': 'Einstein condition Ric = c n beta G',
    'einstein.mean_torsion': 'mean Cartan torsion I^j',
    'einstein.mixed_ricci': 'Ricci tensor of G: mixed blocks',
    'einstein.non_riemannian_contrast': 'Einstein condition Ric = c n beta G',
    'einstein.mean_torsion_contrast': 'mean Cartan torsion I^j',
    'symmetry.nabla_curvature': 'local symmetry nabla K = 0',
    'symmetry.contracted_identity': 'local symmetry: contracted identity',
    'symmetry.non_riemannian_contrast': 'local symmetry nabla K = 0',
}


@dataclass(frozen=True)
class CheckSpec:
    """A named identity with its tolerance and default role.

    Attributes:
        suite: Suite the check belongs to (or ``preflight``)
        key: Residual key produced by the suite's residual function
        identity: Formula that is checked
        tolerance: Bound before scaling by CARTAN_LAB_TOL_SCALE
        kind: hard, verdict, contrast or info
    """
    suite: str
    key: str
    identity: str
    tolerance: float
    kind: str = HARD

    @property
    def name(self):
        return f'{self.suite}.{self.key}'

    @property
    def anchor(self):
        return ANCHORS[self.name]


@dataclass(frozen=True)
class CheckResult:
    name: str
    identity: str
    kind: str
    expect: str
    max_abs_residual: float
    tolerance: float
    passed: bool
    n_points: int
    anchor: str = ''

    @property
    def gating(self):
        """Whether a failure of this check fails the run."""
        return self.kind in (HARD, CONTRAST)

    def as_dict(self):
        return {
            'name': self.name,
            'paper_anchor': self.anchor,
            'identity': self.identity,
            'kind': self.kind,
            'expect': self.expect,
            'max_abs_residual': self.max_abs_residual,
            'tolerance': self.tolerance,
            'pass': self.passed,
            'n_points': self.n_points,
        }


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of a run before it is written out."""
    checks: tuple
    verdicts: dict
    n_points: int

    @property
    def failed(self):
        return [check.name for check in self.checks if check.gating and not check.passed]

    @property
    def exit_code(self):
        return 1 if self.failed else 0


CHECKS = (
    CheckSpec('base', 'inverse_metric', 'g^ij g_jk = delta^i_k', 1e-12),
    CheckSpec('base', 'euler_momentum', 'p^i = g^ij p_j', 1e-10),
    CheckSpec('base', 'squared_norm', 'p_i p^i = K^2', 1e-10),
    CheckSpec('base', 'metric_homogeneity', 'g^ij(x, lambda p) = g^ij(x, p)', 1e-10),
    CheckSpec('base', 'cartan_symmetry', 'C^ijk totally symmetric', 1e-10),
    CheckSpec('base', 'cartan_contraction', 'C^ijk p_k = 0', 1e-10),
    CheckSpec('base', 'mean_torsion_contraction', 'I^j p_j = 0', 1e-10),
    CheckSpec('base', 'nonlinear_symmetry', 'N_ij = N_ji', 1e-10),
    CheckSpec('base', 'squared_norm_v_derivative', 'dv^i K^2 = 2 p^i', 1e-10),
    CheckSpec('base', 'momentum_v_derivative', 'p_i|^j = delta_i^j', 1e-10),
    CheckSpec('base', 'v_torsion', 'C_i^jk = C_i^kj', 1e-10),
    CheckSpec('base', 'deflection', 'N_ij = p_k H^k_ij', 1e-8),
    CheckSpec('base', 'r_curvature_contraction', 'R_kij p^k = 0', 1e-8),
    CheckSpec('base', 'p_tensor_contraction', 'P^i_jk p^j = 0', 1e-8),
    CheckSpec('base', 'p_tensor_trace', 'p_i P^i_jk = 0', 1e-8),
    CheckSpec('base', 'metric_h_derivative', 'delta_k g_ij = H^s_ik g_sj + H^s_jk g_is', 1e-8),
    CheckSpec('base', 'metricity', 'g^ij_|k = 0', 1e-8),
    CheckSpec('base', 'momentum_h_derivative', 'p_i|k = 0 and p^i|k = 0', 1e-8),
    CheckSpec('base', 'squared_norm_h_derivative', 'K^2_|k = 0', 1e-8),
    CheckSpec('base', 'adapted_momentum', 'delta_i p_k = N_ik', 1e-8),
    CheckSpec('base', 'h_torsion', 'H^i_jk = H^i_kj', 1e-8),
    CheckSpec('base', 'riemannian_nonlinear', 'N_ij = gamma^k_ij p_k (Riemannian input)', 1e-8, INFO),
    CheckSpec('kahler', 'hermitian', 'G(JX, JY) = G(X, Y)', 1e-12),
    CheckSpec('kahler', 'complex_structure', 'J^2 = -Id', 1e-12),
    CheckSpec('kahler', 'symplectic_form', 'theta(dv^i, delta_j) = delta^i_j, theta(delta, delta) = theta(dv, dv) = 0', 1e-12),
    CheckSpec('kahler', 'form_antisymmetry', 'theta(X, Y) = -theta(Y, X)', 1e-12),
    CheckSpec('kahler', 'metric_inverse', 'G_ij G^jk = delta_i^k', 1e-12),
    CheckSpec('kahler', 'inverse_closed_form', 'G^ij = beta g^ij - v beta/(alpha + 2 tau v) p^i p^j', 1e-10),
    CheckSpec('kahler', 'obstruction_a', 'A_kij = 0', 1e-8),
    CheckSpec('kahler', 'obstruction_b', 'B_kij = v/(alpha beta^2)(g_ik p_j - g_jk p_i)', 1e-8),
    CheckSpec('kahler', 'linked_components', 'G_ij = g_ij/beta - c beta p_i p_j under v = -c alpha beta^2', 1e-10),
    CheckSpec('kahler', 'nijenhuis', 'N_J = 0', 1e-7, VERDICT),
    CheckSpec('kahler', 'constant_curvature_contracted', 'R_hjk p^j = c(K^2 g_hk - p_h p_k)', 1e-8, INFO),
    CheckSpec('kahler', 'tube', 'K^2 < 1/(c beta^2) iff alpha + 2 tau v > 0', 0.0),
    CheckSpec('connection', 'torsion', 'nabla_X Y - nabla_Y X - [X, Y] = 0', 1e-9),
    CheckSpec('connection', 'metricity', 'nabla G = 0', 1e-9),
    CheckSpec('connection', 'closed_form', 'closed-form connection blocks = Koszul blocks', 1e-8),
    CheckSpec('curvature', 'antisymmetry', 'K(X, Y)Z = -K(Y, X)Z', 1e-9),
    CheckSpec('curvature', 'bianchi', 'K(X, Y)Z + K(Y, Z)X + K(Z, X)Y = 0', 1e-8),
    CheckSpec('curvature', 'riemannian_closed_form', 'frame curvature = constant-curvature closed forms', 1e-7),
    CheckSpec('einstein', 'ricci_symmetry', 'Ric(X, Y) = Ric(Y, X)', 1e-9),
    CheckSpec('einstein', 'einstein_residual', 'Ric = c n beta G', 1e-6, VERDICT),
    CheckSpec('einstein', 'mean_torsion', 'I^j = 0', 1e-9, INFO),
    CheckSpec('einstein', 'mixed_ricci', 'Ric(delta_i, dv^j) = 0', 1e-8),
    CheckSpec('symmetry', 'nabla_curvature', 'nabla K = 0', 1e-5, VERDICT),
    CheckSpec('symmetry', 'contracted_identity', 'p^j p_i M^uiks_j = 2(1 - c beta^2 tau) C^kus', 1e-5, INFO),
)

PREFLIGHT = (
    CheckSpec('preflight', 'homogeneity', 'K(x, lambda p) = lambda K(x, p)', 1e-9),
    CheckSpec('preflight', 'cartan_tensor', 'C^ijk = 0 (Riemannian input)', RIEMANNIAN_TOLERANCE, INFO),
    CheckSpec('preflight', 'constant_curvature', 'R_kij = c(g_jk p_i - g_ik p_j)', 1e-8, INFO),
)

CONTRASTS = {
    'einstein': (
        CheckSpec('einstein', 'non_riemannian_contrast', 'Ric != c n beta G for non-Riemannian input',
                  CONTRAST_MARGIN, CONTRAST),
        CheckSpec('einstein', 'mean_torsion_contrast', 'I^j != 0 for non-Riemannian input',
                  CONTRAST_MARGIN, CONTRAST),
    ),
    'symmetry': (
        CheckSpec('symmetry', 'non_riemannian_contrast', 'nabla K != 0 for non-Riemannian input',
                  CONTRAST_MARGIN, CONTRAST),
    ),
}

# Residual keys the contrast checks read
_CONTRAST_SOURCES = {
    'einstein.non_riemannian_contrast': 'einstein.einstein_residual',
    'einstein.mean_torsion_contrast': 'einstein.mean_torsion',
    'symmetry.non_riemannian_contrast': 'symmetry.nabla_curvature',
}


def _prefixed(suite, residuals):
    return {f'{suite}.{key}': value for key, value in residuals.items()}


def evaluate_point(k_ast, point, config):
    """Residuals of every selected identity at one point.

    Runs inside worker threads: no logging, no shared state.

    Returns:
        dict: check name -> |residual| at the point
    """
    params = config.lift_params()
    fields = build_fields(k_ast, point, config.required_order())
    ctx = fields.context()
    cc3, _ = constant_curvature_residual(ctx, params.c)
    cartan_norm = max_abs(ctx.C3)
    residuals = {
        'preflight.cartan_tensor': cartan_norm,
        'preflight.constant_curvature': max_abs(cc3),
    }
    suites = set(config.suites)
    if 'base' in suites:
        residuals.update(_prefixed('base', base_residuals(fields)))
    if suites == {'base'}:
        return residuals

    lift = build_lift(fields, params)
    if 'kahler' in suites:
        residuals.update(_prefixed('kahler', kahler_residuals(lift)))
    if not suites & {'connection', 'curvature', 'einstein', 'symmetry'}:
        return residuals

    connection = build_connection(lift)
    if 'connection' in suites:
        residuals.update(_prefixed('connection', connection_residuals(connection)))
    if 'curvature' in suites:
        riemannian = params.linked and cartan_norm <= RIEMANNIAN_TOLERANCE
        residuals.update(_prefixed('curvature', curvature_residuals(connection, riemannian)))
    if 'einstein' in suites:
        residuals.update(_prefixed('einstein', einstein_residuals(connection)))
    if 'symmetry' in suites:
        residuals.update(_prefixed('symmetry', symmetry_residuals(connection)))
    return residuals


def reduce_residuals(per_point):
    """Max of every residual over the points; a check missing at some point is dropped."""
    names = set(per_point[0])
    for residuals in per_point[1:]:
        names &= set(residuals)
    return {name: max(float(residuals[name]) for residuals in per_point) for name in sorted(names)}


def _result(spec, residual, scale, n_points, kind=None, expect='below'):
    tolerance = spec.tolerance * scale
    passed = residual > tolerance if expect == 'above' else residual <= tolerance
    return CheckResult(
        name=spec.name,
        identity=spec.identity,
        kind=kind or spec.kind,
        expect=expect,
        max_abs_residual=residual,
        tolerance=tolerance,
        passed=bool(passed),
        n_points=n_points,
        anchor=spec.anchor,
    )


def _kind(spec, riemannian, closed_forms_asserted):
    """Role of a check once the preflight facts of the run are known."""
    if spec.name == 'base.riemannian_nonlinear':
        return HARD if riemannian else INFO
    if spec.name == 'connection.closed_form':
        return HARD if closed_forms_asserted else INFO
    if spec.name in ('curvature.riemannian_closed_form', 'einstein.mixed_ricci'):
        return HARD if riemannian and closed_forms_asserted else INFO
    return spec.kind


def assemble_checks(worst, homogeneity, config, n_points):
    """Build check records from reduced residuals.

    Args:
        worst (dict): Reduced residuals keyed by check name
        homogeneity (HomogeneityReport): Preflight homogeneity outcome
        config (RunConfig): Run configuration
        n_points (int): Number of evaluated points

    Returns:
        tuple: CheckResult records in registry order
    """
    scale = config.tol_scale
    by_name = {spec.name: spec for spec in PREFLIGHT + CHECKS}
    homogeneity_spec, cartan_spec, curvature_spec = PREFLIGHT
    riemannian = worst['preflight.cartan_tensor'] <= cartan_spec.tolerance * scale
    constant_curvature = worst['preflight.constant_curvature'] <= curvature_spec.tolerance * scale
    closed_forms_asserted = config.linked and constant_curvature

    checks = [
        _result(homogeneity_spec, homogeneity.max_residual, scale, homogeneity.samples),
        _result(cartan_spec, worst['preflight.cartan_tensor'], scale, n_points),
        _result(curvature_spec, worst['preflight.constant_curvature'], scale, n_points),
    ]
    for spec in CHECKS:
        if spec.suite not in config.suites or spec.name not in worst:
            continue
        if spec.name == 'curvature.riemannian_closed_form' and not riemannian:
            continue
        kind = _kind(spec, riemannian, closed_forms_asserted)
        checks.append(_result(spec, worst[spec.name], scale, n_points, kind=kind))

    if not riemannian:
        for suite in config.suites:
            for spec in CONTRASTS.get(suite, ()):
                source = _CONTRAST_SOURCES[spec.name]
                checks.append(_result(spec, worst[source], scale, n_points, expect='above'))

    unknown = set(worst) - set(by_name)
    if unknown:
        raise KeyError(f"Residuals without a registered check: {', '.join(sorted(unknown))}")
    return tuple(checks)


def derive_verdicts(checks, suites):
    """Verdicts from the checks present in the run; None when the deciding suite was not run."""
    passed = {check.name: check.passed for check in checks}

    def all_of(*names):
        return all(passed[name] for name in names)

    return {
        'almost_kahler': all_of('kahler.hermitian', 'kahler.complex_structure', 'kahler.symplectic_form',
                                'kahler.form_antisymmetry') if 'kahler' in suites else None,
        'integrable': passed['kahler.nijenhuis'] if 'kahler' in suites else None,
        'einstein_consistent': passed['einstein.einstein_residual'] if 'einstein' in suites else None,
        'locally_symmetric_consistent': passed['symmetry.nabla_curvature'] if 'symmetry' in suites else None,
        'riemannian_detected': passed['preflight.cartan_tensor'],
    }


def run(config, points=None):
    """Run the configured suites.

    Args:
        config (RunConfig): Validated run configuration
        points (list): Points to evaluate; sampled from the config when omitted

    Returns:
        VerificationResult: Check records, verdicts and the point count

    Raises:
        ExpressionError: If K does not parse
        NotHomogeneous: If K is not 1-homogeneous in p
        SamplingExhausted: If no admissible points can be drawn
        GeometryError: If a tensor is undefined at a sampled point
    """
    k_ast = parse(config.k_expr, config.n)
    if points is None:
        points = sample_points(config, k_ast)

    homogeneity_spec = PREFLIGHT[0]
    tolerance = homogeneity_spec.tolerance * config.tol_scale
    homogeneity = check_homogeneity(k_ast, 1, points, tolerance, np.random.default_rng(config.seed + 1))
    if not homogeneity.passed:
        current_app.logger.error(f"Homogeneity check failed with residual {homogeneity.max_residual:.3e}")
        raise NotHomogeneous(homogeneity.max_residual, tolerance)

    suites = ', '.join(suite for suite in SUITES if suite in config.suites)
    current_app.logger.info(f"Running suites [{suites}] on {len(points)} points with {config.threads} thread(s)")
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        per_point = list(pool.map(lambda point: evaluate_point(k_ast, point, config), points))

    worst = reduce_residuals(per_point)
    checks = assemble_checks(worst, homogeneity, config, len(points))
    verdicts = derive_verdicts(checks, config.suites)
    result = VerificationResult(checks=checks, verdicts=verdicts, n_points=len(points))

    for name in result.failed:
        current_app.logger.warning(f"Check failed: {name}")
    current_app.logger.info(f"Verification finished: {len(checks)} checks, {len(result.failed)} failed")
    return result
