"""
Optimal classifiers and class-wise losses for symmetric alpha-stable mixtures.

Independent-components (IC) mixtures use Holder geometry on the alpha-sphere,
alpha=1 with l_inf attacks gets the full Cauchy imbalance analysis, and
elliptically-contoured (EC) mixtures reuse the Gaussian KKT solver.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from . import gaussian_theory
from .classifier import (
    AllNegative,
    LinearClassifier,
    LossReport,
    PerturbSpec,
    dual_index,
    dual_vector,
    lp_norm,
    overall_loss,
)
from .errors import DomainError, NonConvergenceError
from .stable_dist import (
    DEGENERATE_SCALE,
    MultivariateSas,
    QuadratureOptions,
    SasKind,
    pushforward_scale,
    standard_cdf,
)


@dataclass(frozen=True)
class SasMixture:
    mv_plus: MultivariateSas
    mv_minus: MultivariateSas
    imbalance: float = 1.0

    def __post_init__(self):
        plus, minus = self.mv_plus, self.mv_minus
        if plus.kind is not minus.kind or plus.alpha != minus.alpha:
            raise DomainError("both classes must share the distribution family and alpha")
        if plus.dim != minus.dim:
            raise DomainError("class dimensions differ")
        if plus.kind is SasKind.INDEPENDENT and not np.array_equal(plus.scales, minus.scales):
            raise DomainError("IC classes must share their scales")
        if plus.kind is SasKind.ELLIPTICAL and not np.array_equal(plus.shape, minus.shape):
            raise DomainError("EC classes must share their shape matrix")
        if np.array_equal(plus.location, minus.location):
            raise DomainError("class locations must differ")
        if not self.imbalance >= 1:
            raise DomainError(f"imbalance ratio must be >= 1, got {self.imbalance}")

    @classmethod
    def independent(cls, theta_plus, theta_minus, alpha: float, imbalance: float = 1.0, scales=None) -> "SasMixture":
        return cls(
            MultivariateSas.independent(theta_plus, alpha, scales),
            MultivariateSas.independent(theta_minus, alpha, scales),
            imbalance,
        )

    @classmethod
    def elliptical(cls, theta_plus, theta_minus, alpha: float, shape, imbalance: float = 1.0) -> "SasMixture":
        return cls(
            MultivariateSas.elliptical(theta_plus, alpha, shape),
            MultivariateSas.elliptical(theta_minus, alpha, shape),
            imbalance,
        )

    @property
    def kind(self) -> SasKind:
        return self.mv_plus.kind

    @property
    def alpha(self) -> float:
        return self.mv_plus.alpha

    @property
    def theta_plus(self) -> np.ndarray:
        return self.mv_plus.location

    @property
    def theta_minus(self) -> np.ndarray:
        return self.mv_minus.location

    @property
    def theta_bar(self) -> np.ndarray:
        return self.theta_plus - self.theta_minus

    @property
    def dim(self) -> int:
        return self.mv_plus.dim

    def has_unit_scales(self) -> bool:
        return self.kind is SasKind.INDEPENDENT and bool(np.all(self.mv_plus.scales == 1.0))


def rescale_ic(mix: SasMixture) -> Tuple[SasMixture, np.ndarray]:
    """
    Map SaS_IC(theta, diag c) to unit scales by dividing coordinate i by c_i.

    A classifier w' on the rescaled problem acts on the original one as
    w_i = w'_i / c_i with the same intercept.
    """
    if mix.kind is not SasKind.INDEPENDENT:
        raise DomainError("rescaling applies to IC mixtures only")
    scales = mix.mv_plus.scales
    rescaled = SasMixture.independent(
        mix.theta_plus / scales, mix.theta_minus / scales, mix.alpha, mix.imbalance
    )
    return rescaled, scales


def _midpoint_intercept(mix: SasMixture, w: np.ndarray) -> float:
    return -float(w @ (mix.theta_plus + mix.theta_minus)) / 2


def _require_ic(mix: SasMixture) -> None:
    if mix.kind is not SasKind.INDEPENDENT:
        raise DomainError("this operation needs an IC mixture")
    if mix.alpha <= 1:
        raise DomainError(
            f"alpha={mix.alpha}: the alpha-sphere optimization needs alpha > 1; use cauchy_analysis for alpha=1"
        )


def holder_direction(theta_bar: np.ndarray, alpha: float) -> np.ndarray:
    """Unit-alpha-norm maximizer of w^T theta_bar, achieving ||theta_bar||_{alpha'}."""
    return dual_vector(theta_bar, dual_index(alpha))


def solve_ic_standard(mix: SasMixture) -> LinearClassifier:
    """
    Optimal standard IC classifier with ||w||_alpha = 1 and midpoint intercept.

    General scales are handled by rescaling; the returned slope then has unit
    alpha-norm in the rescaled coordinates.
    """
    _require_ic(mix)
    if not mix.has_unit_scales():
        rescaled, scales = rescale_ic(mix)
        inner = solve_ic_standard(rescaled)
        return LinearClassifier(inner.w / scales, inner.b)
    w = holder_direction(mix.theta_bar, mix.alpha)
    return LinearClassifier(w, _midpoint_intercept(mix, w))


@dataclass(frozen=True)
class SphereOptions:
    starts: int = 20
    max_iter: int = 5000
    step_tol: float = 1e-13
    seed: int = 0


@dataclass(frozen=True)
class SphereOptimum:
    classifier: LinearClassifier
    value: float
    residual: float
    starts_tried: int
    outside_degrade_regime: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "classifier": self.classifier.to_dict(),
            "value": self.value,
            "residual": self.residual,
            "starts_tried": self.starts_tried,
            "outside_degrade_regime": self.outside_degrade_regime,
        }


def robust_sphere_objective(w: np.ndarray, theta_bar: np.ndarray, pert: PerturbSpec) -> float:
    """G(w) = w^T theta_bar - 2 eps ||w||_q."""
    return float(w @ theta_bar) - 2 * pert.epsilon * lp_norm(w, pert.q)


def _homogeneous_gradient(w: np.ndarray, theta_bar: np.ndarray, pert: PerturbSpec, alpha: float) -> np.ndarray:
    # grad of G(w)/||w||_alpha at a unit-alpha-norm point
    value = robust_sphere_objective(w, theta_bar, pert)
    grad_g = theta_bar - 2 * pert.epsilon * dual_vector(w, pert.q)
    return grad_g - value * dual_vector(w, alpha)


def _sphere_ascent(
    start: np.ndarray, theta_bar: np.ndarray, pert: PerturbSpec, alpha: float, opts: SphereOptions
) -> Tuple[np.ndarray, float]:
    w = start / lp_norm(start, alpha)
    value = robust_sphere_objective(w, theta_bar, pert)
    step = 1.0
    for _ in range(opts.max_iter):
        direction = _homogeneous_gradient(w, theta_bar, pert, alpha)
        improved = False
        while step > opts.step_tol:
            candidate = w + step * direction
            if not np.any(candidate):
                step /= 2
                continue
            candidate = candidate / lp_norm(candidate, alpha)
            candidate_value = robust_sphere_objective(candidate, theta_bar, pert)
            if candidate_value > value:
                moved = float(np.linalg.norm(candidate - w))
                w, value = candidate, candidate_value
                improved = True
                step *= 2
                break
            step /= 2
        if not improved or moved <= opts.step_tol:
            break
    return w, value


def solve_ic_robust(mix: SasMixture, pert: PerturbSpec, opts: SphereOptions = SphereOptions()) -> SphereOptimum:
    """
    Maximize w^T theta_bar - 2 eps ||w||_q over ||w||_alpha = 1.

    Multi-start projected ascent from the Holder direction, the coordinate
    peak, sgn(theta_bar) and opts.starts random directions. The intercept is
    the class midpoint.

    Raises:
        NonConvergenceError: when no start produces a finite objective
    """
    _require_ic(mix)
    if not mix.has_unit_scales():
        raise DomainError("robust IC classifiers need unit scales; perturbation balls do not survive rescaling")
    pert.check_radius(mix.theta_bar)
    theta_bar, alpha = mix.theta_bar, mix.alpha
    rng = np.random.default_rng(opts.seed)

    peak = np.zeros(mix.dim)
    top = int(np.argmax(np.abs(theta_bar)))
    peak[top] = np.sign(theta_bar[top])
    starts: List[np.ndarray] = [holder_direction(theta_bar, alpha), peak]
    if np.any(np.sign(theta_bar)):
        starts.append(np.sign(theta_bar))
    starts.extend(rng.standard_normal((opts.starts, mix.dim)))

    best_w, best_value = None, -math.inf
    for start in starts:
        if not np.any(start):
            continue
        w, value = _sphere_ascent(np.asarray(start, dtype=float), theta_bar, pert, alpha, opts)
        if value > best_value:
            best_w, best_value = w, value
    if best_w is None or not math.isfinite(best_value):
        raise NonConvergenceError("alpha-sphere ascent found no finite optimum", estimate=best_w, error_bound=None)

    residual = float(np.linalg.norm(_homogeneous_gradient(best_w, theta_bar, pert, alpha)))
    outside = pert.q in (1.0, math.inf)
    if outside:
        logging.debug(f"q={pert.q} lies outside the smooth degrade regime; residual uses a subgradient")
    logging.debug(f"alpha-sphere ascent: value {best_value:.12g}, residual {residual:.2e}, {len(starts)} starts")
    return SphereOptimum(
        classifier=LinearClassifier(best_w, _midpoint_intercept(mix, best_w)),
        value=best_value,
        residual=residual,
        starts_tried=len(starts),
        outside_degrade_regime=outside,
    )


# -- losses ------------------------------------------------------------------


def _class_loss(alpha: float, numerator: float, scale: float, quad: QuadratureOptions) -> float:
    if scale <= DEGENERATE_SCALE:
        return 1.0 if numerator >= 0 else 0.0
    return standard_cdf(alpha, numerator / scale, quad)


def stable_classwise_losses(
    mix: SasMixture,
    classifier: Union[LinearClassifier, AllNegative],
    pert: Optional[PerturbSpec] = None,
    quad: QuadratureOptions = QuadratureOptions(),
) -> LossReport:
    """
    Class-wise losses through the exact pushforward law of w^T X.

    l+ = Phi_alpha((-b - w^T theta+) / scale), l- = Phi_alpha((b + w^T theta-) / scale),
    where scale is ||C w||_alpha (IC) or sqrt(w^T Sigma w) (EC). The robust
    losses add eps ||w||_q to both numerators.
    """
    if isinstance(classifier, AllNegative):
        robust = (1.0, 0.0) if pert is not None else (None, None)
        return LossReport(1.0, 0.0, mix.imbalance, robust_plus=robust[0], robust_minus=robust[1])
    w, b = classifier.w, classifier.b
    scale = pushforward_scale(mix.mv_plus, w)
    plus_num = -b - float(w @ mix.theta_plus)
    minus_num = b + float(w @ mix.theta_minus)
    robust_plus = robust_minus = None
    if pert is not None:
        shift = pert.epsilon * lp_norm(w, pert.q)
        robust_plus = _class_loss(mix.alpha, plus_num + shift, scale, quad)
        robust_minus = _class_loss(mix.alpha, minus_num + shift, scale, quad)
    return LossReport(
        loss_plus=_class_loss(mix.alpha, plus_num, scale, quad),
        loss_minus=_class_loss(mix.alpha, minus_num, scale, quad),
        imbalance=mix.imbalance,
        robust_plus=robust_plus,
        robust_minus=robust_minus,
    )


def ic_classwise_losses(
    mix: SasMixture,
    classifier: Union[LinearClassifier, AllNegative],
    pert: Optional[PerturbSpec] = None,
    quad: QuadratureOptions = QuadratureOptions(),
) -> LossReport:
    if mix.kind is not SasKind.INDEPENDENT:
        raise DomainError("ic_classwise_losses needs an IC mixture")
    return stable_classwise_losses(mix, classifier, pert, quad)


def ec_classwise_losses(
    mix: SasMixture,
    classifier: Union[LinearClassifier, AllNegative],
    pert: Optional[PerturbSpec] = None,
    quad: QuadratureOptions = QuadratureOptions(),
) -> LossReport:
    if mix.kind is not SasKind.ELLIPTICAL:
        raise DomainError("ec_classwise_losses needs an EC mixture")
    return stable_classwise_losses(mix, classifier, pert, quad)


# -- IC comparison -----------------------------------------------------------


@dataclass(frozen=True)
class IcComparison:
    std: LinearClassifier
    rob: SphereOptimum
    std_value: float
    rob_margin: float
    std_losses: LossReport
    rob_losses: LossReport
    case: str

    @property
    def value_drop(self) -> float:
        """Drop in w^T theta_bar from the standard to the robust direction."""
        return self.std_value - self.rob_margin

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "std": self.std.to_dict(),
            "rob": self.rob.to_dict(),
            "std_value": self.std_value,
            "value_drop": self.value_drop,
            "std_losses": self.std_losses.to_dict(),
            "rob_losses": self.rob_losses.to_dict(),
        }


def classify_ic_case(mix: SasMixture, pert: PerturbSpec) -> str:
    """Which regime the pair (alpha, q, theta_bar) falls in."""
    magnitudes = np.abs(mix.theta_bar)
    if pert.epsilon == 0:
        return "no_attack"
    if math.isclose(pert.q, mix.alpha, rel_tol=1e-12):
        return "same_norm"
    if np.allclose(magnitudes, magnitudes[0], rtol=1e-12, atol=0.0):
        return "isotropic"
    if pert.q in (1.0, math.inf):
        return "outside"
    return "degrade"


def ic_comparison(
    mix: SasMixture,
    pert: PerturbSpec,
    opts: SphereOptions = SphereOptions(),
    quad: QuadratureOptions = QuadratureOptions(),
) -> IcComparison:
    """Standard vs robust IC classifiers, their losses and the regime they fall in."""
    std = solve_ic_standard(mix)
    rob = solve_ic_robust(mix, pert, opts)
    std_value = float(std.w @ mix.theta_bar)
    std_losses = ic_classwise_losses(mix, std, pert, quad)
    logging.debug(f"IC comparison case: {classify_ic_case(mix, pert)}")
    return IcComparison(
        std=std,
        rob=rob,
        std_value=std_value,
        rob_margin=float(rob.classifier.w @ mix.theta_bar),
        std_losses=std_losses,
        rob_losses=ic_classwise_losses(mix, rob.classifier, pert, quad),
        case=classify_ic_case(mix, pert),
    )


# -- Cauchy imbalance analysis -----------------------------------------------


def cauchy_d(t: float, imbalance: float, s: float) -> Optional[float]:
    """d(s) = (R+1) s + sqrt(R (T - 2s)^2 - (R-1)^2), or None when the root is imaginary."""
    discriminant = imbalance * (t - 2 * s) ** 2 - (imbalance - 1) ** 2
    if discriminant < 0:
        return None
    return (imbalance + 1) * s + math.sqrt(discriminant)


def cauchy_d_derivative(t: float, imbalance: float, s: float) -> float:
    """d'(s) = R+1 - 2R / sqrt(R - ((R-1)/(T-2s))^2)."""
    inner = imbalance - ((imbalance - 1) / (t - 2 * s)) ** 2
    if inner <= 0 or t - 2 * s <= 0:
        raise DomainError("d'(s) is undefined where the discriminant is non-positive")
    return imbalance + 1 - 2 * imbalance / math.sqrt(inner)


def _quadratic(coeffs: Tuple[float, float, float], b: float) -> float:
    return coeffs[0] * b * b + coeffs[1] * b + coeffs[2]


@dataclass(frozen=True)
class CauchyQuadratics:
    q1_coeffs: Tuple[float, float, float]
    q2_coeffs: Tuple[float, float, float]
    delta1: float
    delta2: float
    delta1_closed: float
    delta2_closed: float
    d_zero: Optional[float]
    d_eps: Optional[float]

    def q1(self, b: float) -> float:
        return _quadratic(self.q1_coeffs, b)

    def q2(self, b: float) -> float:
        return _quadratic(self.q2_coeffs, b)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q1": list(self.q1_coeffs),
            "q2": list(self.q2_coeffs),
            "delta1": self.delta1,
            "delta2": self.delta2,
            "delta1_closed": self.delta1_closed,
            "delta2_closed": self.delta2_closed,
            "d_zero": self.d_zero,
            "d_eps": self.d_eps,
        }


@dataclass(frozen=True)
class CauchyAnalysis:
    std_classifier: Union[LinearClassifier, AllNegative]
    rob_classifier: Union[LinearClassifier, AllNegative]
    std: LossReport
    rob: LossReport
    quadratics: Optional[CauchyQuadratics] = None
    theorem_condition: Optional[bool] = None
    finite_is_global: Dict[str, bool] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.rob.ad - self.std.ad

    @property
    def collapsed(self) -> bool:
        return isinstance(self.std_classifier, AllNegative) and isinstance(self.rob_classifier, AllNegative)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "std_classifier": self.std_classifier.to_dict(),
            "rob_classifier": self.rob_classifier.to_dict(),
            "std": self.std.to_dict(),
            "rob": self.rob.to_dict(),
            "gap": self.gap,
            "collapsed": self.collapsed,
            "quadratics": self.quadratics.to_dict() if self.quadratics else None,
            "theorem_condition": self.theorem_condition,
            "finite_is_global": self.finite_is_global,
        }


def cauchy_direction(theta_bar: np.ndarray) -> np.ndarray:
    """sgn(theta_bar_i*) e_i*, i* the first index of max |theta_bar_i|."""
    w = np.zeros_like(theta_bar, dtype=float)
    top = int(np.argmax(np.abs(theta_bar)))
    w[top] = np.sign(theta_bar[top])
    return w


def cauchy_overall_loss(mix: SasMixture, w: np.ndarray, b: float, shift: float = 0.0) -> float:
    """(R Phi_1((b + w^T theta- + shift)/||w||_1) + Phi_1((-b - w^T theta+ + shift)/||w||_1)) / (R+1)."""
    scale = lp_norm(w, 1)
    minus = 0.5 + math.atan((b + float(w @ mix.theta_minus) + shift) / scale) / math.pi
    plus = 0.5 + math.atan((-b - float(w @ mix.theta_plus) + shift) / scale) / math.pi
    return overall_loss(minus, plus, mix.imbalance)


def _cauchy_cdf(z: float) -> float:
    return 0.5 + math.atan(z) / math.pi


def cauchy_analysis(mix: SasMixture, pert: PerturbSpec) -> CauchyAnalysis:
    """
    Standard and robust l_inf classifiers for an imbalanced Cauchy IC mixture.

    The optimal intercept zeroes q1 (standard) or q2 (robust); the larger root
    is taken when the discriminant is non-negative, and b = -inf (AllNegative)
    otherwise.
    """
    if mix.kind is not SasKind.INDEPENDENT or mix.alpha != 1 or not mix.has_unit_scales():
        raise DomainError("cauchy_analysis needs an IC mixture with alpha=1 and unit scales")
    if not math.isinf(pert.p):
        raise DomainError("cauchy_analysis covers l_inf perturbations only")
    pert.check_radius(mix.theta_bar)

    w = cauchy_direction(mix.theta_bar)
    eps, imbalance = pert.epsilon, mix.imbalance
    if imbalance == 1:
        classifier = LinearClassifier(w, _midpoint_intercept(mix, w))
        return CauchyAnalysis(
            std_classifier=classifier,
            rob_classifier=classifier,
            std=ic_classwise_losses(mix, classifier, pert),
            rob=ic_classwise_losses(mix, classifier, pert),
            finite_is_global={"std": True, "rob": True},
        )

    a = float(w @ mix.theta_plus)
    b = float(w @ mix.theta_minus)
    t = a - b
    q1 = (imbalance - 1, 2 * (imbalance * a - b), imbalance * a * a - b * b + imbalance - 1)
    q2 = (
        imbalance - 1,
        2 * (imbalance * a - b) - 2 * (imbalance + 1) * eps,
        imbalance * a * a - b * b + imbalance - 1 + (imbalance - 1) * eps * eps - 2 * imbalance * a * eps - 2 * b * eps,
    )
    delta1 = (q1[1] / 2) ** 2 - q1[0] * q1[2]
    delta2 = (q2[1] / 2) ** 2 - q2[0] * q2[2]
    delta1_closed = imbalance * t * t - (imbalance - 1) ** 2
    delta2_closed = imbalance * (t - 2 * eps) ** 2 - (imbalance - 1) ** 2
    quadratics = CauchyQuadratics(
        q1_coeffs=q1,
        q2_coeffs=q2,
        delta1=delta1,
        delta2=delta2,
        delta1_closed=delta1_closed,
        delta2_closed=delta2_closed,
        d_zero=cauchy_d(t, imbalance, 0.0),
        d_eps=cauchy_d(t, imbalance, eps),
    )

    limit = 1.0 / (imbalance + 1)
    classifiers = {}
    reports = {}
    finite_is_global = {}
    for name, coeffs, delta, d, shift in (
        ("std", q1, delta1_closed, quadratics.d_zero, 0.0),
        ("rob", q2, delta2_closed, quadratics.d_eps, eps),
    ):
        if delta < 0 or d is None:
            logging.info(f"Cauchy {name} classifier collapses to all-negative (discriminant {delta:.6g})")
            classifiers[name] = AllNegative(w, reason=f"discriminant {delta:.6g} < 0")
            reports[name] = ic_classwise_losses(mix, classifiers[name], pert)
            finite_is_global[name] = False
            continue
        intercept = (-(coeffs[1] / 2) + math.sqrt(delta)) / coeffs[0]
        classifiers[name] = LinearClassifier(w, intercept)
        generic = ic_classwise_losses(mix, classifiers[name], pert)
        closed_plus = _cauchy_cdf((t - d) / (imbalance - 1))
        closed_minus = _cauchy_cdf((-imbalance * t + d) / (imbalance - 1))
        reports[name] = LossReport(
            loss_plus=closed_plus,
            loss_minus=closed_minus,
            imbalance=imbalance,
            robust_plus=generic.robust_plus,
            robust_minus=generic.robust_minus,
            extra={"generic_loss_plus": generic.loss_plus, "generic_loss_minus": generic.loss_minus},
        )
        local = cauchy_overall_loss(mix, w, intercept, shift)
        finite_is_global[name] = local <= limit
        if local > limit:
            logging.info(f"Cauchy {name}: finite root loss {local:.6g} exceeds the b -> -inf limit {limit:.6g}")

    condition = None
    if pert.kappa is not None:
        condition = t * t > (imbalance + 1) ** 2 / (imbalance * (1 - pert.kappa) ** 2)
    return CauchyAnalysis(
        std_classifier=classifiers["std"],
        rob_classifier=classifiers["rob"],
        std=reports["std"],
        rob=reports["rob"],
        quadratics=quadratics,
        theorem_condition=condition,
        finite_is_global=finite_is_global,
    )


def collapse_threshold(theta_bar: np.ndarray) -> float:
    """Imbalance from which both Cauchy classifiers assign every input to the majority."""
    return 2 + 4 * lp_norm(theta_bar, math.inf) ** 2


# -- elliptical mixtures -----------------------------------------------------


@dataclass(frozen=True)
class EcSolution:
    std: LinearClassifier
    rob: LinearClassifier
    std_losses: LossReport
    rob_losses: LossReport
    angle_degrees: float

    @property
    def both_classes_worse(self) -> bool:
        return self.rob_losses.loss_plus > self.std_losses.loss_plus and (
            self.rob_losses.loss_minus > self.std_losses.loss_minus
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "std": self.std.to_dict(),
            "rob": self.rob.to_dict(),
            "std_losses": self.std_losses.to_dict(),
            "rob_losses": self.rob_losses.to_dict(),
            "angle_degrees": self.angle_degrees,
            "both_classes_worse": self.both_classes_worse,
        }


def solve_ec(
    mix: SasMixture,
    pert: PerturbSpec,
    opts: gaussian_theory.SolverOptions = gaussian_theory.SolverOptions(),
    quad: QuadratureOptions = QuadratureOptions(),
) -> EcSolution:
    """
    Optimal standard and robust classifiers for a balanced EC mixture.

    Only the CDF differs from the Gaussian case, so the directions come from
    the Gaussian KKT system with Sigma the shape matrix; both intercepts sit
    at the class midpoint.
    """
    if mix.kind is not SasKind.ELLIPTICAL:
        raise DomainError("solve_ec needs an EC mixture")
    if mix.imbalance != 1:
        raise DomainError("EC optimal classifiers are derived for balanced mixtures")
    gaussian = gaussian_theory.GaussianMixture(mix.theta_plus, mix.theta_minus, mix.mv_plus.shape, 1.0)
    kkt = gaussian_theory.kkt_solution(gaussian, pert, opts)
    std_w = kkt.u / kkt.r
    rob_w = kkt.v / kkt.s
    std = LinearClassifier(std_w, _midpoint_intercept(mix, std_w))
    rob = LinearClassifier(rob_w, _midpoint_intercept(mix, rob_w))
    angle = gaussian_theory.direction_norm_certificates(kkt, gaussian, pert).angle_degrees
    return EcSolution(
        std=std,
        rob=rob,
        std_losses=ec_classwise_losses(mix, std, pert, quad),
        rob_losses=ec_classwise_losses(mix, rob, pert, quad),
        angle_degrees=angle,
    )
