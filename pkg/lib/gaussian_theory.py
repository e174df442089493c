"""
Optimal standard and robust linear classifiers for a two-class Gaussian mixture.

P+ = N(theta+, Sigma), P- = N(theta-, Sigma), P(y=-1)/P(y=+1) = R. With
theta_bar = theta+ - theta-, the optimal directions solve

    Sigma u = theta_bar                          (standard)
    Sigma v = theta_bar - 2 eps d||v||_q         (robust against l_p perturbations)

and v is the minimizer of F(v) = v^T Sigma v / 2 - <theta_bar, v> + 2 eps ||v||_q.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .classifier import (
    AllNegative,
    LinearClassifier,
    LossReport,
    PerturbSpec,
    dual_index,
    dual_vector,
    lp_norm,
)
from .errors import DegenerateClassifierError, DomainError, NonConvergenceError, RobustGapError
from .linalg_core import check_psd, spd_solve, spd_sqrt


@dataclass(frozen=True)
class GaussianMixture:
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    sigma: np.ndarray
    imbalance: float = 1.0

    def __post_init__(self):
        theta_plus = np.array(self.theta_plus, dtype=float)
        theta_minus = np.array(self.theta_minus, dtype=float)
        if theta_plus.ndim != 1 or theta_plus.shape != theta_minus.shape:
            raise DomainError("class means must be vectors of equal length")
        if np.array_equal(theta_plus, theta_minus):
            raise DomainError("class means must differ")
        if not self.imbalance >= 1:
            raise DomainError(f"imbalance ratio must be >= 1, got {self.imbalance}")
        sigma = check_psd(np.array(self.sigma, dtype=float), "covariance")
        if sigma.shape != (theta_plus.size, theta_plus.size):
            raise DomainError("covariance must be d x d")
        object.__setattr__(self, "theta_plus", theta_plus)
        object.__setattr__(self, "theta_minus", theta_minus)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "imbalance", float(self.imbalance))

    @property
    def theta_bar(self) -> np.ndarray:
        return self.theta_plus - self.theta_minus

    @property
    def log_r(self) -> float:
        return math.log(self.imbalance)

    @property
    def dim(self) -> int:
        return int(self.theta_plus.size)

    def with_imbalance(self, imbalance: float) -> "GaussianMixture":
        return GaussianMixture(self.theta_plus, self.theta_minus, self.sigma, imbalance)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 20_000
    newton_iter: int = 50
    warm_tol: float = 1e-7


@dataclass(frozen=True)
class KktSolution:
    u: np.ndarray
    v: np.ndarray
    r: float
    s: float
    residual_u: float
    residual_v: float
    epsilon: float
    q: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "r": self.r,
            "s": self.s,
            "residual_u": self.residual_u,
            "residual_v": self.residual_v,
        }


# -- proximal operators -------------------------------------------------------


def _project_l1_ball(y: np.ndarray, radius: float = 1.0) -> np.ndarray:
    if np.sum(np.abs(y)) <= radius:
        return y.copy()
    mags = np.sort(np.abs(y))[::-1]
    cumulative = np.cumsum(mags)
    ranks = np.arange(1, y.size + 1)
    rho = np.nonzero(mags * ranks > cumulative - radius)[0][-1]
    threshold = (cumulative[rho] - radius) / (rho + 1)
    return np.sign(y) * np.maximum(np.abs(y) - threshold, 0.0)


def _project_lp_ball(y: np.ndarray, p: float) -> np.ndarray:
    """Euclidean projection onto {z : ||z||_p <= 1} for 1 < p < inf."""
    if lp_norm(y, p) <= 1.0:
        return y.copy()
    mags = np.abs(y)

    def shrink(mu: float) -> np.ndarray:
        # z + mu p z^{p-1} = |y_i|, solved coordinatewise on [0, |y_i|]
        lo = np.zeros_like(mags)
        hi = mags.copy()
        for _ in range(60):
            mid = (lo + hi) / 2
            too_big = mid + mu * p * mid ** (p - 1) > mags
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
        return (lo + hi) / 2

    def excess(mu: float) -> float:
        return float(np.sum(shrink(mu) ** p)) - 1.0

    upper = 1.0
    while excess(upper) > 0:
        upper *= 2.0
    mu = brentq(excess, 0.0, upper, xtol=1e-15, rtol=1e-14)
    return np.sign(y) * shrink(mu)


def prox_norm(x: np.ndarray, tau: float, q: float) -> np.ndarray:
    """argmin_z ||z - x||^2 / 2 + tau ||z||_q."""
    if tau == 0:
        return x.copy()
    if q == 1:
        return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    if q == 2:
        norm_x = float(np.linalg.norm(x))
        if norm_x <= tau:
            return np.zeros_like(x)
        return (1.0 - tau / norm_x) * x
    # Moreau decomposition: prox_{tau f}(x) = x - tau * proj_{dual ball}(x / tau)
    if math.isinf(q):
        return x - tau * _project_l1_ball(x / tau)
    return x - tau * _project_lp_ball(x / tau, dual_index(q))


# -- objective and certificates ----------------------------------------------


def robust_objective(mix: GaussianMixture, pert: PerturbSpec, v: np.ndarray) -> float:
    return float(0.5 * v @ mix.sigma @ v - mix.theta_bar @ v + 2 * pert.epsilon * lp_norm(v, pert.q))


def _norm_gradient(v: np.ndarray, q: float) -> np.ndarray:
    return dual_vector(v, q)


def kkt_residual(mix: GaussianMixture, pert: PerturbSpec, v: np.ndarray) -> float:
    """
    Distance of theta_bar - Sigma v from 2 eps d||v||_q.

    For q in {1, inf} and at v = 0 the subdifferential is a set; the residual
    is the coordinatewise violation of the inclusion.
    """
    eps, q = pert.epsilon, pert.q
    gap = mix.theta_bar - mix.sigma @ v
    if eps == 0:
        return float(np.linalg.norm(gap))
    if not np.any(v):
        return max(0.0, lp_norm(gap, pert.p) - 2 * eps)
    if q == 1:
        nonzero = v != 0
        on_support = np.abs(gap[nonzero] - 2 * eps * np.sign(v[nonzero]))
        off_support = np.maximum(np.abs(gap[~nonzero]) - 2 * eps, 0.0)
        return float(max(np.max(on_support, initial=0.0), np.max(off_support, initial=0.0)))
    if math.isinf(q):
        peak = float(np.max(np.abs(v)))
        active = np.abs(v) >= peak * (1 - 1e-9)
        signs = np.sign(v[active])
        off_active = float(np.max(np.abs(gap[~active]), initial=0.0))
        wrong_sign = float(np.max(np.maximum(-gap[active] * signs, 0.0), initial=0.0))
        mass = abs(float(np.sum(gap[active] * signs)) - 2 * eps)
        return max(off_active, wrong_sign, mass)
    return float(np.linalg.norm(-gap + 2 * eps * _norm_gradient(v, q)))


# -- polishing steps ---------------------------------------------------------


def _polish_l1(mix: GaussianMixture, eps: float, v: np.ndarray) -> Optional[np.ndarray]:
    support = np.nonzero(v)[0]
    if support.size == 0:
        return None
    signs = np.sign(v[support])
    sub = mix.sigma[np.ix_(support, support)]
    try:
        values = spd_solve(sub, mix.theta_bar[support] - 2 * eps * signs)
    except RobustGapError as exc:
        logging.debug(f"l1 active-set polish failed: {exc}")
        return None
    if np.any(np.sign(values) != signs):
        return None
    polished = np.zeros_like(v)
    polished[support] = values
    return polished


def _polish_linf(mix: GaussianMixture, eps: float, v: np.ndarray) -> Optional[np.ndarray]:
    peak = float(np.max(np.abs(v)))
    if peak == 0:
        return None
    active = np.nonzero(np.abs(v) >= peak * (1 - 1e-6))[0]
    free = np.setdiff1d(np.arange(v.size), active)
    signs = np.sign(v[active])
    d, k = v.size, active.size
    # unknowns: [t, v_free, lambda_active]
    system = np.zeros((d + 1, 1 + free.size + k))
    rhs = np.zeros(d + 1)
    system[:d, 0] = mix.sigma[:, active] @ signs
    system[:d, 1 : 1 + free.size] = mix.sigma[:, free]
    for j, (i, sign) in enumerate(zip(active, signs)):
        system[i, 1 + free.size + j] = 2 * eps * sign
    system[d, 1 + free.size :] = 1.0
    rhs[:d] = mix.theta_bar
    rhs[d] = 1.0
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        return None
    t, free_values, weights = solution[0], solution[1 : 1 + free.size], solution[1 + free.size :]
    if t <= 0 or np.any(weights < -1e-12) or np.any(np.abs(free_values) > t * (1 + 1e-12)):
        return None
    polished = np.empty_like(v)
    polished[active] = t * signs
    polished[free] = free_values
    return polished


def _polish_smooth(mix: GaussianMixture, eps: float, q: float, v: np.ndarray, iterations: int) -> Optional[np.ndarray]:
    if np.any(v == 0) and q < 2:
        return None

    def stationarity(x):
        return mix.sigma @ x + 2 * eps * _norm_gradient(x, q) - mix.theta_bar

    current = v.copy()
    residual = float(np.linalg.norm(stationarity(current)))
    for _ in range(iterations):
        f = lp_norm(current, q)
        g = _norm_gradient(current, q)
        with np.errstate(divide="ignore"):
            diag = np.abs(current) ** (q - 2)
        if not np.all(np.isfinite(diag)):
            return None
        hessian = (q - 1) * (f ** (1 - q) * np.diag(diag) - np.outer(g, g) / f)
        jacobian = mix.sigma + 2 * eps * hessian
        try:
            step = np.linalg.solve(jacobian, stationarity(current))
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jacobian, stationarity(current), rcond=None)[0]
        scale = 1.0
        for _ in range(30):
            candidate = current - scale * step
            if np.any(np.sign(candidate) != np.sign(current)) and q < 2:
                scale /= 2
                continue
            candidate_residual = float(np.linalg.norm(stationarity(candidate)))
            if candidate_residual < residual:
                break
            scale /= 2
        else:
            break
        current, residual = candidate, candidate_residual
        if residual <= 1e-15 * max(1.0, float(np.linalg.norm(mix.theta_bar))):
            break
    return current


def _polish(mix: GaussianMixture, pert: PerturbSpec, v: np.ndarray, opts: SolverOptions) -> Optional[np.ndarray]:
    q = pert.q
    if q == 1:
        return _polish_l1(mix, pert.epsilon, v)
    if math.isinf(q):
        return _polish_linf(mix, pert.epsilon, v)
    return _polish_smooth(mix, pert.epsilon, q, v, opts.newton_iter)


# -- solvers -----------------------------------------------------------------


def standard_direction(mix: GaussianMixture) -> np.ndarray:
    return spd_solve(mix.sigma, mix.theta_bar)


def degenerate_certificate(mix: GaussianMixture, pert: PerturbSpec) -> Optional[Dict[str, float]]:
    """v = 0 is optimal iff ||theta_bar||_p <= 2 eps (p is dual to q)."""
    dual_norm = lp_norm(mix.theta_bar, pert.p)
    if pert.epsilon > 0 and dual_norm <= 2 * pert.epsilon:
        return {"dual_norm_theta_bar": dual_norm, "two_epsilon": 2 * pert.epsilon}
    return None


SMOOTHING = 1e-12


def _smoothed_descent(
    mix: GaussianMixture, pert: PerturbSpec, start: np.ndarray, opts: SolverOptions, target: float
) -> Tuple[np.ndarray, float]:
    """Gradient descent on F with ||v||_q replaced by (sum (v_i^2 + delta^2)^(q/2))^(1/q)."""
    eps, q = pert.epsilon, pert.q

    def smoothed(x):
        padded = np.sqrt(x * x + SMOOTHING**2)
        total = float(np.sum(padded**q)) ** (1.0 / q)
        gradient = total ** (1 - q) * padded ** (q - 2) * x
        value = 0.5 * x @ mix.sigma @ x - mix.theta_bar @ x + 2 * eps * total
        return value, mix.sigma @ x - mix.theta_bar + 2 * eps * gradient

    x = start.copy()
    value, gradient = smoothed(x)
    step = 1.0 / float(np.linalg.eigvalsh(mix.sigma)[-1])
    for _ in range(opts.max_iter):
        candidate = x - step * gradient
        candidate_value, candidate_gradient = smoothed(candidate)
        if candidate_value > value:
            step /= 2
            if step < 1e-300:
                break
            continue
        moved = float(np.linalg.norm(candidate - x))
        x, value, gradient = candidate, candidate_value, candidate_gradient
        if moved <= opts.warm_tol * 1e-3 * (1 + float(np.linalg.norm(x))):
            break
    polished = _polish(mix, pert, x, opts)
    if polished is not None and kkt_residual(mix, pert, polished) < kkt_residual(mix, pert, x):
        x = polished
    residual = kkt_residual(mix, pert, x)
    if residual > target:
        raise NonConvergenceError("smoothed descent did not meet the KKT tolerance", estimate=x, error_bound=residual)
    return x, residual


def robust_direction(
    mix: GaussianMixture, pert: PerturbSpec, opts: SolverOptions = SolverOptions()
) -> Tuple[np.ndarray, float]:
    """
    Minimize F(v) by accelerated proximal gradient, then polish.

    Returns:
        (v, residual) where residual is the KKT inclusion violation

    Raises:
        DegenerateClassifierError: when v = 0 is the minimizer
        NonConvergenceError: when the residual stays above opts.tol * max(1, ||theta_bar||)
    """
    certificate = degenerate_certificate(mix, pert)
    if certificate is not None:
        raise DegenerateClassifierError("robust solution is v = 0:", certificate)
    u = standard_direction(mix)
    if pert.epsilon == 0:
        return u, kkt_residual(mix, pert, u)

    eps, q = pert.epsilon, pert.q
    target = opts.tol * max(1.0, float(np.linalg.norm(mix.theta_bar)))
    lipschitz = float(np.linalg.eigvalsh(mix.sigma)[-1])
    step = 1.0 / lipschitz

    try:
        x = prox_norm(u, 2 * eps * step, q)
    except (ValueError, RuntimeError) as exc:
        # only the bisection prox for general q can stall
        logging.warning(f"prox evaluation for q={q} stalled ({exc}); using smoothed descent")
        return _smoothed_descent(mix, pert, u, opts, target)
    y = x.copy()
    momentum = 1.0
    objective = robust_objective(mix, pert, x)
    warm_tol = opts.warm_tol
    best, best_residual = x, math.inf
    iterations = 0
    while iterations < opts.max_iter:
        iterations += 1
        try:
            x_next = prox_norm(y - step * (mix.sigma @ y - mix.theta_bar), 2 * eps * step, q)
        except (ValueError, RuntimeError) as exc:
            logging.warning(f"prox evaluation for q={q} stalled ({exc}); using smoothed descent")
            return _smoothed_descent(mix, pert, x, opts, target)
        next_objective = robust_objective(mix, pert, x_next)
        if next_objective > objective and momentum > 1.0:
            # adaptive restart
            momentum = 1.0
            y = x.copy()
            continue
        momentum_next = (1 + math.sqrt(1 + 4 * momentum * momentum)) / 2
        y = x_next + ((momentum - 1) / momentum_next) * (x_next - x)
        moved = float(np.linalg.norm(x_next - x))
        x, objective, momentum = x_next, next_objective, momentum_next
        if moved > warm_tol * (1 + float(np.linalg.norm(x))):
            continue

        polished = _polish(mix, pert, x, opts)
        for candidate in (polished, x):
            if candidate is None or not np.any(candidate):
                continue
            residual = kkt_residual(mix, pert, candidate)
            if residual < best_residual:
                best, best_residual = candidate, residual
        if best_residual <= target:
            logging.debug(
                f"robust solver converged after {iterations} iterations, residual {best_residual:.2e}"
            )
            return best, best_residual
        warm_tol = max(warm_tol * 1e-2, 1e-16)

    raise NonConvergenceError(
        f"robust KKT solver stopped after {iterations} iterations", estimate=best, error_bound=best_residual
    )


def optimal_intercept(mix: GaussianMixture, w: np.ndarray, shift: float = 0.0) -> float:
    """
    Loss-minimizing intercept for direction w normalized to w^T Sigma w = 1.

    shift is eps ||w||_q for the robust classifier and 0 otherwise.
    """
    a = float(w @ mix.theta_plus)
    b = float(w @ mix.theta_minus)
    margin = a - b - 2 * shift
    if margin <= 0:
        raise DegenerateClassifierError(
            "no finite optimal intercept:", {"w_theta_bar_minus_2shift": margin}
        )
    return -(2 * mix.log_r + a * a - b * b - 2 * shift * (a + b)) / (2 * margin)


def solve_standard(mix: GaussianMixture) -> Tuple[np.ndarray, LinearClassifier]:
    u = standard_direction(mix)
    r = math.sqrt(float(u @ mix.sigma @ u))
    w = u / r
    return u, LinearClassifier(w, optimal_intercept(mix, w))


def solve_robust(
    mix: GaussianMixture, pert: PerturbSpec, opts: SolverOptions = SolverOptions()
) -> Tuple[np.ndarray, LinearClassifier]:
    v, _ = robust_direction(mix, pert, opts)
    s = math.sqrt(float(v @ mix.sigma @ v))
    w = v / s
    return v, LinearClassifier(w, optimal_intercept(mix, w, pert.epsilon * lp_norm(w, pert.q)))


def kkt_solution(mix: GaussianMixture, pert: PerturbSpec, opts: SolverOptions = SolverOptions()) -> KktSolution:
    u = standard_direction(mix)
    v, residual_v = robust_direction(mix, pert, opts)
    return KktSolution(
        u=u,
        v=v,
        r=math.sqrt(float(u @ mix.sigma @ u)),
        s=math.sqrt(float(v @ mix.sigma @ v)),
        residual_u=float(np.linalg.norm(mix.sigma @ u - mix.theta_bar)),
        residual_v=residual_v,
        epsilon=pert.epsilon,
        q=pert.q,
    )


# -- losses ------------------------------------------------------------------


def _class_loss(numerator: float, scale: float) -> float:
    if scale <= 0:
        # point mass: misclassified iff the signed margin is non-positive
        return 1.0 if numerator >= 0 else 0.0
    return float(norm.cdf(numerator / scale))


def classwise_losses(
    mix: GaussianMixture,
    classifier: Union[LinearClassifier, AllNegative],
    pert: Optional[PerturbSpec] = None,
) -> LossReport:
    """
    Exact class-wise standard (and, with pert, robust) 0-1 losses of a classifier.

    l+ = Phi((-b - w^T theta+) / sqrt(w^T Sigma w)), l- = Phi((b + w^T theta-) / sqrt(w^T Sigma w));
    the robust losses add eps ||w||_q to both numerators.
    """
    if isinstance(classifier, AllNegative):
        robust = (1.0, 0.0) if pert is not None else (None, None)
        return LossReport(1.0, 0.0, mix.imbalance, robust_plus=robust[0], robust_minus=robust[1])
    w, b = classifier.w, classifier.b
    scale = math.sqrt(max(float(w @ mix.sigma @ w), 0.0))
    plus_num = -b - float(w @ mix.theta_plus)
    minus_num = b + float(w @ mix.theta_minus)
    robust_plus = robust_minus = None
    if pert is not None:
        shift = pert.epsilon * lp_norm(w, pert.q)
        robust_plus = _class_loss(plus_num + shift, scale)
        robust_minus = _class_loss(minus_num + shift, scale)
    return LossReport(
        loss_plus=_class_loss(plus_num, scale),
        loss_minus=_class_loss(minus_num, scale),
        imbalance=mix.imbalance,
        robust_plus=robust_plus,
        robust_minus=robust_minus,
    )


def theorem_losses(mix: GaussianMixture, kkt: KktSolution) -> Tuple[LossReport, LossReport]:
    """
    Class-wise standard losses of the optimal standard and robust classifiers
    written through (u, r) and (v, s) alone.
    """
    log_r = mix.log_r
    inner_u = float(kkt.u @ mix.theta_bar)
    inner_v = float(kkt.v @ mix.theta_bar)
    std = LossReport(
        loss_plus=float(norm.cdf((-inner_u + 2 * log_r) / (2 * kkt.r))),
        loss_minus=float(norm.cdf((-inner_u - 2 * log_r) / (2 * kkt.r))),
        imbalance=mix.imbalance,
    )
    rob = LossReport(
        loss_plus=float(norm.cdf((-inner_v + 2 * log_r) / (2 * kkt.s))),
        loss_minus=float(norm.cdf((-inner_v - 2 * log_r) / (2 * kkt.s))),
        imbalance=mix.imbalance,
    )
    return std, rob


@dataclass(frozen=True)
class GapRow:
    imbalance: float
    std: LossReport
    rob: LossReport
    in_monotone_region: bool

    @property
    def gap(self) -> float:
        return self.rob.ad - self.std.ad

    def to_dict(self) -> Dict[str, Any]:
        return {
            "R": self.imbalance,
            "ad_std": self.std.ad,
            "ad_rob": self.rob.ad,
            "gap": self.gap,
            "in_monotone_region": self.in_monotone_region,
            "std": self.std.to_dict(),
            "rob": self.rob.to_dict(),
        }


def disparity_gap(
    mix: GaussianMixture,
    pert: PerturbSpec,
    r_grid: List[float],
    opts: SolverOptions = SolverOptions(),
) -> List[GapRow]:
    """
    g(R) = AD(robust) - AD(standard) over an R grid.

    The optimal directions do not depend on R, so the KKT system is solved
    once. Rows are flagged when all four class-wise losses are at most 0.5.
    """
    if any(r < 1 for r in r_grid):
        raise DomainError("imbalance ratios must be >= 1")
    if not r_grid:
        return []
    kkt = kkt_solution(mix, pert, opts)
    rows = []
    for imbalance in r_grid:
        std, rob = theorem_losses(mix.with_imbalance(imbalance), kkt)
        losses = (std.loss_plus, std.loss_minus, rob.loss_plus, rob.loss_minus)
        rows.append(GapRow(imbalance, std, rob, all(loss <= 0.5 for loss in losses)))
    return rows


# -- toy example -------------------------------------------------------------


def toy_mixture(m: int, n: int, eta: float, gamma: float, imbalance: float) -> GaussianMixture:
    theta_plus = np.concatenate([np.full(m, eta), np.full(n, gamma)])
    return GaussianMixture(theta_plus, -theta_plus, np.eye(m + n), imbalance)


@dataclass(frozen=True)
class ToyResult:
    std: LossReport
    rob: LossReport
    std_classifier: LinearClassifier
    rob_classifier: LinearClassifier
    max_discrepancy: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "std": self.std.to_dict(),
            "rob": self.rob.to_dict(),
            "std_classifier": self.std_classifier.to_dict(),
            "rob_classifier": self.rob_classifier.to_dict(),
            "max_discrepancy": self.max_discrepancy,
        }


def toy_example(m: int, n: int, eta: float, gamma: float, epsilon: float, imbalance: float) -> ToyResult:
    """
    Identity covariance, theta+ = (eta x m, gamma x n) = -theta-, l_inf attacks.

    Closed forms, cross-checked against the general solver on the same mixture.
    """
    if m < 1 or n < 1:
        raise DomainError("m and n must be at least 1")
    if not gamma < epsilon < eta:
        raise DomainError(f"toy example needs gamma < epsilon < eta, got {gamma}, {epsilon}, {eta}")
    log_r = math.log(imbalance)
    full = math.sqrt(m * eta**2 + n * gamma**2)
    robust = math.sqrt(m) * (eta - epsilon)

    std = LossReport(
        loss_plus=float(norm.cdf(log_r / (2 * full) - full)),
        loss_minus=float(norm.cdf(-log_r / (2 * full) - full)),
        imbalance=imbalance,
    )
    rob = LossReport(
        loss_plus=float(norm.cdf(log_r / (2 * robust) - math.sqrt(m) * eta)),
        loss_minus=float(norm.cdf(-log_r / (2 * robust) - math.sqrt(m) * eta)),
        imbalance=imbalance,
    )
    std_w = np.concatenate([np.full(m, eta), np.full(n, gamma)]) / full
    rob_w = np.concatenate([np.full(m, 1 / math.sqrt(m)), np.zeros(n)])
    std_classifier = LinearClassifier(std_w, -log_r / (2 * full))
    rob_classifier = LinearClassifier(rob_w, -log_r / (2 * robust))

    mix = toy_mixture(m, n, eta, gamma, imbalance)
    pert = PerturbSpec(p=math.inf, epsilon=epsilon)
    _, solved_std = solve_standard(mix)
    _, solved_rob = solve_robust(mix, pert)
    discrepancies = []
    for closed, solved in ((std, classwise_losses(mix, solved_std)), (rob, classwise_losses(mix, solved_rob))):
        discrepancies.append(abs(closed.loss_plus - solved.loss_plus))
        discrepancies.append(abs(closed.loss_minus - solved.loss_minus))
    return ToyResult(std, rob, std_classifier, rob_classifier, max(discrepancies))


# -- propositions ------------------------------------------------------------


@dataclass(frozen=True)
class DirectionNormCertificate:
    direction_lhs: float
    direction_rhs: float
    r: float
    s: float
    norm_gap: float
    norm_bound: float
    angle_degrees: float
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def direction_holds(self) -> bool:
        return self.direction_lhs >= self.direction_rhs - 1e-10 * max(1.0, abs(self.direction_lhs))

    @property
    def identity_holds(self) -> bool:
        return self.norm_gap >= self.norm_bound - 1e-8

    @property
    def parallel(self) -> bool:
        return self.angle_degrees < 1e-6

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction_lhs": self.direction_lhs,
            "direction_rhs": self.direction_rhs,
            "r": self.r,
            "s": self.s,
            "norm_gap": self.norm_gap,
            "norm_bound": self.norm_bound,
            "angle_degrees": self.angle_degrees,
            "direction_holds": self.direction_holds,
            "identity_holds": self.identity_holds,
            "parallel": self.parallel,
        }


def direction_norm_certificates(kkt: KktSolution, mix: GaussianMixture, pert: PerturbSpec) -> DirectionNormCertificate:
    """
    <u,theta_bar>/(2r) >= <v,theta_bar>/(2s), and u^T Sigma u - v^T Sigma v >= 4 eps ||v||_q.
    """
    root = spd_sqrt(mix.sigma)
    a = root @ kkt.u
    b = root @ kkt.v
    cosine = float(a @ b) / (float(np.linalg.norm(a)) * float(np.linalg.norm(b)))
    angle = math.degrees(math.acos(min(1.0, max(-1.0, cosine))))
    return DirectionNormCertificate(
        direction_lhs=float(kkt.u @ mix.theta_bar) / (2 * kkt.r),
        direction_rhs=float(kkt.v @ mix.theta_bar) / (2 * kkt.s),
        r=kkt.r,
        s=kkt.s,
        norm_gap=kkt.r**2 - kkt.s**2,
        norm_bound=4 * pert.epsilon * lp_norm(kkt.v, pert.q),
        angle_degrees=angle,
    )


# -- regression view ---------------------------------------------------------


def regularized_regression(
    features: np.ndarray,
    targets: np.ndarray,
    lam: float,
    q: float,
    max_iter: int = 200_000,
    tol: float = 1e-13,
) -> np.ndarray:
    """
    argmin_beta ||Y - X beta||^2 / (2N) + lam ||beta||_q by plain ISTA.

    With X^T X = Sigma, X^T Y = theta_bar and N lam = 2 eps this is the robust
    direction v.
    """
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    count = features.shape[0]
    step = count / float(np.linalg.norm(features, 2) ** 2)
    beta = np.zeros(features.shape[1])
    for _ in range(max_iter):
        gradient = features.T @ (features @ beta - targets) / count
        updated = prox_norm(beta - step * gradient, step * lam, q)
        if np.linalg.norm(updated - beta) <= tol * (1 + np.linalg.norm(beta)):
            return updated
        beta = updated
    logging.warning(f"ISTA reached {max_iter} iterations without meeting tol={tol}")
    return beta
