"""
Regression suite: closed-form losses against Monte-Carlo indicators, plus
the deterministic certificate checks.

Twelve sampling scenarios (four Gaussian, four IC-stable, two Cauchy, two
EC). A scenario passes when every class-wise loss of every classifier lies
within the family-wise 3-sigma band of its closed form.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import humanize
import numpy as np
from scipy.stats import norm

from . import gaussian_theory, monte_carlo, ridge_disparity, stable_theory
from .classifier import AllNegative, LinearClassifier, LossReport, PerturbSpec, lp_norm
from .errors import RobustGapError
from .gaussian_theory import GaussianMixture
from .linalg_core import Rank2Gram, rank2_eigen
from .stable_theory import SasMixture

Classifier = Union[LinearClassifier, AllNegative]


@dataclass(frozen=True)
class Candidate:
    """A closed-form classifier with its closed-form losses."""

    label: str
    classifier: Classifier
    theory: LossReport
    pert: Optional[PerturbSpec] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    family: str
    build: Callable[[], Tuple[Union[GaussianMixture, SasMixture], List[Candidate]]]


@dataclass
class CheckResult:
    name: str
    family: str
    passed: bool = False
    distances: Dict[str, float] = field(default_factory=dict)
    detail: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0
    error: Optional[str] = None

    @property
    def max_distance(self) -> float:
        return max(self.distances.values(), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "family": self.family,
            "passed": self.passed,
            "max_sigma": self.max_distance,
            "distances": self.distances,
            "detail": self.detail,
            "elapsed": self.elapsed,
            "error": self.error,
        }


@dataclass
class SuiteResult:
    results: List[CheckResult]
    threshold: float
    seed: int
    n_major: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "threshold_sigma": self.threshold,
            "seed": self.seed,
            "n_major": self.n_major,
            "results": [r.to_dict() for r in self.results],
        }


def family_threshold(comparisons: int, sigmas: float = 3.0) -> float:
    """Per-comparison z giving the two-sided `sigmas` false-alarm rate across the family."""
    if comparisons < 1:
        return sigmas
    family_rate = 2 * float(norm.sf(sigmas))
    each = 1 - (1 - family_rate) ** (1.0 / comparisons)
    return float(norm.isf(each / 2))


def random_gaussian_mixture(
    rng: np.random.Generator, dim: int, imbalance: float, mahalanobis: float = 2.5
) -> GaussianMixture:
    """Random SPD covariance and means at a fixed Mahalanobis separation."""
    factor = rng.standard_normal((dim, dim))
    sigma = factor @ factor.T / dim + 0.5 * np.eye(dim)
    direction = rng.standard_normal(dim)
    length = math.sqrt(float(direction @ np.linalg.solve(sigma, direction)))
    theta_bar = direction * (mahalanobis / length)
    centre = 0.3 * rng.standard_normal(dim)
    return GaussianMixture(centre + theta_bar / 2, centre - theta_bar / 2, sigma, imbalance)


# -- scenario builders -------------------------------------------------------


def _gaussian(seed: int, dim: int, imbalance: float, p: float, fraction: float):
    def build():
        mix = random_gaussian_mixture(np.random.default_rng(seed), dim, imbalance)
        pert = PerturbSpec(p=p, epsilon=fraction * lp_norm(mix.theta_bar, p) / 2)
        _, std = gaussian_theory.solve_standard(mix)
        _, rob = gaussian_theory.solve_robust(mix, pert)
        return mix, [
            Candidate("std", std, gaussian_theory.classwise_losses(mix, std, pert), pert),
            Candidate("rob", rob, gaussian_theory.classwise_losses(mix, rob, pert), pert),
        ]

    return build


def _ic(alpha: float, theta_plus: List[float], p: float, epsilon: float):
    def build():
        mix = SasMixture.independent(theta_plus, [-t for t in theta_plus], alpha)
        pert = PerturbSpec(p=p, epsilon=epsilon)
        std = stable_theory.solve_ic_standard(mix)
        rob = stable_theory.solve_ic_robust(mix, pert).classifier
        return mix, [
            Candidate("std", std, stable_theory.ic_classwise_losses(mix, std, pert), pert),
            Candidate("rob", rob, stable_theory.ic_classwise_losses(mix, rob, pert), pert),
        ]

    return build


def _cauchy(theta_plus: List[float], imbalance: float, epsilon: float):
    def build():
        mix = SasMixture.independent(theta_plus, [-t for t in theta_plus], 1.0, imbalance)
        pert = PerturbSpec(p=math.inf, epsilon=epsilon)
        analysis = stable_theory.cauchy_analysis(mix, pert)
        return mix, [
            Candidate("std", analysis.std_classifier, analysis.std),
            Candidate("rob", analysis.rob_classifier, analysis.rob),
        ]

    return build


def _ec(alpha: float, theta_plus: List[float], shape: List[List[float]], p: float, epsilon: float):
    def build():
        mix = SasMixture.elliptical(theta_plus, [-t for t in theta_plus], alpha, shape)
        pert = PerturbSpec(p=p, epsilon=epsilon)
        solution = stable_theory.solve_ec(mix, pert)
        return mix, [
            Candidate("std", solution.std, solution.std_losses, pert),
            Candidate("rob", solution.rob, solution.rob_losses, pert),
        ]

    return build


EC_SHAPE = [[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.8]]


def default_scenarios() -> List[Scenario]:
    return [
        Scenario("gaussian_d3_balanced_l2", "gaussian", _gaussian(11, 3, 1.0, 2.0, 0.2)),
        Scenario("gaussian_d5_r5_linf", "gaussian", _gaussian(12, 5, 5.0, math.inf, 0.2)),
        Scenario("gaussian_d10_r5_l2", "gaussian", _gaussian(13, 10, 5.0, 2.0, 0.2)),
        Scenario("gaussian_d4_balanced_linf", "gaussian", _gaussian(14, 4, 1.0, math.inf, 0.2)),
        Scenario("ic_alpha1.5_l2", "stable_ic", _ic(1.5, [1.0, 0.5, 0.2], 2.0, 0.2)),
        Scenario("ic_alpha1.8_q3", "stable_ic", _ic(1.8, [0.8, 0.3, 0.1], 1.5, 0.1)),
        Scenario("ic_alpha1.2_q1.5", "stable_ic", _ic(1.2, [0.7, 0.6, 0.5], 3.0, 0.15)),
        Scenario("ic_alpha1.5_same_norm", "stable_ic", _ic(1.5, [1.2, 0.4, 0.1], 3.0, 0.2)),
        Scenario("cauchy_r2_finite", "cauchy", _cauchy([2.5, 0.5], 2.0, 0.5)),
        Scenario("cauchy_r4_collapse", "cauchy", _cauchy([0.25, 0.1], 4.0, 0.05)),
        Scenario("ec_alpha1.5", "stable_ec", _ec(1.5, [0.8, 0.4, 0.2], EC_SHAPE, 2.0, 0.1)),
        Scenario("ec_alpha2", "stable_ec", _ec(2.0, [0.8, 0.4, 0.2], EC_SHAPE, math.inf, 0.05)),
    ]


def _run_scenario(
    scenario: Scenario, seed: int, n_major: int, inject_bias: float
) -> Tuple[CheckResult, List[Tuple[str, float]]]:
    result = CheckResult(scenario.name, scenario.family)
    started = time.monotonic()
    distances: List[Tuple[str, float]] = []
    try:
        mix, candidates = scenario.build()
        rng = monte_carlo.make_rng(monte_carlo.derive_seed(seed, scenario.name))
        sample = monte_carlo.sample_mixture(mix, n_major, rng)
        for candidate in candidates:
            classifier = candidate.classifier.shifted(inject_bias) if inject_bias else candidate.classifier
            report = monte_carlo.empirical_losses(sample, classifier, candidate.pert)
            for key, value in report.sigma_distance(candidate.theory).items():
                distances.append((f"{candidate.label}.{key}", value))
            result.detail[candidate.label] = {
                "theory": candidate.theory.to_dict(),
                "monte_carlo": report.to_dict(),
            }
    except RobustGapError as exc:
        result.error = str(exc)
        logging.error(f"scenario {scenario.name} failed: {exc}")
    result.distances = dict(distances)
    result.elapsed = time.monotonic() - started
    return result, distances


# -- deterministic certificate checks ----------------------------------------


def _certificate(name: str, check: Callable[[], Dict[str, Any]]) -> CheckResult:
    started = time.monotonic()
    result = CheckResult(name, "certificate")
    try:
        detail = check()
        result.passed = bool(detail.pop("passed"))
        result.detail = detail
    except RobustGapError as exc:
        result.error = str(exc)
    result.elapsed = time.monotonic() - started
    return result


KKT_DIMS = (2, 3, 4, 6, 8)


def _kkt_certificates() -> Dict[str, Any]:
    """Residuals and the norm identity on 50 random mixtures under four attack norms."""
    worst = {"u": 0.0, "v": 0.0, "identity": math.inf, "instances": 0}
    for index in range(50):
        rng = np.random.default_rng(100 + index)
        mix = random_gaussian_mixture(rng, KKT_DIMS[index % len(KKT_DIMS)], 2.0)
        for p in (2.0, math.inf, 1.0, 3.0):
            pert = PerturbSpec(p=p, epsilon=0.1 * lp_norm(mix.theta_bar, p) / 2)
            kkt = gaussian_theory.kkt_solution(mix, pert)
            scale = float(np.linalg.norm(mix.theta_bar))
            cert = gaussian_theory.direction_norm_certificates(kkt, mix, pert)
            worst["u"] = max(worst["u"], kkt.residual_u / scale)
            worst["v"] = max(worst["v"], kkt.residual_v / scale)
            worst["identity"] = min(worst["identity"], cert.norm_gap - cert.norm_bound)
            worst["instances"] += 1
    worst["passed"] = worst["u"] <= 1e-10 and worst["v"] <= 1e-8 and worst["identity"] >= -1e-8
    return worst


def _toy_certificate() -> Dict[str, Any]:
    toy = gaussian_theory.toy_example(4, 48, 1.0, 0.5, 0.75, math.exp(2))
    passed = (
        abs(toy.rob.loss_plus - 0.5) <= 1e-9
        and max(toy.std.loss_plus, toy.std.loss_minus, toy.rob.loss_minus) < 1e-3
        and toy.max_discrepancy <= 1e-9
    )
    return {"passed": passed, **toy.to_dict()}


def _cauchy_certificate() -> Dict[str, Any]:
    # ||theta_bar||_inf^2 = 25 exceeds (R + 1)^2 / (R (1 - kappa)^2) = 18
    mix = SasMixture.independent([2.5, 0.5], [-2.5, -0.5], 1.0, 2.0)
    analysis = stable_theory.cauchy_analysis(mix, PerturbSpec(p=math.inf, epsilon=0.5, kappa=0.5))
    quads = analysis.quadratics
    agreement = max(abs(quads.delta1 - quads.delta1_closed), abs(quads.delta2 - quads.delta2_closed))
    passed = (
        bool(analysis.theorem_condition)
        and agreement <= 1e-10
        and quads.d_eps > quads.d_zero
        and analysis.rob.ad < analysis.std.ad
    )
    return {"passed": passed, "delta_agreement": agreement, **analysis.to_dict()}


def _rank2_certificate() -> Dict[str, Any]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for index in range(1000):
        dim = 2 + index % 19
        gram = Rank2Gram.from_vectors(rng.standard_normal(dim), rng.standard_normal(dim))
        eig = rank2_eigen(gram)
        reference = np.linalg.eigvalsh(gram.matrix())[-2:]
        scale = max(1.0, float(reference[1]))
        worst = max(worst, abs(eig.lambda1 - reference[1]) / scale, abs(eig.lambda2 - reference[0]) / scale)
    return {"passed": worst <= 1e-10, "max_relative_error": worst, "instances": 1000}


def _ridge_certificate() -> Dict[str, Any]:
    scenario = ridge_disparity.RidgeScenario(
        mu1=[1.0, 0.0], mu2=[0.0, 1.0], k1=100, k2=10, lambda_prime=1.0, beta_star=[1.0, 1.0]
    )
    toy = ridge_disparity.toy_orthogonal_disparity(scenario)
    passed = abs(toy.closed1 - 1 / 101) <= 1e-12 and abs(toy.closed2 - 1 / 11) <= 1e-12 and toy.max_discrepancy <= 1e-10
    return {"passed": passed, **toy.to_dict()}


CERTIFICATES = {
    "kkt_certificates": _kkt_certificates,
    "toy_example": _toy_certificate,
    "cauchy_quadratics": _cauchy_certificate,
    "rank2_eigen": _rank2_certificate,
    "ridge_toy": _ridge_certificate,
}


def run_suite(
    seed: int,
    n_major: int = 1_000_000,
    inject_bias: float = 0.0,
    sigmas: float = 3.0,
    scenarios: Optional[List[Scenario]] = None,
    certificates: bool = True,
) -> SuiteResult:
    """
    Run every sampling scenario and certificate check.

    Args:
        seed: Root seed; each scenario derives its own generator from it
        n_major: Majority-class sample size per scenario
        inject_bias: Added to every closed-form intercept before sampling (fault injection)
        sigmas: Family-wise rate, as the two-sided tail of this many standard
            errors; each comparison is held to the Sidak-corrected z for the
            number of sampling comparisons in the run
        scenarios: Override the default twelve scenarios
        certificates: Also run the deterministic certificate checks
    """
    started = time.monotonic()
    scenarios = default_scenarios() if scenarios is None else scenarios
    runs = [_run_scenario(s, seed, n_major, inject_bias) for s in scenarios]
    comparisons = sum(len(d) for _, d in runs)
    threshold = family_threshold(comparisons, sigmas)
    results = []
    for result, distances in runs:
        result.passed = result.error is None and all(d <= threshold for _, d in distances)
        results.append(result)
    if certificates:
        results.extend(_certificate(name, check) for name, check in CERTIFICATES.items())
    suite = SuiteResult(results, threshold, seed, n_major)
    logging.info(
        f"verify: {len(results) - len(suite.failures)}/{len(results)} checks passed "
        f"(threshold {threshold:.2f} sigma over {humanize.intcomma(comparisons)} comparisons) "
        f"in {humanize.naturaldelta(time.monotonic() - started)}"
    )
    return suite
