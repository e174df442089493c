"""
Accuracy disparity of ridge regression between a majority and a minority group.

Group i contributes k_i rows drawn around the mean mu_i, and the response is
noiseless: y = <x, beta*>. With S = sum_i k_i mu_i mu_i^T and lambda' = 2 N lambda,
the ridge estimate is beta_hat = (S + lambda' I)^{-1} S beta*, and the group
disparity is carried by g_i(S) = <mu_i, beta_hat - beta*>.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .linalg_core import Rank2Gram, check_psd, rank2_eigen, spd_solve, trace_bound_check

ORTHOGONAL_TOL = 1e-12


@dataclass(frozen=True)
class RidgeScenario:
    mu1: np.ndarray
    mu2: np.ndarray
    k1: int
    k2: int
    lambda_prime: float
    beta_star: np.ndarray
    sigma_pop: Optional[np.ndarray] = None
    noise_var: float = 0.0

    def __post_init__(self):
        mu1 = np.array(self.mu1, dtype=float)
        mu2 = np.array(self.mu2, dtype=float)
        beta_star = np.array(self.beta_star, dtype=float)
        if mu1.ndim != 1 or mu1.shape != mu2.shape or beta_star.shape != mu1.shape:
            raise DomainError("group means and beta* must be vectors of equal length")
        if not self.k1 >= self.k2 >= 1:
            raise DomainError(f"group counts must satisfy k1 >= k2 >= 1, got {self.k1}, {self.k2}")
        if not self.lambda_prime > 0:
            raise DomainError(f"lambda' must be positive, got {self.lambda_prime}")
        if self.noise_var < 0:
            raise DomainError("noise variance must be non-negative")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)
        object.__setattr__(self, "beta_star", beta_star)
        if self.sigma_pop is None:
            object.__setattr__(self, "sigma_pop", self.noise_var * np.eye(mu1.size))
        else:
            sigma = check_psd(np.array(self.sigma_pop, dtype=float), "population covariance")
            if sigma.shape != (mu1.size, mu1.size):
                raise DomainError("population covariance must be d x d")
            object.__setattr__(self, "sigma_pop", sigma)

    @property
    def dim(self) -> int:
        return int(self.mu1.size)

    @property
    def ratio(self) -> float:
        return self.k1 / self.k2

    @property
    def n1(self) -> float:
        return float(self.mu1 @ self.mu1)

    @property
    def n2(self) -> float:
        return float(self.mu2 @ self.mu2)

    @property
    def mean_inner(self) -> float:
        return float(self.mu1 @ self.mu2)

    @property
    def m1(self) -> float:
        return float(self.mu1 @ self.beta_star)

    @property
    def m2(self) -> float:
        return float(self.mu2 @ self.beta_star)

    def gram(self) -> np.ndarray:
        return self.k1 * np.outer(self.mu1, self.mu1) + self.k2 * np.outer(self.mu2, self.mu2)

    def rank2_gram(self) -> Rank2Gram:
        return Rank2Gram.from_vectors(math.sqrt(self.k1) * self.mu1, math.sqrt(self.k2) * self.mu2)

    def with_counts(self, k1: int, k2: int) -> "RidgeScenario":
        return RidgeScenario(
            self.mu1, self.mu2, k1, k2, self.lambda_prime, self.beta_star, self.sigma_pop, self.noise_var
        )


def ridge_estimate(matrix: np.ndarray, lambda_prime: float, beta_star: np.ndarray, design: bool = False) -> np.ndarray:
    """
    beta_hat = (S + lambda' I)^{-1} S beta* for a noiseless response.

    Args:
        matrix: The gram S, or the design X when design is True
        lambda_prime: Regularization lambda' > 0
        beta_star: Ground-truth coefficients
        design: Treat matrix as X and form S = X^T X
    """
    if not lambda_prime > 0:
        raise DomainError(f"lambda' must be positive, got {lambda_prime}")
    matrix = np.asarray(matrix, dtype=float)
    gram = matrix.T @ matrix if design else matrix
    beta_star = np.asarray(beta_star, dtype=float)
    return spd_solve(gram + lambda_prime * np.eye(gram.shape[0]), gram @ beta_star)


def ols_estimate(design: np.ndarray, response: np.ndarray) -> np.ndarray:
    """Least-squares fit; recovers beta* exactly on a full-column-rank noiseless design."""
    design = np.asarray(design, dtype=float)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DomainError("OLS recovery needs a full-column-rank design")
    return np.linalg.lstsq(design, np.asarray(response, dtype=float), rcond=None)[0]


@dataclass(frozen=True)
class GroupLosses:
    loss1: float
    loss2: float
    common: float
    term1: float
    term2: float

    @property
    def disparity(self) -> float:
        return self.loss2 - self.loss1

    def to_dict(self) -> Dict[str, float]:
        return {
            "loss1": self.loss1,
            "loss2": self.loss2,
            "common": self.common,
            "term1": self.term1,
            "term2": self.term2,
            "disparity": self.disparity,
        }


def quadratic_form_expectation(a: np.ndarray, sigma: np.ndarray, mu: np.ndarray) -> float:
    """E[x^T A x] = Tr(A Sigma) + mu^T A mu for x with mean mu and covariance Sigma."""
    return float(np.trace(a @ sigma) + mu @ a @ mu)


def population_group_loss(scenario: RidgeScenario, beta: np.ndarray) -> GroupLosses:
    """
    l_i(beta) = (beta - beta*)^T Sigma (beta - beta*) / 2 + <mu_i, beta - beta*>^2 / 2.

    The first term is shared by both groups; only the second differs.
    """
    diff = np.asarray(beta, dtype=float) - scenario.beta_star
    common = 0.5 * quadratic_form_expectation(np.outer(diff, diff), scenario.sigma_pop, np.zeros_like(diff))
    term1 = abs(float(scenario.mu1 @ diff))
    term2 = abs(float(scenario.mu2 @ diff))
    return GroupLosses(
        loss1=common + 0.5 * term1**2,
        loss2=common + 0.5 * term2**2,
        common=common,
        term1=term1,
        term2=term2,
    )


def ridge_group_losses(scenario: RidgeScenario) -> GroupLosses:
    return population_group_loss(scenario, ridge_estimate(scenario.gram(), scenario.lambda_prime, scenario.beta_star))


@dataclass(frozen=True)
class OrthogonalToy:
    closed1: float
    closed2: float
    solved1: float
    solved2: float

    @property
    def max_discrepancy(self) -> float:
        return max(abs(self.closed1 - self.solved1), abs(self.closed2 - self.solved2))

    @property
    def ratio(self) -> float:
        return self.closed2 / self.closed1 if self.closed1 else math.inf

    def to_dict(self) -> Dict[str, float]:
        return {
            "closed1": self.closed1,
            "closed2": self.closed2,
            "solved1": self.solved1,
            "solved2": self.solved2,
            "max_discrepancy": self.max_discrepancy,
        }


def toy_orthogonal_disparity(scenario: RidgeScenario) -> OrthogonalToy:
    """|<mu_i, beta_hat - beta*>| = lambda' |m_i| / (k_i n_i + lambda') for orthogonal means."""
    scale = max(1.0, math.sqrt(scenario.n1 * scenario.n2))
    if abs(scenario.mean_inner) > ORTHOGONAL_TOL * scale:
        raise DomainError(
            f"group means are not orthogonal (<mu1, mu2> = {scenario.mean_inner:.3e}); use general_gram_disparity"
        )
    lam = scenario.lambda_prime
    losses = ridge_group_losses(scenario)
    return OrthogonalToy(
        closed1=lam * abs(scenario.m1) / (scenario.k1 * scenario.n1 + lam),
        closed2=lam * abs(scenario.m2) / (scenario.k2 * scenario.n2 + lam),
        solved1=losses.term1,
        solved2=losses.term2,
    )


def orthogonal_ratio_grid(scenario: RidgeScenario, ratios: Sequence[float]) -> List[Tuple[float, float]]:
    """(K, |g2|/|g1|) with k2 fixed and k1 = K k2."""
    rows = []
    for ratio in ratios:
        toy = toy_orthogonal_disparity(scenario.with_counts(int(round(ratio * scenario.k2)), scenario.k2))
        rows.append((float(ratio), toy.ratio))
    return rows


# -- rank-2 spectral path ----------------------------------------------------


def spectral_inverse(scenario: RidgeScenario) -> np.ndarray:
    """(S + lambda' I)^{-1} from the closed-form eigenpairs of the rank-2 gram."""
    eig = rank2_eigen(scenario.rank2_gram())
    lam = scenario.lambda_prime
    inverse = np.eye(scenario.dim) / lam
    for value, vector in ((eig.lambda1, eig.v1), (eig.lambda2, eig.v2)):
        inverse += (1.0 / (value + lam) - 1.0 / lam) * np.outer(vector, vector)
    return inverse


@dataclass(frozen=True)
class BoundReport:
    env1: float
    env2: float
    g1_within: bool
    g2_above: bool
    c1: float
    c2: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env1": self.env1,
            "env2": self.env2,
            "g1_within": self.g1_within,
            "g2_above": self.g2_above,
            "c1": self.c1,
            "c2": self.c2,
        }


@dataclass(frozen=True)
class GramDisparity:
    g1: float
    g2: float
    g1_dense: float
    g2_dense: float
    bounds: Optional[BoundReport]

    @property
    def path_discrepancy(self) -> float:
        return max(abs(self.g1 - self.g1_dense), abs(self.g2 - self.g2_dense))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g1": self.g1,
            "g2": self.g2,
            "g1_dense": self.g1_dense,
            "g2_dense": self.g2_dense,
            "path_discrepancy": self.path_discrepancy,
            "bounds": self.bounds.to_dict() if self.bounds else None,
        }


def _bound_report(scenario: RidgeScenario, g1: float, g2: float) -> Optional[BoundReport]:
    gram = scenario.rank2_gram()
    a, b, c = gram.a, gram.b, abs(gram.c)
    if a <= b:
        logging.debug("bound report needs k1 n1 > k2 n2; skipping")
        return None
    lam = scenario.lambda_prime
    gap = a - b
    c2 = c * lam * math.sqrt(gap**2 + 4 * c**2) / (gap * (a * b - c**2)) + 2 * c**3 / gap**3
    c1 = lam / (a + lam) + 2 * c**2 / gap**2
    i1 = math.sqrt(scenario.k1) * scenario.m1
    i2 = math.sqrt(scenario.k2) * scenario.m2
    env1 = (c1 * abs(i1) + c2 * abs(i2)) / math.sqrt(scenario.k1)
    env2 = ((lam / (b + lam) - c**2 / gap**2) * abs(i2) - c2 * abs(i1)) / math.sqrt(scenario.k2)
    return BoundReport(env1=env1, env2=env2, g1_within=abs(g1) <= env1, g2_above=abs(g2) >= env2, c1=c1, c2=c2)


def group_gaps(scenario: RidgeScenario, inverse: np.ndarray) -> Tuple[float, float]:
    """g_i = -lambda' mu_i^T (S + lambda' I)^{-1} beta*."""
    shrunk = inverse @ scenario.beta_star
    lam = scenario.lambda_prime
    return -lam * float(scenario.mu1 @ shrunk), -lam * float(scenario.mu2 @ shrunk)


def general_gram_disparity(scenario: RidgeScenario, with_bounds: bool = True) -> GramDisparity:
    """
    g_1, g_2 for data sampled at the means, by the spectral and dense paths.

    Raises:
        IllConditionedError: when the group means are parallel
    """
    g1, g2 = group_gaps(scenario, spectral_inverse(scenario))
    lam = scenario.lambda_prime
    shrunk = spd_solve(scenario.gram() + lam * np.eye(scenario.dim), scenario.beta_star)
    g1_dense = -lam * float(scenario.mu1 @ shrunk)
    g2_dense = -lam * float(scenario.mu2 @ shrunk)
    return GramDisparity(
        g1=g1,
        g2=g2,
        g1_dense=g1_dense,
        g2_dense=g2_dense,
        bounds=_bound_report(scenario, g1, g2) if with_bounds else None,
    )


def g1_scaling_slope(scenario: RidgeScenario, k1_grid: Sequence[int]) -> float:
    """Log-log slope of |g_1| against k_1 with k_2 held fixed."""
    logs = []
    for k1 in k1_grid:
        result = general_gram_disparity(scenario.with_counts(int(k1), scenario.k2), with_bounds=False)
        logs.append((math.log(k1), math.log(abs(result.g1))))
    xs, ys = zip(*logs)
    return float(np.polyfit(xs, ys, 1)[0])


# -- first-order expansion around the ideal gram -----------------------------


@dataclass(frozen=True)
class TaylorResult:
    m1: np.ndarray
    m2: np.ndarray
    g1: float
    g2: float
    g_tilde1: float
    g_tilde2: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g1": self.g1,
            "g2": self.g2,
            "g_tilde1": self.g_tilde1,
            "g_tilde2": self.g_tilde2,
            "m1_norm": float(np.linalg.norm(self.m1, 2)),
            "m2_norm": float(np.linalg.norm(self.m2, 2)),
        }


def gradient_matrices(scenario: RidgeScenario) -> Tuple[np.ndarray, np.ndarray]:
    """M_i = lambda' P mu_i (P beta*)^T with P = (S + lambda' I)^{-1}, so dg_i = <M_i, dS>."""
    inverse = spectral_inverse(scenario)
    shrunk = inverse @ scenario.beta_star
    lam = scenario.lambda_prime
    return lam * np.outer(inverse @ scenario.mu1, shrunk), lam * np.outer(inverse @ scenario.mu2, shrunk)


def taylor_first_order(scenario: RidgeScenario, s_prime: np.ndarray) -> TaylorResult:
    """g~_i(S') = g_i(S) + <M_i, S' - S> around the ideal gram S."""
    m1, m2 = gradient_matrices(scenario)
    g1, g2 = group_gaps(scenario, spectral_inverse(scenario))
    delta = np.asarray(s_prime, dtype=float) - scenario.gram()
    return TaylorResult(
        m1=m1,
        m2=m2,
        g1=g1,
        g2=g2,
        g_tilde1=g1 + float(np.sum(m1 * delta)),
        g_tilde2=g2 + float(np.sum(m2 * delta)),
    )


def gaps_for_gram(scenario: RidgeScenario, gram: np.ndarray) -> Tuple[float, float]:
    lam = scenario.lambda_prime
    shrunk = spd_solve(np.asarray(gram, dtype=float) + lam * np.eye(scenario.dim), scenario.beta_star)
    return -lam * float(scenario.mu1 @ shrunk), -lam * float(scenario.mu2 @ shrunk)


def directional_derivative_check(
    scenario: RidgeScenario, direction: np.ndarray, steps: Sequence[float]
) -> List[Dict[str, float]]:
    """Finite differences (g_i(S + t D) - g_i(S)) / t against <M_i, D>."""
    direction = np.asarray(direction, dtype=float)
    m1, m2 = gradient_matrices(scenario)
    exact = (float(np.sum(m1 * direction)), float(np.sum(m2 * direction)))
    base = gaps_for_gram(scenario, scenario.gram())
    rows = []
    for t in steps:
        moved = gaps_for_gram(scenario, scenario.gram() + t * direction)
        fd = ((moved[0] - base[0]) / t, (moved[1] - base[1]) / t)
        rows.append(
            {
                "t": float(t),
                "error1": abs(fd[0] - exact[0]),
                "error2": abs(fd[1] - exact[1]),
                "exact1": exact[0],
                "exact2": exact[1],
            }
        )
    return rows


@dataclass(frozen=True)
class EnvelopeReport:
    norm1: float
    norm2: float
    envelope1: float
    envelope2: float
    m1_norm: float
    m2_norm: float

    @property
    def within1(self) -> bool:
        return self.norm1 <= self.envelope1

    @property
    def within2(self) -> bool:
        return self.norm2 <= self.envelope2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "norm1": self.norm1,
            "norm2": self.norm2,
            "envelope1": self.envelope1,
            "envelope2": self.envelope2,
            "within1": self.within1,
            "within2": self.within2,
            "m1_norm": self.m1_norm,
            "m2_norm": self.m2_norm,
        }


def tech_data_envelopes(scenario: RidgeScenario) -> EnvelopeReport:
    """
    ||(S + lambda' I)^{-2} mu_i|| next to their unit-constant envelopes
    1/k1^2 + sqrt(k2) |n| / (k1 lambda2^{3/2}) and 1/lambda2^2.

    Diagnostic only; the envelopes hide unknown constants.
    """
    eig = rank2_eigen(scenario.rank2_gram())
    inverse = spectral_inverse(scenario)
    squared = inverse @ inverse
    m1, m2 = gradient_matrices(scenario)
    lam2 = eig.lambda2
    return EnvelopeReport(
        norm1=float(np.linalg.norm(squared @ scenario.mu1)),
        norm2=float(np.linalg.norm(squared @ scenario.mu2)),
        envelope1=1.0 / scenario.k1**2 + math.sqrt(scenario.k2) * abs(scenario.mean_inner) / (scenario.k1 * lam2**1.5),
        envelope2=1.0 / lam2**2,
        m1_norm=float(np.linalg.norm(m1, 2)),
        m2_norm=float(np.linalg.norm(m2, 2)),
    )


# -- sampled grams -----------------------------------------------------------


NOISE_KINDS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class NoiseSpec:
    variance: float = 0.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.variance < 0:
            raise DomainError("noise variance must be non-negative")
        if self.kind not in NOISE_KINDS:
            raise DomainError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")

    def draw(self, rng: np.random.Generator, shape: Tuple[int, int]) -> np.ndarray:
        scale = math.sqrt(self.variance)
        if self.kind == "gaussian":
            return scale * rng.standard_normal(shape)
        return scale * rng.choice([-1.0, 1.0], size=shape)


@dataclass(frozen=True)
class GramPair:
    s: np.ndarray
    s_prime: np.ndarray
    eps_sum: np.ndarray
    delta_sum: np.ndarray
    q: np.ndarray

    def decomposition_residual(self, scenario: RidgeScenario) -> float:
        """|| S' - S - (eps mu1^T + mu1 eps^T + delta mu2^T + mu2 delta^T + Q) ||_F."""
        rebuilt = (
            np.outer(self.eps_sum, scenario.mu1)
            + np.outer(scenario.mu1, self.eps_sum)
            + np.outer(self.delta_sum, scenario.mu2)
            + np.outer(scenario.mu2, self.delta_sum)
            + self.q
        )
        return float(np.linalg.norm(self.s_prime - self.s - rebuilt))

    def trace_check(self, matrix: np.ndarray) -> Tuple[float, float]:
        """Tr(Q M) <= Tr(Q) ||M||_2."""
        return trace_bound_check(self.q, matrix)


def sample_gram(scenario: RidgeScenario, noise: NoiseSpec, rng: np.random.Generator) -> GramPair:
    """Y has k1 rows mu1 + eps_i and k2 rows mu2 + delta_j; S' = Y^T Y."""
    eps = noise.draw(rng, (scenario.k1, scenario.dim))
    delta = noise.draw(rng, (scenario.k2, scenario.dim))
    rows = np.vstack([scenario.mu1 + eps, scenario.mu2 + delta])
    return GramPair(
        s=scenario.gram(),
        s_prime=rows.T @ rows,
        eps_sum=eps.sum(axis=0),
        delta_sum=delta.sum(axis=0),
        q=eps.T @ eps + delta.T @ delta,
    )
