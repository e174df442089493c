"""
Symmetric alpha-stable (SaS) distributions.

A univariate SaS law f(x; alpha, c, mu) has characteristic function
exp(i t mu - |c t|^alpha). alpha=2 is N(mu, 2c^2) and alpha=1 is Cauchy(mu, c).
Multivariate laws come in two flavours: independent components (IC) and
elliptically contoured (EC).
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.integrate
from scipy.stats import norm

from .errors import DegenerateDistributionError, DomainError, NonConvergenceError
from .linalg_core import check_psd, spd_sqrt


DEGENERATE_SCALE = 1e-300
# e^{-T^alpha} < 1e-16 beyond T = TAIL_EXPONENT^(1/alpha)
TAIL_EXPONENT = 16 * math.log(10)


@dataclass(frozen=True)
class SasParams:
    alpha: float
    scale: float = 1.0
    location: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if not math.isfinite(self.location):
            raise DomainError("location must be finite")


@dataclass(frozen=True)
class QuadratureOptions:
    tol: float = 1e-10
    max_evals: int = 100_000
    tail_threshold: float = 20.0


class SasKind(enum.Enum):
    INDEPENDENT = "ic"
    ELLIPTICAL = "ec"


@dataclass(frozen=True)
class MultivariateSas:
    kind: SasKind
    alpha: float
    location: np.ndarray
    scales: Optional[np.ndarray] = None
    shape: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        location = np.array(self.location, dtype=float)
        object.__setattr__(self, "location", location)
        d = location.shape[0]
        if self.kind is SasKind.INDEPENDENT:
            scales = np.ones(d) if self.scales is None else np.array(self.scales, dtype=float)
            if scales.shape != (d,) or np.any(scales <= 0):
                raise DomainError("IC scales must be a positive vector matching the location")
            object.__setattr__(self, "scales", scales)
        else:
            if self.shape is None:
                raise DomainError("EC distributions need a shape matrix")
            shape = check_psd(np.array(self.shape, dtype=float), "shape matrix")
            if shape.shape != (d, d):
                raise DomainError("EC shape matrix must be d x d")
            object.__setattr__(self, "shape", shape)

    @classmethod
    def independent(cls, location, alpha: float, scales=None) -> "MultivariateSas":
        return cls(kind=SasKind.INDEPENDENT, alpha=alpha, location=location, scales=scales)

    @classmethod
    def elliptical(cls, location, alpha: float, shape) -> "MultivariateSas":
        return cls(kind=SasKind.ELLIPTICAL, alpha=alpha, location=location, shape=shape)

    @property
    def dim(self) -> int:
        return int(self.location.shape[0])

    def relocated(self, location) -> "MultivariateSas":
        return MultivariateSas(
            kind=self.kind, alpha=self.alpha, location=location, scales=self.scales, shape=self.shape
        )


def _standardize(params: SasParams, x: float) -> float:
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x}")
    return (x - params.location) / params.scale


def _tail_series(alpha: float, z: float, tol: float) -> Optional[float]:
    """
    P(X > z) for standard SaS from its large-z expansion.

    Returns None when the terms stop shrinking before reaching tol, in which
    case the caller integrates instead.
    """
    total = 0.0
    previous = math.inf
    for k in range(1, 40):
        bound = math.exp(math.lgamma(alpha * k) - math.lgamma(k + 1) - alpha * k * math.log(z)) / math.pi
        if bound > previous:
            return None
        total += (-1) ** (k + 1) * bound * math.sin(k * math.pi * alpha / 2)
        if bound < tol * 1e-2:
            return total
        previous = bound
    return None


def _quad(integrand, upper: float, quad: QuadratureOptions, what: str) -> float:
    limit = max(50, quad.max_evals // 21)
    result = scipy.integrate.quad(
        integrand, 0.0, upper, epsabs=quad.tol * math.pi, epsrel=1e-12, limit=limit, full_output=1
    )
    value, abserr, info = result[0], result[1], result[2]
    if abserr > quad.tol * math.pi * 10:
        raise NonConvergenceError(
            f"quadrature for {what} did not converge within {info.get('neval', '?')} evaluations",
            estimate=value / math.pi,
            error_bound=abserr / math.pi,
        )
    if len(result) > 3:
        logging.debug(f"quadrature for {what} reported: {result[3]}")
    return value


def standard_cdf_numeric(alpha: float, z: float, quad: QuadratureOptions = QuadratureOptions()) -> float:
    """
    Phi_alpha(z) = 1/2 + (1/pi) int_0^inf sin(zt) e^{-t^alpha} / t dt.

    Always integrates, whatever alpha is. Used directly to cross-check the
    closed-form paths at alpha in {1, 2}.
    """
    if z == 0:
        return 0.5
    if z < 0:
        return 1.0 - standard_cdf_numeric(alpha, -z, quad)
    upper = TAIL_EXPONENT ** (1.0 / alpha)

    def integrand(t):
        if t == 0:
            return z
        return math.sin(z * t) / t * math.exp(-(t**alpha))

    value = _quad(integrand, upper, quad, f"Phi_{alpha}({z})")
    return min(1.0, max(0.0, 0.5 + value / math.pi))


def standard_cdf(alpha: float, z: float, quad: QuadratureOptions = QuadratureOptions()) -> float:
    if alpha == 2:
        return float(norm.cdf(z / math.sqrt(2)))
    if alpha == 1:
        return 0.5 + math.atan(z) / math.pi
    if z < 0:
        return 1.0 - standard_cdf(alpha, -z, quad)
    if z >= quad.tail_threshold:
        tail = _tail_series(alpha, z, quad.tol)
        if tail is not None:
            return 1.0 - tail
        logging.debug(f"tail series for alpha={alpha} at z={z} did not settle; integrating")
    return standard_cdf_numeric(alpha, z, quad)


def sas_cdf(params: SasParams, x: float, quad: QuadratureOptions = QuadratureOptions()) -> float:
    return standard_cdf(params.alpha, _standardize(params, x), quad)


def sas_cdf_many(params: SasParams, xs: Sequence[float], quad: QuadratureOptions = QuadratureOptions()) -> np.ndarray:
    return np.array([sas_cdf(params, float(x), quad) for x in xs])


def sas_pdf(params: SasParams, x: float, quad: QuadratureOptions = QuadratureOptions()) -> float:
    """Density via f(z) = (1/pi) int_0^inf cos(zt) e^{-t^alpha} dt, rescaled by 1/c."""
    z = abs(_standardize(params, x))
    alpha = params.alpha
    if alpha == 2:
        density = float(norm.pdf(z, scale=math.sqrt(2)))
    elif alpha == 1:
        density = 1.0 / (math.pi * (1.0 + z * z))
    else:
        upper = TAIL_EXPONENT ** (1.0 / alpha)
        density = _quad(lambda t: math.cos(z * t) * math.exp(-(t**alpha)), upper, quad, "density") / math.pi
    return density / params.scale


def _cms_symmetric(alpha: float, rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.uniform(-math.pi / 2, math.pi / 2, n)
    w = rng.standard_exponential(n)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


def sas_sample(params: SasParams, rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 1:
        raise DomainError("sample size must be at least 1")
    if params.alpha == 2:
        draws = math.sqrt(2) * rng.standard_normal(n)
    elif params.alpha == 1:
        draws = rng.standard_cauchy(n)
    else:
        draws = _cms_symmetric(params.alpha, rng, n)
    return params.location + params.scale * draws


def positive_stable_sample(index: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """
    Totally skewed positive stable draws A with E[exp(-g A)] = exp(-g^index).

    Chambers-Mallows-Stuck with beta=1, which for index < 1 reduces to
    Kanter's representation once the scale cos(pi index / 2)^(1/index) is
    folded in.
    """
    if not 0 < index < 1:
        raise DomainError(f"positive stable index must lie in (0, 1), got {index}")
    v = rng.uniform(-math.pi / 2, math.pi / 2, n)
    w = rng.standard_exponential(n)
    shifted = index * (v + math.pi / 2)
    return (
        np.sin(shifted)
        / np.cos(v) ** (1.0 / index)
        * (np.cos(v - shifted) / w) ** ((1.0 - index) / index)
    )


def sas_ec_sample(mv: MultivariateSas, rng: np.random.Generator, n: int) -> np.ndarray:
    """
    Draw n rows from an EC law via X = theta + sqrt(A) Sigma^{1/2} G, G ~ N(0, 2I).

    The alpha=2 case has A = 1, i.e. plain N(theta, 2 Sigma).
    """
    if mv.kind is not SasKind.ELLIPTICAL:
        raise DomainError("sas_ec_sample needs an elliptically contoured distribution")
    if n < 1:
        raise DomainError("sample size must be at least 1")
    root = spd_sqrt(mv.shape)
    gaussian = math.sqrt(2) * rng.standard_normal((n, mv.dim)) @ root
    if mv.alpha == 2:
        return mv.location + gaussian
    mixing = positive_stable_sample(mv.alpha / 2, rng, n)
    return mv.location + np.sqrt(mixing)[:, None] * gaussian


def sas_ic_sample(mv: MultivariateSas, rng: np.random.Generator, n: int) -> np.ndarray:
    if mv.kind is not SasKind.INDEPENDENT:
        raise DomainError("sas_ic_sample needs an independent-components distribution")
    columns = [
        sas_sample(SasParams(mv.alpha, float(scale), float(loc)), rng, n)
        for loc, scale in zip(mv.location, mv.scales)
    ]
    return np.column_stack(columns)


def sample_multivariate(mv: MultivariateSas, rng: np.random.Generator, n: int) -> np.ndarray:
    if mv.kind is SasKind.INDEPENDENT:
        return sas_ic_sample(mv, rng, n)
    return sas_ec_sample(mv, rng, n)


def pushforward_scale(mv: MultivariateSas, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape != (mv.dim,):
        raise DomainError("w must match the distribution dimension")
    if mv.kind is SasKind.INDEPENDENT:
        return float(np.sum(np.abs(mv.scales * w) ** mv.alpha) ** (1.0 / mv.alpha))
    return math.sqrt(max(float(w @ mv.shape @ w), 0.0))


def linear_pushforward(mv: MultivariateSas, w: np.ndarray, b: float = 0.0) -> SasParams:
    """
    Exact law of w^T X + b.

    Raises:
        DegenerateDistributionError: when the scale is zero; the error carries
            the point-mass location w^T theta + b.
    """
    w = np.asarray(w, dtype=float)
    scale = pushforward_scale(mv, w)
    location = float(w @ mv.location + b)
    if scale <= DEGENERATE_SCALE:
        raise DegenerateDistributionError(location)
    return SasParams(alpha=mv.alpha, scale=scale, location=location)

