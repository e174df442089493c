"""
Linear classifiers, perturbation specs and loss reports.

These are the types every theory module and the Monte-Carlo harness share.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import DomainError


def dual_index(p: float) -> float:
    """
    Return q with 1/p + 1/q = 1.

    Args:
        p: Norm index in [1, inf]

    Returns:
        The dual index, inf for p=1 and 1 for p=inf
    """
    p = float(p)
    if math.isnan(p) or p < 1:
        raise DomainError(f"norm index must lie in [1, inf], got {p}")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


def lp_norm(x: np.ndarray, p: float) -> float:
    x = np.asarray(x, dtype=float)
    if math.isinf(p):
        return float(np.max(np.abs(x))) if x.size else 0.0
    return float(np.linalg.norm(x, ord=p))


def dual_vector(w: np.ndarray, q: float) -> np.ndarray:
    """
    Return a maximizer of delta^T w over the unit ball of the norm dual to q.

    The result is also a subgradient of ||.||_q at w, so delta^T w = ||w||_q.
    Ties at q=inf are broken by the lowest index.

    Args:
        w: Nonzero vector
        q: Norm index of the penalty, in [1, inf]

    Returns:
        The dual direction, same shape as w
    """
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return np.zeros_like(w)
    if q == 1:
        return np.sign(w)
    if math.isinf(q):
        out = np.zeros_like(w)
        i = int(np.argmax(np.abs(w)))
        out[i] = np.sign(w[i])
        return out
    norm = lp_norm(w, q)
    return np.sign(w) * (np.abs(w) / norm) ** (q - 1)


@dataclass(frozen=True)
class PerturbSpec:
    p: float
    epsilon: float = 0.0
    kappa: Optional[float] = None

    def __post_init__(self):
        dual_index(self.p)
        if self.epsilon < 0 or math.isnan(self.epsilon):
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kappa is not None and not 0 < self.kappa < 1:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")

    @property
    def q(self) -> float:
        return dual_index(self.p)

    def with_epsilon(self, epsilon: float) -> "PerturbSpec":
        return PerturbSpec(p=self.p, epsilon=epsilon, kappa=self.kappa)

    def check_radius(self, theta_bar: np.ndarray) -> None:
        """Enforce epsilon <= (kappa/2) ||theta_bar||_inf when kappa is set."""
        if self.kappa is None:
            return
        limit = 0.5 * self.kappa * lp_norm(theta_bar, math.inf)
        if self.epsilon > limit * (1 + 1e-12):
            raise DomainError(
                f"epsilon={self.epsilon} exceeds (kappa/2)*||theta_bar||_inf={limit}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": _encode_index(self.p),
            "q": _encode_index(self.q),
            "epsilon": self.epsilon,
            "kappa": self.kappa,
        }


def _encode_index(value: float) -> Union[float, str]:
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class LinearClassifier:
    """f(x) = sgn(w^T x + b)."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise DomainError("classifier slope must be a finite vector")
        if not np.any(w):
            raise DomainError("classifier slope must be nonzero")
        if not math.isfinite(self.b):
            raise DomainError("classifier intercept must be finite; use AllNegative for b=-inf")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    def margins(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.w + self.b

    def scaled(self, factor: float) -> "LinearClassifier":
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        return LinearClassifier(self.w * factor, self.b * factor)

    def shifted(self, delta: float) -> "LinearClassifier":
        return LinearClassifier(self.w, self.b + delta)

    def to_dict(self) -> Dict[str, Any]:
        return {"w": self.w.tolist(), "b": self.b}


@dataclass(frozen=True)
class AllNegative:
    """The b -> -inf limit: every input receives the majority label -1."""

    w: np.ndarray
    reason: str = ""

    def __post_init__(self):
        object.__setattr__(self, "w", np.array(self.w, dtype=float))

    def margins(self, features: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(features).shape[0], -np.inf)

    def shifted(self, delta: float) -> "AllNegative":
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"w": self.w.tolist(), "b": "-inf", "reason": self.reason}


Classifier = Union[LinearClassifier, AllNegative]


def overall_loss(loss_minus: float, loss_plus: float, imbalance: float) -> float:
    """Population 0-1 loss with P(y=-1) = R/(R+1)."""
    return (imbalance * loss_minus + loss_plus) / (imbalance + 1)


@dataclass(frozen=True)
class LossReport:
    loss_plus: float
    loss_minus: float
    imbalance: float = 1.0
    provenance: str = "closed_form"
    robust_plus: Optional[float] = None
    robust_minus: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def acc_plus(self) -> float:
        return 1.0 - self.loss_plus

    @property
    def acc_minus(self) -> float:
        return 1.0 - self.loss_minus

    @property
    def ad(self) -> float:
        return self.loss_plus - self.loss_minus

    @property
    def overall_std_loss(self) -> float:
        return overall_loss(self.loss_minus, self.loss_plus, self.imbalance)

    @property
    def overall_robust_loss(self) -> Optional[float]:
        if self.robust_plus is None or self.robust_minus is None:
            return None
        return overall_loss(self.robust_minus, self.robust_plus, self.imbalance)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "loss_plus": self.loss_plus,
            "loss_minus": self.loss_minus,
            "acc_plus": self.acc_plus,
            "acc_minus": self.acc_minus,
            "overall_std_loss": self.overall_std_loss,
            "ad": self.ad,
            "imbalance": self.imbalance,
            "provenance": self.provenance,
        }
        if self.robust_plus is not None:
            out["robust_plus"] = self.robust_plus
            out["robust_minus"] = self.robust_minus
            out["overall_robust_loss"] = self.overall_robust_loss
        out.update(self.extra)
        return out
