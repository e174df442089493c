"""
Small dense linear algebra for the theory modules.

Covers SPD solves, the symmetric square root, the closed-form eigenpairs of
A = u u^T + v v^T, and the scalar inequalities used alongside them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from .errors import DomainError, IllConditionedError, InconsistentSystemError


PARALLEL_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Rank2Gram:
    u: np.ndarray
    v: np.ndarray
    a: float
    b: float
    c: float

    @classmethod
    def from_vectors(cls, u: np.ndarray, v: np.ndarray) -> "Rank2Gram":
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise DomainError("u and v must be vectors of the same length")
        gram = cls(u=u, v=v, a=float(u @ u), b=float(v @ v), c=float(u @ v))
        gram.validate()
        return gram

    def validate(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise DomainError("u and v must be nonzero")
        if self.c**2 >= self.a * self.b * (1 - PARALLEL_TOL):
            raise IllConditionedError(
                f"u and v are (nearly) parallel: c^2/(ab) = {self.c**2 / (self.a * self.b):.15f}"
            )

    def matrix(self) -> np.ndarray:
        return np.outer(self.u, self.u) + np.outer(self.v, self.v)


@dataclass(frozen=True)
class Rank2Eigen:
    lambda1: float
    lambda2: float
    v1: np.ndarray
    v2: np.ndarray


def rank2_eigenvalues(a: float, b: float, c: float) -> Tuple[float, float]:
    root = math.sqrt((a - b) ** 2 + 4 * c**2)
    lam1 = (a + b + root) / 2
    # product of the roots is ab - c^2
    return lam1, (a * b - c * c) / lam1


def eigvec_denominators(a: float, b: float, c: float, lam1: float, lam2: float) -> Tuple[float, float]:
    """Squared norms of (lam1-b)u + cv and cu + (lam2-a)v, in closed form."""
    first = (a * a - a * b + 2 * c * c) * lam1 + (a - b) * (c * c - a * b)
    second = (b * b - a * b + 2 * c * c) * lam2 + (b - a) * (c * c - a * b)
    return first, second


def rank2_eigen(g: Rank2Gram) -> Rank2Eigen:
    g.validate()
    a, b, c = g.a, g.b, g.c
    lam1, lam2 = rank2_eigenvalues(a, b, c)
    den1, den2 = eigvec_denominators(a, b, c, lam1, lam2)

    # lam1 - b = -(lam2 - a); evaluated without cancellation for either sign of a - b
    d = a - b
    root = math.sqrt(d * d + 4 * c * c)
    shift = (d + root) / 2 if d >= 0 else 2 * c * c / (root - d)

    v1 = shift * g.u + c * g.v
    v2 = c * g.u - shift * g.v
    # both vanish only for c = 0 with a <= b, where v carries lam1 and u carries lam2
    if not np.any(v1):
        v1 = g.v.copy()
    elif den1 > 0:
        v1 = v1 / math.sqrt(den1)
    if not np.any(v2):
        v2 = g.u.copy()
    elif den2 > 0:
        v2 = v2 / math.sqrt(den2)

    v1 = v1 / np.linalg.norm(v1)
    v2 = v2 / np.linalg.norm(v2)
    return Rank2Eigen(lambda1=lam1, lambda2=lam2, v1=v1, v2=v2)


def inequality_lemma_terms(a: float, b: float, c: float) -> Tuple[float, float, float]:
    """
    Evaluate both sides of the eigenvector-denominator inequalities.

    Args:
        a: ||u||^2
        b: ||v||^2, with a != b
        c: <u, v>, with c^2 < ab

    Returns:
        (lambda1 / den1, lambda2 / den2, 1 / (a - b)^2)
    """
    if a == b:
        raise DomainError("the inequalities need a != b")
    lam1, lam2 = rank2_eigenvalues(a, b, c)
    den1, den2 = eigvec_denominators(a, b, c, lam1, lam2)
    return lam1 / den1, lam2 / den2, 1.0 / (a - b) ** 2


def zero_one_terms(x: float, y: float) -> Tuple[float, float, float]:
    """Return (max{x,y}, 1-(1-x)(1-y), x+y) for x, y in [0, 1]."""
    if not (0 <= x <= 1 and 0 <= y <= 1):
        raise DomainError("x and y must lie in [0, 1]")
    return max(x, y), 1 - (1 - x) * (1 - y), x + y


def _check_symmetric(S: np.ndarray, name: str = "matrix") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError(f"{name} must be square")
    scale = max(1.0, float(np.max(np.abs(S))) if S.size else 1.0)
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-10 * scale:
        raise DomainError(f"{name} must be symmetric")
    return (S + S.T) / 2


def check_psd(S: np.ndarray, name: str = "matrix") -> np.ndarray:
    S = _check_symmetric(S, name)
    eigvals = np.linalg.eigvalsh(S)
    top = max(float(eigvals[-1]), 0.0)
    if eigvals[0] < -PSD_TOL * max(top, 1.0):
        raise DomainError(f"{name} is not positive semi-definite (min eigenvalue {eigvals[0]:.3e})")
    return S


def spd_solve(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Solve S x = rhs for symmetric PSD S.

    Cholesky is tried first. A singular S falls back to the minimum-norm
    pseudo-inverse solution, which is accepted only when rhs lies in range(S).

    Args:
        S: Symmetric positive semi-definite matrix
        rhs: Right-hand side vector

    Returns:
        The solution vector
    """
    S = _check_symmetric(S)
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    try:
        factor = scipy.linalg.cho_factor(S, lower=True, check_finite=True)
        x = scipy.linalg.cho_solve(factor, rhs)
        residual = float(np.linalg.norm(S @ x - rhs))
        if residual <= 1e-10 * max(rhs_norm, 1e-300):
            return x
        # refine once; Cholesky of a near-singular S can lose a few digits
        x = x + scipy.linalg.cho_solve(factor, rhs - S @ x)
        residual = float(np.linalg.norm(S @ x - rhs))
        if residual <= 1e-10 * max(rhs_norm, 1e-300):
            return x
        logging.debug(f"Cholesky residual {residual:.3e} too large; using pseudo-inverse")
    except np.linalg.LinAlgError:
        logging.debug("Cholesky failed; matrix is singular, using pseudo-inverse")

    check_psd(S)
    x = scipy.linalg.pinvh(S) @ rhs
    residual = float(np.linalg.norm(S @ x - rhs))
    if residual > 1e-8 * max(rhs_norm, 1.0):
        raise InconsistentSystemError("right-hand side is not in the range of S", residual)
    return x


def spd_sqrt(S: np.ndarray) -> np.ndarray:
    S = check_psd(S)
    eigvals, eigvecs = np.linalg.eigh(S)
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    return (eigvecs * root) @ eigvecs.T


def trace_bound_check(P: np.ndarray, B: np.ndarray) -> Tuple[float, float]:
    """Both sides of Tr(PB) <= Tr(P) ||B||_2 for PSD P."""
    P = check_psd(P, "P")
    B = np.asarray(B, dtype=float)
    if B.shape != P.shape:
        raise DomainError("P and B must have the same shape")
    lhs = float(np.trace(P @ B))
    rhs = float(np.trace(P)) * float(np.linalg.norm(B, 2))
    return lhs, rhs
