import numpy as np
import pytest

from ..lib.errors import DomainError, IllConditionedError, InconsistentSystemError
from ..lib.linalg_core import (
    Rank2Gram,
    inequality_lemma_terms,
    rank2_eigen,
    rank2_eigenvalues,
    spd_solve,
    spd_sqrt,
    trace_bound_check,
    zero_one_terms,
)


def test_rank2_orthogonal_case():
    eig = rank2_eigen(Rank2Gram.from_vectors([2.0, 0.0, 0.0], [0.0, 1.0, 0.0]))
    assert eig.lambda1 == pytest.approx(4.0)
    assert eig.lambda2 == pytest.approx(1.0)
    assert np.allclose(np.abs(eig.v1), [1, 0, 0])
    assert np.allclose(np.abs(eig.v2), [0, 1, 0])


def test_rank2_orthogonal_minor_first():
    # the longer vector comes second, so v1 must follow v
    eig = rank2_eigen(Rank2Gram.from_vectors([1.0, 0.0], [0.0, 3.0]))
    assert eig.lambda1 == pytest.approx(9.0)
    assert np.allclose(np.abs(eig.v1), [0, 1])


def test_rank2_eigenvalues_equal_norms():
    assert rank2_eigenvalues(1.0, 1.0, 0.5) == pytest.approx((1.5, 0.5))


@pytest.mark.parametrize("dim", range(2, 21))
def test_rank2_matches_dense_eigensolver(dim):
    # 53 pairs in each of 19 dimensions
    rng = np.random.default_rng(dim)
    for _ in range(53):
        gram = Rank2Gram.from_vectors(rng.standard_normal(dim), rng.standard_normal(dim))
        eig = rank2_eigen(gram)
        matrix = gram.matrix()
        reference = np.linalg.eigvalsh(matrix)[-2:]
        scale = max(1.0, reference[1])
        assert abs(eig.lambda1 - reference[1]) <= 1e-10 * scale
        assert abs(eig.lambda2 - reference[0]) <= 1e-10 * scale
        assert abs(float(eig.v1 @ eig.v2)) <= 1e-10
        for value, vector in ((eig.lambda1, eig.v1), (eig.lambda2, eig.v2)):
            assert np.linalg.norm(matrix @ vector - value * vector) <= 1e-9 * scale


def test_rank2_rejects_parallel_vectors():
    with pytest.raises(IllConditionedError):
        Rank2Gram.from_vectors([1.0, 2.0], [2.0, 4.0])


def test_inequality_lemma_holds():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        b = rng.uniform(0.1, 5.0)
        a = b * rng.uniform(1.1, 10.0)
        c = rng.uniform(-1, 1) * np.sqrt(a * b) * 0.999
        first, second, bound = inequality_lemma_terms(a, b, c)
        assert first <= bound * (1 + 1e-9)
        assert second <= bound * (1 + 1e-9)


def test_zero_one_chain():
    rng = np.random.default_rng(6)
    for x, y in rng.uniform(0, 1, size=(200, 2)):
        low, mid, high = zero_one_terms(x, y)
        assert low <= mid + 1e-15 <= high + 2e-15
    with pytest.raises(DomainError):
        zero_one_terms(1.5, 0.0)


def test_spd_solve_examples():
    assert np.allclose(spd_solve(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])
    assert np.allclose(spd_solve(np.diag([2.0, 4.0]), [2.0, 8.0]), [1, 2])


def test_spd_solve_random_residual():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((8, 8))
    s = a @ a.T + 0.5 * np.eye(8)
    rhs = rng.standard_normal(8)
    x = spd_solve(s, rhs)
    assert np.linalg.norm(s @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_spd_solve_singular():
    s = np.diag([1.0, 0.0])
    assert np.allclose(spd_solve(s, [2.0, 0.0]), [2.0, 0.0])
    with pytest.raises(InconsistentSystemError):
        spd_solve(s, [1.0, 1.0])


def test_spd_sqrt():
    assert np.allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    with pytest.raises(DomainError):
        spd_sqrt(np.diag([1.0, -1.0]))


def test_trace_bound():
    lhs, rhs = trace_bound_check(np.eye(3), np.diag([1.0, 2.0, 3.0]))
    assert (lhs, rhs) == pytest.approx((6.0, 9.0))
    rng = np.random.default_rng(9)
    for _ in range(1000):
        a = rng.standard_normal((10, 10))
        lhs, rhs = trace_bound_check(a @ a.T, rng.standard_normal((10, 10)))
        assert lhs <= rhs * (1 + 1e-12) + 1e-12
