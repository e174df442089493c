import math

import numpy as np
import pytest

from ..lib.errors import DomainError, IllConditionedError
from ..lib.ridge_disparity import (
    NoiseSpec,
    RidgeScenario,
    directional_derivative_check,
    g1_scaling_slope,
    gaps_for_gram,
    general_gram_disparity,
    ols_estimate,
    orthogonal_ratio_grid,
    population_group_loss,
    ridge_estimate,
    ridge_group_losses,
    sample_gram,
    taylor_first_order,
    tech_data_envelopes,
    toy_orthogonal_disparity,
)


def orthogonal_scenario(k1=100, k2=10):
    return RidgeScenario([1.0, 0.0], [0.0, 1.0], k1, k2, 1.0, [1.0, 1.0])


def skewed_scenario(k1=1000, k2=10, lambda_prime=1.0):
    return RidgeScenario([1.0, 0.3, 0.0], [0.2, 1.0, 0.5], k1, k2, lambda_prime, [1.0, -0.5, 2.0])


def test_orthogonal_closed_form():
    toy = toy_orthogonal_disparity(orthogonal_scenario())
    assert toy.closed1 == pytest.approx(1 / 101)
    assert toy.closed2 == pytest.approx(1 / 11)
    assert toy.max_discrepancy <= 1e-12
    assert toy.ratio == pytest.approx(101 / 11)


def test_orthogonal_requires_orthogonal_means():
    with pytest.raises(DomainError):
        toy_orthogonal_disparity(skewed_scenario())


def test_orthogonal_ratio_grows_with_imbalance():
    rows = orthogonal_ratio_grid(orthogonal_scenario(10, 10), [1, 10, 100])
    assert [k for k, _ in rows] == [1.0, 10.0, 100.0]
    assert rows[0][1] == pytest.approx(1.0)
    assert rows[2][1] == pytest.approx(1001 / 11)
    assert all(b > a for (_, a), (_, b) in zip(rows, rows[1:]))


def test_scenario_validation():
    with pytest.raises(DomainError):
        RidgeScenario([1.0, 0.0], [0.0, 1.0], 5, 10, 1.0, [1.0, 1.0])
    with pytest.raises(DomainError):
        RidgeScenario([1.0, 0.0], [0.0, 1.0], 10, 5, 0.0, [1.0, 1.0])
    with pytest.raises(DomainError):
        RidgeScenario([1.0, 0.0], [0.0, 1.0, 0.0], 10, 5, 1.0, [1.0, 1.0])


def test_parallel_means_are_ill_conditioned():
    scenario = RidgeScenario([1.0, 0.0], [2.0, 0.0], 10, 5, 1.0, [1.0, 1.0])
    with pytest.raises(IllConditionedError):
        general_gram_disparity(scenario)


def test_spectral_matches_dense_path():
    result = general_gram_disparity(skewed_scenario())
    scale = max(1.0, abs(result.g1), abs(result.g2))
    assert result.path_discrepancy <= 1e-10 * scale
    assert result.bounds is not None
    assert abs(result.g2) > abs(result.g1)


def test_ridge_estimate_from_design():
    rng = np.random.default_rng(0)
    design = rng.standard_normal((30, 4))
    beta = np.array([1.0, -2.0, 0.5, 0.0])
    from_design = ridge_estimate(design, 0.7, beta, design=True)
    from_gram = ridge_estimate(design.T @ design, 0.7, beta)
    assert np.allclose(from_design, from_gram)
    assert np.allclose(ols_estimate(design, design @ beta), beta)


def test_ridge_group_losses_share_common_term():
    scenario = RidgeScenario([1.0, 0.0], [0.0, 1.0], 100, 10, 1.0, [1.0, 1.0], sigma_pop=np.eye(2))
    losses = ridge_group_losses(scenario)
    assert losses.loss1 - losses.common == pytest.approx(0.5 * (1 / 101) ** 2)
    assert losses.loss2 - losses.common == pytest.approx(0.5 * (1 / 11) ** 2)
    assert losses.disparity > 0
    exact = population_group_loss(scenario, scenario.beta_star)
    assert (exact.loss1, exact.loss2) == (0.0, 0.0)


def test_g1_decays_like_inverse_count():
    slope = g1_scaling_slope(skewed_scenario(k2=10), [10_000, 100_000, 1_000_000])
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_directional_derivative():
    scenario = skewed_scenario(k1=3, k2=1)
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3))
    rows = directional_derivative_check(scenario, a + a.T, [1e-2, 1e-4, 1e-6])
    assert rows[1]["error1"] < rows[0]["error1"]
    assert rows[1]["error2"] < rows[0]["error2"]
    assert rows[-1]["error1"] <= 1e-4
    assert rows[-1]["error2"] <= 1e-4


def test_taylor_expansion():
    scenario = skewed_scenario(k1=3, k2=1)
    at_base = taylor_first_order(scenario, scenario.gram())
    assert (at_base.g_tilde1, at_base.g_tilde2) == pytest.approx((at_base.g1, at_base.g2))
    direction = np.diag([1.0, -0.5, 0.25])
    for t in (1e-2, 1e-3):
        moved = scenario.gram() + t * direction
        expansion = taylor_first_order(scenario, moved)
        g1, g2 = gaps_for_gram(scenario, moved)
        assert abs(expansion.g_tilde1 - g1) <= 10 * t * t
        assert abs(expansion.g_tilde2 - g2) <= 10 * t * t


def test_envelopes_are_finite():
    report = tech_data_envelopes(skewed_scenario())
    assert all(math.isfinite(v) for v in (report.norm1, report.norm2, report.envelope1, report.envelope2))
    assert report.m1_norm > 0 and report.m2_norm > 0
    assert set(report.to_dict()) >= {"within1", "within2"}


def test_sampled_gram_decomposition():
    scenario = skewed_scenario(k1=200, k2=20)
    pair = sample_gram(scenario, NoiseSpec(0.1), np.random.default_rng(2))
    assert pair.decomposition_residual(scenario) <= 1e-9 * np.linalg.norm(pair.s_prime)
    rng = np.random.default_rng(3)
    for _ in range(20):
        lhs, rhs = pair.trace_check(rng.standard_normal((3, 3)))
        assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_noiseless_sample_is_the_ideal_gram():
    scenario = skewed_scenario(k1=20, k2=5)
    pair = sample_gram(scenario, NoiseSpec(0.0), np.random.default_rng(4))
    assert np.allclose(pair.s_prime, pair.s)
    assert not np.any(pair.q)


def test_noise_spec():
    draws = NoiseSpec(4.0, "rademacher").draw(np.random.default_rng(5), (10, 3))
    assert set(np.unique(draws)) <= {-2.0, 2.0}
    with pytest.raises(DomainError):
        NoiseSpec(-1.0)
    with pytest.raises(DomainError):
        NoiseSpec(1.0, "uniform")
