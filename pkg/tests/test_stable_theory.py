import math

import numpy as np
import pytest

from ..lib import gaussian_theory
from ..lib.classifier import AllNegative, LinearClassifier, PerturbSpec, lp_norm
from ..lib.errors import DomainError
from ..lib.stable_dist import standard_cdf
from ..lib.stable_theory import (
    SasMixture,
    SphereOptions,
    cauchy_analysis,
    cauchy_d,
    cauchy_d_derivative,
    cauchy_direction,
    cauchy_overall_loss,
    classify_ic_case,
    collapse_threshold,
    ec_classwise_losses,
    ic_classwise_losses,
    ic_comparison,
    rescale_ic,
    robust_sphere_objective,
    solve_ec,
    solve_ic_robust,
    solve_ic_standard,
)


def symmetric_ic(theta_bar, alpha, imbalance=1.0):
    half = np.asarray(theta_bar, dtype=float) / 2
    return SasMixture.independent(half, -half, alpha, imbalance)


def random_sphere_points(rng, dim, alpha, count):
    points = rng.standard_normal((count, dim))
    return points / np.array([lp_norm(p, alpha) for p in points])[:, None]


def test_ic_standard_l2():
    clf = solve_ic_standard(symmetric_ic([3.0, 4.0], 2.0))
    assert np.allclose(clf.w, [0.6, 0.8])
    assert clf.b == pytest.approx(0.0, abs=1e-15)
    assert float(clf.w @ np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_ic_standard_dual_norm_value():
    mix = symmetric_ic([1.0, 2.0], 1.5)
    clf = solve_ic_standard(mix)
    assert lp_norm(clf.w, 1.5) == pytest.approx(1.0)
    assert float(clf.w @ mix.theta_bar) == pytest.approx(9 ** (1 / 3))


def test_ic_standard_isotropic():
    clf = solve_ic_standard(symmetric_ic([0.7, 0.7, 0.7], 1.3))
    assert np.allclose(clf.w, clf.w[0])


def test_ic_standard_is_holder_optimal():
    theta_bar = np.array([1.0, -0.4, 0.25, 0.8])
    mix = symmetric_ic(theta_bar, 1.6)
    best = float(solve_ic_standard(mix).w @ theta_bar)
    for w in random_sphere_points(np.random.default_rng(1), 4, 1.6, 500):
        assert float(w @ theta_bar) <= best + 1e-9


def test_ic_requires_alpha_above_one():
    with pytest.raises(DomainError):
        solve_ic_standard(symmetric_ic([1.0, 0.5], 1.0))


def test_ic_general_scales_rescale():
    mix = SasMixture.independent([1.0, 0.5], [-1.0, -0.5], 1.5, scales=[2.0, 0.5])
    clf = solve_ic_standard(mix)
    rescaled, scales = rescale_ic(mix)
    assert np.allclose(scales, [2.0, 0.5])
    inner = solve_ic_standard(rescaled)
    original = ic_classwise_losses(mix, clf)
    reference = ic_classwise_losses(rescaled, inner)
    assert original.loss_plus == pytest.approx(reference.loss_plus, abs=1e-12)
    assert original.loss_minus == pytest.approx(reference.loss_minus, abs=1e-12)


def test_ic_robust_needs_unit_scales():
    mix = SasMixture.independent([1.0, 0.5], [-1.0, -0.5], 1.5, scales=[2.0, 0.5])
    with pytest.raises(DomainError):
        solve_ic_robust(mix, PerturbSpec(p=2, epsilon=0.1))


def test_ic_robust_same_norm_keeps_value():
    mix = symmetric_ic([1.2, 0.4, 0.1], 1.5)
    pert = PerturbSpec(p=3.0, epsilon=0.1)
    assert pert.q == pytest.approx(1.5)
    std_value = float(solve_ic_standard(mix).w @ mix.theta_bar)
    rob = solve_ic_robust(mix, pert)
    assert rob.value == pytest.approx(std_value - 2 * pert.epsilon, abs=1e-7)
    assert float(rob.classifier.w @ mix.theta_bar) == pytest.approx(std_value, abs=1e-6)


def test_ic_robust_isotropic_matches_standard():
    mix = symmetric_ic([0.6, 0.6, 0.6], 1.7)
    pert = PerturbSpec(p=2.0, epsilon=0.1)
    comparison = ic_comparison(mix, pert)
    assert comparison.case == "isotropic"
    assert np.allclose(comparison.rob.classifier.w, comparison.std.w, atol=1e-6)
    assert comparison.rob_losses.loss_plus == pytest.approx(comparison.std_losses.loss_plus, abs=1e-6)


def test_ic_robust_degrades_value():
    theta_bar = np.array([1.0, 0.2, 0.05])
    mix = symmetric_ic(theta_bar, 1.8)
    pert = PerturbSpec(p=1.5, epsilon=0.1)
    assert pert.q == pytest.approx(3.0)
    comparison = ic_comparison(mix, pert)
    assert comparison.case == "degrade"
    assert comparison.rob_margin < lp_norm(theta_bar, 1.8 / 0.8) - 1e-9
    assert comparison.value_drop > 1e-9
    assert comparison.rob_losses.loss_plus > comparison.std_losses.loss_plus


def test_ic_robust_objective_optimality():
    theta_bar = np.array([1.0, 0.2, 0.05])
    pert = PerturbSpec(p=1.5, epsilon=0.1)
    rob = solve_ic_robust(symmetric_ic(theta_bar, 1.8), pert, SphereOptions(seed=3))
    rng = np.random.default_rng(2)
    for w in random_sphere_points(rng, 3, 1.8, 500):
        assert robust_sphere_objective(w, theta_bar, pert) <= rob.value + 1e-7
    for _ in range(50):
        w = rob.classifier.w + 1e-3 * rng.standard_normal(3)
        w = w / lp_norm(w, 1.8)
        assert robust_sphere_objective(w, theta_bar, pert) <= rob.value + 1e-7


def test_classify_ic_cases():
    mix = symmetric_ic([1.0, 0.5], 1.5)
    assert classify_ic_case(mix, PerturbSpec(p=2, epsilon=0.0)) == "no_attack"
    assert classify_ic_case(mix, PerturbSpec(p=3, epsilon=0.1)) == "same_norm"
    assert classify_ic_case(mix, PerturbSpec(p=math.inf, epsilon=0.1)) == "outside"
    assert classify_ic_case(mix, PerturbSpec(p=2, epsilon=0.1)) == "degrade"
    assert classify_ic_case(symmetric_ic([1.0, -1.0], 1.5), PerturbSpec(p=2, epsilon=0.1)) == "isotropic"


def test_ic_losses_balanced_optimal():
    mix = symmetric_ic([1.0, 0.5, 0.2], 1.5)
    clf = solve_ic_standard(mix)
    losses = ic_classwise_losses(mix, clf)
    expected = standard_cdf(1.5, -float(clf.w @ mix.theta_bar) / 2)
    assert losses.loss_plus == pytest.approx(expected)
    assert losses.loss_minus == pytest.approx(expected)


def test_ic_losses_zero_margin():
    mix = SasMixture.independent([1.0, 0.0], [-1.0, 0.0], 1.5)
    losses = ic_classwise_losses(mix, LinearClassifier([0.0, 1.0], 0.0))
    assert losses.loss_plus == pytest.approx(0.5)
    assert losses.loss_minus == pytest.approx(0.5)


def test_ic_losses_all_negative():
    mix = symmetric_ic([1.0, 0.5], 1.5)
    losses = ic_classwise_losses(mix, AllNegative(np.array([1.0, 0.0])), PerturbSpec(p=2, epsilon=0.1))
    assert (losses.loss_plus, losses.loss_minus) == (1.0, 0.0)
    assert losses.robust_plus == 1.0


def test_ec_alpha_two_matches_gaussian_with_doubled_covariance():
    shape = np.array([[1.0, 0.3], [0.3, 0.8]])
    mix = SasMixture.elliptical([0.8, 0.1], [-0.4, -0.3], 2.0, shape)
    gaussian = gaussian_theory.GaussianMixture([0.8, 0.1], [-0.4, -0.3], 2 * shape)
    clf = LinearClassifier([0.7, -0.2], 0.1)
    pert = PerturbSpec(p=2, epsilon=0.05)
    ec = ec_classwise_losses(mix, clf, pert)
    ref = gaussian_theory.classwise_losses(gaussian, clf, pert)
    assert ec.loss_plus == pytest.approx(ref.loss_plus, abs=1e-9)
    assert ec.robust_minus == pytest.approx(ref.robust_minus, abs=1e-9)


def test_ec_and_ic_scales_differ():
    ic = SasMixture.independent([1.0, 0.5], [-1.0, -0.5], 1.5)
    ec = SasMixture.elliptical([1.0, 0.5], [-1.0, -0.5], 1.5, np.eye(2))
    clf = LinearClassifier([1.0, 1.0], 0.0)
    assert ic_classwise_losses(ic, clf).loss_plus != pytest.approx(ec_classwise_losses(ec, clf).loss_plus)
    with pytest.raises(DomainError):
        ec_classwise_losses(ic, clf)


def test_ec_robust_worse_on_both_classes():
    shape = [[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.8]]
    mix = SasMixture.elliptical([0.8, 0.4, 0.2], [-0.8, -0.4, -0.2], 1.5, shape)
    solution = solve_ec(mix, PerturbSpec(p=2, epsilon=0.1))
    assert solution.angle_degrees > 1e-3
    assert solution.both_classes_worse


def test_ec_requires_balance():
    mix = SasMixture.elliptical([0.8, 0.4], [-0.8, -0.4], 1.5, np.eye(2), imbalance=2.0)
    with pytest.raises(DomainError):
        solve_ec(mix, PerturbSpec(p=2, epsilon=0.1))


# -- Cauchy ------------------------------------------------------------------


def cauchy_mix(imbalance=2.0, theta_plus=(2.5, 0.5)):
    theta_plus = np.asarray(theta_plus, dtype=float)
    return SasMixture.independent(theta_plus, -theta_plus, 1.0, imbalance)


def test_cauchy_direction_picks_peak():
    assert cauchy_direction(np.array([0.5, -3.0, 3.0])).tolist() == [0.0, -1.0, 0.0]


def test_cauchy_discriminants_agree():
    analysis = cauchy_analysis(cauchy_mix(), PerturbSpec(p=math.inf, epsilon=0.5, kappa=0.5))
    quads = analysis.quadratics
    assert quads.delta1 == pytest.approx(quads.delta1_closed, abs=1e-10)
    assert quads.delta2 == pytest.approx(quads.delta2_closed, abs=1e-10)
    assert quads.delta1_closed == pytest.approx(2 * 25 - 1)
    assert quads.d_zero == pytest.approx(math.sqrt(quads.delta1))


def test_cauchy_without_attack():
    analysis = cauchy_analysis(cauchy_mix(), PerturbSpec(p=math.inf, epsilon=0.0))
    assert analysis.quadratics.d_eps == pytest.approx(analysis.quadratics.d_zero)
    assert analysis.rob.loss_plus == pytest.approx(analysis.std.loss_plus)
    assert analysis.gap == pytest.approx(0.0, abs=1e-14)


def test_cauchy_reduces_disparity():
    analysis = cauchy_analysis(cauchy_mix(), PerturbSpec(p=math.inf, epsilon=0.5, kappa=0.5))
    assert analysis.theorem_condition
    assert analysis.quadratics.d_eps > analysis.quadratics.d_zero
    assert analysis.rob.ad < analysis.std.ad
    assert analysis.rob.loss_minus > analysis.std.loss_minus
    assert analysis.rob.loss_plus < analysis.std.loss_plus
    assert all(analysis.finite_is_global.values())


def test_cauchy_closed_losses_match_generic_losses():
    analysis = cauchy_analysis(cauchy_mix(3.0), PerturbSpec(p=math.inf, epsilon=0.3, kappa=0.5))
    for report in (analysis.std, analysis.rob):
        assert report.loss_plus == pytest.approx(report.extra["generic_loss_plus"], abs=1e-12)
        assert report.loss_minus == pytest.approx(report.extra["generic_loss_minus"], abs=1e-12)


def test_cauchy_d_derivative_positive():
    t, imbalance, kappa = 5.0, 2.0, 0.5
    for s in np.linspace(0, kappa * t / 2, 11):
        derivative = cauchy_d_derivative(t, imbalance, s)
        h = 1e-6
        finite = (cauchy_d(t, imbalance, s + h) - cauchy_d(t, imbalance, s - h)) / (2 * h)
        assert derivative > 0
        assert finite == pytest.approx(derivative, abs=1e-6)


@pytest.mark.parametrize("epsilon", [0.0, 0.4])
def test_cauchy_loss_slope_sign_follows_quadratic(epsilon):
    mix = cauchy_mix(2.0)
    analysis = cauchy_analysis(mix, PerturbSpec(p=math.inf, epsilon=epsilon))
    quads = analysis.quadratics
    w = cauchy_direction(mix.theta_bar)
    h = 1e-6
    for b in np.linspace(-20, 20, 81):
        value = quads.q2(b) if epsilon else quads.q1(b)
        if abs(value) < 1e-3:
            continue
        slope = (cauchy_overall_loss(mix, w, b + h, epsilon) - cauchy_overall_loss(mix, w, b - h, epsilon)) / (2 * h)
        assert np.sign(slope) == np.sign(value)


def test_cauchy_collapse():
    mix = cauchy_mix(4.0, theta_plus=(0.25, 0.1))
    assert mix.imbalance >= collapse_threshold(mix.theta_bar)
    analysis = cauchy_analysis(mix, PerturbSpec(p=math.inf, epsilon=0.05))
    assert analysis.collapsed
    assert isinstance(analysis.std_classifier, AllNegative)
    assert (analysis.std.loss_plus, analysis.std.loss_minus) == (1.0, 0.0)
    assert analysis.gap == 0.0
    w = cauchy_direction(mix.theta_bar)
    losses = [cauchy_overall_loss(mix, w, b) for b in (0.0, -10.0, -1e3, -1e6)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert losses[-1] == pytest.approx(1 / 5, abs=1e-6)


def test_cauchy_balanced_takes_midpoint():
    analysis = cauchy_analysis(cauchy_mix(1.0), PerturbSpec(p=math.inf, epsilon=0.2))
    assert analysis.quadratics is None
    assert analysis.std_classifier.b == pytest.approx(0.0)
    assert analysis.std.loss_plus == pytest.approx(0.5 + math.atan(-2.5) / math.pi)


def test_cauchy_rejects_other_settings():
    with pytest.raises(DomainError):
        cauchy_analysis(cauchy_mix(), PerturbSpec(p=2, epsilon=0.1))
    with pytest.raises(DomainError):
        cauchy_analysis(symmetric_ic([1.0, 0.5], 1.5, 2.0), PerturbSpec(p=math.inf, epsilon=0.1))
    with pytest.raises(DomainError):
        cauchy_analysis(cauchy_mix(), PerturbSpec(p=math.inf, epsilon=2.0, kappa=0.5))
