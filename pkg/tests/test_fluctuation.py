import numpy as np
import pytest

from varq.fields import PhysicalParams
from varq.fluctuation import (
    FluctuationSample,
    NonConvergenceError,
    TransitionDistribution,
    default_window,
    fluctuation_sigma,
    kl_divergence,
    optimal_transition,
    optimize_transition_numeric,
    sample_displacements,
    sample_fluctuations,
    transition_grid,
    transition_objective,
)

P1 = PhysicalParams(mass=1.0)
DT = 0.1


def test_sigma_formula():
    assert fluctuation_sigma(P1, DT)[0] == pytest.approx(np.sqrt(0.05))
    p = PhysicalParams(hbar=2.0, mass=4.0)
    assert fluctuation_sigma(p, 0.2)[0] == pytest.approx(np.sqrt(2.0 * 0.2 / 8.0))
    with pytest.raises(ValueError):
        fluctuation_sigma(P1, 0.0)


def test_default_window_floor_and_sigma_scaling():
    assert default_window(P1, DT)[0] == 6.0
    p = PhysicalParams(mass=1e-4)
    sig = fluctuation_sigma(p, DT)[0]
    assert default_window(p, DT)[0] == pytest.approx(8.0 * sig)


def test_window_too_small_raises_with_bound():
    with pytest.raises(ValueError, match="tail mass"):
        transition_grid(P1, DT, window=(0.5,))


# -- closed form -------------------------------------------------------------

def test_variance_matches_hbar_dt_over_2m():
    dist = optimal_transition(P1, DT)
    assert dist.mean()[0] == pytest.approx(0.0, abs=1e-14)
    assert dist.variance()[0] == pytest.approx(0.05, rel=1e-9)


def test_variance_scaling_in_mass_and_dt():
    d2 = optimal_transition(PhysicalParams(mass=2.0), DT)
    assert d2.variance()[0] == pytest.approx(0.025, rel=1e-9)
    d3 = optimal_transition(P1, 0.4)
    assert d3.variance()[0] == pytest.approx(0.2, rel=1e-9)
    d4 = optimal_transition(PhysicalParams(hbar=2.0), DT)
    assert d4.variance()[0] == pytest.approx(0.1, rel=1e-9)


def test_classical_limit_variance_collapses():
    dist = optimal_transition(PhysicalParams(mass=1e6), DT)
    assert dist.variance()[0] == pytest.approx(5e-8, rel=1e-6)


def test_uncertainty_product_of_distribution():
    dist = optimal_transition(P1, DT)
    prod = P1.mass_along(0) * dist.variance()[0] / DT
    assert prod == pytest.approx(0.5 * P1.hbar, rel=1e-9)


def test_window_insensitivity_once_tails_are_negligible():
    base = optimal_transition(P1, DT)
    wide = optimal_transition(P1, DT, window=(12.0,))
    assert abs(base.variance()[0] - wide.variance()[0]) <= 1e-8 * 0.05


def test_bipartite_product_distribution():
    p = PhysicalParams(mass=(1.0, 2.0))
    dist = optimal_transition(p, DT)
    assert dist.grid.dimension == 2
    var = dist.variance()
    assert var[0] == pytest.approx(0.05, rel=1e-9)
    assert var[1] == pytest.approx(0.025, rel=1e-9)
    assert abs(dist.covariance()) <= 1e-14


def test_mass_validation():
    dist = optimal_transition(P1, DT)
    with pytest.raises(ValueError):
        TransitionDistribution(dist.grid, -dist.mass, DT, P1, dist.window)
    with pytest.raises(ValueError):
        TransitionDistribution(dist.grid, dist.mass[:-1], DT, P1, dist.window)
    with pytest.raises(ValueError):
        dist.covariance()


# -- iterative optimizer -----------------------------------------------------

def test_optimizer_from_uniform_matches_closed_form():
    closed = optimal_transition(P1, DT)
    num, iters = optimize_transition_numeric(P1, DT)
    assert kl_divergence(num, closed) <= 1e-8
    assert kl_divergence(closed, num) <= 1e-8
    assert iters < 200


def test_optimizer_objective_not_above_closed_form():
    closed = optimal_transition(P1, DT)
    num, _ = optimize_transition_numeric(P1, DT)
    assert transition_objective(num) <= transition_objective(closed) + 1e-10


def test_optimizer_gaussian_init_converges_immediately():
    closed = optimal_transition(P1, DT)
    num, iters = optimize_transition_numeric(P1, DT, init=closed)
    assert iters <= 2
    assert kl_divergence(num, closed) <= 1e-12


def test_optimizer_rejects_nonpositive_init():
    closed = optimal_transition(P1, DT)
    mass = closed.mass.copy()
    mass[0] = 0.0
    bad = TransitionDistribution(closed.grid, mass, DT, P1, closed.window)
    with pytest.raises(ValueError, match="strictly positive"):
        optimize_transition_numeric(P1, DT, init=bad)


def test_optimizer_step_validation_and_cap():
    with pytest.raises(ValueError):
        optimize_transition_numeric(P1, DT, step=0.0)
    with pytest.raises(NonConvergenceError):
        optimize_transition_numeric(P1, DT, max_iter=2)


def test_optimizer_bipartite():
    p = PhysicalParams(mass=(1.0, 2.0))
    closed = optimal_transition(p, DT)
    num, _ = optimize_transition_numeric(p, DT)
    assert kl_divergence(num, closed) <= 1e-8


def test_kl_divergence_properties():
    closed = optimal_transition(P1, DT)
    assert kl_divergence(closed, closed) == 0.0
    other = optimal_transition(PhysicalParams(mass=1.3), DT)
    with pytest.raises(ValueError):
        kl_divergence(closed, other)  # different grids
    mass = closed.mass.copy()
    mass[mass.size // 2] = 0.0
    holed = TransitionDistribution(closed.grid, mass, DT, P1, closed.window)
    assert kl_divergence(closed, holed) == np.inf


# -- sampling ----------------------------------------------------------------

def test_sampling_deterministic_for_seed():
    dist = optimal_transition(P1, DT)
    a = sample_displacements(dist, 50_000, seed=42)
    b = sample_displacements(dist, 50_000, seed=42)
    assert np.array_equal(a, b)
    c = sample_displacements(dist, 50_000, seed=43)
    assert not np.array_equal(a, c)


def test_sampling_prefix_stable_under_larger_draw():
    # chunked substreams: the first chunk of a longer draw is unchanged
    dist = optimal_transition(P1, DT)
    short = sample_displacements(dist, 70_000, seed=7)
    long = sample_displacements(dist, 140_000, seed=7)
    assert np.array_equal(short, long[:70_000])


def test_sample_moments_and_product():
    dist = optimal_transition(P1, DT)
    rep = sample_fluctuations(dist, 200_000, seed=11)
    assert isinstance(rep, FluctuationSample)
    assert abs(rep.mean[0]) <= 5.0 * np.sqrt(0.05 / rep.n)
    assert rep.variance[0] == pytest.approx(0.05, rel=0.02)
    assert rep.position_momentum_product[0] == pytest.approx(0.5, rel=0.01)
    assert rep.expected_product == 0.5


def test_sample_error_scales_like_inverse_sqrt_n():
    dist = optimal_transition(P1, DT)
    target = dist.variance()[0]
    for n in (10_000, 100_000, 1_000_000):
        rep = sample_fluctuations(dist, n, seed=5)
        err = abs(rep.variance[0] - target)
        assert err <= 5.0 * target * np.sqrt(2.0 / n)


def test_bipartite_sampled_covariance_within_mc_noise():
    p = PhysicalParams(mass=(1.0, 2.0))
    dist = optimal_transition(p, DT)
    rep = sample_fluctuations(dist, 200_000, seed=23)
    assert rep.covariance is not None
    assert abs(rep.covariance) <= 3.0 * rep.covariance_mc_sigma


def test_sample_count_validation():
    dist = optimal_transition(P1, DT)
    with pytest.raises(ValueError):
        sample_displacements(dist, 0, seed=1)
