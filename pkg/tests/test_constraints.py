import numpy as np
import pytest

from varq.grid import GridSpec, RealField, integrate_values
from varq.fields import (
    Free,
    Harmonic,
    MadelungState,
    PairwiseRelative,
    PhysicalParams,
)
from varq.constraints import (
    BracketReport,
    DensityStationarity,
    EnsembleHamiltonian,
    LocalMomentum,
    RelativeDensity,
    TotalMomentum,
    augmented_total_action,
    classical_consistency,
    evaluate_constraint,
    functional_derivative,
    poisson_bracket,
    stationarity_residuals,
    weak_equality,
)

from conftest import harmonic_ground_state, random_smooth_state


def plane_phase_state(grid, momentum, sigma=1.0):
    x = grid.coordinates()[0]
    rho = np.exp(-x**2 / (2.0 * sigma**2))
    rho /= np.sum(rho * grid.node_volumes())
    return MadelungState(RealField(grid, rho), RealField(grid, momentum * x))


def relative_gaussian_2d(grid):
    a, b = grid.meshes()
    span = grid.axes[0].span
    r = np.mod(a - b + 0.5 * span, span) - 0.5 * span
    rho = np.exp(-r**2)
    rho /= np.sum(rho * grid.node_volumes())
    return MadelungState(RealField(grid, rho),
                         RealField(grid, np.zeros(grid.shape)))


# -- constraint values -------------------------------------------------------

def test_local_momentum_value_plane_phase():
    g = GridSpec.line(512, -8.0, 8.0)
    st = plane_phase_state(g, momentum=0.7)
    c = LocalMomentum(p_c=0.0)
    assert evaluate_constraint(c, st) == pytest.approx(0.7, abs=1e-10)
    c2 = LocalMomentum(p_c=0.7)
    assert evaluate_constraint(c2, st) == pytest.approx(0.0, abs=1e-10)


def test_local_momentum_zero_on_real_state():
    g = GridSpec.line(512, -8.0, 8.0)
    st = harmonic_ground_state(g)
    assert evaluate_constraint(LocalMomentum(), st) == pytest.approx(0.0,
                                                                     abs=1e-12)


def test_density_stationarity_value_and_aux_requirement():
    g = GridSpec.line(256, -8.0, 8.0)
    st = harmonic_ground_state(g)
    c = DensityStationarity()
    with pytest.raises(ValueError):
        evaluate_constraint(c, st)
    aux = RealField.full(g, 0.0)
    assert evaluate_constraint(c, st, aux) == 0.0
    x = g.coordinates()[0]
    aux2 = RealField(g, np.cos(x))
    expected = integrate_values(st.density.values * np.cos(x), g)
    assert evaluate_constraint(c, st, aux2) == pytest.approx(expected, abs=1e-14)


def test_total_momentum_value_2d():
    g = GridSpec.square(128, 0.0, 12.0, "periodic")
    st = relative_gaussian_2d(g)
    assert evaluate_constraint(TotalMomentum(), st) == pytest.approx(0.0,
                                                                     abs=1e-12)
    with pytest.raises(ValueError):
        evaluate_constraint(TotalMomentum(),
                            harmonic_ground_state(GridSpec.line(64, -4, 4)))


def test_relative_density_value_vanishes_for_relative_states():
    g = GridSpec.square(128, 0.0, 12.0, "periodic")
    st = relative_gaussian_2d(g)
    # the density depends on x_a - x_b only, so the transported sum cancels
    assert evaluate_constraint(RelativeDensity(), st) == pytest.approx(0.0,
                                                                       abs=1e-12)


def test_relative_density_gradients_identically_zero():
    g = GridSpec.square(96, 0.0, 12.0, "periodic")
    st = relative_gaussian_2d(g)
    c = RelativeDensity()
    assert np.all(c.gradient_density(st).values == 0.0)
    assert np.all(c.gradient_action(st).values == 0.0)


def test_ensemble_hamiltonian_ground_state_energy():
    # stationary trap ground state: <V + Q> = hbar omega / 2
    g = GridSpec.line(1024, -8.0, 8.0)
    st = harmonic_ground_state(g)
    h = EnsembleHamiltonian(PhysicalParams(potential=Harmonic()))
    assert h.value(st) == pytest.approx(0.5, abs=1e-6)
    h_cl = EnsembleHamiltonian(PhysicalParams(potential=Harmonic()),
                               include_quantum=False)
    assert h_cl.value(st) == pytest.approx(0.25, abs=1e-6)


# -- functional derivatives, numeric backend ---------------------------------

def test_local_momentum_gradients_match_numeric():
    rng = np.random.default_rng(31)
    st = random_smooth_state(rng, n=512)
    c = LocalMomentum(p_c=0.2)
    for comp in ("density", "action"):
        ana = functional_derivative(c, st, comp)
        num = functional_derivative(c, st, comp, backend="numeric")
        scale = max(np.max(np.abs(ana.values)), 1.0)
        assert np.max(np.abs(ana.values - num.values)) <= 1e-5 * scale


def test_ensemble_hamiltonian_gradients_match_numeric():
    rng = np.random.default_rng(37)
    st = random_smooth_state(rng, n=512)
    h = EnsembleHamiltonian(PhysicalParams(potential=Harmonic()))
    for comp in ("density", "action"):
        ana = functional_derivative(h, st, comp)
        num = functional_derivative(h, st, comp, backend="numeric")
        scale = max(np.max(np.abs(ana.values)), 1.0)
        assert np.max(np.abs(ana.values - num.values)) <= 1e-5 * scale


def test_functional_derivative_validation():
    g = GridSpec.line(64, -4.0, 4.0)
    st = harmonic_ground_state(g)
    with pytest.raises(ValueError):
        functional_derivative(LocalMomentum(), st, "phase")
    with pytest.raises(ValueError):
        functional_derivative(LocalMomentum(), st, "density", backend="exact")


# -- Poisson brackets --------------------------------------------------------

def test_bracket_local_momentum_with_hamiltonian_weakly_zero():
    g = GridSpec.line(1024, -8.0, 8.0)
    st = harmonic_ground_state(g)
    p = PhysicalParams(potential=Harmonic())
    rep = poisson_bracket(LocalMomentum(), EnsembleHamiltonian(p), st)
    assert isinstance(rep, BracketReport)
    assert rep.scale > 0
    assert abs(rep.value) / rep.scale <= 1e-4
    assert rep.consistent


def test_bracket_density_stationarity_exactly_zero():
    g = GridSpec.line(512, -8.0, 8.0)
    st = harmonic_ground_state(g)
    p = PhysicalParams(potential=Harmonic())
    aux = RealField.full(g, 0.0)
    rep = poisson_bracket(DensityStationarity(), EnsembleHamiltonian(p), st,
                          aux_f=aux)
    assert rep.value == 0.0
    assert rep.consistent


def test_bracket_relative_density_exactly_zero():
    g = GridSpec.square(96, 0.0, 12.0, "periodic")
    st = relative_gaussian_2d(g)
    p = PhysicalParams(mass=(1.0, 2.0),
                       potential=PairwiseRelative(Harmonic()))
    rep = poisson_bracket(RelativeDensity(), EnsembleHamiltonian(p), st)
    assert rep.value == 0.0


def test_bracket_antisymmetry_exact():
    rng = np.random.default_rng(41)
    st = random_smooth_state(rng, n=256)
    p = PhysicalParams(potential=Harmonic())
    f = LocalMomentum(p_c=0.1)
    h = EnsembleHamiltonian(p)
    ab = poisson_bracket(f, h, st)
    ba = poisson_bracket(h, f, st)
    assert ab.value == -ba.value
    assert ab.scale == ba.scale


def test_bracket_nonvanishing_case_detected():
    # {local momentum, H} on a strongly tilted state is not weakly zero
    g = GridSpec.line(512, -8.0, 8.0)
    x = g.coordinates()[0]
    rho = np.exp(-((x - 1.5) ** 2))
    rho /= np.sum(rho * g.node_volumes())
    st = MadelungState(RealField(g, rho), RealField(g, np.zeros(512)))
    p = PhysicalParams(potential=Harmonic(k=25.0))
    rep = poisson_bracket(LocalMomentum(), EnsembleHamiltonian(p), st)
    assert not rep.consistent


def test_weak_equality_rule():
    assert weak_equality(5e-7, 0.0)
    assert weak_equality(5e-5, 1.0)
    assert not weak_equality(2e-4, 1.0)


# -- augmented action --------------------------------------------------------

def _stationary_trajectory(g, n_slices=5, dt=0.01, e0=0.5):
    states = []
    for j in range(n_slices):
        base = harmonic_ground_state(g)
        s = np.full(g.shape, -e0 * j * dt)
        states.append(MadelungState(base.density, RealField(g, s)))
    return states


def test_augmented_action_reduces_to_base_at_zero_multipliers():
    g = GridSpec.line(512, -8.0, 8.0)
    p = PhysicalParams(potential=Harmonic())
    states = _stationary_trajectory(g)
    res = augmented_total_action(states, 0.01, p,
                                 [LocalMomentum(), DensityStationarity()],
                                 [0.0, 0.0])
    assert res.total == res.base.total
    assert res.constraint_terms == (0.0, 0.0)


def test_augmented_action_linear_in_multiplier():
    g = GridSpec.line(512, -8.0, 8.0)
    p = PhysicalParams(potential=Harmonic())
    states = _stationary_trajectory(g)
    c = LocalMomentum(p_c=0.3)
    r1 = augmented_total_action(states, 0.01, p, [c], [2.0])
    r2 = augmented_total_action(states, 0.01, p, [c], [4.0])
    assert r2.constraint_terms[0] == pytest.approx(2.0 * r1.constraint_terms[0],
                                                   rel=1e-12)
    # d(total)/d(lambda) equals the time-integrated constraint
    dt_total = r2.total - r1.total
    assert dt_total == pytest.approx(r1.constraint_terms[0], rel=1e-9)


def test_augmented_action_multiplier_count_mismatch():
    g = GridSpec.line(256, -8.0, 8.0)
    states = _stationary_trajectory(g)
    with pytest.raises(ValueError):
        augmented_total_action(states, 0.01, PhysicalParams(),
                               [LocalMomentum()], [1.0, 2.0])


# -- stationarity residuals --------------------------------------------------

def test_stationarity_residuals_on_ground_state_trajectory():
    g = GridSpec.line(1024, -8.0, 8.0)
    p = PhysicalParams(potential=Harmonic())
    states = _stationary_trajectory(g)
    rep = stationarity_residuals(states, 0.01, p,
                                 [LocalMomentum(), DensityStationarity()],
                                 [0.0, 0.0])
    assert rep.density_residual_max <= 1e-5
    assert rep.action_residual_max <= 1e-10
    assert rep.constraint_values[0] == pytest.approx(0.0, abs=1e-10)


def test_stationarity_residuals_detect_wrong_energy():
    g = GridSpec.line(1024, -8.0, 8.0)
    p = PhysicalParams(potential=Harmonic())
    states = []
    for j in range(5):
        base = harmonic_ground_state(g)
        s = np.full(g.shape, -0.75 * j * 0.01)  # wrong phase rate
        states.append(MadelungState(base.density, RealField(g, s)))
    rep = stationarity_residuals(states, 0.01, p)
    assert rep.density_residual_max == pytest.approx(0.25, abs=1e-4)


# -- classical consistency ---------------------------------------------------

def test_classical_consistency_harmonic_force():
    g = GridSpec.line(256, -4.0, 4.0)
    p = PhysicalParams(potential=Harmonic(k=2.0))
    rep = classical_consistency("vanishing_local_momentum", p, g)
    x = g.coordinates()[0]
    assert np.allclose(rep.secondary_field.values, -2.0 * x, atol=1e-8)
    assert not rep.vanishes
    assert "secondary" in rep.note


def test_classical_consistency_flat_potential_terminates():
    g = GridSpec.line(256, -4.0, 4.0)
    rep = classical_consistency("vanishing_local_momentum",
                                PhysicalParams(potential=Free()), g)
    assert rep.vanishes
    assert rep.secondary_max <= 1e-12


def test_classical_consistency_bipartite_translation():
    g = GridSpec.square(128, 0.0, 12.0, "periodic")
    p = PhysicalParams(mass=(1.0, 2.0),
                       potential=PairwiseRelative(Harmonic(k=3.0)))
    rep = classical_consistency("bipartite_translation", p, g)
    assert rep.vanishes
    assert rep.secondary_max <= 1e-10 * 3.0 * 36.0


def test_classical_consistency_unknown_case():
    g = GridSpec.line(64, -4.0, 4.0)
    with pytest.raises(ValueError):
        classical_consistency("galilean_boost", PhysicalParams(), g)
    with pytest.raises(ValueError):
        classical_consistency("bipartite_translation", PhysicalParams(), g)
