"""Constraint functionals, Poisson brackets, and augmented actions.

Constraints are scalar functionals of the (density, action) pair added to
the total action with Lagrange multipliers. Each carries its analytic
functional gradients; a numeric backend cross-checks them. The bracket of
two functionals is

    {F, G} = integral (dF/d rho dG/dS - dF/dS dG/d rho),

and a constraint is consistent with a Hamiltonian when the bracket is
weakly zero, i.e. small against the gradient scale of its arguments.

Auxiliary time derivatives (d rho/dt) always come from trajectory
differencing supplied by the caller, never from substituting an equation
of motion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .action import (
    ActionBreakdown,
    bohm_potential,
    continuity_residual,
    hamilton_jacobi_residual,
    kinetic_density,
    information_metric,
    low_density_mask,
    numeric_functional_gradient,
    time_derivatives,
    total_action,
)
from .fields import MadelungState, PhysicalParams, potential_values
from .grid import (
    DEFAULT_ORDER,
    GridSpec,
    RealField,
    diff_values,
    integrate_values,
)

WEAK_ATOL = 1e-6
WEAK_RTOL = 1e-4


def weak_equality(value: float, scale: float,
                  atol: float = WEAK_ATOL, rtol: float = WEAK_RTOL) -> bool:
    """Small against the supplied field scale, in the Dirac sense."""
    return abs(value) <= atol + rtol * abs(scale)


class ConstraintFunctional:
    """Scalar functional with analytic gradients in density and action."""

    kind: str = "abstract"
    requires_aux: bool = False

    def value(self, state: MadelungState, aux: RealField | None = None) -> float:
        raise NotImplementedError

    def gradient_density(self, state: MadelungState,
                         aux: RealField | None = None) -> RealField:
        raise NotImplementedError

    def gradient_action(self, state: MadelungState,
                        aux: RealField | None = None) -> RealField:
        raise NotImplementedError

    def _need_aux(self, aux):
        if self.requires_aux and aux is None:
            raise ValueError(f"{self.kind} needs an auxiliary d rho/dt field")


@dataclass(frozen=True)
class LocalMomentum(ConstraintFunctional):
    """integral rho (dS/dx - p_c): pins the local momentum field to p_c."""

    p_c: float = 0.0
    order: int = DEFAULT_ORDER
    kind = "local_momentum"

    def value(self, state, aux=None):
        ds = diff_values(state.action.values, state.grid, order=self.order)
        return integrate_values(state.density.values * (ds - self.p_c),
                                state.grid)

    def gradient_density(self, state, aux=None):
        ds = diff_values(state.action.values, state.grid, order=self.order)
        return RealField(state.grid, ds - self.p_c)

    def gradient_action(self, state, aux=None):
        dr = diff_values(state.density.values, state.grid, order=self.order)
        return RealField(state.grid, -dr)


@dataclass(frozen=True)
class DensityStationarity(ConstraintFunctional):
    """integral rho (d rho/dt), with d rho/dt supplied as a frozen field."""

    order: int = DEFAULT_ORDER
    kind = "density_stationarity"
    requires_aux = True

    def value(self, state, aux=None):
        self._need_aux(aux)
        return integrate_values(state.density.values * aux.values, state.grid)

    def gradient_density(self, state, aux=None):
        self._need_aux(aux)
        return RealField(state.grid, aux.values.copy())

    def gradient_action(self, state, aux=None):
        return RealField(state.grid, np.zeros(state.grid.shape))


@dataclass(frozen=True)
class TotalMomentum(ConstraintFunctional):
    """integral rho (dS/dx_a + dS/dx_b): total momentum of a 2D pair."""

    order: int = DEFAULT_ORDER
    kind = "total_momentum"

    def _sum_grad(self, values, grid):
        return (diff_values(values, grid, axis=0, order=self.order)
                + diff_values(values, grid, axis=1, order=self.order))

    def value(self, state, aux=None):
        if state.grid.dimension != 2:
            raise ValueError("total momentum constraint needs a 2D grid")
        return integrate_values(
            state.density.values * self._sum_grad(state.action.values,
                                                  state.grid), state.grid)

    def gradient_density(self, state, aux=None):
        return RealField(state.grid,
                         self._sum_grad(state.action.values, state.grid))

    def gradient_action(self, state, aux=None):
        return RealField(state.grid,
                         -self._sum_grad(state.density.values, state.grid))


@dataclass(frozen=True)
class RelativeDensity(ConstraintFunctional):
    """integral rho (d rho/dx_a + d rho/dx_b).

    Both functional gradients vanish identically: the density variation
    cancels against its own transported copy under integration by parts,
    and S never enters. The value itself vanishes for densities that
    depend on x_a - x_b only.
    """

    order: int = DEFAULT_ORDER
    kind = "relative_density"

    def value(self, state, aux=None):
        if state.grid.dimension != 2:
            raise ValueError("relative density constraint needs a 2D grid")
        grad_sum = (diff_values(state.density.values, state.grid, axis=0,
                                order=self.order)
                    + diff_values(state.density.values, state.grid, axis=1,
                                  order=self.order))
        return integrate_values(state.density.values * grad_sum, state.grid)

    def gradient_density(self, state, aux=None):
        return RealField(state.grid, np.zeros(state.grid.shape))

    def gradient_action(self, state, aux=None):
        return RealField(state.grid, np.zeros(state.grid.shape))


@dataclass(frozen=True)
class EnsembleHamiltonian(ConstraintFunctional):
    """integral rho (kinetic + V [+ Q]) over the ensemble.

    include_quantum adds the information-metric part, whose density
    variation is exactly the Bohm potential.
    """

    params: PhysicalParams
    include_quantum: bool = True
    order: int = DEFAULT_ORDER
    kind = "ensemble_hamiltonian"

    def value(self, state, aux=None):
        kin = kinetic_density(state, self.params, self.order).values
        v = potential_values(self.params.potential, state.grid)
        out = integrate_values(state.density.values * (kin + v), state.grid)
        if self.include_quantum:
            out += 0.5 * self.params.hbar * information_metric(
                state.density, self.params, self.order)
        return out

    def gradient_density(self, state, aux=None):
        kin = kinetic_density(state, self.params, self.order).values
        v = potential_values(self.params.potential, state.grid)
        out = kin + v
        if self.include_quantum:
            out = out + bohm_potential(state.density, self.params,
                                       order=self.order).values
        return RealField(state.grid, out)

    def gradient_action(self, state, aux=None):
        grid = state.grid
        div = np.zeros(grid.shape)
        for ax in range(grid.dimension):
            ds = diff_values(state.action.values, grid, axis=ax,
                             order=self.order)
            flux = state.density.values * ds / self.params.mass_along(ax)
            div += diff_values(flux, grid, axis=ax, order=self.order)
        return RealField(grid, -div)


def evaluate_constraint(func: ConstraintFunctional, state: MadelungState,
                        aux: RealField | None = None) -> float:
    return func.value(state, aux)


def functional_derivative(func: ConstraintFunctional, state: MadelungState,
                          component: str, aux: RealField | None = None,
                          backend: str = "analytic",
                          step: float = 1e-6) -> RealField:
    """Gradient of a constraint functional, analytic or node-perturbation."""
    if component not in ("density", "action"):
        raise ValueError(f"unknown component {component!r}")
    if backend == "analytic":
        if component == "density":
            return func.gradient_density(state, aux)
        return func.gradient_action(state, aux)
    if backend == "numeric":
        return numeric_functional_gradient(lambda s: func.value(s, aux),
                                           state, component, step)
    raise ValueError(f"unknown backend {backend!r}")


def _gradient_scale(func: ConstraintFunctional, state: MadelungState,
                    aux: RealField | None) -> float:
    gr = func.gradient_density(state, aux).values
    ga = func.gradient_action(state, aux).values
    vols = state.grid.node_volumes()
    return float(np.sqrt(np.sum((gr**2 + ga**2) * vols)))


@dataclass(frozen=True)
class BracketReport:
    """Poisson bracket value with the scale used to judge weak vanishing."""

    left_kind: str
    right_kind: str
    value: float
    scale: float
    consistent: bool
    atol: float = WEAK_ATOL
    rtol: float = WEAK_RTOL


def poisson_bracket(f: ConstraintFunctional, g: ConstraintFunctional,
                    state: MadelungState,
                    aux_f: RealField | None = None,
                    aux_g: RealField | None = None,
                    atol: float = WEAK_ATOL,
                    rtol: float = WEAK_RTOL) -> BracketReport:
    """{F, G} on one state, classified against the gradient scale."""
    f_rho = f.gradient_density(state, aux_f).values
    f_s = f.gradient_action(state, aux_f).values
    g_rho = g.gradient_density(state, aux_g).values
    g_s = g.gradient_action(state, aux_g).values
    value = integrate_values(f_rho * g_s - f_s * g_rho, state.grid)
    scale = max(_gradient_scale(f, state, aux_f),
                _gradient_scale(g, state, aux_g))
    return BracketReport(
        left_kind=f.kind, right_kind=g.kind, value=value, scale=scale,
        consistent=weak_equality(value, scale, atol, rtol),
        atol=atol, rtol=rtol)


# -- augmented action and stationarity ---------------------------------------

@dataclass(frozen=True)
class AugmentedActionResult:
    base: ActionBreakdown
    constraint_terms: tuple[float, ...]
    total: float


def _trajectory_aux(states: Sequence[MadelungState], dt: float) -> list[RealField]:
    grids = states[0].grid
    drho = time_derivatives([st.density.values for st in states], dt)
    return [RealField(grids, d) for d in drho]


def augmented_total_action(states: Sequence[MadelungState], dt: float,
                           params: PhysicalParams,
                           constraints: Sequence[ConstraintFunctional],
                           multipliers: Sequence[float],
                           order: int = DEFAULT_ORDER) -> AugmentedActionResult:
    """Total action plus sum_i lambda_i * time-integral of constraint_i."""
    if len(constraints) != len(multipliers):
        raise ValueError("one multiplier per constraint required")
    base = total_action(states, dt, params, order)
    aux = _trajectory_aux(states, dt)
    n = len(states)
    tw = np.full(n, dt)
    tw[0] = tw[-1] = 0.5 * dt
    terms = []
    for lam, c in zip(multipliers, constraints):
        ci = sum(w * c.value(st, a if c.requires_aux else None)
                 for w, st, a in zip(tw, states, aux))
        terms.append(lam * ci)
    return AugmentedActionResult(base=base, constraint_terms=tuple(terms),
                                 total=base.total + sum(terms))


@dataclass(frozen=True)
class StationarityReport:
    """Residual fields of the constrained extremum equations at one slice."""

    density_residual: RealField
    action_residual: RealField
    density_residual_max: float
    action_residual_max: float
    constraint_values: tuple[float, ...]
    multipliers: tuple[float, ...]
    slice_index: int


def stationarity_residuals(states: Sequence[MadelungState], dt: float,
                           params: PhysicalParams,
                           constraints: Sequence[ConstraintFunctional] = (),
                           multipliers: Sequence[float] = (),
                           order: int = DEFAULT_ORDER,
                           mask_floor: float = 1e-6) -> StationarityReport:
    """Variational residuals at the middle slice of a trajectory.

    density residual: dS/dt + kinetic + V + Q + sum lambda_i dC_i/d rho
    action residual: -(continuity) + sum lambda_i dC_i/dS
    Maxima are taken where rho >= mask_floor * peak.
    """
    if len(constraints) != len(multipliers):
        raise ValueError("one multiplier per constraint required")
    mid = len(states) // 2
    st = states[mid]
    ds_dt = RealField(st.grid,
                      time_derivatives([s.action.values for s in states],
                                       dt)[mid])
    drho_dt_field = _trajectory_aux(states, dt)[mid]
    dens = hamilton_jacobi_residual(st, params, ds_dt, order).values
    act = -continuity_residual(st, params, drho_dt_field, order).values
    values = []
    for lam, c in zip(multipliers, constraints):
        aux = drho_dt_field if c.requires_aux else None
        dens = dens + lam * c.gradient_density(st, aux).values
        act = act + lam * c.gradient_action(st, aux).values
        values.append(c.value(st, aux))
    keep = ~low_density_mask(st.density, mask_floor)
    return StationarityReport(
        density_residual=RealField(st.grid, dens),
        action_residual=RealField(st.grid, act),
        density_residual_max=float(np.max(np.abs(dens[keep]))),
        action_residual_max=float(np.max(np.abs(act[keep]))),
        constraint_values=tuple(values),
        multipliers=tuple(float(m) for m in multipliers),
        slice_index=mid)


# -- classical consistency algorithm -----------------------------------------

@dataclass(frozen=True)
class ClassicalConsistencyReport:
    """Outcome of one step of the classical constraint-consistency check."""

    case: str
    secondary_field: RealField
    secondary_max: float
    vanishes: bool
    note: str


def classical_consistency(case: str, params: PhysicalParams,
                          grid: GridSpec,
                          order: int = DEFAULT_ORDER) -> ClassicalConsistencyReport:
    """Bracket of the primary constraint with the classical Hamiltonian.

    case "vanishing_local_momentum": primary p = 0 on a 1D system; the
    bracket is -dV/dx, a secondary constraint unless V is flat.
    case "bipartite_translation": primary p_a + p_b = 0; the bracket is
    -(dV/dx_a + dV/dx_b), identically zero for pair potentials that
    depend on x_a - x_b only.
    """
    v = potential_values(params.potential, grid)
    if case == "vanishing_local_momentum":
        if grid.dimension != 1:
            raise ValueError("vanishing_local_momentum is a 1D case")
        field = RealField(grid, -diff_values(v, grid, order=order))
    elif case == "bipartite_translation":
        if grid.dimension != 2:
            raise ValueError("bipartite_translation is a 2D case")
        field = RealField(grid,
                          -(diff_values(v, grid, axis=0, order=order)
                            + diff_values(v, grid, axis=1, order=order)))
    else:
        raise ValueError(f"unknown case {case!r}")
    peak = float(np.max(np.abs(field.values)))
    vscale = float(np.max(np.abs(v))) if np.any(v) else 1.0
    vanishes = peak <= 1e-10 * vscale + 1e-12
    note = ("no secondary constraint; the chain terminates" if vanishes
            else "force term must vanish, giving a secondary constraint")
    return ClassicalConsistencyReport(case=case, secondary_field=field,
                                      secondary_max=peak, vanishes=vanishes,
                                      note=note)
