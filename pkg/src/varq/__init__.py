"""Numerical laboratory for ensemble-action quantization on 1D/2D grids.

The package splits along the pipeline it implements: grids and stencils
(`grid`), density/phase fields and potentials (`fields`), the extended
action and its functional gradients (`action`), vacuum-fluctuation
transition statistics (`fluctuation`), constraint functionals and their
brackets (`constraints`), eigen/time solvers (`solvers`), the two-body
translation-invariant system (`bipartite`), and the `varq` command line
front end (`cli`).
"""

from .grid import (
    DIRICHLET,
    PERIODIC,
    ComplexField,
    GridMismatchError,
    GridSpec,
    RealField,
    derivative,
    diff_values,
    integrate,
    integrate_values,
    l2_norm,
    laplacian,
)
from .fields import (
    Free,
    Harmonic,
    InfiniteWell,
    MadelungState,
    PairwiseRelative,
    PhaseUnwrapError,
    PhysicalParams,
    Sampled,
    from_wavefunction,
    gaussian_density,
    potential_values,
    to_wavefunction,
)
from .action import (
    ActionBreakdown,
    bohm_potential,
    continuity_residual,
    functional_gradient,
    hamilton_jacobi_residual,
    information_density,
    information_metric,
    numeric_functional_gradient,
    total_action,
)
from .fluctuation import (
    FluctuationSample,
    NonConvergenceError,
    TransitionDistribution,
    fluctuation_sigma,
    kl_divergence,
    optimal_transition,
    optimize_transition_numeric,
    sample_displacements,
    sample_fluctuations,
)
from .constraints import (
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
from .solvers import (
    DensityFloorError,
    apply_hamiltonian,
    eigensolve_1d,
    propagate_madelung,
    propagate_wavefunction,
    quantization_route_report,
    vanishing_momentum_scenario,
)
from .bipartite import (
    BipartiteParams,
    lift_relative,
    pair_grid,
    pair_information_metrics,
    relative_grid,
    three_route_comparison,
    translation_residual,
)

__version__ = "0.1.0"

__all__ = [
    "DIRICHLET",
    "PERIODIC",
    "ComplexField",
    "GridMismatchError",
    "GridSpec",
    "RealField",
    "derivative",
    "diff_values",
    "integrate",
    "integrate_values",
    "l2_norm",
    "laplacian",
    "Free",
    "Harmonic",
    "InfiniteWell",
    "MadelungState",
    "PairwiseRelative",
    "PhaseUnwrapError",
    "PhysicalParams",
    "Sampled",
    "from_wavefunction",
    "gaussian_density",
    "potential_values",
    "to_wavefunction",
    "ActionBreakdown",
    "bohm_potential",
    "continuity_residual",
    "functional_gradient",
    "hamilton_jacobi_residual",
    "information_density",
    "information_metric",
    "numeric_functional_gradient",
    "total_action",
    "FluctuationSample",
    "NonConvergenceError",
    "TransitionDistribution",
    "fluctuation_sigma",
    "kl_divergence",
    "optimal_transition",
    "optimize_transition_numeric",
    "sample_displacements",
    "sample_fluctuations",
    "DensityStationarity",
    "EnsembleHamiltonian",
    "LocalMomentum",
    "RelativeDensity",
    "TotalMomentum",
    "augmented_total_action",
    "classical_consistency",
    "evaluate_constraint",
    "functional_derivative",
    "poisson_bracket",
    "stationarity_residuals",
    "weak_equality",
    "DensityFloorError",
    "apply_hamiltonian",
    "eigensolve_1d",
    "propagate_madelung",
    "propagate_wavefunction",
    "quantization_route_report",
    "vanishing_momentum_scenario",
    "BipartiteParams",
    "lift_relative",
    "pair_grid",
    "pair_information_metrics",
    "relative_grid",
    "three_route_comparison",
    "translation_residual",
    "__version__",
]
