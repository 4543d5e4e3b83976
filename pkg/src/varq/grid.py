"""Uniform 1D/2D grids, finite-difference calculus, and quadrature.

Fields live on tensor products of up to two uniform axes. Derivatives use
central stencils of order 2 or 4 in the interior. Periodic axes wrap; on
Dirichlet axes the boundary rows switch to one-sided stencils of the same
order, so smooth fields that do not vanish at the edge keep full accuracy.
Quadrature is the rectangle rule on periodic axes (every node carries dx)
and the trapezoidal rule on Dirichlet axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

# Stencil order used when the caller does not ask for one. Order 2 is only
# selected explicitly (propagator/eigensolver matrices keep themselves
# consistent with their own discretization).
DEFAULT_ORDER = 4

_ORDERS = (2, 4)


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) disagree about the grid."""


def _require_order(order: int) -> None:
    if order not in _ORDERS:
        raise ValueError(f"stencil order must be one of {_ORDERS}, got {order}")


@dataclass(frozen=True)
class Axis:
    """One uniform coordinate axis with its boundary treatment."""

    n_points: int
    x_min: float
    x_max: float
    boundary: str = DIRICHLET

    def __post_init__(self):
        if self.boundary not in (PERIODIC, DIRICHLET):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.n_points < 8:
            raise ValueError(f"axis needs at least 8 points, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("axis requires x_max > x_min")

    @property
    def dx(self) -> float:
        span = self.x_max - self.x_min
        # periodic: x_max is identified with x_min and carries no node
        if self.boundary == PERIODIC:
            return span / self.n_points
        return span / (self.n_points - 1)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min

    def coordinates(self) -> np.ndarray:
        if self.boundary == PERIODIC:
            return self.x_min + self.dx * np.arange(self.n_points)
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def quadrature_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.dx)
        if self.boundary == DIRICHLET:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class GridSpec:
    """Tensor product of one or two axes."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("only 1D and 2D grids are supported")

    @classmethod
    def line(cls, n_points: int, x_min: float, x_max: float,
             boundary: str = DIRICHLET) -> "GridSpec":
        return cls((Axis(n_points, x_min, x_max, boundary),))

    @classmethod
    def square(cls, n_points: int, x_min: float, x_max: float,
               boundary: str = DIRICHLET) -> "GridSpec":
        ax = Axis(n_points, x_min, x_max, boundary)
        return cls((ax, ax))

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n_points for ax in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, index: int) -> Axis:
        if not 0 <= index < self.dimension:
            raise ValueError(f"axis {index} out of range for {self.dimension}D grid")
        return self.axes[index]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(ax.coordinates() for ax in self.axes)

    def meshes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.coordinates(), indexing="ij"))

    def node_volumes(self) -> np.ndarray:
        """Per-node quadrature weight (outer product of the axis weights)."""
        if self.dimension == 1:
            return self.axes[0].quadrature_weights()
        wa = self.axes[0].quadrature_weights()
        wb = self.axes[1].quadrature_weights()
        return np.outer(wa, wb)


def _check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class RealField:
    """Real scalar samples on every node of a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "RealField":
        return cls(grid, fn(*grid.meshes()))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "RealField":
        return cls(grid, np.full(grid.shape, float(value)))


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex scalar samples on every node of a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise GridMismatchError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ComplexField":
        return cls(grid, fn(*grid.meshes()))


Field = RealField | ComplexField


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Finite-difference weights at offset 0 for the given node offsets.

    Fornberg's recursion; exact for polynomials up to degree len(offsets)-1.
    Caller divides by dx**deriv.
    """
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    if n <= deriv:
        raise ValueError("not enough stencil points for requested derivative")
    w = np.zeros((n, deriv + 1))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0]
    for i in range(1, n):
        mn = min(i, deriv)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[i, k] = c1 * (k * w[i - 1, k - 1] - c5 * w[i - 1, k]) / c2
                w[i, 0] = -c1 * c5 * w[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                w[j, k] = (c4 * w[j, k] - k * w[j, k - 1]) / c3
            w[j, 0] = c4 * w[j, 0] / c3
        c1 = c2
    res = w[:, deriv]
    res.setflags(write=False)
    return res


def _diff_periodic(v: np.ndarray, dx: float, order: int, deriv: int) -> np.ndarray:
    # v has the differencing axis last; np.roll(v, -1) picks up v[i+1]
    r = lambda s: np.roll(v, -s, axis=-1)
    if deriv == 1:
        if order == 2:
            return (r(1) - r(-1)) / (2.0 * dx)
        return (-r(2) + 8.0 * r(1) - 8.0 * r(-1) + r(-2)) / (12.0 * dx)
    if order == 2:
        return (r(1) - 2.0 * v + r(-1)) / (dx * dx)
    return (-r(2) + 16.0 * r(1) - 30.0 * v + 16.0 * r(-1) - r(-2)) / (12.0 * dx * dx)


def _diff_dirichlet(v: np.ndarray, dx: float, order: int, deriv: int) -> np.ndarray:
    out = np.empty_like(v)
    half = order // 2
    scale = dx ** deriv
    if deriv == 1:
        if order == 2:
            out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * dx)
        else:
            out[..., 2:-2] = (-v[..., 4:] + 8.0 * v[..., 3:-1]
                              - 8.0 * v[..., 1:-3] + v[..., :-4]) / (12.0 * dx)
    else:
        if order == 2:
            out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / (dx * dx)
        else:
            out[..., 2:-2] = (-v[..., 4:] + 16.0 * v[..., 3:-1] - 30.0 * v[..., 2:-2]
                              + 16.0 * v[..., 1:-3] - v[..., :-4]) / (12.0 * dx * dx)
    # one-sided rows of the same order at each edge
    npts = order + deriv
    for i in range(half):
        wl = fd_weights(tuple(range(-i, npts - i)), deriv) / scale
        out[..., i] = v[..., :npts] @ wl
        wr = fd_weights(tuple(range(i - npts + 1, i + 1)), deriv) / scale
        out[..., -1 - i] = v[..., -npts:] @ wr
    return out


def _diff_axis(values: np.ndarray, axis_spec: Axis, order: int, deriv: int,
               axis: int) -> np.ndarray:
    v = np.moveaxis(values, axis, -1)
    if axis_spec.boundary == PERIODIC:
        out = _diff_periodic(v, axis_spec.dx, order, deriv)
    else:
        out = _diff_dirichlet(v, axis_spec.dx, order, deriv)
    return np.moveaxis(out, -1, axis)


def diff_values(values: np.ndarray, grid: GridSpec, axis: int = 0,
                order: int = DEFAULT_ORDER, deriv: int = 1) -> np.ndarray:
    """Array-level derivative along one axis (used by hot loops)."""
    _require_order(order)
    if deriv not in (1, 2):
        raise ValueError("only first and second derivatives are provided")
    if not 0 <= axis < grid.dimension:
        raise ValueError(f"axis {axis} out of range for {grid.dimension}D grid")
    return _diff_axis(values, grid.axes[axis], order, deriv, axis)


def derivative(f: Field, axis: int = 0, order: int = DEFAULT_ORDER) -> Field:
    """First partial derivative of a field along the given axis."""
    out = diff_values(f.values, f.grid, axis=axis, order=order, deriv=1)
    return type(f)(f.grid, out)


def second_derivative(f: Field, axis: int = 0, order: int = DEFAULT_ORDER) -> Field:
    out = diff_values(f.values, f.grid, axis=axis, order=order, deriv=2)
    return type(f)(f.grid, out)


def laplacian(f: Field, order: int = DEFAULT_ORDER) -> Field:
    """Sum of unmixed second derivatives over every axis."""
    _require_order(order)
    total = np.zeros_like(f.values)
    for ax in range(f.grid.dimension):
        total = total + diff_values(f.values, f.grid, axis=ax, order=order, deriv=2)
    return type(f)(f.grid, total)


def integrate(f: Field) -> float | complex:
    """Quadrature of the field over the whole grid."""
    total = np.sum(f.values * f.grid.node_volumes())
    if isinstance(f, RealField):
        return float(total)
    return complex(total)


def integrate_values(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(values * grid.node_volumes()))


def l2_norm(f: Field) -> float:
    """sqrt(integral of |f|^2)."""
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2 * f.grid.node_volumes())))
