import numpy as np
import pytest

from varq.grid import (
    Axis,
    ComplexField,
    GridMismatchError,
    GridSpec,
    RealField,
    derivative,
    diff_values,
    fd_weights,
    integrate,
    l2_norm,
    laplacian,
    second_derivative,
)


def test_axis_spacing_periodic_excludes_endpoint():
    ax = Axis(64, 0.0, 2.0 * np.pi, "periodic")
    x = ax.coordinates()
    assert ax.dx == pytest.approx(2.0 * np.pi / 64)
    assert x[0] == 0.0
    assert x[-1] < 2.0 * np.pi


def test_axis_spacing_dirichlet_includes_endpoint():
    ax = Axis(101, -1.0, 1.0, "dirichlet")
    assert ax.dx == pytest.approx(0.02)
    assert ax.coordinates()[-1] == pytest.approx(1.0)


def test_axis_validation():
    with pytest.raises(ValueError):
        Axis(4, 0.0, 1.0)
    with pytest.raises(ValueError):
        Axis(32, 1.0, 0.0)
    with pytest.raises(ValueError):
        Axis(32, 0.0, 1.0, "reflecting")


def test_field_shape_mismatch_raises():
    g = GridSpec.line(32, 0.0, 1.0)
    with pytest.raises(GridMismatchError):
        RealField(g, np.zeros(31))


def test_field_rejects_non_finite():
    g = GridSpec.line(32, 0.0, 1.0)
    bad = np.zeros(32)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        RealField(g, bad)


# -- fd_weights oracles: classic textbook stencils ---------------------------

def test_fd_weights_central_second_derivative():
    w = fd_weights((-1, 0, 1), 2)
    assert np.allclose(w, [1.0, -2.0, 1.0])


def test_fd_weights_one_sided_first_derivative():
    w = fd_weights((0, 1, 2), 1)
    assert np.allclose(w, [-1.5, 2.0, -0.5])


def test_fd_weights_fourth_order_first_derivative():
    w = fd_weights((-2, -1, 0, 1, 2), 1)
    assert np.allclose(w, [1 / 12, -8 / 12, 0.0, 8 / 12, -1 / 12])


def test_fd_weights_polynomial_exactness():
    # a p-point stencil must differentiate degree p-1 polynomials exactly
    offsets = (0, 1, 2, 3, 4, 5)
    w = fd_weights(offsets, 2)
    h = 0.1
    for k in range(6):
        vals = np.array([(o * h) ** k for o in offsets])
        exact = 0.0 if k < 2 else k * (k - 1) * 0.0 ** (k - 2) if k > 2 else 2.0
        if k == 2:
            exact = 2.0
        elif k != 2:
            exact = 0.0
        assert np.dot(w, vals) / h**2 == pytest.approx(exact, abs=1e-8)


# -- derivative examples -----------------------------------------------------

def test_derivative_of_constant_is_zero():
    # interior central rows cancel exactly; one-sided edge rows leave roundoff
    g = GridSpec.line(128, -1.0, 1.0)
    f = RealField.full(g, 3.7)
    for order in (2, 4):
        d = derivative(f, order=order).values
        assert np.max(np.abs(d)) <= 1e-13


def test_derivative_sin_periodic_order2():
    g = GridSpec.line(256, 0.0, 2.0 * np.pi, "periodic")
    x = g.coordinates()[0]
    df = derivative(RealField(g, np.sin(x)), order=2)
    assert np.max(np.abs(df.values - np.cos(x))) <= 1e-3


def test_derivative_sin_periodic_order4_much_tighter():
    g = GridSpec.line(256, 0.0, 2.0 * np.pi, "periodic")
    x = g.coordinates()[0]
    df = derivative(RealField(g, np.sin(x)), order=4)
    assert np.max(np.abs(df.values - np.cos(x))) <= 1e-7


def test_derivative_quadratic_exact_everywhere_dirichlet():
    # one-sided boundary rows are exact on polynomials within the stencil degree
    g = GridSpec.line(64, -2.0, 3.0)
    x = g.coordinates()[0]
    for order in (2, 4):
        df = derivative(RealField(g, x**2), order=order)
        assert np.max(np.abs(df.values - 2.0 * x)) <= 1e-10 * np.max(np.abs(2 * x))


def test_derivative_quartic_exact_order4():
    g = GridSpec.line(64, 0.0, 1.0)
    x = g.coordinates()[0]
    df = derivative(RealField(g, x**4), order=4)
    assert np.max(np.abs(df.values - 4.0 * x**3)) <= 1e-9


def test_second_derivative_quadratic_exact():
    g = GridSpec.line(64, -1.0, 1.0)
    x = g.coordinates()[0]
    for order in (2, 4):
        d2 = second_derivative(RealField(g, x**2), order=order)
        assert np.max(np.abs(d2.values - 2.0)) <= 1e-9


def test_convergence_order_dirichlet():
    # halving dx shrinks the max error by about 2**order, boundaries included
    def err(n, order):
        g = GridSpec.line(n, 0.0, 1.0)
        x = g.coordinates()[0]
        df = derivative(RealField(g, np.exp(np.sin(3 * x))), order=order)
        exact = 3 * np.cos(3 * x) * np.exp(np.sin(3 * x))
        return np.max(np.abs(df.values - exact))

    for order in (2, 4):
        e1, e2 = err(129, order), err(257, order)
        rate = np.log2(e1 / e2)
        assert rate > order - 0.5


def test_derivative_linearity():
    rng = np.random.default_rng(7)
    g = GridSpec.line(128, 0.0, 2.0 * np.pi, "periodic")
    x = g.coordinates()[0]
    f = RealField(g, np.sin(x) + 0.2 * np.cos(3 * x))
    h = RealField(g, np.cos(2 * x))
    for _ in range(5):
        a, b = rng.normal(size=2)
        lhs = derivative(RealField(g, a * f.values + b * h.values)).values
        rhs = a * derivative(f).values + b * derivative(h).values
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_periodic_derivative_integrates_to_zero():
    # wrapped stencils telescope exactly under the rectangle rule
    g = GridSpec.line(200, 0.0, 5.0, "periodic")
    x = g.coordinates()[0]
    f = RealField(g, np.exp(np.cos(2 * np.pi * x / 5.0)))
    for order in (2, 4):
        assert abs(integrate(derivative(f, order=order))) <= 1e-13


def test_complex_field_derivative():
    g = GridSpec.line(128, 0.0, 2.0 * np.pi, "periodic")
    x = g.coordinates()[0]
    psi = ComplexField(g, np.exp(1j * x))
    dpsi = derivative(psi, order=4)
    assert np.max(np.abs(dpsi.values - 1j * psi.values)) <= 1e-6


def test_invalid_axis_raises():
    g = GridSpec.line(32, 0.0, 1.0)
    f = RealField.full(g, 1.0)
    with pytest.raises(ValueError):
        derivative(f, axis=1)
    with pytest.raises(ValueError):
        diff_values(f.values, g, axis=-1)


def test_invalid_order_raises():
    g = GridSpec.line(32, 0.0, 1.0)
    f = RealField.full(g, 1.0)
    with pytest.raises(ValueError):
        derivative(f, order=3)


# -- 2D ----------------------------------------------------------------------

def test_2d_partial_derivatives():
    g = GridSpec.square(96, 0.0, 2.0 * np.pi, "periodic")
    A, B = g.meshes()
    f = RealField(g, np.sin(A) * np.cos(2 * B))
    da = derivative(f, axis=0, order=4)
    db = derivative(f, axis=1, order=4)
    assert np.max(np.abs(da.values - np.cos(A) * np.cos(2 * B))) <= 1e-4
    assert np.max(np.abs(db.values + 2 * np.sin(A) * np.sin(2 * B))) <= 1e-4


def test_2d_laplacian():
    g = GridSpec.square(96, 0.0, 2.0 * np.pi, "periodic")
    A, B = g.meshes()
    f = RealField(g, np.sin(A) * np.sin(B))
    lap = laplacian(f, order=4)
    assert np.max(np.abs(lap.values + 2.0 * f.values)) <= 1e-4


def test_2d_mixed_boundary_grid():
    ga = Axis(65, -1.0, 1.0, "dirichlet")
    gb = Axis(64, 0.0, 2.0 * np.pi, "periodic")
    g = GridSpec((ga, gb))
    A, B = g.meshes()
    f = RealField(g, A**2 * np.cos(B))
    da = derivative(f, axis=0, order=4)
    assert np.max(np.abs(da.values - 2 * A * np.cos(B))) <= 1e-9


# -- quadrature --------------------------------------------------------------

def test_integrate_constant():
    g = GridSpec.line(51, 0.0, 2.0)
    assert integrate(RealField.full(g, 1.0)) == pytest.approx(2.0, abs=1e-14)
    gp = GridSpec.line(50, 0.0, 2.0, "periodic")
    assert integrate(RealField.full(gp, 1.0)) == pytest.approx(2.0, abs=1e-14)


def test_integrate_gaussian_unit_mass():
    g = GridSpec.line(1024, -8.0, 8.0)
    x = g.coordinates()[0]
    rho = np.exp(-0.5 * x**2) / np.sqrt(2.0 * np.pi)
    assert integrate(RealField(g, rho)) == pytest.approx(1.0, abs=1e-8)


def test_integrate_sin_half_period():
    g = GridSpec.line(1024, 0.0, np.pi)
    x = g.coordinates()[0]
    assert integrate(RealField(g, np.sin(x))) == pytest.approx(2.0, abs=1e-5)


def test_integrate_2d_separable():
    g = GridSpec.square(256, -6.0, 6.0)
    A, B = g.meshes()
    rho = np.exp(-(A**2 + B**2)) / np.pi
    assert integrate(RealField(g, rho)) == pytest.approx(1.0, abs=1e-10)


def test_l2_norm_plane_wave():
    g = GridSpec.line(128, 0.0, 1.0, "periodic")
    x = g.coordinates()[0]
    psi = ComplexField(g, np.exp(2j * np.pi * x))
    assert l2_norm(psi) == pytest.approx(1.0, abs=1e-12)
