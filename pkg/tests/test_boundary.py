"""Shooting construction, value quadrature and residual diagnostics.

The d=3 slope field has the closed form (f - i)/(f - 2i), derived by hand
from the scale function L(x) = -1/x (the inner integral reduces to
-(f - i)^2 / i); it serves as the independent route for the quadrature
right-hand side.  On the ray f = lam * i the field must reproduce the
slope lam for every dimension, which ties the shooting machinery to the
root finder without sharing any code path.
"""

import math

import numpy as np
import pytest

import goldenstop as g


def _m3():
    return g.make_bessel_model(3.0)


def test_rhs_closed_form_d3():
    m = _m3()
    for i, f in ((1.0, 2.7), (0.5, 1.6), (2.0, 5.9)):
        assert abs(g.boundary_ode_rhs(m, i, f) - (f - i) / (f - 2.0 * i)) < 1e-9


def test_rhs_ray_self_consistency():
    for d in (3.0, 5.0, 7.0):
        m = g.make_bessel_model(d)
        lam = g.bessel_lambda(d)
        for i in (0.5, 1.0, 2.0):
            assert abs(g.boundary_ode_rhs(m, i, lam * i) - lam) < 1e-8, (d, i)


def test_rhs_singular_on_sign_curve():
    m = _m3()
    with pytest.raises(g.SingularPointError):
        g.boundary_ode_rhs(m, 1.0, 2.0)  # f = h(i) exactly
    with pytest.raises(g.DomainError):
        g.boundary_ode_rhs(m, 1.0, 0.9)
    with pytest.raises(g.DomainError):
        g.boundary_ode_rhs(m, -1.0, 2.0)


def test_shot_approaches_ray():
    m = _m3()
    lam = g.bessel_lambda(3.0)
    b = g.shoot_from_h(m, 0.01, 2.0)
    for i in (0.5, 1.0, 2.0):
        assert abs(b(i) / i - lam) < 1e-6, i


def test_shot_family_monotone():
    m = _m3()
    nodes = np.linspace(0.5, 2.0, 9)
    prev = None
    for start in (0.05, 0.005, 5e-4):
        b = g.shoot_from_h(m, start, 2.0)
        vals = np.array([b(i) for i in nodes])
        if prev is not None:
            assert np.all(vals >= prev * (1.0 - 1e-9))
        prev = vals


def test_minimal_boundary_recovers_ray():
    m = _m3()
    lam = g.bessel_lambda(3.0)
    b = g.minimal_boundary(m, 0.5, 2.0)
    assert "converged=True" in b.provenance
    assert b.i_grid[0] <= 0.5 + 1e-12 and b.i_grid[-1] >= 2.0 - 1e-12
    ratios = b.f_grid / b.i_grid
    assert np.max(np.abs(ratios - lam)) < 1e-9
    # h column carries the sign curve
    assert np.allclose(b.h_grid, 2.0 * b.i_grid, rtol=1e-12, atol=0)


def test_minimal_boundary_start_validation():
    m = _m3()
    with pytest.raises(g.DomainError):
        g.minimal_boundary(m, 0.5, 2.0, shot_starts=[0.05, 0.05])
    with pytest.raises(g.DomainError):
        g.minimal_boundary(m, 0.5, 2.0, shot_starts=[0.7])


def test_line_boundary_exact_ray():
    m = _m3()
    lam = g.bessel_lambda(3.0)
    b = g.line_boundary(m, lam, 0.5, 2.0)
    assert b.ratio == lam
    for i in (0.37, 1.0, 3.1):  # including extrapolation
        assert b(i) == lam * i
        assert math.isclose(b.inverse(lam * i), i, rel_tol=1e-15)
    with pytest.raises(g.DomainError):
        g.line_boundary(m, 0.99, 0.5, 2.0)


def test_value_quadrature_vs_closed_form():
    for d in (3.0, 5.0):
        m = g.make_bessel_model(d)
        lam = g.bessel_lambda(d)
        b = g.line_boundary(m, lam, 0.1, 8.0)
        for i, x in ((1.0, 1.0), (0.7, 1.1), (1.5, 2.8)):
            ref = g.bessel_value(d, lam, i, x)
            got = g.value_function_numeric(m, b, i, x)
            assert abs(got - ref) < 1e-9, (d, i, x)
    with pytest.raises(g.DomainError):
        g.value_function_numeric(_m3(), g.line_boundary(_m3(), 2.6, 0.1, 8.0), 1.5, 1.0)


def test_residuals_small_on_minimal_boundary():
    m = _m3()
    b = g.minimal_boundary(m, 0.5, 2.0)
    for i, x in ((0.8, 1.2), (1.0, 1.5), (1.6, 2.4)):
        pde, smooth, reflect = g.free_boundary_residuals(m, b, i, x)
        assert abs(pde) < 1e-4, (i, x, pde)
        assert abs(smooth) < 1e-3, (i, smooth)
        assert abs(reflect) < 1e-3, (i, reflect)


def test_residuals_guard_near_origin():
    m = _m3()
    b = g.line_boundary(m, g.bessel_lambda(3.0), 1e-5, 1.0)
    with pytest.raises(g.DomainError):
        g.free_boundary_residuals(m, b, 1e-4, 2e-4)


def test_boundary_validation():
    with pytest.raises(g.DomainError):
        g.Boundary(
            i_grid=np.array([1.0, 0.9, 1.2, 1.5]),
            f_grid=np.array([2.6, 2.7, 3.1, 3.9]),
            h_grid=np.array([2.0, 1.8, 2.4, 3.0]),
            provenance="test",
        )
    with pytest.raises(g.DomainError):  # f below the sign curve
        g.Boundary(
            i_grid=np.array([1.0, 1.1, 1.2, 1.3]),
            f_grid=np.array([1.5, 1.6, 1.7, 1.8]),
            h_grid=np.array([2.0, 2.2, 2.4, 2.6]),
            provenance="test",
        )
    with pytest.raises(g.DomainError):  # too few nodes
        g.Boundary(
            i_grid=np.array([1.0, 1.1]),
            f_grid=np.array([2.6, 2.9]),
            h_grid=np.array([2.0, 2.2]),
            provenance="test",
        )


def test_boundary_csv_roundtrip(tmp_path):
    m = _m3()
    b = g.minimal_boundary(m, 0.5, 2.0)
    path = tmp_path / "boundary.csv"
    g.boundary_to_csv(b, path)
    header = path.read_text().splitlines()[0]
    assert header == "i,f,h"
    back = g.boundary_from_csv(path)
    # 17 significant digits round-trip doubles exactly
    assert np.array_equal(back.i_grid, b.i_grid)
    assert np.array_equal(back.f_grid, b.f_grid)
    assert np.array_equal(back.h_grid, b.h_grid)
    assert back.provenance == "imported"
    # interior evaluation agrees through the rebuilt interpolant
    for i in (0.6, 1.3, 1.9):
        assert abs(back(i) - b(i)) < 1e-12


def test_boundary_csv_h_reconstruction(tmp_path):
    m = _m3()
    b = g.line_boundary(m, g.bessel_lambda(3.0), 0.5, 2.0, 9)
    path = tmp_path / "fi.csv"
    rows = ["i,f"] + [f"{i:.17g},{f:.17g}" for i, f in zip(b.i_grid, b.f_grid)]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(g.DomainError):
        g.boundary_from_csv(path)  # h missing, no model to rebuild it
    back = g.boundary_from_csv(path, model=m)
    assert np.allclose(back.h_grid, 2.0 * back.i_grid, rtol=1e-12, atol=0)
