import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from diffusym.errors import IntegrationError, OdeError, PreconditionError, RankDeficientError
from diffusym.numerics import (OdeSpec, QuadratureSpec, cumulative_integral, fit_basis, integrate,
                               integrate_many, solve_ode)


def test_integrate_examples():
    assert abs(integrate(lambda s: np.ones_like(s), 0, 1) - 1.0) <= 1e-14
    # endpoint singularity handled by bisection toward the endpoint
    assert abs(integrate(lambda s: 1 / np.sqrt(s), 0, 1) - 2.0) <= 1e-8
    assert abs(integrate(lambda s: 1 / (1 + s**2), 0, 1) - math.pi / 4) <= 1e-9


def test_integrate_reversed_and_empty():
    assert integrate(np.exp, 1, 0) == pytest.approx(-(math.e - 1), rel=1e-12)
    assert integrate(np.exp, 0.3, 0.3) == 0.0


def test_integrate_many_independent_tolerances():
    lo = np.zeros(4)
    hi = np.array([1.0, 2.0, 3.0, 4.0])
    got = integrate_many(lambda s: np.cos(s), lo, hi)
    assert np.allclose(got, np.sin(hi), atol=1e-12)


def test_integrate_failure():
    with pytest.raises(IntegrationError):
        integrate(lambda s: 1 / s, 0, 1, QuadratureSpec(max_subdivisions=50))
    with pytest.raises(IntegrationError):
        integrate(lambda s: np.where(s > 0.5, np.nan, 1.0), 0, 1)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_integrate_additive(a, b, c):
    f = lambda s: np.exp(np.sin(3 * s)) + s**2
    spec = QuadratureSpec()
    whole = integrate(f, a, c, spec)
    parts = integrate(f, a, b, spec) + integrate(f, b, c, spec)
    tol = 3 * (spec.abs_tol + spec.rel_tol * (abs(whole) + abs(parts)))
    assert abs(whole - parts) <= tol


def test_cumulative_integral_anchor():
    pts = np.array([-1.0, 0.0, 0.5, 2.0])
    got = cumulative_integral(lambda s: 2 * s, 0.5, pts)
    assert np.allclose(got, pts**2 - 0.25, atol=1e-13)


def test_ode_examples():
    sol = solve_ode(lambda t, y: [y[1], -4 * y[0]], 0.0, [1.0, 0.0], math.pi / 2)
    assert abs(sol(math.pi / 2)[0] + 1) <= 1e-8
    sol = solve_ode(lambda t, y: [y[1], 0.0], 0.0, [1.0, 2.0], 3.0)
    assert abs(sol(3.0)[0] - 7) <= 1e-10
    sol = solve_ode(lambda t, y: [y[1], y[0]], 0.0, [1.0, 1.0], 1.0)
    assert abs(sol(1.0)[0] - math.e) <= 1e-8


def test_ode_dense_output_and_bounds():
    sol = solve_ode(lambda t, y: -y, 0.0, [1.0], 2.0)
    ts = np.linspace(0, 2, 11)
    assert np.allclose(sol(ts)[0], np.exp(-ts), rtol=1e-9)
    with pytest.raises(OdeError):
        sol(2.5)


def test_ode_backward_and_errors():
    sol = solve_ode(lambda t, y: -y, 1.0, [1.0], 0.0)
    assert sol(0.0)[0] == pytest.approx(math.e, rel=1e-9)
    with pytest.raises(OdeError):
        solve_ode(lambda t, y: [1 / (t - 0.5)], 0.0, [0.0], 1.0)
    with pytest.raises(PreconditionError):
        solve_ode(lambda t, y: y, 0.0, [1.0], 0.0)
    with pytest.raises(PreconditionError):
        OdeSpec(rel_tol=0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_ode_linear_matches_matrix_exponential(entries, y0):
    A = np.array(entries).reshape(3, 3)
    sol = solve_ode(lambda t, y: A @ y, 0.0, y0, 1.0)
    ref = expm(A) @ np.array(y0)
    assert np.all(np.abs(sol(1.0) - ref) <= 1e-7 * np.max(np.abs(ref)) + 1e-12)


I4 = [lambda s: s**-2.0, lambda s: np.ones_like(s), lambda s: s, lambda s: s**2]


def test_fit_basis_examples():
    s = np.linspace(0.5, 3, 64)
    r = fit_basis(np.column_stack([s, np.ones_like(s)]), I4)
    assert np.allclose(r.coefficients, [0, 1, 0, 0], atol=1e-12) and r.rms <= 1e-12
    r = fit_basis(np.column_stack([s, s**2]), I4)
    assert np.allclose(r.coefficients, [0, 0, 0, 1], atol=1e-12)
    r = fit_basis(np.column_stack([s, np.sin(5 * s)]), I4)
    assert r.rms > 1e-3


def test_fit_basis_order_invariant(rng):
    s = np.linspace(0.5, 3, 64)
    y = np.cos(s) + 0.1 * s
    r1 = fit_basis(np.column_stack([s, y]), I4)
    perm = rng.permutation(s.size)
    r2 = fit_basis(np.column_stack([s[perm], y[perm]]), I4)
    assert abs(r1.rms - r2.rms) <= 1e-10


def test_fit_basis_errors():
    s = np.linspace(0, 1, 10)
    with pytest.raises(PreconditionError):
        fit_basis(np.column_stack([s[:3], s[:3]]), I4)
    with pytest.raises(RankDeficientError):
        fit_basis(np.column_stack([s, s]), [lambda v: v, lambda v: 2 * v])
    with pytest.raises(PreconditionError):
        fit_basis(np.column_stack([np.zeros(10), s]), [lambda v: v])
