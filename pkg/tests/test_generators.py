import numpy as np
import pytest

from diffusym import catalogue as cat
from diffusym import classify as cl
from diffusym import generators as gen
from diffusym import verify as vf
from diffusym.errors import PreconditionError
from diffusym.invariants import CoefficientSet, WorkingDomain, profile, profile_xt

TABLE_TOL = 1e-6

AUTONOMOUS = [
    ("heat", "1", "0", "0", {}, (-2, 2)),
    ("brownian", "(1 + k^2*x^2)^2", "0", "0", {"k": 1.0}, (-2, 2)),
    ("ou", "1", "l*x", "l", {"l": 1.0}, (-2, 2)),
    ("ou_c1", "1", "l*x + 1", "0.3*x", {"l": 1.0}, (-2, 2)),
    ("trig", "1", "0", "-x^2 + 0.4*x", {}, (-2, 2)),
    ("cir_four", "s*x", "m + n*x", "0", {"s": 1, "m": 1, "n": 2}, (0.3, 3)),
    ("cir_six", "s*x", "m + n*x", "0", {"s": 1, "m": 0.5, "n": 2}, (0.3, 3)),
    ("radial_six", "1", "2/x", "0", {}, (0.5, 3)),
    ("radial_four", "1", "2/x", "1/x^2 + x^2", {}, (0.5, 3)),
    ("alpha_four", "1", "a/x", "-a/x^2", {"a": 2.0}, (0.5, 3)),
    ("alpha_drift", "1", "a/x + w*x", "0", {"a": 4.0, "w": 0.5}, (0.5, 3)),
    ("four_flat", "1", "0", "-2/x^2 + 0.7", {}, (0.5, 3)),
    ("vol", "1 + x^2", "x", "0", {}, (-2, 2)),
]


def _basis(a, b, c, env, xr):
    p = profile(CoefficientSet(a, b, c, env), WorkingDomain(*xr, 0.2, 1.0))
    res = cl.classify(p)
    fields, table, consts = gen.basis(p, res)
    xs = np.linspace(xr[0] + 0.1, xr[1] - 0.1, 9)
    ts = np.linspace(0.3, 0.9, 5)
    return res, fields, table, consts, xs, ts


@pytest.mark.parametrize("case", AUTONOMOUS, ids=[c[0] for c in AUTONOMOUS])
def test_commutator_table(case):
    _, a, b, c, env, xr = case
    res, fields, table, consts, xs, ts = _basis(a, b, c, env, xr)
    assert len(fields) == res.dimension
    check = gen.check_table(fields, table, xs, ts)
    assert check["max_scaled_deviation"] <= TABLE_TOL, check["worst_pair"]
    assert gen.determining_residual(fields, consts, ts) <= 1e-8
    assert table.jacobi_residual() <= 1e-9


def test_self_bracket_vanishes():
    _, fields, *_ , xs, ts = _basis("(1 + k^2*x^2)^2", "0", "0", {"k": 1.0}, (-2, 2))
    X, T = np.meshgrid(xs, ts)
    for f in fields:
        w = gen.commutator(f, f)
        for comp in w.components(X, T):
            assert np.max(np.abs(comp)) <= 1e-9


def test_brownian_translation_field():
    _, fields, *_ , xs, ts = _basis("(1 + k^2*x^2)^2", "0", "0", {"k": 1.0}, (-2, 2))
    tau, xi, phi = fields[4].components(xs, 0.5)
    assert np.allclose(tau, 0) and np.allclose(xi, 1 + xs**2) and np.allclose(phi, xs)


def test_four_dim_flat_bracket():
    res, fields, table, *_ , xs, ts = _basis("1", "0", "-2/x^2 + 0.7", {}, (0.5, 3))
    assert res.variant == cl.FOUR and abs(res.c2) < 1e-9
    assert table.entries[(0, 1)] == {0: 1, 3: pytest.approx(res.c0)}


def test_six_dim_hyperbolic_bracket():
    res, fields, table, *_ = _basis("1", "l*x + 1", "0.3*x", {"l": 1.0}, (-2, 2))
    k = np.sqrt(-res.c2)
    r = 4 * res.c0 + (res.c1 / k) ** 2
    row = table.entries[(1, 2)]
    assert row[0] == pytest.approx(-8 * k) and row[5] == pytest.approx(-2 * k * r)


def test_radial_four_dim_brackets():
    res, fields, table, *_ = _basis("1", "2/x", "1/x^2 + x^2", {}, (0.5, 3))
    w = np.sqrt(res.c2)
    f = table.tensor()
    assert f[0, 1, 2] == pytest.approx(-4 * w)
    assert f[0, 2, 1] == pytest.approx(4 * w)
    assert f[1, 2, 0] == pytest.approx(4 * w)


def test_heat_algebra():
    _, fields, table, *_ , xs, ts = _basis("1", "0", "0", {}, (-2, 2))
    X, T = np.meshgrid(xs, ts)
    # tau in {1, t, t^2} and the Galilean boost 2t d/dx - x u d/du up to scale
    taus = [f.components(X, T)[0] for f in fields[:3]]
    assert np.allclose(taus[0], 1) and np.allclose(taus[1], T) and np.allclose(taus[2], T**2)
    _, xi, phi = fields[3].components(X, T)
    assert np.allclose(xi, T) and np.allclose(phi, -X / 2, atol=1e-12)


def test_structure_fit_recovers_expected_table():
    _, fields, table, *_ , xs, ts = _basis("1", "l*x", "l", {"l": 1.0}, (-2, 2))
    fitted, resid = gen.fit_structure(fields, xs, ts)
    assert resid <= 1e-8
    assert np.max(np.abs(fitted.tensor() - table.tensor())) <= 1e-6


def test_basis_rejects_trivial_class():
    p = profile(CoefficientSet("1", "0", "sin(5*x)"), WorkingDomain(0.5, 3))
    with pytest.raises(PreconditionError):
        gen.basis(p, cl.SymmetryClass(cl.NONE))


# -- time-dependent family ---------------------------------------------------------------
def _timedep(b, c, t0=0.5, t1=2.0):
    co = CoefficientSet("1", b, c)
    m, n, q, r = cl.linear_drift_parts(co)
    tdc = cl.timedep_classifiers(m, n, q, r)
    return tdc, gen.timedep_basis(tdc, m, n, t0, t1)


def _span_residual(fields, target, X, T):
    A = np.column_stack([np.concatenate([c.ravel() for c in f.components(X, T)]) for f in fields])
    y = np.concatenate([np.broadcast_to(c, X.shape).ravel() for c in target])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.max(np.abs(A @ coef - y)))


def test_spec_diff_generators():
    tdc, fields = _timedep("-x/t", "0")
    ts = np.linspace(0.6, 1.9, 7)
    assert len(fields) == 6
    assert gen.timedep_determining_residual(fields, tdc, ts) <= 1e-8
    table, resid = gen.fit_structure(fields, np.linspace(-2, 2, 9), ts)
    assert resid <= 1e-6 and table.jacobi_residual() <= 1e-6
    X, T = np.meshgrid(np.linspace(-2, 2, 9), ts)
    assert _span_residual(fields, (0 * X, T, 0 * X), X, T) <= 1e-9
    assert _span_residual(fields, (1 + 0 * X, 0 * X, 1 / (2 * T) - X**2 / (4 * T**2)), X, T) <= 1e-9


def test_hyperbolic_family_tau_rho():
    tdc, fields = _timedep("t/cosh(t) - tanh(t)*x", "-0.5*x/cosh(t)")
    ts = np.linspace(0.6, 1.9, 7)
    assert gen.timedep_determining_residual(fields, tdc, ts) <= 1e-8
    taus = np.array([f.components(0.0, ts)[0] for f in fields[:3]]).T
    ref = np.column_stack([np.ones_like(ts), np.cosh(2 * ts), np.sinh(2 * ts)])
    coef, *_ = np.linalg.lstsq(ref, taus, rcond=None)
    assert np.max(np.abs(ref @ coef - taus)) <= 1e-9
    X, T = np.meshgrid(np.linspace(-2, 2, 5), ts)
    rhos = []
    for f in fields[3:5]:
        tau, xi, _ = f.components(X, T)
        assert np.allclose(tau, 0)
        rhos.append(xi[:, 0])
    ref = np.column_stack([np.cosh(ts), np.sinh(ts)])
    for r in rhos:
        coef, *_ = np.linalg.lstsq(ref, r, rcond=None)
        assert np.max(np.abs(ref @ coef - r)) <= 1e-9


def test_constant_coefficient_reduction():
    tdc, fields = _timedep("0*t", "0*t")
    ts = np.linspace(0.6, 1.9, 7)
    taus = np.array([f.components(0.0, ts)[0] for f in fields[:3]]).T
    ref = np.column_stack([np.ones_like(ts), ts, ts**2])
    coef, *_ = np.linalg.lstsq(ref, taus, rcond=None)
    assert np.max(np.abs(ref @ coef - taus)) <= 1e-9


# -- symmetry criterion ----------------------------------------------------------------------
def _entry_fields(e):
    co = e.coefficients()
    d = e.domain_for()
    if co.time_dependent:
        m, n, q, r = cl.linear_drift_parts(co)
        tdc = cl.timedep_classifiers(m, n, q, r, co.env)
        return co, d, gen.timedep_basis(tdc, m, n, d[2] - 0.01, d[3] + 0.01)
    p = profile(co, WorkingDomain(*d))
    return co, d, gen.basis(p, cl.classify(p))[0]


def _grid(d):
    w = 0.05 * (d[1] - d[0])
    return vf.Grid(d[0] + w, d[1] - w, d[2] + 0.01, d[3] - 0.01, h=1 / 128, nt=5)


@pytest.mark.parametrize("name", cat.names())
def test_symmetry_criterion(name):
    """Every generator maps each catalogue solution of its PDE to a solution.

    For a linear PDE the image u + eps Q of a solution u is a solution for
    every eps exactly when the characteristic Q = phi u - xi u_x - tau u_t is
    one, so Q itself is checked, plus the deformed function at two eps.
    """
    e = cat.entry(name)
    co, d, fields = _entry_fields(e)
    u = e.evaluator()
    g = _grid(d)
    base = vf.residual(co, u, g)
    assert base.relative <= 1e-6
    for f in fields:
        Q = gen.characteristic(f, u)
        rq = vf.residual(co, Q, g)
        assert rq.max_abs / max(rq.scale, base.scale) <= 1e-4, f.label
        for eps in (1e-3, 1e-4):
            assert vf.residual(co, gen.deformed(f, u, eps), g).relative <= 1e-6


@pytest.mark.parametrize("name", ["heat_kernel", "ou_fundamental", "radial_2d"])
def test_symmetry_criterion_negative_control(name):
    e = cat.entry(name)
    co, d, _ = _entry_fields(e)
    u = e.evaluator()
    g = _grid(d)
    bogus = gen.VectorField("x^2 d/dx", lambda x, t: 0 * x, lambda x, t: x**2, lambda x, t: 0 * x)
    rq = vf.residual(co, gen.characteristic(bogus, u), g)
    assert rq.max_abs / max(rq.scale, vf.residual(co, u, g).scale) >= 1e-2
