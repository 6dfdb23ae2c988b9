import math

import numpy as np
import pytest

from diffusym import canonical as cn
from diffusym import classify as cl
from diffusym.errors import PreconditionError
from diffusym.invariants import CoefficientSet, WorkingDomain, profile
from conftest import spec_profile


# -- Schwarzian -------------------------------------------------------------------------
def test_schwarzian_identity_map():
    s = cn.solve_schwarzian(0.0, cn.MobiusParams(1, 0, 0, 1))
    t = np.linspace(0.1, 2, 5)
    assert np.allclose(s.T(t), t) and np.allclose(s.rho(t), 0)


def test_schwarzian_inversion():
    s = cn.solve_schwarzian(0.0, cn.MobiusParams(0, 1, -1, 0))
    assert s.T(0.5) == pytest.approx(-2.0)
    assert abs(cn.schwarzian_fd(s.T, 0.7)) <= 1e-6
    with pytest.raises(PreconditionError):
        cn.solve_schwarzian(0.0, cn.MobiusParams(0, 1, 1, 0))


def test_schwarzian_hyperbolic_value():
    s = cn.solve_schwarzian(-1.0, cn.MobiusParams(0, 1, 1, 0))
    assert abs(cn.schwarzian_fd(s.T, 0.3) + 8) <= 1e-5


@pytest.mark.parametrize("c2,p", [(-1.0, (0, 1, 1, 0)), (-0.3, (1, 2, 1, -1)), (0.5, (0, 1, 1, 0)),
                                  (2.0, (1, 0, 0, -1)), (0.0, (2, 1, 1, 3))])
def test_schwarzian_and_riccati_identities(c2, p):
    s = cn.solve_schwarzian(c2, cn.MobiusParams(*p))
    ts = np.linspace(0.15, 0.35, 9)
    h = 1e-4
    for t in ts:
        assert abs(cn.schwarzian_fd(s.T, t) - 8 * c2) <= 1e-6 * max(1, abs(8 * c2)) * 10
        rd = (s.rho(t - 2 * h) - 8 * s.rho(t - h) + 8 * s.rho(t + h) - s.rho(t + 2 * h)) / (12 * h)
        assert abs(rd - s.rho(t) ** 2 / 2 - 8 * c2) <= 1e-6 * (1 + abs(s.rho(t)) ** 2)
        # T' from the closed form agrees with the derivative of T
        Td = (s.T(t - 2 * h) - 8 * s.T(t - h) + 8 * s.T(t + h) - s.T(t + 2 * h)) / (12 * h)
        assert Td == pytest.approx(float(s.T_dot(t)), rel=1e-8)


def test_pole_scan():
    s = cn.solve_schwarzian(1.0, cn.MobiusParams(0, 1, 1, 0))
    # denominator cos(2t) vanishes at pi/4
    poles = s.poles(0.1, 1.5)
    assert len(poles) == 1 and abs(poles[0] - math.pi / 4) < 1e-3
    with pytest.raises(PreconditionError):
        s.check_window(0.1, 1.5)


def test_mobius_parse():
    assert cn.MobiusParams.parse("1, 0.5, 1, 2").as_tuple() == (1, 0.5, 1, 2)
    for bad in ("1,2,3", "a,b,c,d", "1,2,2,4"):
        with pytest.raises(PreconditionError):
            cn.MobiusParams.parse(bad)


# -- omega -------------------------------------------------------------------------------
def test_omega_quadratic():
    om = cn.solve_omega(0.0, 0.7, (0.0, 0.0), 0.0, 3.0)
    assert om.omega(2.0) == pytest.approx(4 * 0.7, rel=1e-9)


def test_omega_zero():
    om = cn.solve_omega(0.3, 0.0, (0.0, 0.0), 0.0, 2.0)
    assert np.allclose(om.omega(np.linspace(0, 2, 5)), 0)


def test_omega_time_dependent_particular_solution():
    r0 = 0.4
    om = cn.solve_omega(lambda t: t**-4 / 4, lambda t: r0 * t**-3, (2 * r0 * 0.5, 2 * r0), 0.5, 2.0)
    ts = np.linspace(0.5, 2, 9)
    assert np.allclose(om.omega(ts), 2 * r0 * ts, atol=1e-9)
    # and the ODE residual along it
    w = 2 * r0 * ts
    assert np.max(np.abs(0 + 4 * ts**-4 / 4 * w - 2 * r0 * ts**-3)) <= 1e-9


# -- heat maps ---------------------------------------------------------------------------
def test_identity_map_for_heat():
    p = profile(CoefficientSet("1", "0", "0"), WorkingDomain(-2, 2, 0.1, 1, x0=0.0))
    hm = cn.build_heat_map(p, cl.classify(p), cn.MobiusParams(1, 0, 0, 1))
    x, t = np.meshgrid(np.linspace(-1.5, 1.5, 7), np.linspace(0.1, 1, 4))
    assert np.allclose(hm.t_tilde(t), t) and np.allclose(hm.x_tilde(x, t), x)
    assert np.allclose(hm.multiplier(x, t), 1.0)
    assert np.allclose(cn.pull_back_constant(hm, 2.5)(x, t), 2.5)


def test_brownian_map_closed_form():
    k = 1.3
    co = CoefficientSet("(1 + k^2*x^2)^2", "0", "0", {"k": k})
    p = profile(co, WorkingDomain(-1, 1, 0.1, 1, x0=0.0))
    al, be, ga, de = 1.0, 0.5, 1.0, 2.0
    hm = cn.build_heat_map(p, cl.classify(p), cn.MobiusParams(al, be, ga, de))
    x, t = np.meshgrid(np.linspace(-0.9, 0.9, 9), np.linspace(0.1, 1, 5))
    D, det = ga * t + de, al * de - be * ga
    ak = np.arctan(k * x)
    assert np.allclose(hm.t_tilde(t), (al * t + be) / D, rtol=1e-13)
    assert np.allclose(hm.x_tilde(x, t), math.sqrt(det) / D * ak / k, rtol=1e-9)
    ref = np.abs(D) ** -0.5 * np.sqrt(1 + k**2 * x**2) * np.exp(-ga * ak**2 / (4 * k**2 * D) + k**2 * t)
    ratio = hm.multiplier(x, t) / ref
    assert np.ptp(ratio) / np.mean(ratio) <= 1e-9


def test_ou_map_closed_form():
    _, p, spec = spec_profile("ou")
    hm = cn.build_heat_map(p, cl.classify(p), cn.MobiusParams(-1, 0, 0, 1))
    t = np.linspace(0.2, 1.8, 5)
    assert np.allclose(hm.t_tilde(t), -1 / np.tanh(t), rtol=1e-12)
    assert np.allclose(hm.x_tilde(1.0, t), 1 / np.sinh(t), rtol=1e-9)


def _fit_constant(u, ref):
    c = float(np.sum(u * ref) / np.sum(ref * ref))
    return c, float(np.max(np.abs(u - c * ref)) / np.max(np.abs(c * ref)))


def test_ou_pull_back_is_fundamental_solution():
    _, p, _ = spec_profile("ou")
    hm = cn.build_heat_map(p, cl.classify(p), cn.MobiusParams(-1, 0, 0, 1))
    x, t = np.meshgrid(np.linspace(-2.9, 2.9, 31), np.linspace(0.1, 2, 11))
    ref = math.sqrt(1 / (2 * math.pi)) / np.sqrt(1 - np.exp(-2 * t)) * np.exp(-0.5 * x**2 / (1 - np.exp(-2 * t)))
    _, dev = _fit_constant(cn.pull_back_constant(hm)(x, t), ref)
    assert dev <= 1e-6


def test_cir_half_pull_back():
    _, p, _ = spec_profile("cir_sigma_half")
    hm = cn.build_heat_map(p, cl.classify(p))
    x, t = np.meshgrid(np.linspace(0.3, 2.9, 20), np.linspace(0.2, 1.4, 9))
    ref = (1 + np.exp(2 * t)) ** -0.5 * np.exp(-2 * x / (1 + np.exp(-2 * t)))
    _, dev = _fit_constant(cn.pull_back_constant(hm)(x, t), ref)
    assert dev <= 1e-6


def test_appell_limit():
    k = 1e-4
    co = CoefficientSet("(1 + k^2*x^2)^2", "0", "0", {"k": k})
    p = profile(co, WorkingDomain(-1, 1, 0.1, 1, x0=0.0))
    al, be, ga, de = 1.0, 0.5, 1.0, 2.0
    hm = cn.build_heat_map(p, cl.classify(p), cn.MobiusParams(al, be, ga, de))
    x, t = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(0.1, 1, 19))
    D, det = ga * t + de, al * de - be * ga
    assert np.max(np.abs(hm.t_tilde(t) - (al * t + be) / D)) <= 1e-6
    assert np.max(np.abs(hm.x_tilde(x, t) - math.sqrt(det) / D * x)) <= 1e-6
    appell = np.abs(D) ** -0.5 * np.exp(-ga * x**2 / (4 * D))
    # the general multiplier carries (T')^(1/4) = det^(1/4)/|D|^(1/2)
    theta = hm.multiplier(x, t) / det**0.25
    assert np.max(np.abs(theta / appell - 1)) <= 1e-6


# -- conjugation property -------------------------------------------------------------------
def _pointwise_residual(coeffs, u, x, t, hx=1e-3, ht=1e-4):
    ux = (u(x - 2 * hx, t) - 8 * u(x - hx, t) + 8 * u(x + hx, t) - u(x + 2 * hx, t)) / (12 * hx)
    uxx = (-u(x - 2 * hx, t) + 16 * u(x - hx, t) - 30 * u(x, t) + 16 * u(x + hx, t) - u(x + 2 * hx, t)) / (12 * hx * hx)
    ut = (u(x, t - 2 * ht) - 8 * u(x, t - ht) + 8 * u(x, t + ht) - u(x, t + 2 * ht)) / (12 * ht)
    f = coeffs.fn
    return ut - f("a")(x, t) * uxx - f("b")(x, t) * ux - f("c")(x, t) * u(x, t)


def heat_solution(T_min):
    """Gaussian heat kernel started before the smallest canonical time reached."""
    s0 = 1.0 - T_min
    return lambda y, T: np.exp(-(y - 0.3) ** 2 / (4 * (T + s0))) / np.sqrt(4 * math.pi * (T + s0))


def mu_solution(mu, T_min):
    """Self-similar solution T^-(p+1/2) y^p exp(-y^2/4T) of v_T = v_yy + mu v / y^2, real part."""
    s0 = 1.0 - T_min
    if mu <= 0.25:
        p = 0.5 + math.sqrt(0.25 - mu)
        return lambda y, T: (T + s0) ** -(p + 0.5) * y**p * np.exp(-y**2 / (4 * (T + s0)))
    k = math.sqrt(mu - 0.25)
    return lambda y, T: ((T + s0) ** -1 * np.sqrt(y) * np.exp(-y**2 / (4 * (T + s0)))
                         * np.cos(k * np.log(y / (T + s0))))


MAPS = [("heat", {}), ("brownian", {}), ("ou", {"p": cn.MobiusParams(-1, 0, 0, 1)}), ("cir_sigma_half", {}),
        ("volatility_quadratic", {}), ("brownian", {"p": cn.MobiusParams(1, 0.5, 1, 2)}),
        ("cir_m1", {"target": cn.SECOND}), ("fp_alpha_over_x", {"target": cn.SECOND}),
        ("radial_n3", {"target": cn.SECOND, "p": cn.MobiusParams(1, 0, 0, -1)})]


@pytest.mark.parametrize("name,kw", MAPS, ids=[f"{n}-{i}" for i, (n, _) in enumerate(MAPS)])
def test_conjugation(name, kw, rng):
    co, p, spec = spec_profile(name)
    res = cl.classify(p)
    hm = cn.build_heat_map(p, res, **kw)
    d = spec.domain
    pad_x = 0.05 * (d.x_max - d.x_min)
    x = rng.uniform(d.x_min + pad_x, d.x_max - pad_x, 200)
    t = rng.uniform(d.t_min + 0.01, d.t_max - 0.01, 200)
    T_min = float(np.min(hm.t_tilde(np.linspace(d.t_min, d.t_max, 201))))
    if hm.target == cn.SECOND and res.variant == cl.FOUR:
        assert np.all(hm.x_tilde(x, t) > 0)
        v = mu_solution(res.mu, T_min)
    else:
        v = heat_solution(T_min)
    u = hm.pull_back(v)
    r = _pointwise_residual(co, u, x, t)
    assert np.max(np.abs(r)) <= 1e-5 * np.max(np.abs(u(x, t)))


def test_mu_solution_solves_target():
    from diffusym import verify as vf
    for mu in (-2.0, 0.1, 1.0):
        co = CoefficientSet("1", "0", "mu/x^2", {"mu": mu})
        # cos(k ln y) oscillates near y = 0.3, so use a fine grid
        rep = vf.residual(co, mu_solution(mu, 0.0), vf.Grid(0.3, 3, 0.1, 1, h=1 / 512))
        assert rep.relative <= 1e-7


def test_push_forward_inverts():
    _, p, _ = spec_profile("brownian")
    hm = cn.build_heat_map(p, cl.classify(p))
    x, t = np.meshgrid(np.linspace(-1.5, 1.5, 9), np.linspace(0.3, 1.4, 4))
    u = cn.pull_back_constant(hm)(x, t)
    _, _, back = hm.push_forward_values(u, x, t)
    assert np.allclose(back, 1.0, rtol=1e-13)


def test_map_preconditions():
    _, p, _ = spec_profile("cir_m1")
    res = cl.classify(p)
    with pytest.raises(PreconditionError):
        cn.build_heat_map(p, res, target=cn.FIRST)
    _, p6, _ = spec_profile("ou")
    with pytest.raises(PreconditionError):
        cn.build_heat_map(p6, cl.classify(p6), C=0.0)
    with pytest.raises(PreconditionError):
        cn.build_heat_map(p6, cl.SymmetryClass(cl.NONE))
    hm = cn.build_heat_map(p6, cl.classify(p6), cn.MobiusParams(-1, 0, 0, 1))
    with pytest.raises(PreconditionError):
        hm.t_tilde(5.0)


def test_second_target_coefficients():
    _, p, _ = spec_profile("cir_m1")
    hm = cn.build_heat_map(p, cl.classify(p), target=cn.SECOND)
    tc = hm.target_coefficients()
    assert tc.fn("c")(2.0, 0.0) == pytest.approx(hm.cls.mu / 4)


# -- time-dependent maps -------------------------------------------------------------------
def test_timedep_fokker_planck_case():
    n = "sin(t) - 1"
    tm = cn.build_timedep_map("t", n, n, "0", t0=0.5, t_end=2.0)
    ts = np.linspace(0.5, 2, 9)
    x = np.linspace(-1, 1, 5)
    for t in ts:
        assert np.allclose(tm.multiplier(x, t), np.exp(tm.alpha(t)), rtol=1e-12)
    h = 1e-4
    for t in ts[1:-1]:
        dT = (tm.t_tilde(t + h) - tm.t_tilde(t - h)) / (2 * h)
        assert dT == pytest.approx(float(np.exp(2 * tm.alpha(t))), rel=1e-7)


def test_timedep_cotangent_example():
    r0, t0 = 0.3, 0.5
    tm = cn.build_timedep_map("0", "t^-2*(cos(1/t)/sin(1/t) - t)", "0", "r0*t^-3", {"r0": r0}, t0, 2.0)
    ts = np.linspace(t0, 2, 9)
    cot = lambda z: 1 / np.tan(z)
    scale = 1 / (math.sin(1 / t0) ** 2 * t0**2)
    # same time map up to the affine normalisation T(t0) = 0, T'(t0) = 1
    assert np.allclose(tm.t_tilde(ts), (cot(1 / ts) - cot(1 / t0)) / scale, atol=1e-9)
    ratio = np.exp(tm.alpha(ts)) / (1 / np.sin(1 / ts) / ts)
    assert np.ptp(ratio) <= 1e-9


def test_timedep_identity():
    tm = cn.build_timedep_map("0", "0", "0", "0", t0=0.1, t_end=1.0)
    t = np.linspace(0.1, 1, 4)
    assert np.allclose(tm.alpha(t), 0) and np.allclose(tm.beta(t), 0) and np.allclose(tm.gamma(t), 0)


@pytest.mark.parametrize("m,n,q,r", [("0", "-1/t", "0", "0"), ("0", "t^-2*(cos(1/t)/sin(1/t) - t)", "0", "0.3*t^-3"),
                                     ("t/cosh(t)", "-tanh(t)", "0", "-0.5/cosh(t)")])
def test_timedep_conjugation(m, n, q, r, rng):
    co = CoefficientSet("1", f"{m} + ({n})*x", f"{q} + ({r})*x")
    tm = cn.build_timedep_map(m, n, q, r, t0=0.5, t_end=2.0)
    x = rng.uniform(-2, 2, 200)
    t = rng.uniform(0.52, 1.98, 200)
    u = tm.pull_back(heat_solution(0.0))
    res = _pointwise_residual(co, u, x, t)
    assert np.max(np.abs(res)) <= 1e-5 * np.max(np.abs(u(x, t)))
