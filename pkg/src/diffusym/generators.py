"""Symmetry generators ``tau d/dt + xi d/dx + phi u d/du`` and their brackets.

Every generator of ``u_t = a u_xx + b u_x + c u`` (besides the
superposition ones) is fixed by three functions of time:

    xi  = sqrt(a) (tau' I / 2 + rho),
    phi = -tau'' I^2 / 8 - rho' I / 2 + tau' I J / 4 + rho J / 2 + sigma,

where, for ``K = c2 I^2 + c1 I + c0``,

    tau''' + 16 c2 tau' = 0,  rho'' + 4 c2 rho = -3 c1 tau',
    sigma' = -tau''/4 + c0 tau' + c1 rho.

The bases below are written as ``(tau, rho, sigma)`` expressions in ``t``
and pushed through these formulas, so the listed fields and their expected
commutator tables share one source.  In the four-dimensional case
``rho = 0`` and ``I`` is measured from its natural origin.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exprdsl as ed
from .classify import FOUR, SIX, SymmetryClass, TimeDepClassifiers
from .errors import PreconditionError
from .numerics import OdeSpec, solve_ode

# tau''' is taken by differencing dense output, which needs tighter ODE tolerances
TIMEDEP_ODE = OdeSpec(rel_tol=1e-12, abs_tol=1e-14)
FD_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class VectorField:
    """Coefficients of ``tau d/dt + xi d/dx + phi u d/du`` as ``f(x, t)`` evaluators."""

    label: str
    tau: Callable
    xi: Callable
    phi: Callable
    data: dict = field(default_factory=dict, repr=False)

    def components(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        return (np.broadcast_to(self.tau(x, t), x.shape).astype(float),
                np.broadcast_to(self.xi(x, t), x.shape).astype(float),
                np.broadcast_to(self.phi(x, t), x.shape).astype(float))


@dataclass(frozen=True)
class StructureTable:
    """``[v_i, v_j] = sum_k f[i, j, k] v_k`` for ``i < j`` (antisymmetric by construction)."""

    labels: tuple
    entries: dict
    constants: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.labels)

    def tensor(self) -> np.ndarray:
        n = self.size
        f = np.zeros((n, n, n))
        for (i, j), row in self.entries.items():
            for k, v in row.items():
                f[i, j, k] += v
                f[j, i, k] -= v
        return f

    def coefficients(self, i: int, j: int) -> np.ndarray:
        return self.tensor()[i, j]

    def jacobi_residual(self) -> float:
        f = self.tensor()
        worst = 0.0
        for i, j, k in itertools.combinations(range(self.size), 3):
            s = (f[i, j] @ f[:, k] + f[j, k] @ f[:, i] + f[k, i] @ f[:, j])
            worst = max(worst, float(np.max(np.abs(s))))
        return worst

    def to_dict(self) -> dict:
        out = {}
        for (i, j), row in sorted(self.entries.items()):
            terms = {self.labels[k]: float(v) for k, v in sorted(row.items()) if v != 0}
            if terms:
                out[f"[{self.labels[i]},{self.labels[j]}]"] = terms
        return {"nonzero_brackets": out, "constants": {k: float(v) for k, v in self.constants.items()}}


# -- (tau, rho, sigma) data ----------------------------------------------------
def _trs_six(c2: float, c1: float, c0: float):
    """Six ``(tau, rho, sigma)`` triples (as text in ``t``) and the expected table."""
    if c2 == 0:
        rows = [
            ("1", "0", "0"),
            ("t", "-1.5*c1*t^2", "c0*t - 0.5*c1^2*t^3"),
            ("t^2", "-c1*t^3", "-t/2 + c0*t^2 - c1^2*t^4/4"),
            ("0", "t", "c1*t^2/2"),
            ("0", "1", "c1*t"),
            ("0", "0", "1"),
        ]
        table = {(0, 1): {0: 1, 3: -3 * c1, 5: c0}, (0, 2): {1: 2, 5: -0.5}, (0, 3): {4: 1},
                 (0, 4): {5: c1}, (1, 2): {2: 1}, (1, 3): {3: 0.5}, (1, 4): {4: -0.5},
                 (2, 4): {3: -1}, (3, 4): {5: 0.5}}
        return rows, table, {}
    k = float(np.sqrt(abs(c2)))
    if c2 < 0:
        rows = [
            ("1", "0", "0"),
            ("exp(4*k*t)", "-(c1/k)*exp(4*k*t)", "(c0 - k - c1^2/(4*k^2))*exp(4*k*t)"),
            ("exp(-4*k*t)", "(c1/k)*exp(-4*k*t)", "(c0 + k - c1^2/(4*k^2))*exp(-4*k*t)"),
            ("0", "exp(2*k*t)", "c1*exp(2*k*t)/(2*k)"),
            ("0", "exp(-2*k*t)", "-c1*exp(-2*k*t)/(2*k)"),
            ("0", "0", "1"),
        ]
        r = 4 * c0 + (c1 / k) ** 2
        table = {(0, 1): {1: 4 * k}, (0, 2): {2: -4 * k}, (0, 3): {3: 2 * k}, (0, 4): {4: -2 * k},
                 (1, 2): {0: -8 * k, 5: -2 * k * r}, (1, 4): {3: -4 * k}, (2, 3): {4: 4 * k},
                 (3, 4): {5: 2 * k}}
        return rows, table, {"kappa": k, "r": r}
    rows = [
        ("1", "0", "0"),
        ("cos(4*k*t)", "-(c1/k)*sin(4*k*t)", "k*sin(4*k*t) + (c0 + c1^2/(4*k^2))*cos(4*k*t)"),
        ("sin(4*k*t)", "(c1/k)*cos(4*k*t)", "-k*cos(4*k*t) + (c0 + c1^2/(4*k^2))*sin(4*k*t)"),
        ("0", "cos(2*k*t)", "c1*sin(2*k*t)/(2*k)"),
        ("0", "sin(2*k*t)", "-c1*cos(2*k*t)/(2*k)"),
        ("0", "0", "1"),
    ]
    s = 4 * c0 - (c1 / k) ** 2
    table = {(0, 1): {2: -4 * k}, (0, 2): {1: 4 * k}, (0, 3): {4: -2 * k}, (0, 4): {3: 2 * k},
             (1, 2): {0: 4 * k, 5: k * s}, (1, 3): {4: 2 * k}, (1, 4): {3: 2 * k},
             (2, 3): {3: -2 * k}, (2, 4): {4: 2 * k}, (3, 4): {5: -k}}
    return rows, table, {"kappa": k, "s": s}


def _trs_four(c2: float, c0: float):
    rows, _, consts = _trs_six(c2, 0.0, c0)
    rows = [rows[0], rows[1], rows[2], rows[5]]
    if c2 == 0:
        table = {(0, 1): {0: 1, 3: c0}, (0, 2): {1: 2, 3: -0.5}, (1, 2): {2: 1}}
    elif c2 < 0:
        k = consts["kappa"]
        table = {(0, 1): {1: 4 * k}, (0, 2): {2: -4 * k}, (1, 2): {0: -8 * k, 3: -8 * c0 * k}}
    else:
        k = consts["kappa"]
        table = {(0, 1): {2: -4 * k}, (0, 2): {1: 4 * k}, (1, 2): {0: 4 * k, 3: 4 * k * c0}}
    return rows, table, {k_: v for k_, v in consts.items() if k_ == "kappa"}


class _TimeFn:
    """A function of ``t`` given as an expression, with exact derivatives."""

    def __init__(self, text: str, env: ed.ParamEnv):
        e = ed.parse(text)
        self.exprs = [e]
        for _ in range(3):
            self.exprs.append(ed.differentiate(self.exprs[-1], "t"))
        self._f = [ed.compile_expr(d, env) for d in self.exprs]

    def __call__(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        return self._f[order](0.0 * t, t)


def _field_from_trs(label, tau, rho, sigma, I_fn, J_fn, sqrt_a_fn):
    def tau_c(x, t):
        return tau(np.broadcast_to(t, np.broadcast(x, t).shape))

    def xi(x, t):
        return sqrt_a_fn(x) * (0.5 * tau(t, 1) * I_fn(x) + rho(t))

    def phi(x, t):
        I, J = I_fn(x), J_fn(x)
        return (-tau(t, 2) * I**2 / 8 - rho(t, 1) * I / 2 + tau(t, 1) * I * J / 4
                + rho(t) * J / 2 + sigma(t))

    return VectorField(label, tau_c, xi, phi, {"tau": tau, "rho": rho, "sigma": sigma})


def basis(prof, cls: SymmetryClass):
    """Generators of an autonomous PDE and their expected bracket table."""
    if prof.time_dependent:
        raise PreconditionError("time-dependent coefficients: use timedep_basis")
    if cls.variant == SIX:
        c2, c1, c0 = cls.c2, cls.c1, cls.c0
        rows, table, consts = _trs_six(_snap(c2), c1, c0)
        iota = 0.0
    elif cls.variant == FOUR:
        c2, c1, c0 = cls.c2, 0.0, cls.c0
        rows, table, consts = _trs_four(_snap(c2), c0)
        iota = cls.iota
    else:
        raise PreconditionError("no extra symmetries: the classification is trivial")
    k = consts.get("kappa", 1.0)
    env = ed.ParamEnv({"k": k, "c0": c0, "c1": c1})
    I_fn = lambda x: prof.I(x) + iota
    J_fn = lambda x: prof.J(x)
    sa = lambda x: prof.sqrt_a(x)
    fields = []
    for idx, (ta, rh, si) in enumerate(rows):
        fields.append(_field_from_trs(f"v{idx + 1}", _TimeFn(ta, env), _TimeFn(rh, env),
                                      _TimeFn(si, env), I_fn, J_fn, sa))
    labels = tuple(f.label for f in fields)
    consts = dict(consts, c2=c2, c1=c1, c0=c0)
    if cls.variant == FOUR:
        consts["mu"] = cls.mu
    return fields, StructureTable(labels, table, consts), (c2, c1, c0)


def _snap(c2: float) -> float:
    return 0.0 if abs(c2) <= 1e-10 else c2


def determining_residual(fields, constants, ts) -> float:
    """Largest violation of the determining ODEs by the ``(tau, rho, sigma)`` data."""
    c2, c1, c0 = constants
    worst = 0.0
    for f in fields:
        tau, rho, sigma = f.data["tau"], f.data["rho"], f.data["sigma"]
        e1 = tau(ts, 3) + 16 * c2 * tau(ts, 1)
        e2 = rho(ts, 2) + 4 * c2 * rho(ts) + 3 * c1 * tau(ts, 1)
        e3 = sigma(ts, 1) + tau(ts, 2) / 4 - c0 * tau(ts, 1) - c1 * rho(ts)
        scale = 1.0 + max(np.max(np.abs(tau(ts))), np.max(np.abs(rho(ts))), np.max(np.abs(sigma(ts))))
        worst = max(worst, float(np.max(np.abs(np.concatenate([e1, e2, e3])))) / scale)
    return worst


# -- numerical bracket -----------------------------------------------------------
def _d(f, x, t, var, h):
    """Fourth-order central difference of ``f(x, t)`` in ``var``."""
    if var == "x":
        s = h * np.maximum(1.0, np.abs(x))
        g = lambda k: f(x + k * s, t)
    else:
        s = h * np.maximum(1.0, np.abs(t))
        g = lambda k: f(x, t + k * s)
    return (g(-2) - 8 * g(-1) + 8 * g(1) - g(2)) / (12 * s)


def commutator(v: VectorField, w: VectorField, h: float = FD_STEP) -> VectorField:
    """Lie bracket ``[v, w]`` by fourth-order finite differences of the coefficients."""

    def component(name):
        fv, fw = getattr(v, name), getattr(w, name)

        def comp(x, t):
            x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
            vw = v.tau(x, t) * _d(fw, x, t, "t", h) + v.xi(x, t) * _d(fw, x, t, "x", h)
            wv = w.tau(x, t) * _d(fv, x, t, "t", h) + w.xi(x, t) * _d(fv, x, t, "x", h)
            return vw - wv

        return comp

    return VectorField(f"[{v.label},{w.label}]", component("tau"), component("xi"), component("phi"))


def check_table(fields, table: StructureTable, x, t, h: float = FD_STEP) -> dict:
    """Compare every numeric bracket with the expected table at sample points.

    Returns the worst absolute deviation scaled by ``1 +`` the largest
    component magnitude of the fields involved.
    """
    X, Tm = np.meshgrid(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    comps = [np.array(f.components(X, Tm)) for f in fields]
    f = table.tensor()
    worst, where = 0.0, None
    per_pair = {}
    for i, j in itertools.combinations(range(len(fields)), 2):
        br = np.array(commutator(fields[i], fields[j], h).components(X, Tm))
        expect = sum(f[i, j, k] * comps[k] for k in range(len(fields)))
        scale = 1.0 + max(np.max(np.abs(comps[i])), np.max(np.abs(comps[j])))
        dev = float(np.max(np.abs(br - expect))) / scale
        per_pair[f"[{fields[i].label},{fields[j].label}]"] = dev
        if dev > worst:
            worst, where = dev, (fields[i].label, fields[j].label)
    return {"max_scaled_deviation": worst, "worst_pair": where, "per_pair": per_pair}


def fit_structure(fields, x, t, h: float = FD_STEP):
    """Least-squares structure constants of numerically computed brackets.

    Returns ``(StructureTable, worst relative residual)``; the residual
    measures how far each bracket is from the span of ``fields``.
    """
    X, Tm = np.meshgrid(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    A = np.column_stack([np.concatenate([c.ravel() for c in f.components(X, Tm)]) for f in fields])
    entries, worst = {}, 0.0
    for i, j in itertools.combinations(range(len(fields)), 2):
        br = commutator(fields[i], fields[j], h).components(X, Tm)
        y = np.concatenate([c.ravel() for c in br])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = np.max(np.abs(A @ coef - y)) / (1.0 + np.max(np.abs(A)))
        worst = max(worst, float(res))
        coef[np.abs(coef) < 1e-9] = 0.0
        entries[(i, j)] = {k: float(c) for k, c in enumerate(coef) if c != 0}
    return StructureTable(tuple(f.label for f in fields), entries), worst


# -- symmetry criterion ----------------------------------------------------------------
def characteristic(v: VectorField, u: Callable, hx: float = 1e-2, ht: float = 1e-3) -> Callable:
    """``Q = phi u - xi u_x - tau u_t``; a solution of the PDE iff ``v`` maps solutions to solutions."""

    def Q(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        tau, xi, phi = v.components(x, t)
        ux = (u(x - 2 * hx, t) - 8 * u(x - hx, t) + 8 * u(x + hx, t) - u(x + 2 * hx, t)) / (12 * hx)
        ut = (u(x, t - 2 * ht) - 8 * u(x, t - ht) + 8 * u(x, t + ht) - u(x, t + 2 * ht)) / (12 * ht)
        return phi * u(x, t) - xi * ux - tau * ut

    return Q


def deformed(v: VectorField, u: Callable, eps: float, **kw) -> Callable:
    """``u + eps Q``, the infinitesimal image of ``u`` under the flow of ``v``."""
    Q = characteristic(v, u, **kw)
    return lambda x, t: u(x, t) + eps * Q(x, t)


# -- time-dependent family ---------------------------------------------------------------
def timedep_basis(cls: TimeDepClassifiers, m, n, t0: float, t_end: float,
                  spec: OdeSpec = TIMEDEP_ODE):
    """Six generators of ``u_t = u_xx + (m + n x) u_x + (q + r x) u``.

    ``tau`` runs over ``psi1^2, psi1 psi2, psi2^2`` (``psi'' + 4 c2 psi = 0``
    with unit initial data at ``t0``), each with the particular ``rho`` of
    zero initial data; then ``rho = psi1``, ``rho = psi2`` and ``u d/du``.
    ``sigma = c0 tau - tau'/4 + int_{t0} c1 rho``.
    """
    env = cls.env
    m_e, n_e = ed.as_expression(m), ed.as_expression(n)
    fm = ed.compile_expr(m_e, env)
    fn_ = ed.compile_expr(n_e, env)
    fmd = ed.compile_expr(ed.differentiate(m_e, "t"), env)
    fnd = ed.compile_expr(ed.differentiate(n_e, "t"), env)
    c2, c1, c0, c2d, c1d = cls.c2, cls.c1, cls.c0, cls.c2_dot, cls.c1_dot
    pairs = [(0, 0), (0, 1), (1, 1)]

    def taus(y, t):
        p = [(y[0], y[1]), (y[2], y[3])]
        c2t = c2(t)
        out = []
        for a_, b_ in pairs:
            (pa, pad), (pb, pbd) = p[a_], p[b_]
            tau = pa * pb
            tau_d = pad * pb + pa * pbd
            tau_dd = 2 * pad * pbd - 8 * c2t * tau
            out.append((tau, tau_d, tau_dd))
        return out

    def rhs(t, y):
        c2t, c1t, c1dt = float(c2(t)), float(c1(t)), float(c1d(t))
        dy = np.empty_like(y)
        dy[0], dy[1] = y[1], -4 * c2t * y[0]
        dy[2], dy[3] = y[3], -4 * c2t * y[2]
        for k, (tau, tau_d, _) in enumerate(taus(y, t)):
            r, rd = y[4 + 2 * k], y[5 + 2 * k]
            dy[4 + 2 * k] = rd
            dy[5 + 2 * k] = -4 * c2t * r - 3 * c1t * tau_d - 2 * c1dt * tau
        rhos = [y[4], y[6], y[8], y[0], y[2]]
        dy[10:15] = [c1t * r for r in rhos]
        return dy

    y0 = np.zeros(15)
    y0[0], y0[3] = 1.0, 1.0
    cls.check_window(min(t0, t_end), max(t0, t_end))
    sol = solve_ode(rhs, t0, y0, t_end, spec)

    def make(k_tau, k_rho):
        """Field with tau from pair ``k_tau`` (or none) and rho index ``k_rho``."""

        def state(t):
            return sol(np.asarray(t, dtype=float))

        def tau_parts(t):
            y = state(t)
            if k_tau is None:
                z = np.zeros_like(y[0])
                return z, z, z
            return taus(y, t)[k_tau]

        def rho_parts(t):
            y = state(t)
            c2t = c2(t)
            if k_rho < 3:
                r, rd = y[4 + 2 * k_rho], y[5 + 2 * k_rho]
            else:
                i = 0 if k_rho == 3 else 2
                r, rd = y[i], y[i + 1]
            return r, rd, y[10 + k_rho], c2t

        def tau_c(x, t):
            return np.broadcast_to(tau_parts(t)[0], np.broadcast(x, t).shape)

        def xi(x, t):
            tau, tau_d, _ = tau_parts(t)
            r, _, _, _ = rho_parts(t)
            return 0.5 * tau_d * x + r

        def phi(x, t):
            tau, tau_d, tau_dd = tau_parts(t)
            r, rd, int_c1rho, _ = rho_parts(t)
            b = fm(0.0, t) + fn_(0.0, t) * x
            int_bt = fmd(0.0, t) * x + 0.5 * fnd(0.0, t) * x * x
            sigma = c0(t) * tau - 0.25 * tau_d + int_c1rho
            return (-tau_dd * x * x / 8 - 0.5 * rd * x - (0.25 * tau_d * x + 0.5 * r) * b
                    - 0.5 * tau * int_bt + sigma)

        return tau_c, xi, phi, tau_parts, rho_parts

    fields = []
    specs = [(0, 0), (1, 1), (2, 2), (None, 3), (None, 4)]
    for idx, (kt, kr) in enumerate(specs):
        tau_c, xi, phi, tp, rp = make(kt, kr)
        fields.append(VectorField(f"v{idx + 1}", tau_c, xi, phi,
                                  {"tau_parts": tp, "rho_parts": rp, "classifiers": cls}))
    zero = lambda x, t: np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)
    one = lambda x, t: np.ones(np.broadcast(np.asarray(x), np.asarray(t)).shape)
    fields.append(VectorField("v6", zero, zero, one, {}))
    return fields


def _d4(f, ts, h):
    """Fourth-order central difference of a scalar function of t at each of ``ts``."""
    return np.array([(f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h) for t in ts])


def timedep_determining_residual(fields, cls: TimeDepClassifiers, ts, h: float = 1e-3) -> float:
    """Violation of ``tau''' + 16 c2 tau' + 8 c2' tau = 0`` and
    ``rho'' + 4 c2 rho + 3 c1 tau' + 2 c1' tau = 0`` along ``ts``."""
    ts = np.asarray(ts, dtype=float)
    worst = 0.0
    for f in fields:
        if "tau_parts" not in f.data:
            continue
        tp, rp = f.data["tau_parts"], f.data["rho_parts"]
        tau = np.array([tp(t)[0] for t in ts])
        tau_d = np.array([tp(t)[1] for t in ts])
        tau_ddd = _d4(lambda s_: tp(s_)[2], ts, h)
        r = np.array([rp(t)[0] for t in ts])
        rdd = _d4(lambda s_: rp(s_)[1], ts, h)
        c2, c1 = cls.c2(ts), cls.c1(ts)
        e1 = tau_ddd + 16 * c2 * tau_d + 8 * cls.c2_dot(ts) * tau
        e2 = rdd + 4 * c2 * r + 3 * c1 * tau_d + 2 * cls.c1_dot(ts) * tau
        scale = 1.0 + max(np.max(np.abs(tau)), np.max(np.abs(r)))
        worst = max(worst, float(np.max(np.abs(np.concatenate([e1, e2])))) / scale)
    return worst
