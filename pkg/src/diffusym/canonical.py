"""Point transformations to the heat equation and to ``v_t = v_yy + mu v / y^2``.

For a six-dimensional class ``K = c2 I^2 + c1 I + c0`` the map is

    t~ = T(t),   x~ = sqrt(T') (I + w),
    u  = C (T' a)^{1/4} exp[-B(x) + (T''/8T') (I + w)^2 + w' I / 2 - S(t)] u~(x~, t~)

with ``{T, t} = 8 c2``, ``w'' + 4 c2 w = 2 c1``, ``B = int_{x0}^x b/(2a)``
and ``S = int_{t_min}^t (c2 w^2 - w'^2/4 - c0)``.  ``T`` is a Moebius
function of ``t``, of ``exp(4 lam t)`` or of ``exp(4 i lam t)`` depending on
the sign of ``c2``.  A four-dimensional class uses the natural origin of
``I`` and ``w = 0``, which lands on the second canonical form.

The linear-drift family ``a = 1, b = m + n x, c = q + r x`` with
time-dependent coefficients has its own map (:func:`build_timedep_map`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import exprdsl as ed
from .classify import FOUR, SIX, SymmetryClass
from .errors import PreconditionError
from .invariants import CoefficientSet
from .numerics import OdeSpec, QuadratureSpec, cumulative_integral, solve_ode

FLAT, HYPERBOLIC, TRIGONOMETRIC = "flat", "hyperbolic", "trigonometric"
FIRST, SECOND = "first", "second"

# c2 values this close to zero are treated as exactly flat.
FLAT_TOL = 1e-10
# Fitted c1 below this is classification noise and is set to zero.
NEGLIGIBLE = 1e-10


@dataclass(frozen=True)
class MobiusParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    @property
    def det(self) -> float:
        return self.alpha * self.delta - self.beta * self.gamma

    def __post_init__(self):
        if self.det == 0:
            raise PreconditionError("Moebius parameters must have alpha*delta - beta*gamma != 0")

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma, self.delta)

    @classmethod
    def parse(cls, text: str) -> "MobiusParams":
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError as exc:
            raise PreconditionError(f"bad Moebius parameters {text!r}") from exc
        if len(vals) != 4:
            raise PreconditionError("Moebius parameters need four comma-separated numbers")
        return cls(*vals)


def schwarzian_case(c2: float) -> tuple[str, float]:
    if abs(c2) <= FLAT_TOL:
        return FLAT, 0.0
    return (HYPERBOLIC, float(np.sqrt(-c2))) if c2 < 0 else (TRIGONOMETRIC, float(np.sqrt(c2)))


def default_mobius(c2: float) -> MobiusParams:
    case, _ = schwarzian_case(c2)
    return MobiusParams(1, 0, 0, 1) if case == FLAT else MobiusParams(0, 1, 1, 0)


@dataclass(frozen=True)
class SchwarzianSolution:
    """``T``, ``T'`` and ``rho = T''/T'`` for ``{T, t} = 8 c2``.

    With ``D`` the denominator (``gamma t + delta``, or ``gamma cosh 2 lam t +
    delta sinh 2 lam t``, or the trigonometric analogue) one has
    ``T' = -2 lam det / D^2`` (``det / D^2`` in the flat case) and
    ``rho = -2 D'/D``.
    """

    case: str
    lam: float
    params: MobiusParams

    def _nd(self, t):
        a, b, g, d = self.params.as_tuple()
        t = np.asarray(t, dtype=float)
        if self.case == FLAT:
            return a * t + b, g * t + d, np.full_like(t, g)
        w = 2 * self.lam
        if self.case == HYPERBOLIC:
            ch, sh = np.cosh(w * t), np.sinh(w * t)
            return a * ch + b * sh, g * ch + d * sh, w * (g * sh + d * ch)
        co, si = np.cos(w * t), np.sin(w * t)
        return a * co + b * si, g * co + d * si, w * (-g * si + d * co)

    def denominator(self, t):
        return self._nd(t)[1]

    def T(self, t):
        n, d, _ = self._nd(t)
        return n / d

    def T_dot(self, t):
        _, d, _ = self._nd(t)
        k = 1.0 if self.case == FLAT else -2 * self.lam
        return k * self.params.det / d**2

    def rho(self, t):
        _, d, dp = self._nd(t)
        return -2 * dp / d

    def poles(self, t_min: float, t_max: float, n: int = 4001) -> list[float]:
        """Approximate zeros of the denominator on ``[t_min, t_max]``."""
        ts = np.linspace(t_min, t_max, n)
        d = self.denominator(ts)
        idx = np.flatnonzero((d[:-1] == 0) | (np.sign(d[:-1]) != np.sign(d[1:])))
        return [float(0.5 * (ts[i] + ts[i + 1])) for i in idx]

    def check_window(self, t_min: float, t_max: float) -> None:
        poles = self.poles(t_min, t_max)
        if poles:
            raise PreconditionError(
                f"time map has a pole at t~{poles[0]:.6g} inside [{t_min}, {t_max}]"
            )
        if np.any(self.T_dot(np.linspace(t_min, t_max, 257)) <= 0):
            raise PreconditionError("time map is not increasing (wrong sign of alpha*delta - beta*gamma)")


def solve_schwarzian(c2: float, p: MobiusParams | None = None) -> SchwarzianSolution:
    """Closed-form solution of ``{T, t} = 8 c2`` for constant ``c2``.

    Requires ``det > 0`` in the flat case and ``det < 0`` otherwise so that
    ``T' > 0``.
    """
    case, lam = schwarzian_case(c2)
    p = p if p is not None else default_mobius(c2)
    if case == FLAT and p.det <= 0:
        raise PreconditionError("flat case needs alpha*delta - beta*gamma > 0")
    if case != FLAT and p.det >= 0:
        raise PreconditionError(f"{case} case needs alpha*delta - beta*gamma < 0")
    return SchwarzianSolution(case, lam, p)


def schwarzian_fd(T: Callable, t: float, h: float = 1e-3) -> float:
    """Fourth-order finite-difference Schwarzian ``T'''/T' - 1.5 (T''/T')^2``."""
    f = np.array([T(t + k * h) for k in (-3, -2, -1, 0, 1, 2, 3)])
    d1 = (f[1] - 8 * f[2] + 8 * f[4] - f[5]) / (12 * h)
    d2 = (-f[1] + 16 * f[2] - 30 * f[3] + 16 * f[4] - f[5]) / (12 * h**2)
    d3 = (f[0] - 8 * f[1] + 13 * f[2] - 13 * f[4] + 8 * f[5] - f[6]) / (8 * h**3)
    return float(d3 / d1 - 1.5 * (d2 / d1) ** 2)


@dataclass(frozen=True)
class OmegaSolution:
    """``w``, ``w'`` and ``S = int_{t0}^t (c2 w^2 - w'^2/4 - c0) dt``."""

    omega: Callable
    omega_dot: Callable
    S: Callable
    t0: float
    constant: float | None = None


def _as_time_fn(v):
    if callable(v):
        return v
    val = float(v)
    return lambda t: val + 0.0 * np.asarray(t, dtype=float)


def solve_omega(c2, c1, initial=(0.0, 0.0), t0: float = 0.0, t_end: float = 1.0,
                c0=0.0, spec: OdeSpec = OdeSpec()) -> OmegaSolution:
    """Solve ``w'' + 4 c2 w = 2 c1`` from ``(w, w')(t0) = initial`` up to ``t_end``.

    ``c2``, ``c1``, ``c0`` are numbers or callables of ``t``.  The time
    integral ``S`` entering the heat map is carried along as a third state.
    """
    f2, f1, f0 = _as_time_fn(c2), _as_time_fn(c1), _as_time_fn(c0)

    def rhs(t, y):
        w, wd, _ = y
        c2t = float(f2(t))
        return [wd, 2 * float(f1(t)) - 4 * c2t * w, c2t * w * w - 0.25 * wd * wd - float(f0(t))]

    sol = solve_ode(rhs, t0, [initial[0], initial[1], 0.0], t_end, spec)
    return OmegaSolution(
        omega=lambda t: sol(t)[0],
        omega_dot=lambda t: sol(t)[1],
        S=lambda t: sol(t)[2],
        t0=t0,
    )


def _constant_omega(w: float, c2: float, c0: float, t0: float) -> OmegaSolution:
    rate = c2 * w * w - c0
    return OmegaSolution(
        omega=lambda t: w + 0.0 * np.asarray(t, dtype=float),
        omega_dot=lambda t: 0.0 * np.asarray(t, dtype=float),
        S=lambda t: rate * (np.asarray(t, dtype=float) - t0),
        t0=t0,
        constant=w,
    )


@dataclass(frozen=True, eq=False)
class HeatMap:
    """Concrete map ``(x, t) -> (x~, t~)`` with multiplier ``theta``: ``u = theta * u~``."""

    prof: object
    cls: SymmetryClass
    schwarzian: SchwarzianSolution
    omega: OmegaSolution
    C: float
    target: str
    iota: float
    t_window: tuple
    c2: float
    c0: float
    quad: QuadratureSpec = QuadratureSpec()

    @property
    def case(self) -> str:
        return self.schwarzian.case

    @property
    def params(self) -> MobiusParams:
        return self.schwarzian.params

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_window
        slack = 1e-9 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise PreconditionError(f"time outside the map's window [{lo}, {hi}]")
        return t

    def t_tilde(self, t):
        return self.schwarzian.T(self._check_t(t))

    def _I(self, x):
        return self.prof.I(x) + self.iota

    def x_tilde(self, x, t):
        t = self._check_t(t)
        return np.sqrt(self.schwarzian.T_dot(t)) * (self._I(x) + self.omega.omega(t))

    def log_multiplier(self, x, t):
        t = self._check_t(t)
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), t)
        fns = self.prof.coeffs.fn
        a = fns("a")(x, 0.0)
        half_drift = lambda s: fns("b")(s, 0.0) / (2 * fns("a")(s, 0.0))
        B = cumulative_integral(half_drift, self.prof.x0, x, self.quad)
        I = self._I(x)
        sch, om = self.schwarzian, self.omega
        Td = sch.T_dot(t)
        w, wd = om.omega(t), om.omega_dot(t)
        return (np.log(abs(self.C)) + 0.25 * np.log(Td * a) - B
                + sch.rho(t) / 8 * (I + w) ** 2 + 0.5 * wd * I - om.S(t))

    def multiplier(self, x, t):
        return np.sign(self.C) * np.exp(self.log_multiplier(x, t))

    def pull_back(self, v: Callable) -> Callable:
        """Solution ``u(x, t) = theta(x, t) v(x~, t~)`` of the original PDE."""

        def u(x, t):
            return self.multiplier(x, t) * v(self.x_tilde(x, t), self.t_tilde(t))

        return u

    def push_forward_values(self, u_vals, x, t):
        """``(x~, t~, u / theta)``: the image of sampled values of ``u``."""
        return self.x_tilde(x, t), self.t_tilde(t), np.asarray(u_vals) / self.multiplier(x, t)

    def target_coefficients(self) -> CoefficientSet:
        if self.target == SECOND and self.cls.variant == FOUR:
            return CoefficientSet("1", "0", "mu/x^2", {"mu": self.cls.mu})
        return CoefficientSet("1", "0", "0")

    def summary(self) -> dict:
        lo, hi = self.t_window
        return {
            "case": self.case,
            "lambda": self.schwarzian.lam,
            "mobius": list(self.params.as_tuple()),
            "det": self.params.det,
            "target": self.target,
            "iota": self.iota,
            "omega_constant": self.omega.constant,
            "C": self.C,
            "t_window": [lo, hi],
            "poles_in_window": self.schwarzian.poles(lo, hi),
        }


def build_heat_map(prof, cls: SymmetryClass, p: MobiusParams | None = None, C: float = 1.0,
                   target: str = FIRST, t_window: tuple | None = None,
                   omega_initial: tuple | None = None) -> HeatMap:
    """Assemble the map to the first or second canonical form.

    ``t_window`` defaults to the profile domain's time range.  ``omega``
    defaults to the constant ``c1/(2 c2)`` when ``c2 != 0`` and to the solution
    with zero data at ``t_min`` when ``c2 = 0``.
    """
    if prof.time_dependent:
        raise PreconditionError("time-dependent coefficients: use build_timedep_map")
    if C == 0:
        raise PreconditionError("C must be non-zero")
    lo, hi = t_window if t_window is not None else (prof.domain.t_min, prof.domain.t_max)
    if not lo < hi:
        raise PreconditionError("time window must satisfy t_min < t_max")
    if target not in (FIRST, SECOND):
        raise PreconditionError(f"unknown target {target!r}")

    if cls.variant == SIX:
        c2, c1, c0 = cls.c2, cls.c1, cls.c0
        iota = 0.0
        if target == SECOND and abs(c1) > 1e-8:
            raise PreconditionError("second canonical target needs c1 = 0")
    elif cls.variant == FOUR:
        if target != SECOND:
            raise PreconditionError("a four-dimensional class maps only to the second canonical form")
        c2, c1, c0 = cls.c2, 0.0, cls.c0
        iota = cls.iota
    else:
        raise PreconditionError("no transformation: the PDE has no extra symmetries")

    sch = solve_schwarzian(c2, p)
    sch.check_window(lo, hi)
    case, _ = schwarzian_case(c2)
    if abs(c1) <= NEGLIGIBLE:
        c1 = 0.0
    if omega_initial is None and (c1 == 0 or case != FLAT):
        w = 0.0 if c1 == 0 else c1 / (2 * c2)
        om = _constant_omega(w, c2, c0, lo)
    else:
        init = omega_initial if omega_initial is not None else (0.0, 0.0)
        om = solve_omega(c2, c1, init, lo, hi, c0=c0)
    return HeatMap(prof, cls, sch, om, float(C), target, float(iota), (float(lo), float(hi)),
                   float(c2), float(c0), prof.quad)


def pull_back_constant(hm, C: float | None = None) -> Callable:
    """Image of ``u~ = 1`` (optionally rescaled to constant ``C``)."""
    scale = 1.0 if C is None else C / hm.C

    def u(x, t):
        return scale * hm.multiplier(x, t) * np.ones(np.broadcast(np.asarray(x), np.asarray(t)).shape)

    return u


@dataclass(frozen=True, eq=False)
class TimeDepMap:
    """Map of ``u_t = u_xx + (m + n x) u_x + (q + r x) u`` to the heat equation.

    ``t~ = T(t)``, ``x~ = e^alpha x + beta`` and
    ``u = exp[e^alpha gamma x + S(t)] u~`` where ``alpha' = n``,
    ``gamma' = e^{-alpha} r``, ``beta' = e^alpha (m + 2 e^alpha gamma)``,
    ``T' = e^{2 alpha}`` and ``S' = q + e^{2 alpha} gamma^2 + m e^alpha gamma``.
    """

    sol: Callable
    t0: float
    t_end: float

    def state(self, t):
        return self.sol(np.asarray(t, dtype=float))

    def alpha(self, t):
        return self.state(t)[0]

    def gamma(self, t):
        return self.state(t)[1]

    def beta(self, t):
        return self.state(t)[2]

    def t_tilde(self, t):
        return self.state(t)[3]

    def S(self, t):
        return self.state(t)[4]

    def x_tilde(self, x, t):
        s = self.state(t)
        return np.exp(s[0]) * np.asarray(x, dtype=float) + s[2]

    def log_multiplier(self, x, t):
        s = self.state(t)
        return np.exp(s[0]) * s[1] * np.asarray(x, dtype=float) + s[4]

    def multiplier(self, x, t):
        return np.exp(self.log_multiplier(x, t))

    def pull_back(self, v: Callable) -> Callable:
        def u(x, t):
            x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
            flat_t = t.ravel()
            out = np.empty(x.shape)
            flat_out, flat_x = out.reshape(-1), x.ravel()
            for tt in np.unique(flat_t):
                sel = flat_t == tt
                xs = flat_x[sel]
                flat_out[sel] = self.multiplier(xs, tt) * v(self.x_tilde(xs, tt), self.t_tilde(tt))
            return out if out.ndim else float(out)

        return u

    def summary(self) -> dict:
        return {"t0": self.t0, "t_end": self.t_end,
                "state_at_t0": [float(v) for v in self.state(self.t0)],
                "state_at_t_end": [float(v) for v in self.state(self.t_end)]}


def build_timedep_map(m, n, q, r, env=None, t0: float = 1.0, t_end: float = 2.0,
                      initial=(0.0, 0.0, 0.0, 0.0, 0.0), spec: OdeSpec = OdeSpec()) -> TimeDepMap:
    """Integrate ``(alpha, gamma, beta, T, S)`` from ``initial`` at ``t0`` to ``t_end``."""
    env = env if isinstance(env, ed.ParamEnv) else ed.ParamEnv(env or {})
    fm, fn_, fq, fr = (ed.compile_expr(ed.as_expression(e), env) for e in (m, n, q, r))

    def rhs(t, y):
        al, ga, _, _, _ = y
        ea = np.exp(al)
        mt = fm(0.0, t)
        return [fn_(0.0, t), fr(0.0, t) / ea, ea * (mt + 2 * ea * ga), ea * ea,
                fq(0.0, t) + ea * ea * ga * ga + mt * ea * ga]

    sol = solve_ode(rhs, t0, list(initial), t_end, spec)
    return TimeDepMap(sol, float(t0), float(t_end))
