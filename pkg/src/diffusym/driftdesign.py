"""Drift design for Fokker-Planck equations ``u_t = (p u_x + q u)_x``.

Writing ``Omega = -(sqrt p)' + q / sqrt(p)`` as a function of
``I = int dx / sqrt(p)``, the equation has the symmetry class of
``K = f(I)`` exactly when

    Omega'(I) / 2 - Omega^2 / 4 = f(I).

The Cole-Hopf substitution ``Omega = -2 v'/v`` makes this linear,
``v'' = -f v``, which we integrate numerically.  The drift is then
``q = p'/2 + sqrt(p) Omega(I)``.

Sign convention: everything here uses ``f`` exactly as in the Riccati
equation above.  The equivalent form ``4 v'' - F v = 0`` used in the Kummer
reductions has ``F = -4 f``; :func:`kummer_form` performs that conversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import exprdsl as ed
from .errors import PreconditionError
from .invariants import NumericCoefficients, WorkingDomain
from .numerics import OdeSpec, QuadratureSpec, cumulative_integral, solve_ode

FOUR_KIND, SIX_KIND = "four", "six"

# The linear ODE is integrated tightly so that Omega (a ratio) keeps ~1e-11 accuracy.
RICCATI_ODE = OdeSpec(rel_tol=1e-13, abs_tol=1e-14)


def invariant_form(kind: str, constants) -> Callable:
    """``f_6(I) = c2 I^2 + c1 I + c0`` or ``f_4(I) = mu/I^2 + c2 I^2 + c0``.

    ``constants`` is ``(mu, c2, c1, c0)``; entries not used by ``kind`` are ignored.
    """
    mu, c2, c1, c0 = (float(c) for c in constants)
    if kind == SIX_KIND:
        return lambda s: c2 * s * s + c1 * s + c0
    if kind == FOUR_KIND:
        if mu == 0:
            raise PreconditionError("f_4 needs mu != 0")
        return lambda s: mu / (s * s) + c2 * s * s + c0
    raise PreconditionError(f"unknown invariant form {kind!r}; use 'four' or 'six'")


def kummer_form(f: Callable) -> Callable:
    """``F`` such that ``4 v'' - F v = 0`` is the Cole-Hopf linearisation of ``f``."""
    return lambda s: -4.0 * f(s)


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """``Omega(I) = -2 v'(I) / v(I)`` on ``interval``, where ``v`` does not vanish."""

    kind: str
    constants: tuple
    f: Callable
    v_init: tuple
    interval: tuple
    _dense: Callable
    anchor: float = 0.0

    def v(self, s):
        return self._state(s)[0]

    def _state(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.interval
        if np.any(s < lo - 1e-12 * max(1, abs(lo))) or np.any(s > hi + 1e-12 * max(1, abs(hi))):
            raise PreconditionError(f"I outside the validity interval [{lo:.6g}, {hi:.6g}]")
        return self._dense(np.clip(s, lo, hi))

    def omega(self, s):
        y = self._state(s)
        return -2.0 * y[1] / y[0]

    def omega_prime(self, s):
        """From the Riccati equation itself: ``Omega' = 2 f + Omega^2 / 2``."""
        w = self.omega(s)
        return 2.0 * self.f(np.asarray(s, dtype=float)) + 0.5 * w * w

    __call__ = omega

    def residual(self, n: int = 201) -> float:
        """Max of ``|Omega'/2 - Omega^2/4 - f|`` with ``Omega'`` from finite differences."""
        lo, hi = self.interval
        h = 1e-4 * (hi - lo)
        s = np.linspace(lo + 2 * h, hi - 2 * h, n)
        d = (self.omega(s - 2 * h) - 8 * self.omega(s - h) + 8 * self.omega(s + h)
             - self.omega(s + 2 * h)) / (12 * h)
        w = self.omega(s)
        return float(np.max(np.abs(0.5 * d - 0.25 * w * w - self.f(s))))

    def summary(self) -> dict:
        return {"kind": self.kind, "constants": [float(c) for c in self.constants],
                "v_init": [float(v) for v in self.v_init], "anchor": float(self.anchor),
                "interval": [float(v) for v in self.interval]}


def v_init_for(omega0: float) -> tuple:
    """Initial data ``(v, v')`` giving ``Omega = omega0`` at the start point."""
    return (1.0, -0.5 * float(omega0))


def solve_omega_profile(kind: str, constants, v_init, I_range, anchor: float | None = None,
                        spec: OdeSpec = RICCATI_ODE, n_scan: int = 2001) -> RiccatiSolution:
    """Integrate ``v'' = -f v`` with ``(v, v') = v_init`` at ``anchor`` and form ``Omega = -2 v'/v``.

    ``anchor`` defaults to the left end of ``I_range``; an interior anchor
    integrates both ways, which keeps decaying solutions accurate.  The
    interval is cut just short of the zeros of ``v`` nearest to the anchor.
    """
    lo, hi = (float(v) for v in I_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise PreconditionError("I_range must be a finite increasing pair")
    anchor = lo if anchor is None else float(anchor)
    if not lo <= anchor <= hi:
        raise PreconditionError("anchor must lie in I_range")
    v0, dv0 = (float(v) for v in v_init)
    if v0 == 0 and dv0 == 0:
        raise PreconditionError("v_init (0, 0) gives v identically zero")
    if v0 == 0:
        raise PreconditionError("v vanishes at the anchor; Omega is singular there")
    f = invariant_form(kind, constants)
    if kind == FOUR_KIND and lo <= 0 <= hi:
        raise PreconditionError("f_4 is singular at I = 0; choose an I_range on one side")

    def rhs(_s, y):
        return [y[1], -f(_s) * y[0]]

    pieces = {}
    for end in (lo, hi):
        if end != anchor:
            pieces[end] = solve_ode(rhs, anchor, [v0, dv0], end, spec)
    cut = {lo: lo, hi: hi}
    for end, dense in pieces.items():
        s = np.linspace(anchor, end, n_scan)
        v = dense(s)[0]
        flips = np.nonzero(np.sign(v[1:]) != np.sign(v[:-1]))[0]
        if flips.size:
            k = flips[0]
            a_, b_ = s[k], s[k + 1]
            for _ in range(60):
                m = 0.5 * (a_ + b_)
                if np.sign(dense(m)[0]) == np.sign(v0):
                    a_ = m
                else:
                    b_ = m
            cut[end] = a_ - np.sign(end - anchor) * 1e-6 * (hi - lo)
            if np.sign(cut[end] - anchor) != np.sign(end - anchor):
                raise PreconditionError("v vanishes immediately next to the anchor")

    def dense(s):
        s = np.asarray(s, dtype=float)
        out = np.empty((2,) + s.shape)
        left = s < anchor
        if np.any(left):
            out[:, left] = pieces[lo](s[left])
        if np.any(~left):
            right = ~left
            out[:, right] = pieces[hi](s[right]) if hi in pieces else np.array([[v0], [dv0]])
        return out

    consts = tuple(float(c) for c in constants)
    return RiccatiSolution(kind, consts, f, (v0, dv0), (cut[lo], cut[hi]), dense, anchor)


@dataclass(frozen=True, eq=False)
class DesignedDrift:
    """Drift ``q(x)`` and the Fokker-Planck coefficients it produces."""

    q: Callable
    q_x: Callable
    coefficients: NumericCoefficients
    I: Callable
    p: ed.Expression
    solution: RiccatiSolution

    def __call__(self, x):
        return self.q(x)


def design_drift(p, sol: RiccatiSolution, dom: WorkingDomain, iota: float = 0.0,
                 env=None, quad: QuadratureSpec = QuadratureSpec()) -> DesignedDrift:
    """``q = p'/2 + sqrt(p) Omega(I(x) + iota)`` with ``I`` anchored at ``dom.x0``.

    The returned coefficients are the expansion ``a = p``, ``b = p' + q``,
    ``c = q'`` of ``u_t = (p u_x + q u)_x``.
    """
    env = env if isinstance(env, ed.ParamEnv) else ed.ParamEnv(env or {})
    p = ed.as_expression(p)
    if ed.depends_on(p, "t"):
        raise PreconditionError("p must not depend on t")
    dp = ed.differentiate(p, "x")
    fp = ed.compile_expr(p, env)
    fdp = ed.compile_expr(dp, env)
    fddp = ed.compile_expr(ed.differentiate(dp, "x"), env)
    xs = np.linspace(dom.x_min, dom.x_max, 257)
    pv = np.asarray(fp(xs, 0.0)) * np.ones_like(xs)
    if not np.all(np.isfinite(pv)) or np.any(pv <= 0):
        raise PreconditionError("p must be positive on the working domain")

    def I(x):
        x = np.asarray(x, dtype=float)
        return cumulative_integral(lambda s: 1.0 / np.sqrt(fp(s, 0.0) * np.ones_like(s)),
                                   dom.x0, x, quad) + iota

    lo, hi = sol.interval
    I_dom = I(xs)
    if np.min(I_dom) < lo - 1e-9 or np.max(I_dom) > hi + 1e-9:
        raise PreconditionError(
            f"I(x) spans [{np.min(I_dom):.6g}, {np.max(I_dom):.6g}], outside the solution's "
            f"validity interval [{lo:.6g}, {hi:.6g}]")

    def pfun(f):
        return lambda x: np.asarray(f(x, 0.0), dtype=float) * np.ones(np.shape(x))

    P, DP, DDP = pfun(fp), pfun(fdp), pfun(fddp)

    def q(x):
        return 0.5 * DP(x) + np.sqrt(P(x)) * sol.omega(I(x))

    def q_x(x):
        s = I(x)
        return 0.5 * DDP(x) + DP(x) / (2 * np.sqrt(P(x))) * sol.omega(s) + sol.omega_prime(s)

    coeffs = NumericCoefficients({
        "a": P, "a_x": DP, "a_xx": DDP,
        "b": lambda x: DP(x) + q(x),
        "b_x": lambda x: DDP(x) + q_x(x),
        "c": q_x,
    }, label=f"fokker-planck p={ed.render(p)} designed drift")
    return DesignedDrift(q, q_x, coeffs, I, p, sol)


@dataclass(frozen=True)
class KummerParams:
    """Parameters of the Kummer reductions of ``4 v'' - F v = 0``.

    Six-dimensional form: ``z = (sqrt(c2)/2) (I + c1/(2 c2))^2`` and ``a``.
    Four-dimensional form: ``z = (sqrt(c2)/2) I^2``, exponents ``s`` (both
    branches) and the matching coefficients ``c0/(8 sqrt(c2)) + 1/4 + s/2``.
    """

    kind: str
    constants: tuple
    shift: float = 0.0
    a: float | None = None
    s: tuple = ()
    coefficients: tuple = ()

    def z(self, I):
        c2 = self.constants[1]
        return 0.5 * np.sqrt(c2) * (np.asarray(I, dtype=float) + self.shift) ** 2

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "constants": [float(c) for c in self.constants],
               "z_shift": self.shift}
        if self.kind == SIX_KIND:
            out["a"] = self.a
        else:
            out["s"] = list(self.s)
            out["coefficients"] = list(self.coefficients)
        return out


def kummer_params(kind: str, constants) -> KummerParams:
    """Kummer-equation parameters for ``constants = (mu, c2, c1, c0)`` with ``c2 > 0``."""
    mu, c2, c1, c0 = (float(c) for c in constants)
    if not c2 > 0:
        raise PreconditionError("the Kummer reductions need c2 > 0")
    if kind == SIX_KIND:
        a = 0.25 * (1 + (4 * c0 * c2 - c1 * c1) / (8 * c2**1.5))
        return KummerParams(kind, (mu, c2, c1, c0), c1 / (2 * c2), a=a)
    if kind == FOUR_KIND:
        if 1 + mu < 0:
            raise PreconditionError("complex exponent: need mu >= -1")
        r = np.sqrt(1 + mu)
        s = (0.5 * (1 + r), 0.5 * (1 - r))
        coef = tuple(c0 / (8 * np.sqrt(c2)) + 0.25 + si / 2 for si in s)
        return KummerParams(kind, (mu, c2, c1, c0), 0.0, s=s, coefficients=coef)
    raise PreconditionError(f"unknown invariant form {kind!r}; use 'four' or 'six'")
