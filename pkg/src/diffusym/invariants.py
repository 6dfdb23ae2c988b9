"""Semi-invariants of ``u_t = a u_xx + b u_x + c u``.

The three quantities driving the classification are

    I(x) = int_{x0}^x ds / sqrt(a),
    J    = (sqrt a)' - b / sqrt(a),
    K    = sqrt(a) J' / 2 - J^2 / 4 + c.

``K`` is unchanged by the gauge ``u = theta(x) v`` and, written as a
function of ``I``, decides the size of the symmetry algebra.  For
coefficients depending on ``t`` the term ``(1/2) int_{x0}^x d/dt(b/a) dx'``
is added.  Everything except ``I`` is evaluated in closed form from
symbolic derivatives of the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from . import exprdsl as ed
from .errors import PreconditionError
from .numerics import QuadratureSpec, cumulative_integral

# Derivatives a coefficient provider may be asked for.
DERIVATIVES = {
    "a": ("a", ""), "a_x": ("a", "x"), "a_xx": ("a", "xx"), "a_t": ("a", "t"),
    "b": ("b", ""), "b_x": ("b", "x"), "b_xx": ("b", "xx"), "b_t": ("b", "t"),
    "c": ("c", ""), "c_x": ("c", "x"),
}


@dataclass(frozen=True)
class CoefficientSet:
    """Symbolic coefficients ``a``, ``b``, ``c`` with their parameter bindings.

    Parameters may be given as text or as :class:`~diffusym.exprdsl.Expression`.
    Every parameter occurring in the coefficients must be bound by ``env``.
    """

    a: ed.Expression
    b: ed.Expression
    c: ed.Expression
    env: ed.ParamEnv = field(default_factory=ed.ParamEnv)

    def __init__(self, a, b, c, env: Mapping | None = None):
        object.__setattr__(self, "a", ed.as_expression(a))
        object.__setattr__(self, "b", ed.as_expression(b))
        object.__setattr__(self, "c", ed.as_expression(c))
        if not isinstance(env, ed.ParamEnv):
            env = ed.ParamEnv(env or {})
        object.__setattr__(self, "env", env)
        for e in (self.a, self.b, self.c):
            ed.compile_expr(e, env)  # raises on unbound parameters

    @property
    def time_dependent(self) -> bool:
        return any(ed.depends_on(e, "t") for e in (self.a, self.b, self.c))

    @cached_property
    def _fns(self) -> dict:
        exprs = {"a": self.a, "b": self.b, "c": self.c}
        out = {}
        for key, (base, order) in DERIVATIVES.items():
            e = exprs[base]
            for v in order:
                e = ed.differentiate(e, v)
            out[key] = ed.compile_expr(e, self.env)
        return out

    def fn(self, name: str) -> Callable:
        """Vectorised evaluator ``f(x, t)`` of a coefficient or derivative."""
        return self._fns[name]

    def describe(self) -> dict:
        return {
            "a": ed.render(self.a),
            "b": ed.render(self.b),
            "c": ed.render(self.c),
            "params": dict(self.env),
        }


class NumericCoefficients:
    """Autonomous coefficients supplied as callables of ``x``.

    ``funcs`` must provide ``a``, ``a_x``, ``a_xx``, ``b``, ``b_x`` and ``c``;
    other derivative keys are optional.  Used for drifts that only exist
    numerically (see :mod:`diffusym.driftdesign`).
    """

    time_dependent = False

    def __init__(self, funcs: Mapping[str, Callable], label: str = "numeric"):
        missing = {"a", "a_x", "a_xx", "b", "b_x", "c"} - set(funcs)
        if missing:
            raise PreconditionError(f"missing coefficient callables: {sorted(missing)}")
        self._funcs = dict(funcs)
        self.label = label

    def fn(self, name: str) -> Callable:
        if name in ("a_t", "b_t"):
            return lambda x, t=0.0: np.zeros(np.shape(x)) if np.ndim(x) else 0.0
        if name not in self._funcs:
            raise PreconditionError(f"numeric coefficients do not provide {name!r}")
        f = self._funcs[name]
        return lambda x, t=0.0: f(x)

    def describe(self) -> dict:
        return {"numeric": self.label}


@dataclass(frozen=True)
class WorkingDomain:
    """Sampling window.  ``x0`` defaults to the midpoint, ``margin`` to 1e-3 of the width."""

    x_min: float
    x_max: float
    t_min: float = 0.0
    t_max: float = 1.0
    x0: float | None = None
    nx: int = 128
    nt: int = 16
    margin: float | None = None

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise PreconditionError("x_min must be below x_max")
        if not self.t_min < self.t_max:
            raise PreconditionError("t_min must be below t_max")
        if self.nx < 32 or self.nt < 8:
            raise PreconditionError("need nx >= 32 and nt >= 8")
        if self.margin is None:
            object.__setattr__(self, "margin", 1e-3 * (self.x_max - self.x_min))
        if self.margin < 0 or 2 * self.margin >= self.x_max - self.x_min:
            raise PreconditionError("margin must be non-negative and smaller than half the width")
        if self.x0 is None:
            object.__setattr__(self, "x0", 0.5 * (self.x_min + self.x_max))
        if not self.x_min <= self.x0 <= self.x_max:
            raise PreconditionError("base point x0 must lie in [x_min, x_max]")

    @property
    def x_grid(self) -> np.ndarray:
        return np.linspace(self.x_min + self.margin, self.x_max - self.margin, self.nx)

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)


def _j_and_jx(fns, x, t):
    """J and dJ/dx from a, b and their x-derivatives (closed form)."""
    a, ax, axx = fns("a")(x, t), fns("a_x")(x, t), fns("a_xx")(x, t)
    b, bx = fns("b")(x, t), fns("b_x")(x, t)
    sa = np.sqrt(a)
    J = (0.5 * ax - b) / sa
    Jx = (0.5 * axx - bx) / sa - 0.5 * ax * (0.5 * ax - b) / (a * sa)
    return J, Jx, sa


def _check_positive(fn_a, x, t):
    vals = np.asarray(fn_a(x, t))
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise PreconditionError("diffusion coefficient a must be positive on the working domain")


@dataclass(frozen=True, eq=False)
class InvariantProfile:
    """Evaluators for I, J, K plus their samples on the working grid.

    For time-dependent profiles the evaluators take ``(x, t)`` and the
    sample arrays are 2-d with shape ``(nt, nx)``.
    """

    coeffs: object
    domain: WorkingDomain
    time_dependent: bool
    x: np.ndarray
    t: np.ndarray | None
    I_samples: np.ndarray
    J_samples: np.ndarray
    K_samples: np.ndarray
    quad: QuadratureSpec = QuadratureSpec()

    @property
    def x0(self) -> float:
        return self.domain.x0

    def I(self, x, t=0.0):
        inv_sqrt_a = _inv_sqrt(self.coeffs.fn("a"))
        return _per_time(lambda s, tt: cumulative_integral(
            lambda u: inv_sqrt_a(u, tt), self.x0, s, self.quad), x, t)

    def J(self, x, t=0.0):
        return _j_and_jx(self.coeffs.fn, x, t)[0]

    def sqrt_a(self, x, t=0.0):
        return np.sqrt(self.coeffs.fn("a")(x, t))

    def K(self, x, t=0.0):
        J, Jx, sa = _j_and_jx(self.coeffs.fn, x, t)
        K = 0.5 * sa * Jx - 0.25 * J**2 + self.coeffs.fn("c")(x, t)
        if self.time_dependent:
            K = K + self.drift_time_term(x, t)
        return K

    def drift_time_term(self, x, t=0.0):
        """``(1/2) int_{x0}^x d/dt(b/a) dx'`` (zero for autonomous coefficients)."""
        fa, fat = self.coeffs.fn("a"), self.coeffs.fn("a_t")
        fb, fbt = self.coeffs.fn("b"), self.coeffs.fn("b_t")

        def integrand(s, tt):
            a = fa(s, tt)
            return fbt(s, tt) / a - fb(s, tt) * fat(s, tt) / a**2

        return 0.5 * _per_time(lambda s, tt: cumulative_integral(
            lambda u: integrand(u, tt), self.x0, s, self.quad), x, t)

    def summary(self) -> dict:
        return {
            "x0": self.x0,
            "x_range": [float(self.x[0]), float(self.x[-1])],
            "I_range": [float(np.min(self.I_samples)), float(np.max(self.I_samples))],
            "K_range": [float(np.min(self.K_samples)), float(np.max(self.K_samples))],
        }


def _inv_sqrt(fa):
    return lambda s, t: 1.0 / np.sqrt(fa(s, t))


def _per_time(func, x, t):
    """Apply ``func(x_array, t_scalar)`` after grouping broadcast points by ``t``."""
    xb, tb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    out = np.empty(xb.shape)
    flat_x, flat_t, flat_out = xb.ravel(), tb.ravel(), out.reshape(-1)
    for tt in np.unique(flat_t):
        sel = flat_t == tt
        flat_out[sel] = func(flat_x[sel], float(tt))
    if out.ndim == 0:
        return float(out)
    return out


def profile(coeffs, dom: WorkingDomain, quad: QuadratureSpec = QuadratureSpec()) -> InvariantProfile:
    """Invariant profile of autonomous coefficients sampled on ``dom``."""
    if coeffs.time_dependent:
        raise PreconditionError("coefficients depend on t; use profile_xt")
    xs = dom.x_grid
    _check_positive(coeffs.fn("a"), xs, 0.0)
    J, Jx, sa = _j_and_jx(coeffs.fn, xs, 0.0)
    K = 0.5 * sa * Jx - 0.25 * J**2 + coeffs.fn("c")(xs, 0.0)
    inv_sqrt_a = _inv_sqrt(coeffs.fn("a"))
    I = cumulative_integral(lambda s: inv_sqrt_a(s, 0.0), dom.x0, xs, quad)
    return InvariantProfile(coeffs, dom, False, xs, None, I, J, np.asarray(K), quad)


def profile_xt(coeffs, dom: WorkingDomain, quad: QuadratureSpec = QuadratureSpec()) -> InvariantProfile:
    """Profile with ``K(x, t)`` including the ``d/dt (b/a)`` correction."""
    xs, ts = dom.x_grid, dom.t_grid
    X, Tt = np.meshgrid(xs, ts)
    _check_positive(coeffs.fn("a"), X, Tt)
    prof = InvariantProfile(coeffs, dom, True, xs, ts, np.empty(0), np.empty(0), np.empty(0), quad)
    I = prof.I(X, Tt)
    J = prof.J(X, Tt)
    K = prof.K(X, Tt)
    return InvariantProfile(coeffs, dom, True, xs, ts, I, J, K, quad)


def khat2(coeffs, x, t=0.0):
    """Expanded second-order semi-invariant

    ``b^2 a_x / 2 + (a a_xx - a_t - a_x^2) b + (a a_x - a b) b_x + a b_t - a^2 b_xx + 2 a^2 c_x``.
    """
    f = coeffs.fn
    a, ax, axx, at = f("a")(x, t), f("a_x")(x, t), f("a_xx")(x, t), f("a_t")(x, t)
    b, bx, bxx, bt = f("b")(x, t), f("b_x")(x, t), f("b_xx")(x, t), f("b_t")(x, t)
    cx = f("c_x")(x, t)
    _check_positive(f("a"), x, t)
    return (0.5 * b**2 * ax + (a * axx - at - ax**2) * b + (a * ax - a * b) * bx
            + a * bt - a**2 * bxx + 2 * a**2 * cx)


def gauge_transform(coeffs: CoefficientSet, theta) -> CoefficientSet:
    """Coefficients of the PDE satisfied by ``v`` where ``u = theta(x) v``.

    ``b -> b + 2 a theta'/theta`` and ``c -> c + (a theta'' + b theta')/theta``
    (``b`` the original drift).  ``K`` is invariant under this map.
    """
    th = ed.as_expression(theta)
    if ed.depends_on(th, "t"):
        raise PreconditionError("gauge factor must not depend on t")
    th1 = ed.differentiate(th, "x")
    th2 = ed.differentiate(th1, "x")
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    new_b = b + 2 * a * th1 / th
    new_c = c + (a * th2 + b * th1) / th
    return CoefficientSet(a, new_b, new_c, coeffs.env)
