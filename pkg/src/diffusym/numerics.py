"""Shared numerical kernel.

* :func:`integrate` / :func:`integrate_many` / :func:`cumulative_integral` --
  globally adaptive 21-point Gauss-Kronrod quadrature, vectorised over many
  integrals at once so that antiderivatives can be tabulated on whole grids.
* :func:`solve_ode` -- Dormand-Prince 8(5,3) with 7th-order dense output
  (``scipy.integrate.solve_ivp(method="DOP853")``).
* :func:`fit_basis` -- linear least squares on a fixed function basis via a
  column-scaled QR factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, OdeError, PreconditionError, RankDeficientError

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077982834800126,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
# Gauss nodes are the odd-indexed Kronrod nodes (xgk[1], xgk[3], ...).
for _j, _w in enumerate(_WG):
    _k = 2 * _j + 1
    GAUSS_WEIGHTS[_k] = _w
    GAUSS_WEIGHTS[20 - _k] = _w


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 10_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise PreconditionError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise PreconditionError("max_subdivisions must be at least 1")


@dataclass(frozen=True)
class OdeSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    first_step: float | None = None
    dense: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise PreconditionError("ODE tolerances must be positive")


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    rms: float
    max_abs: float
    condition: float


def _vectorised(f):
    """Wrap ``f`` so it accepts and returns arrays of any shape."""

    def g(s):
        s = np.asarray(s, dtype=float)
        try:
            out = np.asarray(f(s), dtype=float)
            if out.shape == s.shape:
                return out
            if out.ndim == 0:
                return np.full(s.shape, float(out))
        except (TypeError, ValueError):
            pass
        flat = np.array([float(f(float(v))) for v in s.ravel()])
        return flat.reshape(s.shape)

    return g


def _gk21(f, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = centre[:, None] + half[:, None] * NODES[None, :]
    vals = f(pts)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError("integrand returned a non-finite value")
    k = half * (vals @ KRONROD_WEIGHTS)
    g = half * (vals @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


def integrate_many(f, lo, hi, spec: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Integrate vectorised ``f`` over each ``[lo[i], hi[i]]``.

    ``f`` receives 2-d arrays of abscissae.  Each integral has its own
    tolerance ``max(abs_tol, rel_tol*|value|)``.  ``lo > hi`` flips the sign.
    """
    f = _vectorised(f)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    shape = lo.shape
    lo, hi = lo.ravel(), hi.ravel()
    sign = np.where(hi < lo, -1.0, 1.0)
    a0, b0 = np.minimum(lo, hi), np.maximum(lo, hi)
    m = a0.size
    result = np.zeros(m)
    live = np.flatnonzero(b0 > a0)
    if live.size == 0:
        return result.reshape(shape)

    a, b, owner = a0[live], b0[live], live.copy()
    val, err = _gk21(f, a, b)
    splits = np.zeros(m, dtype=int)
    done_val = np.zeros(m)
    done_err = np.zeros(m)
    while True:
        tot_val = np.bincount(owner, val, minlength=m) + done_val
        tot_err = np.bincount(owner, err, minlength=m) + done_err
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(tot_val))
        bad = tot_err > tol
        if not np.any(bad[owner]):
            result = tot_val
            break
        # Retire intervals of converged integrals to keep the work set small.
        keep = bad[owner]
        if not np.all(keep):
            done_val += np.bincount(owner[~keep], val[~keep], minlength=m)
            done_err += np.bincount(owner[~keep], err[~keep], minlength=m)
            a, b, owner, val, err = a[keep], b[keep], owner[keep], val[keep], err[keep]
        worst = np.zeros(m)
        np.maximum.at(worst, owner, err)
        width = b - a
        splittable = width > 64 * np.finfo(float).eps * np.maximum(np.abs(a), np.abs(b)) + 1e-300
        pick = (err >= 0.25 * worst[owner]) & splittable
        if not np.any(pick):
            raise IntegrationError("quadrature stalled at round-off level before reaching tolerance")
        np.add.at(splits, owner[pick], 1)
        if np.any(splits > spec.max_subdivisions):
            raise IntegrationError(
                f"no convergence after {spec.max_subdivisions} subdivisions"
            )
        mid = 0.5 * (a[pick] + b[pick])
        new_a = np.concatenate([a[pick], mid])
        new_b = np.concatenate([mid, b[pick]])
        new_owner = np.concatenate([owner[pick], owner[pick]])
        nv, ne = _gk21(f, new_a, new_b)
        rest = ~pick
        a = np.concatenate([a[rest], new_a])
        b = np.concatenate([b[rest], new_b])
        owner = np.concatenate([owner[rest], new_owner])
        val = np.concatenate([val[rest], nv])
        err = np.concatenate([err[rest], ne])
    return (sign * result).reshape(shape)


def integrate(f: Callable, lo: float, hi: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Adaptive estimate of the integral of ``f`` from ``lo`` to ``hi``."""
    return float(integrate_many(f, [lo], [hi], spec)[0])


def cumulative_integral(f, anchor: float, points, spec: QuadratureSpec = QuadratureSpec()):
    """Values of ``integral_{anchor}^{p} f`` for every ``p`` in ``points``.

    Consecutive sorted points are integrated piecewise and summed, so the
    cost scales with the number of distinct points.
    """
    pts = np.asarray(points, dtype=float)
    flat = pts.ravel()
    knots, inverse = np.unique(np.append(flat, anchor), return_inverse=True)
    pieces = integrate_many(f, knots[:-1], knots[1:], spec)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    cum -= cum[inverse[-1]]
    return cum[inverse[:-1]].reshape(pts.shape)


class DenseSolution:
    """Callable dense-output interpolant returned by :func:`solve_ode`."""

    def __init__(self, sol, t0, t_end, n_steps):
        self._sol = sol
        self.t0 = float(t0)
        self.t_end = float(t_end)
        self.n_steps = n_steps
        lo, hi = sorted((self.t0, self.t_end))
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        self._lo, self._hi = lo - slack, hi + slack

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self._lo) or np.any(t_arr > self._hi):
            raise OdeError(f"query outside integration interval [{self.t0}, {self.t_end}]")
        clipped = np.clip(t_arr, min(self.t0, self.t_end), max(self.t0, self.t_end))
        if clipped.ndim <= 1:
            return self._sol(clipped)
        flat = self._sol(clipped.ravel())
        return flat.reshape((flat.shape[0],) + clipped.shape)


def solve_ode(rhs, t0: float, y0, t_end: float, spec: OdeSpec = OdeSpec()) -> DenseSolution:
    """Solve ``y' = rhs(t, y)`` from ``t0`` to ``t_end`` with dense output."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))

    def checked(t, y):
        dy = np.asarray(rhs(t, y), dtype=float)
        if not np.all(np.isfinite(dy)):
            raise OdeError(f"right-hand side is not finite at t={t:.6g}")
        return dy

    if t0 == t_end:
        raise PreconditionError("ODE interval has zero length")
    kwargs = {}
    if spec.first_step is not None:
        kwargs["first_step"] = spec.first_step
    sol = solve_ivp(
        checked,
        (t0, t_end),
        y0,
        method="DOP853",
        rtol=spec.rel_tol,
        atol=spec.abs_tol,
        dense_output=True,
        **kwargs,
    )
    if sol.status != 0:
        raise OdeError(f"ODE integration failed: {sol.message}")
    return DenseSolution(sol.sol, t0, t_end, sol.t.size)


def fit_basis(samples, basis: Sequence[Callable], *, max_condition: float = 1e12) -> FitResult:
    """Least-squares coefficients of ``samples`` on ``basis``.

    ``samples`` is a sequence of ``(s, value)`` pairs or an ``(N, 2)`` array.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise PreconditionError("samples must be (s, value) pairs")
    s, y = arr[:, 0], arr[:, 1]
    if len(s) < 2 * len(basis):
        raise PreconditionError(
            f"need at least {2 * len(basis)} samples for {len(basis)} basis functions"
        )
    if np.unique(s).size != s.size:
        raise PreconditionError("sample abscissae must be distinct")
    if not np.all(np.isfinite(y)):
        raise PreconditionError("sample values must be finite")
    A = np.column_stack([_vectorised(phi)(s) for phi in basis])
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise RankDeficientError("a basis function vanishes on all samples", np.inf)
    As = A / scale
    Q, R = np.linalg.qr(As)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > max_condition:
        raise RankDeficientError("basis is numerically rank deficient on the samples", cond)
    coef = np.linalg.solve(R, Q.T @ y) / scale
    resid = y - A @ coef
    return FitResult(
        coefficients=coef,
        rms=float(np.sqrt(np.mean(resid**2))),
        max_abs=float(np.max(np.abs(resid))),
        condition=cond,
    )
