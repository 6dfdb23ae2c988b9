"""Numerical checks of candidate solutions.

* :func:`residual` -- pointwise PDE residual ``u_t - a u_xx - b u_x - c u``
  with fourth-order central differences in ``x`` and second-order central
  differences in ``t``.
* :func:`evolve_compare` -- Crank-Nicolson evolution from a closed form at
  ``t0`` with Dirichlet data taken from the reference, reporting the
  discrete L2 error at every step.
* :func:`mass` -- quadrature of ``u(., t)`` over a range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import NumericalError, PreconditionError
from .numerics import QuadratureSpec, integrate


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid.

    ``h`` is the x spacing and ``dt`` the time step of the evolution; the
    residual uses the separate small step ``fd_dt`` for ``u_t``.
    """

    x_min: float
    x_max: float
    t_min: float
    t_max: float
    h: float = 1 / 128
    nt: int = 9
    fd_dt: float = 1e-6
    margin: float = 0.0
    dt: float | None = None

    def __post_init__(self):
        if not (self.h > 0 and self.fd_dt > 0):
            raise PreconditionError("grid steps must be positive")
        if not (self.x_min < self.x_max and self.t_min < self.t_max):
            raise PreconditionError("grid ranges must be increasing")
        if self.nt < 2:
            raise PreconditionError("need at least two time nodes")
        if self.dt is None:
            object.__setattr__(self, "dt", self.h)
        if self.dt <= 0:
            raise PreconditionError("time step must be positive")

    @property
    def x(self) -> np.ndarray:
        lo, hi = self.x_min + self.margin, self.x_max - self.margin
        n = int(round((hi - lo) / self.h))
        return lo + self.h * np.arange(n + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.x_min, self.x_max, self.t_min, self.t_max, self.h / factor, self.nt,
                    self.fd_dt, self.margin, self.dt / factor)


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    rms: float
    scale: float
    relative: float
    h: float
    fd_dt: float

    def to_dict(self) -> dict:
        return {"max_abs_residual": self.max_abs, "rms_residual": self.rms, "scale": self.scale,
                "relative_residual": self.relative, "h": self.h, "fd_dt": self.fd_dt}


def _coef(coeffs, name, x, t):
    v = coeffs.fn(name)(x, t)
    return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(x, t).shape)


def residual_field(coeffs, u: Callable, grid: Grid):
    """Residual on interior nodes, shape ``(nt, nx - 4)``, and the ``u`` samples."""
    x = grid.x
    if x.size < 5:
        raise PreconditionError("grid too coarse for the five-point stencil")
    t = grid.t
    X, Tm = np.meshgrid(x, t)
    U = np.asarray(u(X, Tm), dtype=float)
    Up = np.asarray(u(X, Tm + grid.fd_dt), dtype=float)
    Um = np.asarray(u(X, Tm - grid.fd_dt), dtype=float)
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(Up)) and np.all(np.isfinite(Um))):
        raise NumericalError("candidate solution is not finite on the grid")
    h = grid.h
    ux = (U[:, :-4] - 8 * U[:, 1:-3] + 8 * U[:, 3:-1] - U[:, 4:]) / (12 * h)
    uxx = (-U[:, :-4] + 16 * U[:, 1:-3] - 30 * U[:, 2:-2] + 16 * U[:, 3:-1] - U[:, 4:]) / (12 * h * h)
    ut = (Up - Um)[:, 2:-2] / (2 * grid.fd_dt)
    Xi, Ti = X[:, 2:-2], Tm[:, 2:-2]
    r = ut - (_coef(coeffs, "a", Xi, Ti) * uxx + _coef(coeffs, "b", Xi, Ti) * ux
              + _coef(coeffs, "c", Xi, Ti) * U[:, 2:-2])
    return r, U


def residual(coeffs, u: Callable, grid: Grid) -> ResidualReport:
    """PDE residual of ``u`` over the interior of ``grid``."""
    r, U = residual_field(coeffs, u, grid)
    scale = float(np.max(np.abs(U)))
    mx = float(np.max(np.abs(r)))
    return ResidualReport(
        max_abs=mx,
        rms=float(np.sqrt(np.mean(r**2))),
        scale=scale,
        relative=mx / scale if scale > 0 else (0.0 if mx == 0 else np.inf),
        h=grid.h,
        fd_dt=grid.fd_dt,
    )


@dataclass(frozen=True)
class EvolutionReport:
    times: np.ndarray
    l2_error: np.ndarray
    mass: np.ndarray
    h: float
    dt: float
    final: np.ndarray = field(repr=False, default=None)

    @property
    def final_error(self) -> float:
        return float(self.l2_error[-1])

    @property
    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])))

    def to_dict(self) -> dict:
        return {"h": self.h, "dt": self.dt, "final_l2_error": self.final_error,
                "max_l2_error": float(np.max(self.l2_error)), "mass_drift": self.mass_drift,
                "steps": int(self.times.size - 1)}


def _operator_bands(coeffs, x, t, h, conservative):
    """Tridiagonal ``(lower, diag, upper)`` of the spatial operator at time ``t``."""
    if conservative:
        # u_t = (p u_x + q u)_x with p = a and q = b - a_x, fluxes at midpoints.
        xm = 0.5 * (x[:-1] + x[1:])
        p = _coef(coeffs, "a", xm, t)
        q = _coef(coeffs, "b", xm, t) - _coef(coeffs, "a_x", xm, t)
        # F_{i+1/2} = p (u_{i+1} - u_i)/h + q (u_i + u_{i+1})/2
        lo = np.zeros(x.size)
        di = np.zeros(x.size)
        up = np.zeros(x.size)
        fl_i = -p / h + q / 2   # coefficient of u_i in F_{i+1/2}
        fl_ip = p / h + q / 2   # coefficient of u_{i+1}
        # (F_{i+1/2} - F_{i-1/2}) / h on interior nodes 1..n-2
        di[1:-1] = (fl_i[1:] - fl_ip[:-1]) / h
        up[1:-1] = fl_ip[1:] / h
        lo[1:-1] = -fl_i[:-1] / h
        return lo, di, up
    a = _coef(coeffs, "a", x, t)
    b = _coef(coeffs, "b", x, t)
    c = _coef(coeffs, "c", x, t)
    lo = a / h**2 - b / (2 * h)
    di = -2 * a / h**2 + c
    up = a / h**2 + b / (2 * h)
    for arr in (lo, di, up):
        arr[0] = arr[-1] = 0.0
    return lo, di, up


def _apply(lo, di, up, u):
    out = di * u
    out[1:] += lo[1:] * u[:-1]
    out[:-1] += up[:-1] * u[1:]
    return out


def evolve_compare(coeffs, init: Callable, reference: Callable, grid: Grid,
                   conservative: bool = False) -> EvolutionReport:
    """Crank-Nicolson from ``init(x)`` at ``grid.t_min`` to ``grid.t_max``.

    Boundary values come from ``reference(x, t)``.  Errors are discrete L2
    norms ``sqrt(h sum e^2)`` against ``reference``; mass is the trapezoidal
    sum.  ``conservative`` switches to the flux form ``(a u_x + (b - a_x) u)_x``
    which assumes ``c = b_x - a_xx`` (a Fokker-Planck operator).
    """
    x = grid.x
    h = grid.h
    n_steps = int(round((grid.t_max - grid.t_min) / grid.dt))
    if n_steps < 1:
        raise PreconditionError("time window shorter than one step")
    k = (grid.t_max - grid.t_min) / n_steps
    u = np.asarray(init(x), dtype=float).copy()
    if not np.all(np.isfinite(u)):
        raise NumericalError("initial data is not finite")
    times = grid.t_min + k * np.arange(n_steps + 1)
    errs = np.empty(n_steps + 1)
    masses = np.empty(n_steps + 1)
    ref0 = np.asarray(reference(x, times[0]), dtype=float)
    scale = max(float(np.max(np.abs(ref0))), float(np.max(np.abs(u))), 1e-300)
    errs[0] = np.sqrt(h * np.sum((u - ref0) ** 2))
    masses[0] = np.trapezoid(u, x) if hasattr(np, "trapezoid") else np.trapz(u, x)
    bands_old = _operator_bands(coeffs, x, times[0], h, conservative)
    for j in range(1, n_steps + 1):
        bands_new = _operator_bands(coeffs, x, times[j], h, conservative)
        rhs = u + 0.5 * k * _apply(*bands_old, u)
        lo, di, up = bands_new
        ab = np.zeros((3, x.size))
        ab[0, 1:] = -0.5 * k * up[:-1]
        ab[1] = 1.0 - 0.5 * k * di
        ab[2, :-1] = -0.5 * k * lo[1:]
        ref = np.asarray(reference(x, times[j]), dtype=float)
        # Dirichlet rows
        ab[1, 0] = ab[1, -1] = 1.0
        ab[0, 1] = 0.0
        ab[2, -2] = 0.0
        rhs[0], rhs[-1] = ref[0], ref[-1]
        try:
            u = solve_banded((1, 1), ab, rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"tridiagonal solve failed: {exc}") from exc
        if not np.all(np.isfinite(u)) or np.max(np.abs(u - ref)) > 10 * scale:
            raise NumericalError(f"evolution unstable at t={times[j]:.6g}")
        errs[j] = np.sqrt(h * np.sum((u - ref) ** 2))
        masses[j] = np.trapezoid(u, x) if hasattr(np, "trapezoid") else np.trapz(u, x)
        bands_old = bands_new
    return EvolutionReport(times, errs, masses, h, k, u)


def mass(u: Callable, t: float, x_range, weight: Callable | None = None,
         spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``int u(x, t) w(x) dx`` over ``x_range``."""
    lo, hi = x_range
    if weight is None:
        return integrate(lambda s: u(s, t), lo, hi, spec)
    return integrate(lambda s: u(s, t) * weight(s), lo, hi, spec)
