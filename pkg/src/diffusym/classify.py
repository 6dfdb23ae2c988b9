"""Symmetry classification from the semi-invariant ``K`` written in ``I``.

The point-symmetry algebra of ``u_t = a u_xx + b u_x + c u`` beyond the
trivial ``u d/du`` part is

* six-dimensional iff ``K = c2 I^2 + c1 I + c0``,
* four-dimensional iff ``K = mu / (I + iota)^2 + c2 (I + iota)^2 + c0``
  with ``mu != 0`` and ``iota`` the (unknown) shift to the natural origin of ``I``,
* trivial otherwise.

Both tests are least-squares fits of the sampled ``(I, K)`` pairs; the
six-dimensional test wins when both succeed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import exprdsl as ed
from .errors import DomainError, NumericalError, PreconditionError
from .numerics import fit_basis

SIX, FOUR, NONE = "six", "four", "none"

DEFAULT_TOL = 1e-7
MU_TOL = 1e-8
MIN_SAMPLES = 64
SNAP_TOL = 1e-8


@dataclass(frozen=True)
class SymmetryClass:
    """Classification verdict.

    ``constants`` holds ``c2, c1, c0`` for the six-dimensional case and
    ``mu, c2, c0`` for the four-dimensional one.  ``iota`` is the offset
    added to ``I`` (always 0 for the six-dimensional fit).
    """

    variant: str
    constants: dict = field(default_factory=dict)
    iota: float = 0.0
    rms: float = 0.0
    max_abs: float = 0.0
    relative_rms: float = 0.0
    tol: float = DEFAULT_TOL
    six_relative_rms: float = float("nan")
    four_relative_rms: float = float("nan")

    def __post_init__(self):
        if self.variant not in (SIX, FOUR, NONE):
            raise PreconditionError(f"unknown variant {self.variant!r}")
        if self.variant == FOUR and abs(self.constants.get("mu", 0.0)) <= MU_TOL:
            raise PreconditionError("four-dimensional class needs mu != 0")

    @property
    def dimension(self) -> int:
        return {SIX: 6, FOUR: 4, NONE: 0}[self.variant]

    def __getattr__(self, name):
        consts = self.__dict__.get("constants", {})
        if name in ("mu", "c2", "c1", "c0"):
            if name == "c1" and self.__dict__.get("variant") == FOUR:
                return 0.0
            if name in consts:
                return consts[name]
        raise AttributeError(name)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "dimension": self.dimension,
            "constants": {k: float(v) for k, v in self.constants.items()},
            "iota": float(self.iota),
            "rms_residual": float(self.rms),
            "max_residual": float(self.max_abs),
            "relative_rms_residual": float(self.relative_rms),
            "tolerance": float(self.tol),
            "mu_tolerance": MU_TOL,
        }


def _fit(I, K, basis):
    try:
        return fit_basis(np.column_stack([I, K]), basis)
    except NumericalError:
        return None


def fit_six(I, K):
    return _fit(I, K, [lambda s: np.ones_like(s), lambda s: s, lambda s: s**2])


def _four_basis(iota):
    return [
        lambda s: (s + iota) ** -2.0,
        lambda s: np.ones_like(s),
        lambda s: (s + iota) ** 2,
    ]


def fit_four(I, K, iota):
    return _fit(I, K, _four_basis(iota))


def _search_offset(I, K, scale):
    """Best ``iota`` placing the pole ``I = -iota`` outside the sampled range.

    A coarse logarithmic grid of pole distances on each side of the range,
    then a golden-section polish in log-distance around the best node.
    """
    lo, hi = float(np.min(I)), float(np.max(I))
    width = hi - lo
    dists = np.geomspace(1e-6 * width, 1e2 * width, 101)

    def residual(side, logd):
        d = np.exp(logd)
        iota = -(lo - d) if side < 0 else -(hi + d)
        fit = fit_four(I, K, iota)
        return np.inf if fit is None else fit.rms / scale

    best = (np.inf, None, None)
    for side in (-1, 1):
        vals = np.array([residual(side, np.log(d)) for d in dists])
        k = int(np.argmin(vals))
        if not np.isfinite(vals[k]):
            continue
        lo_k, hi_k = max(k - 1, 0), min(k + 1, len(dists) - 1)
        res = minimize_scalar(
            lambda v: residual(side, v),
            bounds=(np.log(dists[lo_k]), np.log(dists[hi_k])),
            method="bounded",
            options={"xatol": 1e-12},
        )
        cand = [(vals[k], np.log(dists[k]))]
        if res.success and np.isfinite(res.fun):
            cand.append((float(res.fun), float(res.x)))
        r, logd = min(cand)
        if r < best[0]:
            d = np.exp(logd)
            best = (r, side, -(lo - d) if side < 0 else -(hi + d))
    return best


def _snap(values, scale):
    """Zero out fitted constants at noise level so the exact branches (``c2 = 0``, ``c1 = 0``) apply."""
    return [0.0 if abs(v) <= SNAP_TOL * scale else float(v) for v in values]


def classify_samples(I, K, tol: float = DEFAULT_TOL) -> SymmetryClass:
    """Classify sampled ``K`` values against ``I``."""
    I = np.asarray(I, dtype=float).ravel()
    K = np.asarray(K, dtype=float).ravel()
    if I.size < MIN_SAMPLES:
        raise PreconditionError(f"classification needs at least {MIN_SAMPLES} samples")
    if not (np.all(np.isfinite(I)) and np.all(np.isfinite(K))):
        raise PreconditionError("K samples contain non-finite values")
    scale = float(np.max(np.abs(K))) + 1.0

    six = fit_six(I, K)
    six_rel = six.rms / scale if six is not None else np.inf
    four_rel, iota = np.inf, 0.0
    if six_rel <= tol:
        c0, c1, c2 = _snap(six.coefficients, scale)
        return SymmetryClass(SIX, {"c2": float(c2), "c1": float(c1), "c0": float(c0)},
                             0.0, six.rms, six.max_abs, six_rel, tol, six_rel, np.nan)

    four_rel, _, iota = _search_offset(I, K, scale)
    if np.isfinite(four_rel):
        four = fit_four(I, K, iota)
        mu, c0, c2 = four.coefficients
        c2 = _snap([c2], scale)[0]
        if four_rel <= tol and abs(mu) > MU_TOL:
            return SymmetryClass(FOUR, {"mu": float(mu), "c2": float(c2), "c0": float(c0)},
                                 float(iota), four.rms, four.max_abs, four_rel, tol,
                                 six_rel, four_rel)
    best = min(six_rel, four_rel)
    return SymmetryClass(NONE, {}, float(iota) if four_rel < six_rel else 0.0,
                         best * scale, np.nan, best, tol, six_rel, four_rel)


def classify(prof, tol: float = DEFAULT_TOL) -> SymmetryClass:
    """Classify an autonomous :class:`~diffusym.invariants.InvariantProfile`."""
    if prof.time_dependent:
        raise PreconditionError("classify needs an autonomous profile; see timedep_classifiers")
    return classify_samples(prof.I_samples, prof.K_samples, tol)


@dataclass(frozen=True)
class TimeDepClassifiers:
    """``c2(t), c1(t), c0(t)`` for ``a = 1, b = m + n x, c = q + r x``.

    Expressions are kept so their time derivatives are available exactly.
    """

    c2_expr: ed.Expression
    c1_expr: ed.Expression
    c0_expr: ed.Expression
    env: ed.ParamEnv

    def _ev(self, e):
        f = ed.compile_expr(e, self.env)
        return lambda t: f(0.0 * np.asarray(t, dtype=float), t)

    @property
    def c2(self) -> Callable:
        return self._ev(self.c2_expr)

    @property
    def c1(self) -> Callable:
        return self._ev(self.c1_expr)

    @property
    def c0(self) -> Callable:
        return self._ev(self.c0_expr)

    @property
    def c2_dot(self) -> Callable:
        return self._ev(ed.differentiate(self.c2_expr, "t"))

    @property
    def c1_dot(self) -> Callable:
        return self._ev(ed.differentiate(self.c1_expr, "t"))

    def check_window(self, t_min: float, t_max: float, n: int = 201) -> None:
        """Raise if any classifier is singular somewhere on ``[t_min, t_max]``."""
        ts = np.linspace(t_min, t_max, n)
        for label, f in (("c2", self.c2), ("c1", self.c1), ("c0", self.c0)):
            try:
                vals = np.asarray(f(ts))
            except DomainError as exc:
                raise PreconditionError(
                    f"{label}(t) is singular on [{t_min}, {t_max}]; restrict the time window ({exc})"
                ) from exc
            if not np.all(np.isfinite(vals)):
                raise PreconditionError(
                    f"{label}(t) is singular on [{t_min}, {t_max}]; restrict the time window"
                )

    def to_dict(self) -> dict:
        return {
            "c2": ed.render(self.c2_expr),
            "c1": ed.render(self.c1_expr),
            "c0": ed.render(self.c0_expr),
        }


def timedep_classifiers(m, n, q, r, env=None) -> TimeDepClassifiers:
    """Classifying functions of ``u_t = u_xx + (m + n x) u_x + (q + r x) u``.

    ``c2 = (n' - n^2)/4``, ``c1 = (m' - m n + 2 r)/2``, ``c0 = q - n/2 - m^2/4``
    (the last with ``K`` anchored at ``x = 0``).
    """
    m, n, q, r = (ed.as_expression(e) for e in (m, n, q, r))
    for e in (m, n, q, r):
        if ed.depends_on(e, "x"):
            raise PreconditionError("m, n, q, r must be functions of t only")
    env = env if isinstance(env, ed.ParamEnv) else ed.ParamEnv(env or {})
    d = ed.differentiate
    c2 = (d(n, "t") - n * n) / 4
    c1 = (d(m, "t") - m * n + 2 * r) / 2
    c0 = q - n / 2 - m * m / 4
    return TimeDepClassifiers(c2, c1, c0, env)


def linear_drift_parts(coeffs):
    """Split ``a = 1, b = m + n x, c = q + r x`` into ``(m, n, q, r)`` expressions."""
    a = ed.bind(coeffs.a, coeffs.env)
    fa = ed.compile_expr(a, coeffs.env)
    probe_x = np.array([-1.3, 0.2, 0.7, 2.1])
    probe_t = np.array([0.37, 0.61, 0.93, 1.7])
    try:
        if not np.allclose(fa(probe_x, probe_t), 1.0, rtol=0, atol=1e-14):
            raise PreconditionError("time-dependent analysis needs a = 1")
    except DomainError as exc:
        raise PreconditionError(f"cannot evaluate a: {exc}") from exc
    parts = []
    for e in (coeffs.b, coeffs.c):
        e = ed.bind(e, coeffs.env)
        slope = ed.differentiate(e, "x")
        curv = ed.compile_expr(ed.differentiate(slope, "x"), coeffs.env)
        try:
            bad = not np.allclose(curv(probe_x, probe_t), 0.0, atol=1e-12)
        except DomainError:
            bad = True
        if bad:
            raise PreconditionError("time-dependent analysis needs b and c linear in x")
        parts.append(ed.substitute(e, "x", ed.ZERO))
        parts.append(ed.substitute(slope, "x", ed.ZERO))
    m, n, q, r = parts
    return m, n, q, r
