"""Closed-form solutions of the worked examples.

Each :class:`CatalogueEntry` bundles a PDE (as a coefficient builder), the
solution evaluator ``u(x, t)``, default parameters and the ``(x, t)`` window
on which the solution is declared valid.  Entry names are the CLI's
``--entry`` vocabulary.

Volatility entries work with ``u_t = (s^2/2)(u_xx + h u)`` where ``s`` is
the volatility; ``psi = int dx / s`` is the Lamperti coordinate, related to
the invariant by ``I = sqrt(2) psi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import InputError, PreconditionError
from .invariants import CoefficientSet

# Ranges in which special_fn promises ~1e-10 relative accuracy.
MAX_ORDER = 10.0
MAX_ARG = 50.0


def special_fn(kind: str, arg, order: float = 0.0):
    """``erf``, ``besselJ`` or ``besselI`` of real argument.

    Bessel functions are restricted to ``0 <= order <= 10`` and
    ``0 <= arg <= 50``; ``erf`` accepts any real argument.
    """
    x = np.asarray(arg, dtype=float)
    if kind == "erf":
        return special.erf(x)
    if kind not in ("besselJ", "besselI"):
        raise PreconditionError(f"unknown special function {kind!r}")
    if not 0 <= order <= MAX_ORDER:
        raise PreconditionError(f"Bessel order {order} outside [0, {MAX_ORDER}]")
    if np.any(x < 0) or np.any(x > MAX_ARG) or not np.all(np.isfinite(x)):
        raise PreconditionError(f"Bessel argument outside [0, {MAX_ARG}]")
    return special.jv(order, x) if kind == "besselJ" else special.iv(order, x)


def _exp_besseli(nu, z, expo):
    """``exp(expo) * I_nu(z)`` without overflow for large ``z``."""
    return np.exp(expo + z) * special.ive(nu, z)


def lamperti_quadratic(al: float, be: float, ga: float) -> Callable:
    """``psi(x)``, an antiderivative of ``1/(al + be x + ga x^2)`` (``ga != 0``)."""
    if ga == 0:
        raise PreconditionError("quadratic volatility needs ga != 0")
    disc = 4 * al * ga - be * be
    if disc > 0:
        w = np.sqrt(disc)
        return lambda x: 2.0 / w * np.arctan((2 * ga * np.asarray(x) + be) / w)
    if disc == 0:
        r = -be / (2 * ga)
        return lambda x: -1.0 / (ga * (np.asarray(x) - r))
    w = np.sqrt(-disc)
    r1, r2 = (-be - w) / (2 * ga), (-be + w) / (2 * ga)
    return lambda x: np.log(np.abs((np.asarray(x) - r2) / (np.asarray(x) - r1))) / (ga * (r2 - r1))


def sigma_from_h(h: float, al: float, be: float, ga: float):
    """Volatility ``al phi1^2 + be phi1 phi2 + ga phi2^2`` for ``phi'' + h phi = 0``.

    Uses the unit-Wronskian pair ``{1, x}`` (``h = 0``) or
    ``{cos(w x), sin(w x)/w}`` with ``w = sqrt(h)``.  Returns the expression
    text for the volatility and ``c0 = (4 al ga - be^2)/8``.
    """
    if h < 0:
        raise PreconditionError("sigma_from_h supports h >= 0")
    if h == 0:
        p1, p2 = "1", "x"
    else:
        w = repr(float(np.sqrt(h)))
        p1, p2 = f"cos({w}*x)", f"sin({w}*x)/{w}"
    text = f"({al!r})*({p1})^2 + ({be!r})*({p1})*({p2}) + ({ga!r})*({p2})^2"
    return text, (4 * al * ga - be * be) / 8


@dataclass(frozen=True)
class CatalogueEntry:
    """A closed-form solution with its PDE, parameters and validity window."""

    name: str
    description: str
    source: str
    defaults: dict
    domain: tuple
    notes: str
    _coeffs: Callable = field(repr=False)
    _solution: Callable = field(repr=False)
    _check: Callable | None = field(default=None, repr=False)
    _domain: Callable | None = field(default=None, repr=False)

    def params(self, **overrides) -> dict:
        unknown = set(overrides) - set(self.defaults)
        if unknown:
            raise InputError(f"{self.name}: unknown parameters {sorted(unknown)}")
        p = dict(self.defaults, **{k: float(v) for k, v in overrides.items()})
        if self._check is not None:
            self._check(p)
        return p

    def domain_for(self, **overrides) -> tuple:
        """Validity window for the given parameters (some models move it)."""
        if self._domain is None:
            return self.domain
        return self._domain(self.params(**overrides)) or self.domain

    def coefficients(self, **overrides) -> CoefficientSet:
        return self._coeffs(self.params(**overrides))

    def evaluator(self, **overrides) -> Callable:
        p = self.params(**overrides)
        sol = self._solution

        def u(x, t):
            x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
            return sol(x, t, p)

        return u

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description, "source": self.source,
                "defaults": self.defaults, "domain": list(self.domain), "notes": self.notes}


def _need(cond, msg):
    if not cond:
        raise PreconditionError(msg)


# -- heat, Brownian, Ornstein-Uhlenbeck ----------------------------------------------
def _heat(x, t, p):
    return np.exp(-(x - p["x0"]) ** 2 / (4 * t)) / np.sqrt(4 * np.pi * t)


def _brownian(x, t, p):
    k, g, d = p["k"], p["gamma"], p["delta"]
    D = g * t + d
    at = np.arctan(k * x)
    return p["C"] * D**-0.5 * np.sqrt(1 + k * k * x * x) * np.exp(-g * at**2 / (4 * k * k * D) + k * k * t)


def _ou_C(p):
    return np.sqrt(p["l"] / (2 * np.pi)) if np.isnan(p["C"]) else p["C"]


def _ou_fund(x, t, p):
    l = p["l"]
    s = -np.expm1(-2 * l * t)
    return _ou_C(p) * s**-0.5 * np.exp(-0.5 * l * x * x / s)


def _ou_stat(x, t, p):
    l = p["l"]
    return _ou_C(p) * np.exp(-0.5 * l * x * x) + 0 * t


# -- CIR ------------------------------------------------------------------------------
def _cir1(x, t, p):
    s, n = p["s"], p["n"]
    return p["C"] * (1 + np.exp(n * t)) ** -0.5 * np.exp(-(n / s) * x / (1 + np.exp(-n * t)))


def _cir2(x, t, p):
    s, n = p["s"], p["n"]
    return (p["C"] * (np.exp(2 * n * t) + np.exp(n * t)) ** -0.5 * x**-0.5
            * np.exp(-(n / s) * x / (1 + np.exp(-n * t))))


# -- time-dependent drift b = -x/t ------------------------------------------------------
def _timedep(x, t, p):
    g, d = p["gamma"], p["delta"]
    D = g * t + d
    return p["C"] * D**-0.5 * np.sqrt(t) * np.exp(d * (x + t) ** 2 / (4 * t * D))


# -- volatility models ----------------------------------------------------------------
def _vol_model(p):
    """``(sigma(x), psi(x), c0)`` for the quadratic model or its trigonometric variant."""
    nu = p.get("nu", 0.0)
    if nu:
        sig = lambda x: np.sin(nu * x) * np.cos(nu * x)
        psi = lambda x: np.log(np.tan(nu * x)) / nu
        return sig, psi, -nu * nu / 8
    al, be, ga = p["al"], p["be"], p["ga"]
    sig = lambda x: al + be * x + ga * x * x
    return sig, lamperti_quadratic(al, be, ga), (4 * al * ga - be * be) / 8


def _vol_coeffs(p):
    nu = p.get("nu", 0.0)
    if nu:
        s = "sin(nu*x)*cos(nu*x)"
        return CoefficientSet(f"({s})^2/2", "0", f"nu^2*({s})^2/2", {"nu": nu})
    return CoefficientSet("(al + be*x + ga*x^2)^2/2", "0", "0",
                          {k: p[k] for k in ("al", "be", "ga")})


def _vol_domain(p):
    nu = p.get("nu", 0.0)
    if nu:
        return (0.2 / abs(nu), 1.3 / abs(nu), 0.2, 1.5)
    return None


def _vol_check(p):
    if p.get("nu", 0.0):
        return
    _need(p["ga"] != 0, "quadratic volatility needs ga != 0")


def _vol_v4(x, t, p):
    sig, psi, c0 = _vol_model(p)
    return p["C"] * np.sqrt(sig(x) / t) * np.exp(c0 * t - psi(x) ** 2 / (2 * t))


def _vol_v5(x, t, p):
    sig, _, c0 = _vol_model(p)
    return p["C"] * np.sqrt(sig(x)) * np.exp(c0 * t)


def _vol_erf(x, t, p):
    sig, psi, c0 = _vol_model(p)
    return p["C"] * special.erf(psi(x) / np.sqrt(2 * t)) * np.sqrt(sig(x)) * np.exp(c0 * t)


def _vol_v3(x, t, p):
    sig, psi, c0 = _vol_model(p)
    ps = psi(x)
    return ((p["C1"] * t**-0.5 + p["C2"] * t**-1.5 * ps) * np.sqrt(sig(x))
            * np.exp(c0 * t - ps**2 / (2 * t)))


def _sl2_coeffs(p):
    return CoefficientSet("g^2*(x - r)^4/2", "0", "0", {"g": p["g"], "r": p["r"]})


def _sl2(x, t, p):
    g, r = p["g"], p["r"]
    ma, mb, mc, md = p["ma"], p["mb"], p["mc"], p["md"]
    delta = ma * md - mb * mc
    D = mc * t + md
    y = x - r
    X = -np.sqrt(2 * delta) / (g * D * y)
    T = (ma * t + mb) / D + p["T0"]
    U = np.exp(-(X - p["X0"]) ** 2 / (4 * T)) / np.sqrt(4 * np.pi * T)
    return p["C"] * D**-0.5 * y * np.exp(-mc / (2 * g * g * y * y * D)) * U


def _sl2_check(p):
    _need(p["ma"] * p["md"] - p["mb"] * p["mc"] > 0, "Moebius determinant must be positive")
    _need(p["g"] != 0, "g must be non-zero")


def _sfh_coeffs(p):
    text, _ = sigma_from_h(p["h"], p["al"], p["be"], p["ga"])
    return CoefficientSet(f"({text})^2/2", "0", f"{p['h']!r}*({text})^2/2")


def _sfh(x, t, p):
    text, c0 = sigma_from_h(p["h"], p["al"], p["be"], p["ga"])
    h = p["h"]
    if h == 0:
        p1, p2 = np.ones_like(x), x
    else:
        w = np.sqrt(h)
        p1, p2 = np.cos(w * x), np.sin(w * x) / w
    sig = p["al"] * p1**2 + p["be"] * p1 * p2 + p["ga"] * p2**2
    return p["C"] * np.sqrt(sig) * np.exp(c0 * t)


def _sfh_check(p):
    _need(p["h"] >= 0, "sigma_from_h supports h >= 0")


# -- radial operators ----------------------------------------------------------------
def _radial_coeffs(p):
    return CoefficientSet("1", "(n - 1)/x", "mu/x^2 + w^2*x^2",
                          {"n": p["n"], "mu": p["mu"], "w": p["w"]})


def _radial_nu(n, mu):
    return np.sqrt((n - 2) ** 2 / 4 - mu)


def _radial_check(p):
    _need(p["mu"] <= (p["n"] - 2) ** 2 / 4, "real Bessel order needs mu <= (n-2)^2/4")
    _need(p["w"] > 0 and p["rho"] > 0, "w and rho must be positive")


def _radial(x, t, p):
    n, mu, w, rho = p["n"], p["mu"], p["w"], p["rho"]
    nu = _radial_nu(n, mu)
    s2 = np.sin(2 * w * t)
    z = w * x * rho / s2
    expo = -w * (x * x + rho * rho) / (2 * np.tan(2 * w * t))
    return p["C"] * (w / s2) * (x * rho) ** ((2 - n) / 2) * _exp_besseli(nu, z, expo)


def _radial2_coeffs(p):
    return CoefficientSet("1", "1/x", "mu/x^2 + w^2*x^2", {"mu": p["mu"], "w": p["w"]})


def _radial2(x, t, p):
    return _radial(x, t, dict(p, n=2.0))


def _radial2_check(p):
    _need(p["mu"] <= 0, "real Bessel order needs mu <= 0 in two dimensions")
    _need(p["w"] > 0 and p["rho"] > 0, "w and rho must be positive")


def radial_2d_xy(x1, x2, t, **params):
    """The two-dimensional kernel at Cartesian points ``(x1, x2)``."""
    return ENTRIES["radial_2d"].evaluator(**params)(np.hypot(x1, x2), t)


def _bessel_can_coeffs(p):
    return CoefficientSet("1", "0", "mu/x^2", {"mu": p["mu"]})


def _bessel_can(x, t, p):
    nu = np.sqrt(0.25 - p["mu"])
    y = p["y"]
    z = x * y / (2 * t)
    return p["C"] * np.sqrt(x * y) / (2 * t) * _exp_besseli(nu, z, -(x * x + y * y) / (4 * t))


def _bessel_can_check(p):
    _need(p["mu"] <= 0.25, "real Bessel order needs mu <= 1/4")
    _need(p["y"] > 0, "source point must be positive")


def _always(f):
    return lambda p: f


NAN = float("nan")
_VOL = {"al": 1.0, "be": 0.0, "ga": 1.0, "nu": 0.0}

ENTRIES = {e.name: e for e in [
    CatalogueEntry("heat_kernel", "heat kernel (4 pi t)^(-1/2) exp(-(x-x0)^2/4t)",
                   "fundamental solution of u_t = u_xx; image of u=1 under the projective heat map",
                   {"x0": 0.0}, (-4.0, 4.0, 0.1, 2.0), "",
                   _always(CoefficientSet("1", "0", "0")), _heat),
    CatalogueEntry("brownian_quadratic",
                   "(gt+d)^(-1/2) (1+k^2x^2)^(1/2) exp[-g arctan(kx)^2/(4k^2(gt+d)) + k^2 t]",
                   "u_t = (1+k^2x^2)^2 u_xx; image of the constant heat solution",
                   {"k": 1.0, "gamma": 1.0, "delta": 0.0, "C": 1.0}, (-2.0, 2.0, 0.2, 1.5),
                   "requires gamma t + delta > 0 on the window",
                   lambda p: CoefficientSet("(1+k^2*x^2)^2", "0", "0", {"k": p["k"]}), _brownian,
                   lambda p: _need(p["k"] > 0, "k must be positive")),
    CatalogueEntry("ou_fundamental", "C (1-exp(-2lt))^(-1/2) exp[-(l/2) x^2/(1-exp(-2lt))]",
                   "Ornstein-Uhlenbeck transition density from x=0, u_t = u_xx + (l x u)_x",
                   {"l": 1.0, "C": NAN}, (-4.0, 4.0, 0.1, 2.0),
                   "C defaults to sqrt(l/2pi), giving unit mass",
                   lambda p: CoefficientSet("1", "l*x", "l", {"l": p["l"]}), _ou_fund,
                   lambda p: _need(p["l"] > 0, "l must be positive")),
    CatalogueEntry("ou_stationary", "C exp(-l x^2/2)",
                   "stationary Ornstein-Uhlenbeck density (large-t limit of ou_fundamental)",
                   {"l": 1.0, "C": NAN}, (-4.0, 4.0, 0.1, 2.0), "C defaults to sqrt(l/2pi)",
                   lambda p: CoefficientSet("1", "l*x", "l", {"l": p["l"]}), _ou_stat,
                   lambda p: _need(p["l"] > 0, "l must be positive")),
    CatalogueEntry("cir_sol1", "C (1+e^(nt))^(-1/2) exp[-(n/s) x/(1+e^(-nt))]",
                   "CIR u_t = s x u_xx + (m + n x) u_x with m = s/2",
                   {"s": 1.0, "n": 2.0, "C": 1.0}, (0.1, 3.0, 0.1, 1.5), "m is fixed to s/2",
                   lambda p: CoefficientSet("s*x", "s/2 + n*x", "0", {"s": p["s"], "n": p["n"]}),
                   _cir1, lambda p: _need(p["s"] > 0 and p["n"] > 0, "s, n must be positive")),
    CatalogueEntry("cir_sol2", "C (e^(2nt)+e^(nt))^(-1/2) x^(-1/2) exp[-(n/s) x/(1+e^(-nt))]",
                   "CIR u_t = s x u_xx + (m + n x) u_x with m = 3s/2",
                   {"s": 1.0, "n": 2.0, "C": 1.0}, (0.3, 3.0, 0.1, 1.5), "m is fixed to 3s/2",
                   lambda p: CoefficientSet("s*x", "3*s/2 + n*x", "0", {"s": p["s"], "n": p["n"]}),
                   _cir2, lambda p: _need(p["s"] > 0 and p["n"] > 0, "s, n must be positive")),
    CatalogueEntry("timedep_drift", "C (gt+d)^(-1/2) sqrt(t) exp[d (x+t)^2/(4t(gt+d))]",
                   "u_t = u_xx - (x/t) u_x, four-parameter family from the constant heat solution",
                   {"gamma": 1.0, "delta": 1.0, "C": 1.0}, (-2.0, 2.0, 0.5, 2.0),
                   "requires gamma t + delta > 0 on the window",
                   _always(CoefficientSet("1", "-x/t", "0")), _timedep),
    CatalogueEntry("vol_inv_v4", "C sqrt(s/t) exp[c0 t - psi^2/(2t)]",
                   "volatility model u_t = (s^2/2)(u_xx + h u), solution invariant under v4",
                   dict(_VOL, C=1.0), (-2.0, 2.0, 0.2, 1.5),
                   "s = al + be x + ga x^2 (h = 0), or s = sin(nu x) cos(nu x) with h = nu^2 "
                   "when nu != 0 (then use x in (0, pi/(2 nu)))",
                   _vol_coeffs, _vol_v4, _vol_check, _vol_domain),
    CatalogueEntry("vol_inv_v5", "C sqrt(s) exp(c0 t)",
                   "volatility model, solution invariant under v5",
                   dict(_VOL, C=1.0), (-2.0, 2.0, 0.2, 1.5), "see vol_inv_v4 for the models",
                   _vol_coeffs, _vol_v5, _vol_check, _vol_domain),
    CatalogueEntry("vol_erf", "C erf(psi/sqrt(2t)) sqrt(s) exp(c0 t)",
                   "volatility model, dilation-invariant error-function solution",
                   dict(_VOL, C=1.0), (-2.0, 2.0, 0.2, 1.5), "see vol_inv_v4 for the models",
                   _vol_coeffs, _vol_erf, _vol_check, _vol_domain),
    CatalogueEntry("vol_v3", "(C1 t^(-1/2) + C2 t^(-3/2) psi) sqrt(s) exp[c0 t - psi^2/(2t)]",
                   "volatility model, solution invariant under the projective field v3",
                   dict(_VOL, C1=1.0, C2=1.0), (-2.0, 2.0, 0.2, 1.5),
                   "see vol_inv_v4 for the models", _vol_coeffs, _vol_v3, _vol_check, _vol_domain),
    CatalogueEntry("vol_sl2_action",
                   "C (mc t+md)^(-1/2) (x-r) exp[-mc/(2g^2(x-r)^2(mc t+md))] U(X, M(t))",
                   "s = g (x-r)^2 (c0 = 0): projective action on the heat kernel U "
                   "(source X0, time shift T0)",
                   {"g": 1.0, "r": 0.0, "ma": 0.0, "mb": -1.0, "mc": 1.0, "md": 0.0,
                    "T0": 6.0, "X0": 0.0, "C": 1.0}, (0.3, 2.0, 0.2, 1.5),
                   "X = -sqrt(2 (ma md - mb mc))/(g (mc t + md)(x - r)), M(t) = (ma t+mb)/(mc t+md); "
                   "needs M(t) + T0 > 0",
                   _sl2_coeffs, _sl2, _sl2_check),
    CatalogueEntry("vol_sigma_from_h", "C sqrt(s) exp(c0 t) with s = al phi1^2 + be phi1 phi2 + ga phi2^2",
                   "volatility built from solutions of phi'' + h phi = 0, PDE u_t = (s^2/2)(u_xx + h u)",
                   {"h": 1.0, "al": 2.0, "be": 0.5, "ga": 1.0, "C": 1.0}, (-1.0, 1.0, 0.2, 1.5),
                   "unit Wronskian basis, so (4 al ga - be^2) = 8 c0",
                   _sfh_coeffs, _sfh, _sfh_check),
    CatalogueEntry("radial_fundamental",
                   "(w/sin 2wt) (x rho)^((2-n)/2) exp[-w(x^2+rho^2)/(2 tan 2wt)] I_nu(w x rho/sin 2wt)",
                   "radial u_t = u_xx + ((n-1)/x) u_x + (mu/x^2 + w^2 x^2) u, source rho",
                   {"n": 3.0, "mu": 0.0, "w": 1.0, "rho": 1.0, "C": 1.0}, (0.2, 3.0, 0.1, 0.7),
                   "nu = sqrt((n-2)^2/4 - mu); needs mu <= (n-2)^2/4 and t < pi/(2w)",
                   _radial_coeffs, _radial, _radial_check),
    CatalogueEntry("radial_2d",
                   "(w/sin 2wt) exp[-w(r^2+rho^2)/(2 tan 2wt)] I_sqrt(-mu)(w r rho/sin 2wt)",
                   "two-dimensional rotation-invariant kernel in the radial variable r",
                   {"mu": -0.5, "w": 1.0, "rho": 1.0, "C": 1.0}, (0.2, 3.0, 0.1, 0.7),
                   "needs mu <= 0; radial_2d_xy composes r = sqrt(x1^2 + x2^2)",
                   _radial2_coeffs, _radial2, _radial2_check),
    CatalogueEntry("canonical_bessel", "sqrt(x y)/(2t) exp[-(x^2+y^2)/(4t)] I_nu(x y/(2t))",
                   "fundamental solution of u_t = u_xx + mu u/x^2, nu = sqrt(1/4 - mu)",
                   {"mu": -0.5, "y": 1.0, "C": 1.0}, (0.2, 4.0, 0.1, 1.5), "needs mu <= 1/4",
                   _bessel_can_coeffs, _bessel_can, _bessel_can_check),
]}


def names() -> list:
    return list(ENTRIES)


def entry(name: str) -> CatalogueEntry:
    try:
        return ENTRIES[name]
    except KeyError:
        raise InputError(f"unknown catalogue entry {name!r}; known: {', '.join(ENTRIES)}") from None
