"""Command-line front end.

Usage::

    diffusym classify <spec> [--expect six|four|none]
    diffusym transform <spec> [--target first|second] [--mobius a,b,c,d]
    diffusym generators <spec>
    diffusym verify <spec> [--entry NAME | --solution EXPR] [--evolve] [--mass]
    diffusym catalogue list | show NAME

``<spec>`` is a path to a PDE spec file or the name of a shipped spec
(``heat``, ``brownian``, ``ou``, ...).  Reports are JSON on stdout or in
``--out``.  Exit codes: 0 success, 1 analysis negative, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import catalogue, canonical, classify as cl, exprdsl as ed, generators as gen, verify as vf
from .errors import DiffusymError, InputError, NumericalError
from .invariants import CoefficientSet, WorkingDomain, profile

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

TABLE_TOL = 1e-6
RESIDUAL_TOL = 1e-6
DETERMINING_TOL = 1e-8


# -- spec files ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PdeSpec:
    source: str
    coeffs: CoefficientSet
    params: dict
    domain: WorkingDomain
    options: dict

    def echo(self) -> dict:
        d = self.domain
        return {"source": self.source, "pde": self.coeffs.describe(), "params": self.params,
                "domain": {"x_min": d.x_min, "x_max": d.x_max, "t_min": d.t_min, "t_max": d.t_max,
                           "x0": d.x0, "nx": d.nx, "nt": d.nt, "margin": d.margin},
                "options": self.options}


def shipped_specs() -> list:
    return sorted(p.name[:-4] for p in (resources.files("diffusym") / "specs").iterdir()
                  if p.name.endswith(".pde"))


def _read_spec_text(ref: str) -> tuple[str, str]:
    path = Path(ref)
    if path.is_file():
        return path.read_text(), str(path)
    stem = path.name[:-4] if path.name.endswith(".pde") else path.name
    if stem in shipped_specs() and (path.suffix in ("", ".pde")):
        res = resources.files("diffusym") / "specs" / f"{stem}.pde"
        return res.read_text(), f"builtin:{stem}"
    raise InputError(f"spec file not found: {ref}")


def _float(section, key, value):
    try:
        return float(value)
    except ValueError:
        raise InputError(f"[{section}] {key} must be a number, got {value!r}") from None


def load_spec(ref: str) -> PdeSpec:
    """Parse an INI-style spec with sections [pde], [params], [domain], [options]."""
    text, source = _read_spec_text(ref)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InputError(f"{source}: {exc}") from None
    if not cp.has_section("pde"):
        raise InputError(f"{source}: missing [pde] section")
    missing = [k for k in ("a", "b", "c") if not cp.has_option("pde", k)]
    if missing:
        raise InputError(f"{source}: [pde] lacks {', '.join(missing)}")
    params = {k: _float("params", k, v) for k, v in cp.items("params")} if cp.has_section("params") else {}
    coeffs = CoefficientSet(cp.get("pde", "a"), cp.get("pde", "b"), cp.get("pde", "c"), params)
    if not cp.has_section("domain"):
        raise InputError(f"{source}: missing [domain] section")
    dom = dict(cp.items("domain"))
    for k in ("x_min", "x_max"):
        if k not in dom:
            raise InputError(f"{source}: [domain] lacks {k}")
    kw = {}
    for k in ("x_min", "x_max", "t_min", "t_max", "x0", "margin"):
        if k in dom:
            kw[k] = _float("domain", k, dom[k])
    for k in ("nx", "nt"):
        if k in dom:
            kw[k] = int(_float("domain", k, dom[k]))
    unknown = set(dom) - {"x_min", "x_max", "t_min", "t_max", "x0", "nx", "nt", "margin"}
    if unknown:
        raise InputError(f"{source}: unknown [domain] keys {sorted(unknown)}")
    domain = WorkingDomain(**kw)
    options = dict(cp.items("options")) if cp.has_section("options") else {}
    return PdeSpec(source, coeffs, params, domain, options)


# -- helpers --------------------------------------------------------------------------------
def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Timer:
    def __init__(self):
        self.steps = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.steps[name] = time.perf_counter() - self.t0

        return _Ctx()


def _opt_float(spec: PdeSpec, key: str, default: float) -> float:
    return _float("options", key, spec.options[key]) if key in spec.options else default


def _mobius(text):
    return canonical.MobiusParams.parse(text) if text else None


def _sample_grid(dom: WorkingDomain, nx: int = 9, nt: int = 5):
    pad = dom.margin + 0.05 * (dom.x_max - dom.x_min)
    xs = np.linspace(dom.x_min + pad, dom.x_max - pad, nx)
    ts = np.linspace(dom.t_min + 0.05 * (dom.t_max - dom.t_min), dom.t_max - 0.05 * (dom.t_max - dom.t_min), nt)
    return xs, ts


def _verify_grid(spec: PdeSpec, args=None) -> vf.Grid:
    d = spec.domain
    h = _opt_float(spec, "h", 1 / 128)
    nt = int(_opt_float(spec, "nt", 9))
    # keep the time stencil inside the window
    pad = 10 * vf.Grid.fd_dt
    return vf.Grid(d.x_min + d.margin, d.x_max - d.margin, d.t_min + pad, d.t_max - pad, h=h, nt=nt)


def canonical_solution(hm) -> tuple:
    """A solution of the target equation to pull back, with a description."""
    if hm.target == canonical.SECOND and hm.cls.variant == cl.FOUR:
        mu = hm.cls.mu
        if mu > 0.25:
            k = math.sqrt(mu - 0.25)
            return (lambda y, T: np.sqrt(y) * np.cos(k * np.log(y)),
                    f"sqrt(y) cos({k:.6g} ln y), stationary solution of v_T = v_yy + mu v/y^2")
        nu = math.sqrt(0.25 - mu)
        return (lambda y, T: y ** (0.5 + nu) * np.ones_like(T),
                f"y^(1/2 + {nu:.6g}), stationary solution of v_T = v_yy + mu v/y^2")
    return (lambda y, T: np.ones(np.broadcast(y, T).shape), "constant solution of the heat equation")


# -- analyses ----------------------------------------------------------------------------------
def _classify(spec: PdeSpec, timer: Timer, tol: float):
    if spec.coeffs.time_dependent:
        with timer("classify"):
            m, n, q, r = cl.linear_drift_parts(spec.coeffs)
            tdc = cl.timedep_classifiers(m, n, q, r, spec.coeffs.env)
            tdc.check_window(spec.domain.t_min, spec.domain.t_max)
        ts = np.linspace(spec.domain.t_min, spec.domain.t_max, 5)
        out = {"variant": cl.SIX, "dimension": 6, "time_dependent": True,
               "linear_parts": {k: ed.render(e) for k, e in zip("mnqr", (m, n, q, r))},
               "classifiers": tdc.to_dict(),
               "samples": {"t": ts, "c2": tdc.c2(ts), "c1": tdc.c1(ts), "c0": tdc.c0(ts)}}
        return out, (m, n, q, r, tdc), None
    with timer("profile"):
        prof = profile(spec.coeffs, spec.domain)
    with timer("classify"):
        res = cl.classify(prof, tol)
    out = dict(res.to_dict(), time_dependent=False, profile=prof.summary())
    return out, prof, res


def cmd_classify(spec, args, timer):
    tol = _opt_float(spec, "tol", cl.DEFAULT_TOL)
    out, _, _ = _classify(spec, timer, tol)
    report = {"classification": out}
    expect = args.expect or spec.options.get("expect")
    code = EXIT_OK
    if expect:
        met = out["variant"] == expect
        report["expectation"] = {"expected": expect, "met": met}
        if not met:
            code = EXIT_NEGATIVE
    return report, code


def _samples(u, spec):
    xs, ts = _sample_grid(spec.domain, 7, 4)
    X, T = np.meshgrid(xs, ts)
    return {"x": xs, "t": ts, "u": np.asarray(u(X, T))}


def _build_map(spec, args, timer, tol):
    out, state, res = _classify(spec, timer, tol)
    if out["time_dependent"]:
        m, n, q, r, _ = state
        with timer("transform"):
            tm = canonical.build_timedep_map(m, n, q, r, spec.coeffs.env,
                                             spec.domain.t_min, spec.domain.t_max)
        return out, tm, None
    if res.variant == cl.NONE:
        return out, None, None
    target = getattr(args, "target", None) or spec.options.get("target") or (
        canonical.FIRST if res.variant == cl.SIX else canonical.SECOND)
    mob = _mobius(getattr(args, "mobius", None) or spec.options.get("mobius"))
    with timer("transform"):
        hm = canonical.build_heat_map(state, res, mob, C=_opt_float(spec, "c", 1.0), target=target)
    return out, hm, state


def cmd_transform(spec, args, timer):
    tol = _opt_float(spec, "tol", cl.DEFAULT_TOL)
    out, hm, _ = _build_map(spec, args, timer, tol)
    report = {"classification": out}
    if hm is None:
        report["transformation"] = None
        report["message"] = "no point transformation to a canonical form exists"
        return report, EXIT_NEGATIVE
    if isinstance(hm, canonical.TimeDepMap):
        report["transformation"] = dict(hm.summary(), kind="time_dependent",
                                        t_tilde_at_t_max=float(hm.t_tilde(spec.domain.t_max)))
        v, what = (lambda y, T: np.ones(np.broadcast(y, T).shape)), "constant solution of the heat equation"
    else:
        report["transformation"] = dict(hm.summary(), kind="autonomous")
        v, what = canonical_solution(hm)
    with timer("samples"):
        report["pulled_back"] = dict(_samples(hm.pull_back(v), spec), canonical_solution=what)
    return report, EXIT_OK


def _field_text(f):
    d = f.data
    if "tau" in d:
        return {"tau": ed.render(d["tau"].exprs[0]), "rho": ed.render(d["rho"].exprs[0]),
                "sigma": ed.render(d["sigma"].exprs[0])}
    return {}


def cmd_generators(spec, args, timer):
    tol = _opt_float(spec, "tol", cl.DEFAULT_TOL)
    out, state, res = _classify(spec, timer, tol)
    report = {"classification": out}
    xs, ts = _sample_grid(spec.domain)
    if out["time_dependent"]:
        m, n, q, r, tdc = state
        with timer("generators"):
            fields = gen.timedep_basis(tdc, m, n, spec.domain.t_min, spec.domain.t_max)
        with timer("commutators"):
            table, closure = gen.fit_structure(fields, xs, ts)
            jac = table.jacobi_residual()
            det = gen.timedep_determining_residual(fields, tdc, ts)
        ok = closure <= TABLE_TOL and jac <= TABLE_TOL
        report["generators"] = {
            "fields": [{"label": f.label} for f in fields],
            "structure": table.to_dict(),
            "closure_residual": closure, "closure_tolerance": TABLE_TOL,
            "jacobi_residual": jac, "jacobi_tolerance": TABLE_TOL,
            "determining_residual": det, "determining_tolerance": 1e-5,
            "note": "time-dependent structure constants are fitted, not predicted",
            "status": "pass" if ok else "fail"}
        return report, EXIT_OK if ok else EXIT_NUMERIC
    if res.variant == cl.NONE:
        report["generators"] = None
        report["message"] = "only the trivial symmetries exist"
        return report, EXIT_NEGATIVE
    with timer("generators"):
        fields, table, consts = gen.basis(state, res)
    with timer("commutators"):
        check = gen.check_table(fields, table, xs, ts)
        det = gen.determining_residual(fields, consts, ts)
        jac = table.jacobi_residual()
    ok = check["max_scaled_deviation"] <= TABLE_TOL and det <= DETERMINING_TOL and jac <= TABLE_TOL
    report["generators"] = {
        "fields": [dict(label=f.label, **_field_text(f)) for f in fields],
        "expected_table": table.to_dict(),
        "commutator_check": {"max_scaled_deviation": check["max_scaled_deviation"],
                             "worst_pair": check["worst_pair"], "tolerance": TABLE_TOL},
        "determining_residual": det, "determining_tolerance": DETERMINING_TOL,
        "jacobi_residual": jac, "jacobi_tolerance": TABLE_TOL,
        "status": "pass" if ok else "fail"}
    return report, EXIT_OK if ok else EXIT_NUMERIC


def _residual_block(rep: vf.ResidualReport, tol: float) -> dict:
    return dict(rep.to_dict(), tolerance=tol, status="pass" if rep.relative <= tol else "fail")


def cmd_verify(spec, args, timer):
    tol = _opt_float(spec, "residual_tol", RESIDUAL_TOL)
    grid = _verify_grid(spec, args)
    report = {"grid": {"x_min": grid.x_min, "x_max": grid.x_max, "t_min": grid.t_min,
                       "t_max": grid.t_max, "h": grid.h, "nt": grid.nt, "fd_dt": grid.fd_dt}}
    results = {}
    entry_name = args.entry or (None if args.solution else spec.options.get("entry"))
    if entry_name:
        e = catalogue.entry(entry_name)
        overrides = {k: v for k, v in spec.params.items() if k in e.defaults}
        u = e.evaluator(**overrides)
        with timer("residual"):
            rep = vf.residual(spec.coeffs, u, grid)
        block = {"entry": entry_name, "parameters": e.params(**overrides),
                 "residual": _residual_block(rep, tol)}
        if args.evolve:
            with timer("evolve"):
                ev = vf.evolve_compare(spec.coeffs, lambda x: u(x, grid.t_min), u, grid)
            block["evolution"] = dict(ev.to_dict(), t0=grid.t_min, t_end=grid.t_max)
        if args.mass:
            with timer("mass"):
                block["mass"] = {"t": grid.t_max, "x_range": [grid.x_min, grid.x_max],
                                 "value": vf.mass(u, grid.t_max, (grid.x_min, grid.x_max))}
        results["entry"] = block
    if args.solution:
        expr = ed.parse(args.solution)
        f = ed.compile_expr(expr, spec.coeffs.env)
        with timer("residual_solution"):
            rep = vf.residual(spec.coeffs, lambda x, t: f(x, t) * np.ones(np.broadcast(x, t).shape), grid)
        results["solution"] = {"expression": ed.render(expr), "residual": _residual_block(rep, tol)}
    if not results:
        ctol = _opt_float(spec, "tol", cl.DEFAULT_TOL)
        out, hm, _ = _build_map(spec, args, timer, ctol)
        if hm is None:
            report["message"] = "nothing to verify: no transformation and no entry or solution given"
            return report, EXIT_NEGATIVE
        if isinstance(hm, canonical.TimeDepMap):
            v, what = (lambda y, T: np.ones(np.broadcast(y, T).shape)), "constant heat solution"
        else:
            v, what = canonical_solution(hm)
        with timer("residual_transform"):
            rep = vf.residual(spec.coeffs, hm.pull_back(v), grid)
        results["transform"] = {"pulled_back": what, "residual": _residual_block(rep, tol)}
    report["results"] = results
    failed = any(b["residual"]["status"] != "pass" for b in results.values())
    return report, EXIT_NEGATIVE if failed else EXIT_OK


def cmd_catalogue(args):
    if args.action == "list":
        return {"entries": [{"name": n, "description": catalogue.entry(n).description}
                            for n in catalogue.names()]}, EXIT_OK
    if not args.name:
        raise InputError("catalogue show needs an entry name")
    return {"entry": catalogue.entry(args.name).to_dict()}, EXIT_OK


# -- entry point -------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--no-timing", action="store_true", help="omit timings (byte-stable output)")

    p = argparse.ArgumentParser(prog="diffusym", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("classify", parents=[common], help="symmetry classification")
    s.add_argument("spec")
    s.add_argument("--expect", choices=[cl.SIX, cl.FOUR, cl.NONE])
    s = sub.add_parser("transform", parents=[common], help="map to a canonical form")
    s.add_argument("spec")
    s.add_argument("--target", choices=[canonical.FIRST, canonical.SECOND])
    s.add_argument("--mobius", help="Moebius parameters a,b,c,d")
    s = sub.add_parser("generators", parents=[common], help="symmetry generators and brackets")
    s.add_argument("spec")
    s = sub.add_parser("verify", parents=[common], help="residual and evolution checks")
    s.add_argument("spec")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--entry", help="catalogue entry name")
    g.add_argument("--solution", help="closed-form solution expression in x and t")
    s.add_argument("--evolve", action="store_true", help="Crank-Nicolson cross-check (entries)")
    s.add_argument("--mass", action="store_true", help="mass at t_max (entries)")
    s.add_argument("--target", choices=[canonical.FIRST, canonical.SECOND])
    s.add_argument("--mobius", help="Moebius parameters a,b,c,d")
    s = sub.add_parser("catalogue", parents=[common], help="closed-form solution library")
    s.add_argument("action", choices=["list", "show"])
    s.add_argument("name", nargs="?")
    return p


COMMANDS = {"classify": cmd_classify, "transform": cmd_transform,
            "generators": cmd_generators, "verify": cmd_verify}


def _emit(report: dict, args) -> None:
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    timer = Timer()
    report = {"command": args.command}
    try:
        if args.command == "catalogue":
            body, code = cmd_catalogue(args)
        else:
            spec = load_spec(args.spec)
            report["input"] = spec.echo()
            body, code = COMMANDS[args.command](spec, args, timer)
    except InputError as exc:
        print(f"diffusym: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, DiffusymError) as exc:
        print(f"diffusym: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    report.update(body)
    report["exit_code"] = code
    threads = os.environ.get("DIFFUSYM_THREADS")
    if threads is not None:
        report["threads"] = threads
    if not args.no_timing:
        report["timing"] = timer.steps
    try:
        _emit(report, args)
    except OSError as exc:
        print(f"diffusym: cannot write report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return code


def main() -> None:
    sys.exit(run())
