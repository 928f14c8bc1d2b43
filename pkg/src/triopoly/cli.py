"""Command-line front end.

Every option can come from a flag or from a ``key = value`` config file given
with ``--config``; flags win. Whenever a command writes ``--out PATH`` it also
writes ``PATH.cfg`` holding the fully resolved settings, and
``triopoly <command> --config PATH.cfg`` reproduces the output byte for byte.

Exit codes: 0 ok, 1 verification checks failed, 2 usage or configuration
error, 3 catalog integrity failure, 4 runtime failure (orbit escape).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__, analysis, csvio, kernels
from . import polyval as pv
from . import verify as vf
from .criteria import DEFAULT_TOL, schur_cohn_3
from .linearization import e2_charpoly, eigenvalues, spectral_radius
from .model import PARAM_NAMES, Domain, Model, ModelParams, ParameterError, State, equilibria

EXIT_OK, EXIT_CHECKS, EXIT_USAGE, EXIT_INTEGRITY, EXIT_RUNTIME = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


# --- value parsers (shared by flags and config files) --------------------------------------

def _float(text):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise UsageError(f"expected a number, got {text!r}") from None
    return v


def _int(text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise UsageError(f"expected an integer, got {text!r}") from None


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise UsageError(f"expected true or false, got {text!r}")


def _model(text):
    try:
        return Model.parse(text).value
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _domain(text):
    try:
        return Domain.parse(text).value
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _triple(text):
    parts = str(text).split(",")
    if len(parts) != 3:
        raise UsageError(f"expected x,y,z, got {text!r}")
    return tuple(_float(p) for p in parts)


def _axis(text):
    parts = str(text).split(":")
    if len(parts) != 4:
        raise UsageError(f"axis must be NAME:LO:HI:COUNT, got {text!r}")
    name, lo, hi, count = parts
    if name not in PARAM_NAMES:
        raise UsageError(f"axis parameter must be one of {', '.join(PARAM_NAMES)}, got {name!r}")
    ax = analysis.Axis(name, _float(lo), _float(hi), _int(count))
    if ax.count < 2 or not ax.lo < ax.hi:
        raise UsageError(f"axis {text!r} needs LO < HI and COUNT >= 2")
    return ax


def _str(text):
    return str(text)


def _show(v):
    """Config text for a resolved value."""
    if isinstance(v, analysis.Axis):
        return f"{v.name}:{v.lo!r}:{v.hi!r}:{v.count}"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    return v


@dataclass(frozen=True)
class Opt:
    parse: Callable
    default: object
    help: str
    flag: bool = False  # store_true switch


OPTIONS = {
    "model": Opt(_model, "anb", "game: anb (adaptive/naive/gradient) or lnb (LMA/naive/gradient)"),
    "c1": Opt(_float, None, "marginal cost of firm 1"),
    "c2": Opt(_float, None, "marginal cost of firm 2"),
    "c3": Opt(_float, None, "marginal cost of firm 3"),
    "k": Opt(_float, None, "adjustment speed of the gradient firm"),
    "l": Opt(_float, None, "adaptive weight of firm 1 (anb only)"),
    "out": Opt(_str, None, "output file; a PATH.cfg sidecar is written next to it"),
    "threads": Opt(_int, 1, "worker threads; output does not depend on it"),
    "seed": Opt(_int, 0, "seed for randomised checks"),
    "tol": Opt(_float, DEFAULT_TOL, "margin tolerance for stable/unstable verdicts"),
    "catalog": Opt(_str, None, "polynomial catalog file (default: bundled)"),
    "manifest": Opt(_str, None, "catalog manifest file (default: bundled)"),
    "axis1": Opt(_axis, None, "first grid axis NAME:LO:HI:COUNT"),
    "axis2": Opt(_axis, None, "second grid axis NAME:LO:HI:COUNT"),
    "param": Opt(_str, "k", "swept parameter"),
    "lo": Opt(_float, None, "sweep start"),
    "hi": Opt(_float, None, "sweep end"),
    "count": Opt(_int, 200, "number of sweep values"),
    "n_transient": Opt(_int, analysis.N_TRANSIENT, "discarded iterations"),
    "n_keep": Opt(_int, analysis.N_KEEP, "kept iterations"),
    "conv_tol": Opt(_float, analysis.CONV_TOL, "convergence tolerance"),
    "period_tol": Opt(_float, analysis.PERIOD_TOL, "period recurrence tolerance"),
    "p_max": Opt(_int, analysis.P_MAX, "largest period searched"),
    "follow": Opt(_bool, False, "start each sweep value from the previous attractor", flag=True),
    "x0": Opt(_triple, None, "initial state x,y,z (default: E2 + (1e-3, 0, 0))"),
    "domain": Opt(_domain, "positive", "escape policy: positive or defined"),
    "steps": Opt(_int, 1000, "number of iterations"),
    "func": Opt(_str, None, "catalog polynomial name, or s1..s4 for a margin at E2"),
    "refine_tol": Opt(_float, analysis.REFINE_TOL, "bisection tolerance in parameter units"),
    "poly": Opt(_str, None, "catalog polynomial name"),
    "quick": Opt(_bool, False, "10x smaller samples", flag=True),
}

COMMON = ("model", "c1", "c2", "c3", "k", "l", "out", "threads", "seed")
SIM = ("n_transient", "n_keep", "conv_tol", "period_tol", "p_max")
CATALOG = ("catalog", "manifest")

DEFAULT_AXES = {
    "anb": ("c3:0.3:4.0:200", "k:0.01:2.0:200"),
    "lnb": ("c3:0.01:1.2:200", "k:0.1:20.0:200"),
}


# --- helpers ---------------------------------------------------------------------------------

def _params(cfg, exclude=()) -> ModelParams:
    model = Model.parse(cfg["model"])
    need = ["c1", "c2", "c3", "k"] + (["l"] if model is Model.ANB else [])
    missing = [n for n in need if n not in exclude and cfg.get(n) is None]
    if missing:
        raise UsageError(f"missing parameter(s): {', '.join('--' + m for m in missing)}")
    vals = {n: (cfg[n] if cfg.get(n) is not None else 1.0) for n in ("c1", "c2", "c3", "k")}
    l = cfg.get("l")
    return ModelParams(model, **vals, l=0.5 if l is None or model is Model.LNB else l)


def _fixed_for_grid(cfg, axes):
    model = Model.parse(cfg["model"])
    names = [n for n in PARAM_NAMES if n not in {a.name for a in axes}]
    if model is Model.LNB and "l" in names:
        names.remove("l")
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise UsageError(f"missing fixed parameter(s): {', '.join('--' + m for m in missing)}")
    return {n: cfg[n] for n in names}


def _axes(cfg):
    model = Model.parse(cfg["model"]).value
    a1 = cfg.get("axis1") or _axis(DEFAULT_AXES[model][0])
    a2 = cfg.get("axis2") or _axis(DEFAULT_AXES[model][1])
    if a1.name == a2.name:
        raise UsageError("axis1 and axis2 must name different parameters")
    cfg["axis1"], cfg["axis2"] = a1, a2
    return a1, a2


def _catalog(cfg):
    return pv.load_catalog(cfg.get("catalog"), cfg.get("manifest"), verify=True)


def _num(v) -> str:
    return csvio.fmt(float(v))


def _state(s) -> str:
    return "(" + ", ".join(_num(v) for v in s) + ")"


def _complex(z) -> str:
    if z.imag == 0:
        return _num(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{_num(z.real)} {sign} {_num(abs(z.imag))}i"


def _emit_text(cfg, text, out):
    if cfg.get("out"):
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    out.write(text)


# --- commands --------------------------------------------------------------------------------

def cmd_eq(cfg, out):
    p = _params(cfg)
    eq = equilibria(p)
    lines = [f"model      {p.model.value}",
             f"E1         {_state(eq.e1)}",
             f"E2         {_state(eq.e2)}",
             f"interior   {'true' if eq.e2_interior else 'false'}"]
    if eq.e2_interior:
        ev = eigenvalues(e2_charpoly(p))
        lines.append("eigenvalues at E2")
        lines += [f"  {_complex(z)}   |lambda| = {_num(abs(z))}" for z in ev]
    else:
        lines.append("eigenvalues at E2: not computed (E2 has a non-positive coordinate)")
    _emit_text(cfg, "\n".join(lines) + "\n", out)
    return EXIT_OK


def stability_conditions(cat, params: ModelParams):
    """``(name, value, required sign, holds)`` for the model's LS conditions at (c3, k)."""
    region = pv.STABILITY_REGIONS[params.model.value]
    assign = {**region["fixed"], "c3": params.c3, "k": params.k}
    rows = []
    for name, sign in region["conditions"]:
        v = float(pv.evaluate(cat[name], assign))
        rows.append((name, v, sign, sign * v > 0))
    applies = all(abs(getattr(params, n) - v) <= 1e-12 for n, v in region["fixed"].items())
    return rows, applies, region["fixed"]


def cmd_stab(cfg, out):
    p = _params(cfg)
    cat = _catalog(cfg)
    eq = equilibria(p)
    rep = schur_cohn_3(e2_charpoly(p), cfg["tol"])
    lines = [f"model      {p.model.value}",
             f"E2         {_state(eq.e2)}",
             f"interior   {'true' if eq.e2_interior else 'false'}",
             f"verdict    {rep.verdict.value if eq.e2_interior else 'not_interior'}"]
    for i, s in enumerate(rep.margins, 1):
        lines.append(f"s{i}         {_num(s)}")
    lines.append(f"radius     {_num(spectral_radius(e2_charpoly(p)))}")
    rows, applies, fixed = stability_conditions(cat, p)
    where = ", ".join(f"{n}={v:g}" for n, v in fixed.items())
    lines.append(f"LS conditions at ({where}, c3, k)"
                 + ("" if applies else "  [parameters differ from these constants; shown for reference]"))
    for name, v, sign, holds in rows:
        lines.append(f"  {name:<9} {_num(v):>24}  required {'>' if sign > 0 else '<'} 0  "
                     f"{'holds' if holds else 'fails'}")
    all_hold = all(r[3] for r in rows)
    lines.append(f"  {'all conditions hold' if all_hold else 'not all conditions hold'}")
    _emit_text(cfg, "\n".join(lines) + "\n", out)
    return EXIT_OK


def _need_out(cfg):
    if not cfg.get("out"):
        raise UsageError("--out is required for this command")


def cmd_scan(cfg, out):
    _need_out(cfg)
    a1, a2 = _axes(cfg)
    fixed = _fixed_for_grid(cfg, (a1, a2))
    grid = analysis.scan_plane(cfg["model"], fixed, a1, a2, tol=cfg["tol"], threads=cfg["threads"])
    csvio.write_csv(cfg["out"], csvio.SCAN_HEADER, grid.rows())
    counts = ", ".join(f"{c.value} {grid.count(c)}" for c in analysis.CellClass if grid.count(c))
    out.write(f"wrote {a1.count * a2.count} cells to {cfg['out']} ({counts})\n")
    return EXIT_OK


def cmd_bif(cfg, out):
    _need_out(cfg)
    name = cfg["param"]
    if name not in PARAM_NAMES:
        raise UsageError(f"--param must be one of {', '.join(PARAM_NAMES)}")
    if cfg.get("lo") is None or cfg.get("hi") is None:
        raise UsageError("--lo and --hi are required")
    p = _params(cfg, exclude=(name,))
    res = analysis.bifurcation_diagram(
        p, name, cfg["lo"], cfg["hi"], cfg["count"], x0=cfg.get("x0"), follow=cfg["follow"],
        n_transient=cfg["n_transient"], n_keep=cfg["n_keep"], conv_tol=cfg["conv_tol"],
        period_tol=cfg["period_tol"], p_max=cfg["p_max"], threads=cfg["threads"], domain=cfg["domain"])
    csvio.write_csv(cfg["out"], csvio.BIF_HEADER, res.rows())
    esc = sum(r.status is analysis.Status.ESCAPED for r in res.records)
    out.write(f"wrote {cfg['count']} sweep values to {cfg['out']} ({esc} escaped)\n")
    return EXIT_OK


def cmd_orbit(cfg, out):
    _need_out(cfg)
    p = _params(cfg)
    x0 = State(*cfg["x0"]) if cfg.get("x0") else analysis.default_x0(p)
    steps = cfg["steps"]
    if steps < 1:
        raise UsageError("--steps must be at least 1")
    buf = np.full((steps, 3), np.nan)
    esc, coord, value = kernels.run_orbit(*p.kernel_args(), *x0, 0, steps, buf, Domain.parse(cfg["domain"]).code)
    done = steps if esc < 0 else esc - 1
    rows = [(0, *map(float, x0))] + [(t + 1, *map(float, buf[t])) for t in range(done)]
    csvio.write_csv(cfg["out"], csvio.ORBIT_HEADER, rows)
    if esc >= 0:
        raise analysis.OrbitEscaped(int(esc))
    out.write(f"wrote {steps + 1} states to {cfg['out']}\n")
    return EXIT_OK


def _grid_function(cfg, name, a1, a2):
    """Vectorised f(p1, p2) for a catalog polynomial or a margin ``s1..s4``."""
    if name in ("s1", "s2", "s3", "s4"):
        fixed = _fixed_for_grid(cfg, (a1, a2))
        model = cfg["model"]
        idx = int(name[1]) - 1

        def margin(u, v):
            vals = dict(fixed)
            vals.setdefault("l", math.nan)
            vals[a1.name], vals[a2.name] = u, v
            return analysis.e2_margins(model, vals["c1"], vals["c2"], vals["c3"], vals["k"], vals["l"])[idx]
        return margin
    cat = _catalog(cfg)
    if name not in cat:
        raise UsageError(f"unknown polynomial {name!r}; choose from {', '.join(pv.CATALOG_NAMES)} or s1..s4")
    poly = cat[name]
    fixed = {n: cfg[n] for n in poly.variables if n not in (a1.name, a2.name) and cfg.get(n) is not None}
    missing = [n for n in poly.variables if n not in (a1.name, a2.name) and n not in fixed]
    if missing:
        raise UsageError(f"{name} needs fixed value(s) for {', '.join('--' + m for m in missing)}")

    def f(u, v):
        return pv.evaluate(poly, {**fixed, a1.name: u, a2.name: v})
    return f


def cmd_curve(cfg, out):
    _need_out(cfg)
    if not cfg.get("func"):
        raise UsageError("--func is required")
    a1, a2 = _axes(cfg)
    f = _grid_function(cfg, cfg["func"], a1, a2)
    curves = analysis.trace_zero_curve(f, ((a1.lo, a1.hi), (a2.lo, a2.hi)), (a1.count, a2.count),
                                       cfg["refine_tol"])
    rows = [(cid, i, float(p[0]), float(p[1])) for cid, c in enumerate(curves) for i, p in enumerate(c)]
    csvio.write_csv(cfg["out"], csvio.CURVE_HEADER, rows)
    out.write(f"wrote {len(curves)} polyline(s), {len(rows)} points to {cfg['out']}\n")
    return EXIT_OK


def cmd_surface(cfg, out):
    _need_out(cfg)
    if not cfg.get("poly"):
        raise UsageError("--poly is required")
    a1, a2 = _axes(cfg)
    f = _grid_function(cfg, cfg["poly"], a1, a2)
    g1, g2 = np.meshgrid(a1.values, a2.values, indexing="ij")
    vals = np.broadcast_to(np.asarray(f(g1, g2), dtype=np.float64), g1.shape)
    rows = ((float(g1[i, j]), float(g2[i, j]), float(vals[i, j]))
            for i in range(a1.count) for j in range(a2.count))
    csvio.write_csv(cfg["out"], csvio.SURFACE_HEADER, rows)
    out.write(f"wrote {a1.count * a2.count} values to {cfg['out']}\n")
    return EXIT_OK


def cmd_verify(cfg, out):
    results = vf.run_all(quick=cfg["quick"], seed=cfg["seed"], catalog_path=cfg.get("catalog"),
                         manifest_path=cfg.get("manifest"), threads=cfg["threads"])
    mode = "quick" if cfg["quick"] else "full"
    text = vf.format_report(results, header=f"triopoly {__version__} verify ({mode}, seed {cfg['seed']})")
    _emit_text(cfg, text, out)
    return EXIT_OK if vf.all_passed(results) else EXIT_CHECKS


@dataclass(frozen=True)
class Command:
    run: Callable
    options: tuple
    help: str


COMMANDS = {
    "eq": Command(cmd_eq, COMMON, "equilibria and eigenvalues at E2"),
    "stab": Command(cmd_stab, COMMON + ("tol",) + CATALOG, "Schur-Cohn report and LS sign conditions at E2"),
    "scan": Command(cmd_scan, COMMON + ("axis1", "axis2", "tol"), "classify a two-parameter grid (CSV)"),
    "bif": Command(cmd_bif, COMMON + ("param", "lo", "hi", "count", "follow", "x0", "domain") + SIM,
                   "bifurcation diagram over one parameter (CSV)"),
    "orbit": Command(cmd_orbit, COMMON + ("steps", "x0", "domain"), "single trajectory (CSV)"),
    "curve": Command(cmd_curve, COMMON + ("func", "axis1", "axis2", "refine_tol") + CATALOG,
                     "zero curves of a polynomial or margin (CSV)"),
    "surface": Command(cmd_surface, COMMON + ("poly", "axis1", "axis2") + CATALOG,
                       "evaluate a catalog polynomial on a grid (CSV)"),
    "verify": Command(cmd_verify, ("out", "threads", "seed", "quick") + CATALOG,
                      "cross-validation suite; prints a pass/fail table"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triopoly", description="Stability and bifurcation toolkit "
                                     "for heterogeneous triopoly games with isoelastic demand.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, cmd in COMMANDS.items():
        sp = sub.add_parser(name, help=cmd.help, description=cmd.help)
        sp.add_argument("--config", metavar="FILE", help="key = value file; flags override it")
        for key in cmd.options:
            opt = OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            extra = f" (default: {_show(opt.default)})" if opt.default not in (None, False) else ""
            if opt.flag:
                sp.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=opt.help)
            else:
                sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar=key.upper(),
                                help=opt.help + extra)
    return parser


def resolve(command: str, given: dict, config_path=None) -> dict:
    """Defaults, then config file, then flags; every value parsed and checked."""
    cmd = COMMANDS[command]
    cfg = {k: OPTIONS[k].default for k in cmd.options}
    if config_path:
        file_values = csvio.read_config(config_path)
        file_cmd = file_values.pop("command", command)
        if file_cmd != command:
            raise UsageError(f"config {config_path} is for command {file_cmd!r}, not {command!r}")
        unknown = sorted(set(file_values) - set(cmd.options))
        if unknown:
            raise UsageError(f"config {config_path}: unknown key(s) for {command}: {', '.join(unknown)}")
        for k, v in file_values.items():
            cfg[k] = OPTIONS[k].parse(v)
    for k, v in given.items():
        cfg[k] = OPTIONS[k].parse(v)
    if "threads" in cfg and cfg["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return cfg


def sidecar_values(command: str, cfg: dict) -> dict:
    vals = {"command": command}
    for k, v in cfg.items():
        if v is not None:
            vals[k] = _show(v)
    return vals


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    command = ns.command
    try:
        cfg = resolve(command, given, ns.config)
        code = COMMANDS[command].run(cfg, sys.stdout)
        if cfg.get("out"):
            csvio.write_config(cfg["out"] + ".cfg", sidecar_values(command, cfg))
        return code
    except pv.CatalogIntegrityError as exc:
        print(f"triopoly: catalog integrity failure in {exc.name}: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except analysis.OrbitEscaped as exc:
        print(f"triopoly: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, csvio.ConfigError, ParameterError) as exc:
        print(f"triopoly: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"triopoly: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"triopoly: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
