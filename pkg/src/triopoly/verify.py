"""Cross-validation of the numeric pipeline against the boundary-polynomial catalog.

Every check returns a :class:`CheckResult`; :func:`run_all` strings them into a
report. Apart from the explicit ``seed`` nothing is random, and nothing in the
report depends on wall-clock time, so two runs with the same settings produce
byte-identical text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import polyval as pv
from .analysis import Axis, CellClass, Status, margin_roots_in_k, scan_plane, sign_change_roots, simulate_many
from .analysis import e2_margins, stability_boundary_k
from .linearization import e2_charpoly, eigenvalues
from .model import Model, ModelParams, is_interior
from .polyval import STABILITY_REGIONS

# (c3, k) windows of the two stability regions; k grids start one step above 0
WINDOWS = {
    "anb": ((0.3, 4.0), (0.0, 2.0)),
    "lnb": ((0.01, 1.2), (0.0, 20.0)),
}
# interior range of c3 at each region's fixed costs, where the boundary curves live
INTERIOR_C3 = {"anb": (0.47, 3.73), "lnb": (0.05, 1.05)}
MARGIN_FLOOR = 1e-6
ROOT_TOL = 1e-8
IDENTICAL_COST_TOL = 1e-6
COINCIDE_TOL = 1e-9
EIGEN_TOL = 1e-6
TRANSVERSE_FLOOR = 1e-9
SIM_TRANSIENT = 20000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class BoundaryPoint:
    model: str
    kind: str  # "flip" or "ns"
    c3: float
    k: float
    borders_stable: bool = True  # the three other margins are positive here


def k_axis(hi: float, count: int) -> Axis:
    """``count`` points covering ``(0, hi]``."""
    return Axis("k", hi / count, hi, count)


def region_grid(model: str, size: int, window=None):
    (c_lo, c_hi), (_, k_hi) = window or WINDOWS[model]
    return Axis("c3", c_lo, c_hi, size), k_axis(k_hi, size)


def _fixed(model):
    return dict(STABILITY_REGIONS[model]["fixed"])


def _point(model, c3, k):
    return ModelParams(model, c3=c3, k=k, **_fixed(model))


# --- catalog-level checks -----------------------------------------------------------------

def check_manifest(cat_path=None, manifest_path=None) -> tuple:
    """Load and verify the catalog. Raises CatalogIntegrityError on mismatch."""
    cat = pv.load_catalog(cat_path, manifest_path, verify=True)
    return cat, CheckResult("catalog manifest", True, f"{len(cat)} polynomials match term counts, degrees, checksums")


def check_reductions(cat, n, seed) -> list:
    out = []
    for rep in pv.reduce_check_identical_costs(cat, n=n, seed=seed, strict=False):
        out.append(CheckResult(rep.name, rep.passed, f"{rep.points} points, max rel dev {rep.max_deviation:.3e}"))
    return out


def check_proportionality(cat, n, seed) -> list:
    out = []
    for surface, factor, region in pv.PROPORTIONALITY_STATEMENTS:
        rep = pv.proportionality_check(surface, factor, region, cat, n=n, seed=seed,
                                       window=WINDOWS[region], strict=False)
        out.append(CheckResult(rep.name, rep.passed,
                               f"{rep.points} points, ratio {rep.constant:.6e}, spread {rep.max_deviation:.3e}"))
    return out


# --- stability regions ---------------------------------------------------------------------

def region_agreement(model: str, axis1: Axis, axis2: Axis, cat, floor=MARGIN_FLOOR, threads=1):
    """Compare Schur-Cohn stability at E2 with the region's LS sign pattern.

    Returns ``(compared, mismatches, skipped)``. Cells whose E2 is not interior
    or whose smallest |margin| is within ``floor`` of zero are skipped.
    """
    grid = scan_plane(model, _fixed(model), axis1, axis2, threads=threads)
    c3, k = np.meshgrid(axis1.values, axis2.values, indexing="ij")
    assign = {"c3": c3, "k": k, **_fixed(model)}
    ls_stable = np.ones(c3.shape, dtype=bool)
    for name, sign in STABILITY_REGIONS[model]["conditions"]:
        ls_stable &= sign * pv.evaluate(cat[name], assign) > 0
    numeric_stable = grid.mask(CellClass.STABLE)
    usable = grid.interior & (np.min(np.abs(grid.margins), axis=-1) > floor)
    mismatch = usable & (ls_stable != numeric_stable)
    return int(usable.sum()), int(mismatch.sum()), int((~usable).sum())


def check_region(model, label, size, cat, window=None, threads=1) -> CheckResult:
    a1, a2 = region_grid(model, size, window)
    compared, bad, skipped = region_agreement(model, a1, a2, cat, threads=threads)
    win = f"c3 [{a1.lo:g}, {a1.hi:g}] x k (0, {a2.hi:g}]"
    return CheckResult(label, bad == 0 and compared > 0,
                       f"{size}x{size} on {win}: {compared} compared, {bad} mismatches, {skipped} skipped")


def identical_cost_boundaries(ls=(0.0, 1 / 3, 2 / 3, 1.0), cs=(0.5, 1.0, 2.0, 4.0)):
    """Numeric vs closed-form stability boundary in k for identical costs.

    Yields ``(model, l, c, numeric, closed_form)``.
    """
    for l in ls:
        for c in cs:
            exact = (192 - 102 * l) / ((68 - 33 * l) * c)
            num = stability_boundary_k(ModelParams("anb", c, c, c, 1.0, l), exact * 1e-3, 2 * exact)
            yield "anb", l, c, num, exact
    for c in cs:
        exact = 62 / (23 * c)
        num = stability_boundary_k(ModelParams("lnb", c, c, c, 1.0), exact * 1e-3, 2 * exact)
        yield "lnb", math.nan, c, num, exact


def check_identical_cost() -> list:
    rows = list(identical_cost_boundaries())
    worst = max(abs(num - exact) for *_, num, exact in rows)
    anb = {c: num for m, l, c, num, _ in rows if m == "anb" and abs(l - 2 / 3) < 1e-12}
    lnb = {c: num for m, _, c, num, _ in rows if m == "lnb"}
    gap = max(abs(anb[c] - lnb[c]) for c in lnb)
    return [
        CheckResult("identical-cost boundary", worst <= IDENTICAL_COST_TOL,
                    f"{len(rows)} (model, l, c) cases, max |k_num - k_closed| {worst:.3e}"),
        CheckResult("identical-cost l=2/3 coincidence", gap <= COINCIDE_TOL,
                    f"max |k_anb - k_lnb| {gap:.3e} over {len(lnb)} costs"),
    ]


# --- boundary zero sets ---------------------------------------------------------------------

def _poly_line(cat, name, model, c3):
    p = cat[name]
    fixed = {**_fixed(model), "c3": c3}
    return lambda k: pv.evaluate(p, {**fixed, "k": k})


def zero_set_agreement(model: str, kind: str, lines: int, cat, samples=400):
    """k-roots of a numeric margin vs catalog polynomials along vertical lines.

    ``kind`` is ``"flip"`` (margin s2 vs LS_3 and PD) or ``"ns"`` (margin s4 vs
    LS_4 and NS). Returns ``(max_gap, count_mismatches, points)`` where
    ``points`` are the numeric roots as :class:`BoundaryPoint` records.
    """
    m = model.upper()
    margin, names = (2, (f"LS_{m}_3", f"PD_{m}")) if kind == "flip" else (4, (f"LS_{m}_4", f"NS_{m}"))
    lo, hi = INTERIOR_C3[model]
    pad = 1e-3 * (hi - lo)
    k_hi = WINDOWS[model][1][1]
    k_lo = k_hi / 400
    gap, count_bad, points = 0.0, 0, []
    for c3 in np.linspace(lo + pad, hi - pad, lines):
        c3 = float(c3)
        numeric = margin_roots_in_k(model, {**_fixed(model), "c3": c3}, margin, k_lo, k_hi, samples)
        for k in numeric:
            s = e2_margins(model, c3=c3, k=k, **_fixed(model))
            others = [v for i, v in enumerate(s) if i != margin - 1]
            points.append(BoundaryPoint(model, kind, c3, k, bool(min(others) > 0)))
        for name in names:
            ref = sign_change_roots(_poly_line(cat, name, model, c3), k_lo, k_hi, samples)
            if len(ref) != len(numeric):
                count_bad += 1
                continue
            if ref:
                gap = max(gap, float(np.max(np.abs(np.array(ref) - np.array(numeric)))))
    return gap, count_bad, points


def check_zero_sets(cat, lines) -> tuple:
    results, points = [], []
    for model in ("anb", "lnb"):
        for kind in ("flip", "ns"):
            gap, bad, pts = zero_set_agreement(model, kind, lines, cat)
            points.extend(pts)
            what = "s2 vs LS_3/PD" if kind == "flip" else "s4 vs LS_4/NS"
            results.append(CheckResult(
                f"zero sets {model} {kind}", bad == 0 and gap <= ROOT_TOL and len(pts) > 0,
                f"{what}: {lines} lines, {len(pts)} roots, max gap {gap:.3e}, count mismatches {bad}"))
    return results, points


def _spread(points, n):
    if len(points) <= n:
        return list(points)
    idx = np.linspace(0, len(points) - 1, n).round().astype(int)
    return [points[i] for i in idx]


def eigen_signature(p: BoundaryPoint) -> float:
    """|lambda + 1| for flip points, ||lambda| - 1| of the complex pair for NS points."""
    ev = eigenvalues(e2_charpoly(_point(p.model, p.c3, p.k)))
    if p.kind == "flip":
        return float(np.min(np.abs(ev + 1.0)))
    pair = [v for v in ev if abs(v.imag) > 0]
    if not pair:
        return math.inf
    return float(min(abs(abs(v) - 1.0) for v in pair))


def check_eigen_signatures(points, per_kind) -> list:
    """Eigenvalue structure at roots that border the stable region.

    A zero of s4 with some other margin negative can be a neutral saddle (two
    real eigenvalues with product 1) rather than a pair on the unit circle, so
    only roots with the other three margins positive are used.
    """
    points = [p for p in points if p.borders_stable]
    out = []
    for kind, label in (("flip", "eigenvalue -1 at flip points"), ("ns", "unit-modulus pair at NS points")):
        chosen = []
        for model in ("anb", "lnb"):
            chosen += _spread([p for p in points if p.kind == kind and p.model == model], per_kind)
        worst = max((eigen_signature(p) for p in chosen), default=math.inf)
        out.append(CheckResult(label, len(chosen) > 0 and worst < EIGEN_TOL,
                               f"{len(chosen)} points, worst {worst:.3e}"))
    return out


def transversality_names(model: str, kind: str) -> list:
    prefix = ("PT_" if kind == "flip" else "NT_") + model.upper() + "_"
    return [n for n in pv.CATALOG_NAMES if n.startswith(prefix)]


def check_transversality(cat, points) -> CheckResult:
    smallest, where, evaluated = math.inf, None, 0
    for p in points:
        assign = {**_fixed(p.model), "c3": p.c3, "k": p.k}
        if p.model == "lnb":
            assign.setdefault("l", 0.0)
        for name in transversality_names(p.model, p.kind):
            v = abs(pv.evaluate(cat[name], assign))
            evaluated += 1
            if v < smallest:
                smallest, where = v, (name, p.c3, p.k)
    detail = f"{evaluated} evaluations at {len(points)} boundary points, min |value| {smallest:.3e}"
    if where:
        detail += f" ({where[0]} at c3={where[1]:.6g}, k={where[2]:.6g})"
    return CheckResult("transversality non-vanishing", evaluated > 0 and smallest > TRANSVERSE_FLOOR, detail)


# --- simulation consistency -------------------------------------------------------------

def check_simulation(size, n_cells, seed) -> list:
    """Stable cells converge; cells just past the flip boundary settle on a 2-cycle.

    Stable cells are drawn at random. Flip-side cells are those whose lower k
    neighbour is stable; all of them are simulated and the outcome breakdown is
    reported. The flip check passes when at least ``n_cells`` of them are
    Periodic(2): parts of the flip curves lose the orbit instead (escape), so a
    blanket requirement would be false for the maps themselves.
    """
    rng = np.random.default_rng(seed)
    out = []
    for model in ("anb", "lnb"):
        a1, a2 = region_grid(model, size)
        grid = scan_plane(model, _fixed(model), a1, a2)
        stable = np.argwhere(grid.mask(CellClass.STABLE))
        picks = stable[rng.choice(len(stable), min(n_cells, len(stable)), replace=False)] if len(stable) else []
        recs = simulate_many([_point(model, a1.values[i], a2.values[j]) for i, j in picks],
                             n_transient=SIM_TRANSIENT)
        bad = sum(rec.status is not Status.CONVERGED for rec in recs)
        out.append(CheckResult(f"simulation {model} stable cells", len(picks) >= n_cells and bad == 0,
                               f"{len(picks)} random stable cells, {bad} not converged"))

        flip = grid.mask(CellClass.UNSTABLE_FLIP)
        near = np.argwhere(flip[:, 1:] & grid.mask(CellClass.STABLE)[:, :-1])
        outcomes = {}
        recs = simulate_many([_point(model, a1.values[i], a2.values[j + 1]) for i, j in near],
                             n_transient=SIM_TRANSIENT)
        for rec in recs:
            key = rec.status.value + (f"({rec.period})" if rec.period else "")
            outcomes[key] = outcomes.get(key, 0) + 1
        two = outcomes.get("periodic(2)", 0)
        breakdown = ", ".join(f"{k} {v}" for k, v in sorted(outcomes.items()))
        out.append(CheckResult(f"simulation {model} past flip", two >= n_cells,
                               f"{len(near)} cells next to the boundary: {breakdown or 'none'}"))
    return out


# --- driver --------------------------------------------------------------------------------

@dataclass(frozen=True)
class Settings:
    grid: int
    points: int
    lines: int
    eigen_points: int
    sim_cells: int

    @classmethod
    def full(cls):
        return cls(grid=200, points=100, lines=100, eigen_points=20, sim_cells=50)

    @classmethod
    def quick(cls):
        return cls(grid=20, points=10, lines=10, eigen_points=2, sim_cells=5)


def run_all(quick=False, seed=0, catalog_path=None, manifest_path=None, threads=1,
            progress: Callable[[str], None] | None = None) -> list:
    """Run every check; raises CatalogIntegrityError before anything else on a bad catalog."""
    s = Settings.quick() if quick else Settings.full()
    note = progress or (lambda _msg: None)
    cat, first = check_manifest(catalog_path, manifest_path)
    results = [first]
    note("reductions")
    results += check_reductions(cat, s.points, seed)
    note("proportionality")
    results += check_proportionality(cat, s.points, seed)
    note("stability regions")
    results.append(check_region("anb", "stability region anb", s.grid, cat, threads=threads))
    results.append(check_region("lnb", "stability region lnb", s.grid, cat, threads=threads))
    results.append(check_region("lnb", "stability region lnb (anb window)", s.grid, cat,
                                 window=WINDOWS["anb"], threads=threads))
    results += check_identical_cost()
    note("zero sets")
    zs, points = check_zero_sets(cat, s.lines)
    results += zs
    results += check_eigen_signatures(points, s.eigen_points)
    results.append(check_transversality(cat, points))
    note("simulation")
    results += check_simulation(s.grid, s.sim_cells, seed)
    return results


def format_report(results, header: str = "") -> str:
    width = max(len(r.name) for r in results)
    lines = [header] if header else []
    lines.append(f"{'check':<{width}}  result  detail")
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"


def all_passed(results) -> bool:
    return all(r.passed for r in results)


__all__ = [
    "CheckResult", "BoundaryPoint", "Settings", "WINDOWS", "run_all", "format_report", "all_passed",
    "region_agreement", "zero_set_agreement", "identical_cost_boundaries", "eigen_signature",
    "transversality_names", "region_grid", "k_axis", "is_interior", "Model",
]
