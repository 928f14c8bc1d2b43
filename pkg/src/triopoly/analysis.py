"""Orbit simulation, bifurcation sweeps, parameter-plane scans and boundary tracing."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .criteria import DEFAULT_TOL, margins
from .linearization import e2_coefficients
from .model import PARAM_NAMES, Domain, Model, ModelParams, State, e2_arrays, equilibria, is_interior

N_TRANSIENT = 2000
N_KEEP = 256
CONV_TOL = 1e-10
PERIOD_TOL = 1e-7
P_MAX = 32
REFINE_TOL = 1e-10
X0_OFFSET = (1e-3, 0.0, 0.0)


class Status(str, Enum):
    CONVERGED = "converged"
    PERIODIC = "periodic"
    BOUNDED = "bounded"
    ESCAPED = "escaped"


class OrbitEscaped(ArithmeticError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"orbit left the domain at step {step}")


@dataclass
class OrbitRecord:
    samples: np.ndarray
    n_transient: int
    total_iterations: int
    status: Status
    period: int | None = None
    converged_to: State | None = None
    escape_step: int | None = None
    escape_coordinate: int | None = None
    escape_value: float | None = None

    def __repr__(self):
        extra = ""
        if self.status is Status.PERIODIC:
            extra = f", period={self.period}"
        elif self.status is Status.ESCAPED:
            extra = f", escape_step={self.escape_step}"
        return f"OrbitRecord(status={self.status.value}{extra}, kept={len(self.samples)})"


def default_x0(params: ModelParams) -> State:
    e2 = equilibria(params).e2
    return State(*(a + b for a, b in zip(e2, X0_OFFSET)))


def classify_samples(samples, conv_tol=CONV_TOL, period_tol=PERIOD_TOL, p_max=P_MAX):
    """Status, period and limit point of a kept window (rows are states)."""
    n = len(samples)
    if n >= 2 and np.max(np.abs(samples[-1] - samples[-2])) < conv_tol:
        return Status.CONVERGED, None, State(*samples[-1])
    for p in range(1, min(p_max, n - 1) + 1):
        if np.max(np.abs(samples[p:] - samples[:-p])) < period_tol:
            return Status.PERIODIC, p, None
    return Status.BOUNDED, None, None


def _record(samples, esc, coord, value, n_transient, n_keep, conv_tol, period_tol, p_max):
    total = n_transient + n_keep
    if esc >= 0:
        return OrbitRecord(samples[: max(0, esc - 1 - n_transient)], n_transient, int(esc),
                           Status.ESCAPED, escape_step=int(esc), escape_coordinate=int(coord),
                           escape_value=float(value))
    status, period, limit = classify_samples(samples, conv_tol, period_tol, p_max)
    return OrbitRecord(samples, n_transient, total, status, period=period, converged_to=limit)


def simulate(params: ModelParams, x0=None, n_transient=N_TRANSIENT, n_keep=N_KEEP,
             conv_tol=CONV_TOL, period_tol=PERIOD_TOL, p_max=P_MAX,
             domain=Domain.POSITIVE) -> OrbitRecord:
    """Iterate the map, drop the transient and classify the kept window.

    Precedence: escaped, then converged, then periodic, then bounded.
    ``domain`` selects the escape policy (see :class:`~triopoly.model.Domain`).
    """
    return simulate_many([params], None if x0 is None else [x0], n_transient, n_keep,
                         conv_tol, period_tol, p_max, domain)[0]


def simulate_many(points: Sequence[ModelParams], x0s=None, n_transient=N_TRANSIENT, n_keep=N_KEEP,
                  conv_tol=CONV_TOL, period_tol=PERIOD_TOL, p_max=P_MAX,
                  domain=Domain.POSITIVE) -> list:
    """:func:`simulate` for many parameter points of one model in a single kernel call."""
    domain = Domain.parse(domain)
    if n_transient < 1 or n_keep < 1:
        raise ValueError("n_transient and n_keep must be at least 1")
    if not points:
        return []
    models = {p.model for p in points}
    if len(models) != 1:
        raise ValueError("simulate_many needs points of a single model")
    if x0s is None:
        starts = [default_x0(p) for p in points]
    else:
        if len(x0s) != len(points):
            raise ValueError("need one initial state per parameter point")
        starts = [State(*(float(v) for v in x0)) for x0 in x0s]
    for x0 in starts:
        if min(x0) < 0 or sum(x0) <= 0 or not all(math.isfinite(v) for v in x0):
            raise ValueError(f"invalid initial state {tuple(x0)}")
    rows = np.array([p.as_row() for p in points])
    out = kernels.run_orbits(models.pop().code, rows, np.array(starts, dtype=np.float64),
                             n_transient, n_keep, domain.code)
    return [_record(*(a[i] for a in out), n_transient, n_keep, conv_tol, period_tol, p_max)
            for i in range(len(points))]


def _chunks(n, parts):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(parts)]


@dataclass
class BifurcationResult:
    parameter: str
    values: np.ndarray
    records: list

    def rows(self):
        """``(sweep_value, sample_index, x, y, z, status, period)`` tuples."""
        for v, rec in zip(self.values, self.records):
            period = rec.period if rec.period is not None else (1 if rec.status is Status.CONVERGED else 0)
            if rec.status is Status.ESCAPED:
                yield (float(v), -1, math.nan, math.nan, math.nan, rec.status.value, 0)
                continue
            for i, (x, y, z) in enumerate(rec.samples):
                yield (float(v), i, float(x), float(y), float(z), rec.status.value, period)

    def branch_counts(self, tol=1e-6):
        """Number of distinct x-values per sweep value (escaped points give 0)."""
        counts = []
        for rec in self.records:
            if rec.status is Status.ESCAPED:
                counts.append(0)
            elif rec.status is Status.CONVERGED:
                counts.append(1)
            else:
                xs = np.sort(rec.samples[:, 0])
                counts.append(int(1 + np.sum(np.diff(xs) > tol)))
        return counts


def bifurcation_diagram(template: ModelParams, parameter: str, lo: float, hi: float, count: int,
                        x0=None, follow=False, n_transient=N_TRANSIENT, n_keep=N_KEEP,
                        conv_tol=CONV_TOL, period_tol=PERIOD_TOL, p_max=P_MAX,
                        threads=1, domain=Domain.POSITIVE) -> BifurcationResult:
    """Attractor samples across a one-parameter sweep.

    By default every sweep value starts afresh from ``x0`` (E2 of that
    parameter point plus a small offset when ``x0`` is None). With
    ``follow=True`` each value starts from the last kept state of the previous
    one, falling back to the fresh start after an escape.
    """
    if parameter not in PARAM_NAMES:
        raise ValueError(f"cannot sweep {parameter!r}; choose one of {', '.join(PARAM_NAMES)}")
    if count < 1:
        raise ValueError("count must be positive")
    dcode = Domain.parse(domain).code
    values = np.linspace(lo, hi, count)
    points = [template.replace(**{parameter: float(v)}) for v in values]
    starts = [default_x0(p) if x0 is None else State(*map(float, x0)) for p in points]
    code = template.model.code
    settings = (n_transient, n_keep, conv_tol, period_tol, p_max)
    records = [None] * count
    if follow:
        prev = None
        for i, p in enumerate(points):
            start = starts[i] if prev is None else prev
            out = kernels.run_orbits(code, p.as_row()[None, :], np.array([start]), n_transient, n_keep, dcode)
            rec = _record(*(a[0] for a in out), *settings)
            records[i] = rec
            prev = None if rec.status is Status.ESCAPED else State(*rec.samples[-1])
        return BifurcationResult(parameter, values, records)

    rows = np.array([p.as_row() for p in points])
    x0s = np.array(starts, dtype=np.float64)

    def work(span):
        a, b = span
        out = kernels.run_orbits(code, rows[a:b], x0s[a:b], n_transient, n_keep, dcode)
        return a, [_record(*(arr[i] for arr in out), *settings) for i in range(b - a)]

    spans = _chunks(count, threads)
    if len(spans) == 1:
        results = [work(spans[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            results = list(pool.map(work, spans))
    for a, recs in results:
        records[a:a + len(recs)] = recs
    return BifurcationResult(parameter, values, records)


class CellClass(str, Enum):
    STABLE = "stable"
    UNSTABLE_FLIP = "unstable_flip"
    UNSTABLE_NS = "unstable_ns"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"
    NOT_INTERIOR = "not_interior"


_CLASS_ORDER = list(CellClass)


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    @property
    def values(self):
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class ScanGrid:
    model: Model
    fixed: dict
    axis1: Axis
    axis2: Axis
    codes: np.ndarray          # (n1, n2) index into CellClass
    margins: np.ndarray        # (n1, n2, 4)
    interior: np.ndarray       # (n1, n2) bool
    tol: float = DEFAULT_TOL
    flip_flag: np.ndarray = field(default=None)
    ns_flag: np.ndarray = field(default=None)

    def classes(self):
        return np.array([[_CLASS_ORDER[c] for c in row] for row in self.codes], dtype=object)

    def count(self, cls: CellClass) -> int:
        return int(np.sum(self.codes == _CLASS_ORDER.index(cls)))

    def mask(self, cls: CellClass):
        return self.codes == _CLASS_ORDER.index(cls)

    def rows(self):
        """``(p1, p2, class, s1, s2, s3, s4, interior)`` tuples, axis1-major."""
        v1, v2 = self.axis1.values, self.axis2.values
        for i in range(len(v1)):
            for j in range(len(v2)):
                s = self.margins[i, j]
                yield (float(v1[i]), float(v2[j]), _CLASS_ORDER[self.codes[i, j]].value,
                       float(s[0]), float(s[1]), float(s[2]), float(s[3]), bool(self.interior[i, j]))


def classify_cells(s1, s2, s3, s4, interior, tol=DEFAULT_TOL):
    """Vectorised cell labels as indices into :class:`CellClass`."""
    s = np.stack([s1, s2, s3, s4])
    codes = np.full(np.shape(s1), _CLASS_ORDER.index(CellClass.UNSTABLE), dtype=np.int8)
    stable = np.all(s > tol, axis=0)
    marginal = ~stable & ~np.any(s < -tol, axis=0)
    flip = (s2 <= -tol) & (s4 > tol)
    ns = (s4 <= -tol) & (s2 > tol)
    codes[flip] = _CLASS_ORDER.index(CellClass.UNSTABLE_FLIP)
    codes[ns] = _CLASS_ORDER.index(CellClass.UNSTABLE_NS)
    codes[marginal] = _CLASS_ORDER.index(CellClass.MARGINAL)
    codes[stable] = _CLASS_ORDER.index(CellClass.STABLE)
    codes[~interior] = _CLASS_ORDER.index(CellClass.NOT_INTERIOR)
    return codes


def _param_arrays(fixed, axis1, axis2, rows=slice(None)):
    v1 = axis1.values[rows]
    v2 = axis2.values
    g1, g2 = np.meshgrid(v1, v2, indexing="ij")
    vals = {name: np.full(g1.shape, float(fixed.get(name, math.nan))) for name in PARAM_NAMES}
    vals[axis1.name] = g1
    vals[axis2.name] = g2
    return vals


def scan_plane(model, fixed: dict, axis1: Axis, axis2: Axis, tol=DEFAULT_TOL, threads=1) -> ScanGrid:
    """Classify every cell of a two-parameter grid by the margins at E2."""
    model = Model.parse(model)
    if axis1.name == axis2.name:
        raise ValueError("scan axes must be two distinct parameters")
    for ax in (axis1, axis2):
        if ax.name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {ax.name!r}")
    needed = [p for p in PARAM_NAMES if p not in (axis1.name, axis2.name)]
    if model is Model.LNB:
        needed.remove("l")
    missing = [p for p in needed if p not in fixed]
    if missing:
        raise ValueError(f"missing fixed parameter(s): {', '.join(missing)}")
    fixed = {p: float(fixed[p]) for p in needed}
    if model is Model.LNB:
        fixed["l"] = math.nan

    def work(span):
        a, b = span
        v = _param_arrays(fixed, axis1, axis2, slice(a, b))
        coeffs = e2_coefficients(model.code, v["c1"], v["c2"], v["c3"], v["k"], v["l"])
        s = margins(*coeffs)
        inside = is_interior(v["c1"], v["c2"], v["c3"])
        return a, np.stack(s, axis=-1), inside

    spans = _chunks(axis1.count, threads)
    if len(spans) == 1:
        parts = [work(spans[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            parts = list(pool.map(work, spans))
    m = np.concatenate([p[1] for p in parts], axis=0)
    interior = np.concatenate([p[2] for p in parts], axis=0)
    s1, s2, s3, s4 = (m[..., i] for i in range(4))
    codes = classify_cells(s1, s2, s3, s4, interior, tol)
    fixed_out = {p: fixed[p] for p in fixed if not (model is Model.LNB and p == "l")}
    return ScanGrid(model, fixed_out, axis1, axis2, codes, m, interior, tol,
                    flip_flag=(s2 <= -tol) & interior, ns_flag=(s4 <= -tol) & interior)


def _eval_grid(f, x, y):
    try:
        out = np.asarray(f(x, y), dtype=np.float64)
        if out.shape == np.broadcast(x, y).shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.vectorize(lambda a, b: float(f(a, b)), otypes=[float])(x, y)


def _bisect_edges(f, pa, pb, fa, refine_tol):
    """Vectorised bisection along segments pa->pb with f(pa) = fa of known sign."""
    pa = pa.copy()
    pb = pb.copy()
    neg_a = fa < 0
    length = np.max(np.abs(pb - pa), axis=1) if len(pa) else np.zeros(0)
    iters = int(np.ceil(np.log2(max(np.max(length, initial=0.0), refine_tol) / refine_tol))) + 1
    for _ in range(iters):
        mid = 0.5 * (pa + pb)
        fm = _eval_grid(f, mid[:, 0], mid[:, 1])
        same = (fm < 0) == neg_a
        pa[same] = mid[same]
        pb[~same] = mid[~same]
    return 0.5 * (pa + pb)


def trace_zero_curve(f: Callable, window, density=(200, 200), refine_tol=REFINE_TOL):
    """Polylines approximating the zero set of ``f(p1, p2)`` inside ``window``.

    Sign changes are located on the edges of a ``density`` grid (values equal
    to zero count as positive), refined by bisection to ``refine_tol`` and
    joined through the grid cells into polylines. Saddle cells with four
    crossings are resolved by the sign at the cell centre. Returns a list of
    ``(m, 2)`` arrays, in a deterministic order.
    """
    (x0, x1), (y0, y1) = window
    nx, ny = density
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = _eval_grid(f, X, Y)
    neg = F < 0

    # edge ids: horizontal (along p1) h[i,j] joins (i,j)-(i+1,j); vertical v[i,j] joins (i,j)-(i,j+1)
    hx = np.argwhere(neg[:-1, :] != neg[1:, :])
    vx = np.argwhere(neg[:, :-1] != neg[:, 1:])
    points = {}
    if len(hx):
        pa = np.stack([xs[hx[:, 0]], ys[hx[:, 1]]], axis=1)
        pb = np.stack([xs[hx[:, 0] + 1], ys[hx[:, 1]]], axis=1)
        for (i, j), p in zip(hx, _bisect_edges(f, pa, pb, F[hx[:, 0], hx[:, 1]], refine_tol)):
            points[("h", int(i), int(j))] = p
    if len(vx):
        pa = np.stack([xs[vx[:, 0]], ys[vx[:, 1]]], axis=1)
        pb = np.stack([xs[vx[:, 0]], ys[vx[:, 1] + 1]], axis=1)
        for (i, j), p in zip(vx, _bisect_edges(f, pa, pb, F[vx[:, 0], vx[:, 1]], refine_tol)):
            points[("v", int(i), int(j))] = p
    if not points:
        return []

    links = {key: [] for key in points}
    cells = set()
    for kind, i, j in points:
        if kind == "h":
            cells.update({(i, j - 1), (i, j)})
        else:
            cells.update({(i - 1, j), (i, j)})
    for i, j in sorted(cells):
        if not (0 <= i < nx - 1 and 0 <= j < ny - 1):
            continue
        # walk the cell boundary counter-clockwise: bottom, right, top, left
        ring = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
        hit = [e for e in ring if e in points]
        if len(hit) == 2:
            pairs = [(hit[0], hit[1])]
        elif len(hit) == 4:
            centre = float(_eval_grid(f, np.array([0.5 * (xs[i] + xs[i + 1])]),
                                      np.array([0.5 * (ys[j] + ys[j + 1])]))[0])
            # corner (i,j) sits between ring[3] and ring[0]
            if (centre < 0) == neg[i, j]:
                pairs = [(ring[0], ring[1]), (ring[2], ring[3])]
            else:
                pairs = [(ring[3], ring[0]), (ring[1], ring[2])]
        else:
            continue
        for a, b in pairs:
            links[a].append(b)
            links[b].append(a)

    curves = []
    seen = set()
    order = sorted(points, key=lambda e: (len(links[e]) != 1, e))
    for start in order:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        cur = start
        while True:
            nxt = [e for e in links[cur] if e not in seen]
            if not nxt:
                break
            cur = nxt[0]
            seen.add(cur)
            chain.append(cur)
        if len(chain) > 2 and start in links[chain[-1]]:
            chain.append(start)
        curves.append(np.array([points[e] for e in chain]))
    return curves


def lyapunov_max(params: ModelParams, x0=None, n=10000, n_transient=N_TRANSIENT, renorm_every=1,
                 domain=Domain.POSITIVE) -> float:
    """Largest Lyapunov exponent from tangent-vector growth along the orbit."""
    if n < 1 or n_transient < 0 or renorm_every < 1:
        raise ValueError("need n >= 1, n_transient >= 0 and renorm_every >= 1")
    x0 = default_x0(params) if x0 is None else State(*(float(v) for v in x0))
    value, esc = kernels.lyapunov_kernel(*params.kernel_args(), *x0, int(n), int(n_transient),
                                         int(renorm_every), Domain.parse(domain).code)
    if esc >= 0:
        raise OrbitEscaped(esc)
    return float(value)


# --- one-dimensional boundary searches -------------------------------------------------

def e2_margins(model, c1, c2, c3, k, l=math.nan):
    """Schur-Cohn margins at E2, elementwise over array arguments."""
    model = Model.parse(model)
    if model is Model.LNB:
        l = math.nan
    return margins(*e2_coefficients(model.code, c1, c2, c3, k, l))


def _eval_line(f, ts):
    try:
        out = np.asarray(f(ts), dtype=np.float64)
        if out.shape == ts.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(t)) for t in ts])


def sign_change_roots(f: Callable, lo: float, hi: float, samples=400, xtol=1e-14) -> list:
    """All roots of ``f`` bracketed by sign changes on a uniform grid.

    ``f`` is sampled on the grid in one vectorised call when it accepts arrays,
    then each bracket is refined with Brent's method.
    """
    ts = np.linspace(lo, hi, samples)
    vals = _eval_line(f, ts)
    roots = []
    for i in range(samples - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(ts[i]))
        elif a * b < 0:
            roots.append(float(brentq(lambda t: float(f(t)), ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    if vals[-1] == 0.0:
        roots.append(float(ts[-1]))
    return roots


def margin_roots_in_k(model, fixed: dict, margin: int, k_lo: float, k_hi: float, samples=400) -> list:
    """k-roots of one margin (1..4) at E2 with the other parameters pinned."""
    c1, c2, c3 = fixed["c1"], fixed["c2"], fixed["c3"]
    l = fixed.get("l", math.nan)
    return sign_change_roots(lambda k: e2_margins(model, c1, c2, c3, k, l)[margin - 1],
                             k_lo, k_hi, samples)


def stability_boundary_k(params: ModelParams, k_lo: float, k_hi: float, tol=DEFAULT_TOL, xtol=1e-13) -> float:
    """Bisect in k between a not-unstable ``k_lo`` and an unstable ``k_hi`` at E2.

    Marginal cells count as not unstable. That keeps the search meaningful at
    ``l = 0``, where the adaptive firm is frozen and one eigenvalue sits at 1.
    """
    def ok(k):
        s = e2_margins(params.model, params.c1, params.c2, params.c3, k, params.l)
        return not any(v < -tol for v in s)

    if not ok(k_lo) or ok(k_hi):
        raise ValueError(f"[{k_lo}, {k_hi}] does not bracket a stability boundary")
    a, b = k_lo, k_hi
    while b - a > xtol:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if ok(m):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def fixed_point_pairs(points: Sequence[ModelParams]):
    """E2 state for each parameter point, as an ``(n, 3)`` array."""
    c = np.array([[p.c1, p.c2, p.c3] for p in points])
    return np.stack(e2_arrays(c[:, 0], c[:, 1], c[:, 2]), axis=1)
