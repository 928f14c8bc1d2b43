"""Sparse multivariate polynomials over ``c1, c2, c3, k, l`` and the bundled catalog.

Text grammar (one polynomial per block, ``#`` starts a comment)::

    NAME := term (("+" | "-") term)*
    term := integer | [integer "*"] var ["^" exp] ("*" var ["^" exp])*

Whitespace, including newlines, is insignificant inside a block. Coefficients
are exact integers in the file; they are rounded once (correctly) to float64
at load time. Some coefficients exceed 2**53, so evaluation uses compensated
(Neumaier) summation over the terms in stored order.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

VARS = ("c1", "c2", "c3", "k", "l")

CATALOG_NAMES = (
    "LS_ANB_1", "LS_ANB_2", "LS_ANB_3", "LS_ANB_4",
    "LS_LNB_1", "LS_LNB_2", "LS_LNB_3", "LS_LNB_4",
    "PD_ANB", "PD_LNB",
    "PT_ANB_k", "PT_ANB_l", "PT_ANB_c1", "PT_ANB_c2", "PT_ANB_c3",
    "PT_LNB_k", "PT_LNB_c1", "PT_LNB_c2", "PT_LNB_c3",
    "NS_ANB", "NS_LNB",
    "NT_ANB_k", "NT_ANB_l", "NT_ANB_c1", "NT_ANB_c2", "NT_ANB_c3",
    "NT_LNB_k", "NT_LNB_c1", "NT_LNB_c2", "NT_LNB_c3",
)

# Fixed costs of the two (c3, k) stability regions and the sign each LS factor
# must carry inside the stable region.
STABILITY_REGIONS = {
    "anb": {
        "fixed": {"c1": 1.63, "c2": 2.1, "l": 0.6},
        "conditions": (("LS_ANB_1", 1), ("LS_ANB_2", -1), ("LS_ANB_3", 1), ("LS_ANB_4", -1)),
    },
    "lnb": {
        "fixed": {"c1": 0.5, "c2": 0.55},
        "conditions": (("LS_LNB_1", 1), ("LS_LNB_2", -1), ("LS_LNB_3", -1), ("LS_LNB_4", -1)),
    },
}

# Each surface polynomial, restricted to a region's fixed costs, is a positive
# multiple of the corresponding LS factor.
PROPORTIONALITY_STATEMENTS = (
    ("PD_ANB", "LS_ANB_3", "anb"),
    ("PD_LNB", "LS_LNB_3", "lnb"),
    ("NS_ANB", "LS_ANB_4", "anb"),
    ("NS_LNB", "LS_LNB_4", "lnb"),
)


class PolySyntaxError(ValueError):
    def __init__(self, message, line, col):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class MissingVariable(KeyError):
    pass


class CatalogIntegrityError(RuntimeError):
    def __init__(self, name, message):
        self.name = name
        super().__init__(f"{name}: {message}")


class IdentityViolation(AssertionError):
    pass


class ProportionalityViolation(AssertionError):
    pass


@dataclass(frozen=True)
class SparsePoly:
    """Ordered term list; each term is ``(coefficient, exponents)``.

    ``exponents`` is a 5-tuple aligned with :data:`VARS`.
    """

    terms: tuple = ()

    def __post_init__(self):
        seen = set()
        for coeff, exps in self.terms:
            if coeff == 0:
                raise ValueError("zero coefficient in term list")
            if len(exps) != len(VARS) or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps!r}")
            if exps in seen:
                raise ValueError(f"duplicate monomial {_monomial_text(exps)!r}")
            seen.add(exps)

    def __len__(self):
        return len(self.terms)

    @property
    def variables(self) -> tuple:
        return tuple(v for i, v in enumerate(VARS) if any(e[i] for _, e in self.terms))

    def degree(self, var: str) -> int:
        i = VARS.index(var)
        return max((e[i] for _, e in self.terms), default=0)

    def degrees(self) -> dict:
        return {v: self.degree(v) for v in VARS}

    def digit_checksum(self) -> int:
        return sum(int(ch) for c, _ in self.terms for ch in str(abs(c))) % 2**32

    def render(self) -> str:
        return render(self)

    def __call__(self, assignment=None, **kw):
        if assignment is None:
            assignment = {}
        return evaluate(self, {**assignment, **kw})


def _monomial_text(exps) -> str:
    parts = []
    for v, e in zip(VARS, exps):
        if e == 1:
            parts.append(v)
        elif e > 1:
            parts.append(f"{v}^{e}")
    return "*".join(parts)


def render(p: SparsePoly) -> str:
    if not p.terms:
        return "0"
    out = []
    for i, (coeff, exps) in enumerate(p.terms):
        mono = _monomial_text(exps)
        mag = abs(coeff)
        body = str(mag) if not mono else (mono if mag == 1 else f"{mag}*{mono}")
        if i == 0:
            out.append(("-" if coeff < 0 else "") + body)
        else:
            out.append(("- " if coeff < 0 else "+ ") + body)
    return " ".join(out)


_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<var>c[123]|k|l)(?![A-Za-z0-9_])|(?P<op>[-+*^]))")


def _tokens(text: str, line0: int = 1) -> Iterator[tuple]:
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            return
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            line, col = _position(text, pos, line0)
            raise PolySyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind)
        yield kind, m.group(kind), start
        pos = m.end()


def _position(text, pos, line0=1):
    line = line0 + text.count("\n", 0, pos)
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def parse(text: str, _line0: int = 1) -> SparsePoly:
    """Parse one polynomial expression (the part after ``NAME :=``)."""
    toks = list(_tokens(text, _line0))
    i = 0

    def peek():
        return toks[i] if i < len(toks) else (None, None, len(text))

    def fail(msg, at):
        line, col = _position(text, at, _line0)
        raise PolySyntaxError(msg, line, col)

    if not toks:
        fail("empty polynomial", 0)
    if len(toks) == 1 and toks[0][0] == "int" and int(toks[0][1]) == 0:
        return SparsePoly(())

    terms = []
    seen = set()
    sign = 1
    if peek()[0] == "op" and peek()[1] in "+-":
        sign = -1 if peek()[1] == "-" else 1
        i += 1
    while True:
        kind, val, term_at = peek()
        coeff = 1
        exps = [0] * len(VARS)
        has_factors = kind == "var"
        if kind == "int":
            coeff = int(val)
            if coeff == 0:
                fail("zero coefficient", term_at)
            i += 1
            if peek()[:2] == ("op", "*"):
                i += 1
                if peek()[0] != "var":
                    fail("expected a variable after '*'", peek()[2])
                has_factors = True
        elif kind != "var":
            fail("expected a term" if kind is None else f"expected a term, got {val!r}", term_at)
        while has_factors:
            _, name, at = peek()
            i += 1
            e = 1
            if peek()[:2] == ("op", "^"):
                i += 1
                if peek()[0] != "int":
                    fail("expected an integer exponent after '^'", peek()[2])
                e = int(peek()[1])
                i += 1
            vi = VARS.index(name)
            if exps[vi]:
                fail(f"variable {name} repeated within one term", at)
            exps[vi] = e
            if peek()[:2] != ("op", "*"):
                break
            i += 1
            if peek()[0] != "var":
                fail("expected a variable after '*'", peek()[2])
        exps = tuple(exps)
        if exps in seen:
            fail(f"duplicate monomial {_monomial_text(exps) or '1'!r}", term_at)
        seen.add(exps)
        terms.append((sign * coeff, exps))
        kind, val, at = peek()
        if kind is None:
            break
        if kind != "op" or val not in "+-":
            fail(f"expected '+' or '-', got {val!r}", at)
        sign = -1 if val == "-" else 1
        i += 1
    return SparsePoly(tuple(terms))


_HEADER = re.compile(r"^[ \t]*([A-Za-z_][A-Za-z0-9_]*)[ \t]*:=", re.M)


def parse_catalog(text: str) -> dict:
    """Parse a whole catalog file into ``{name: SparsePoly}`` (file order kept)."""
    clean = "".join(line.split("#", 1)[0] + "\n" for line in text.splitlines())
    heads = list(_HEADER.finditer(clean))
    if not heads:
        raise PolySyntaxError("no 'NAME :=' block found", 1, 1)
    leading = clean[: heads[0].start()]
    if leading.strip():
        line, col = _position(clean, len(leading) - len(leading.lstrip()))
        raise PolySyntaxError("text before the first 'NAME :=' block", line, col)
    out = {}
    for h, nxt in zip(heads, heads[1:] + [None]):
        name = h.group(1)
        if name in out:
            line, col = _position(clean, h.start(1))
            raise PolySyntaxError(f"polynomial {name} defined twice", line, col)
        body_start = h.end()
        body = clean[body_start: nxt.start() if nxt else len(clean)]
        line0 = clean.count("\n", 0, body_start) + 1
        # _position counts columns from the last newline, so pad the first line
        pad = body_start - (clean.rfind("\n", 0, body_start) + 1)
        try:
            out[name] = parse(" " * pad + body, _line0=line0)
        except PolySyntaxError as exc:
            raise PolySyntaxError(f"in {name}: {exc.args[0].split(': ', 1)[1]}", exc.line, exc.col) from None
    return out


def render_catalog(polys: Mapping[str, SparsePoly]) -> str:
    return "".join(f"{name} := {render(p)}\n" for name, p in polys.items())


def _neumaier(values):
    total = None
    comp = None
    for v in values:
        if total is None:
            total = v
            comp = v * 0.0
            continue
        t = total + v
        big = np.abs(total) >= np.abs(v)
        comp = comp + np.where(big, (total - t) + v, (v - t) + total)
        total = t
    if total is None:
        return 0.0
    return total + comp


def evaluate(p: SparsePoly, assignment: Mapping[str, object]):
    """Sum of coefficient times monomial, in stored term order.

    Values may be floats or broadcastable numpy arrays. Missing variables that
    ``p`` uses raise :class:`MissingVariable`.
    """
    used = p.variables
    missing = [v for v in used if v not in assignment]
    if missing:
        raise MissingVariable(f"no value for {', '.join(missing)}")
    scalar = all(np.ndim(assignment[v]) == 0 for v in used)
    vals = {v: np.asarray(assignment[v], dtype=np.float64) for v in used}

    def term_values():
        for coeff, exps in p.terms:
            t = np.float64(float(coeff))
            for v, e in zip(VARS, exps):
                if e:
                    t = t * vals[v] ** e
            yield t

    with np.errstate(over="ignore", invalid="ignore"):
        out = _neumaier(term_values())
    if scalar:
        return float(out)
    return np.asarray(out, dtype=np.float64)


def term_scale(p: SparsePoly, assignment: Mapping[str, object]):
    """Sum of absolute term values; the natural yardstick for rounding error."""
    absp = SparsePoly(tuple((abs(c), e) for c, e in p.terms))
    absa = {v: np.abs(np.asarray(assignment[v], dtype=np.float64)) for v in p.variables}
    return evaluate(absp, absa)


def substitute(p: SparsePoly, fixed: Mapping[str, float]):
    """Closure evaluating ``p`` with some variables pinned to numbers."""
    def f(**free):
        return evaluate(p, {**fixed, **free})
    return f


class PolyCatalog(Mapping):
    """Immutable name -> polynomial mapping."""

    def __init__(self, polys: Mapping[str, SparsePoly]):
        self._polys = dict(polys)

    def __getitem__(self, name):
        return self._polys[name]

    def __iter__(self):
        return iter(self._polys)

    def __len__(self):
        return len(self._polys)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("triopoly") / "data" / name))


def default_catalog_path() -> Path:
    return _data_path("catalog.poly")


def default_manifest_path() -> Path:
    return _data_path("manifest.csv")


def read_manifest(path=None) -> dict:
    path = Path(path) if path else default_manifest_path()
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[row["name"]] = {
                "terms": int(row["terms"]),
                "degrees": {v: int(row[f"deg_{v}"]) for v in VARS},
                "digit_checksum": int(row["digit_checksum"]),
            }
    return out


def check_manifest(polys: Mapping[str, SparsePoly], manifest: Mapping[str, dict]) -> None:
    """Raise :class:`CatalogIntegrityError` naming the first drifting polynomial."""
    for name in CATALOG_NAMES:
        if name not in polys:
            raise CatalogIntegrityError(name, "missing from catalog")
        if name not in manifest:
            raise CatalogIntegrityError(name, "missing from manifest")
        p, m = polys[name], manifest[name]
        if len(p) != m["terms"]:
            raise CatalogIntegrityError(name, f"{len(p)} terms, manifest says {m['terms']}")
        if p.degrees() != m["degrees"]:
            raise CatalogIntegrityError(name, f"degrees {p.degrees()} differ from manifest {m['degrees']}")
        if p.digit_checksum() != m["digit_checksum"]:
            raise CatalogIntegrityError(
                name, f"digit checksum {p.digit_checksum()} differs from manifest {m['digit_checksum']}"
            )
    extra = sorted(set(polys) - set(CATALOG_NAMES))
    if extra:
        raise CatalogIntegrityError(extra[0], "unexpected catalog entry")


def load_catalog(path=None, manifest_path=None, verify: bool = True) -> PolyCatalog:
    path = Path(path) if path else default_catalog_path()
    text = path.read_text(encoding="utf-8")
    try:
        polys = parse_catalog(text)
    except PolySyntaxError as exc:
        name = re.search(r"\bin (\w+):", exc.args[0])
        raise CatalogIntegrityError(name.group(1) if name else str(path), str(exc)) from exc
    if verify:
        check_manifest(polys, read_manifest(manifest_path))
    return PolyCatalog(polys)


_DEFAULT = None


def catalog() -> PolyCatalog:
    """The bundled catalog, loaded and manifest-checked once."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT


@dataclass(frozen=True)
class CheckReport:
    name: str
    points: int
    max_deviation: float
    worst_point: dict
    passed: bool
    constant: float | None = None


def _relative_deviation(value, target, scale):
    return abs(value - target) / max(abs(target), scale)


def reduce_check_identical_costs(cat=None, n=100, seed=0, rtol=1e-9, strict=True) -> list:
    """Check that both flip surfaces collapse to their identical-cost forms.

    With ``c1 = c2 = c3 = c``: PD_ANB equals ``(33ckl - 68ck - 102l + 192) c**3``
    and PD_LNB equals ``(23ck - 62) c**2``. Deviation is measured relative to
    ``max(|target|, sum of |terms| of the target)``.
    """
    cat = cat or catalog()
    rng = np.random.default_rng(seed)
    cases = (
        ("PD_ANB", lambda c, k, l: (33 * c * k * l - 68 * c * k - 102 * l + 192) * c**3,
         lambda c, k, l: (33 * c * k * l + 68 * c * k + 102 * l + 192) * c**3),
        ("PD_LNB", lambda c, k, l: (23 * c * k - 62) * c**2,
         lambda c, k, l: (23 * c * k + 62) * c**2),
    )
    reports = []
    for name, target, scale in cases:
        worst, worst_pt = -1.0, {}
        for _ in range(n):
            c, k, l = rng.uniform(0.05, 5.0), rng.uniform(0.01, 5.0), rng.uniform(0.0, 1.0)
            got = evaluate(cat[name], {"c1": c, "c2": c, "c3": c, "k": k, "l": l})
            dev = _relative_deviation(got, target(c, k, l), scale(c, k, l))
            if dev > worst:
                worst, worst_pt = dev, {"c": c, "k": k, "l": l}
        rep = CheckReport(f"reduce:{name}", n, worst, worst_pt, worst <= rtol)
        if strict and not rep.passed:
            raise IdentityViolation(f"{name}: deviation {worst:.3e} at {worst_pt}")
        reports.append(rep)
    return reports


def proportionality_check(surface, factor, region, cat=None, n=100, seed=0, rtol=1e-9,
                          window=((0.3, 4.0), (0.01, 2.0)), strict=True) -> CheckReport:
    """Check that ``surface`` on the region's fixed costs is a positive multiple of ``factor``.

    Points are drawn in the ``(c3, k)`` window; points where ``factor`` is
    within 1e-3 of its term scale of zero are redrawn, since the ratio is
    ill-conditioned there. Passes when the relative spread of the ratio is
    below ``rtol`` and the ratio is positive.
    """
    cat = cat or catalog()
    fixed = STABILITY_REGIONS[region]["fixed"]
    rng = np.random.default_rng(seed)
    ratios, points = [], []
    while len(ratios) < n:
        c3 = rng.uniform(*window[0])
        k = rng.uniform(*window[1])
        a = {**fixed, "c3": c3, "k": k}
        den = evaluate(cat[factor], a)
        if abs(den) < 1e-3 * term_scale(cat[factor], a):
            continue
        ratios.append(evaluate(cat[surface], a) / den)
        points.append({"c3": c3, "k": k})
    ratios = np.array(ratios)
    const = float(np.median(ratios))
    dev = np.abs(ratios - const) / abs(const)
    i = int(np.argmax(dev))
    rep = CheckReport(f"proportional:{surface}~{factor}", n, float(dev[i]), points[i],
                      bool(const > 0 and dev[i] <= rtol), constant=const)
    if strict and not rep.passed:
        raise ProportionalityViolation(
            f"{surface} vs {factor}: ratio {const:.6e}, spread {dev[i]:.3e} at {points[i]}"
        )
    return rep
