from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triopoly.polyval import (
    CATALOG_NAMES,
    VARS,
    CatalogIntegrityError,
    MissingVariable,
    PolySyntaxError,
    SparsePoly,
    catalog,
    default_catalog_path,
    default_manifest_path,
    evaluate,
    load_catalog,
    parse,
    parse_catalog,
    proportionality_check,
    reduce_check_identical_costs,
    render,
    render_catalog,
    term_scale,
)

exps_st = st.tuples(*[st.integers(0, 4)] * len(VARS))
coeff_st = st.integers(-10**25, 10**25).filter(bool)


@st.composite
def polys(draw):
    monos = draw(st.lists(exps_st, min_size=1, max_size=8, unique=True))
    return SparsePoly(tuple((draw(coeff_st), e) for e in monos))


def exact_value(p, point):
    total = Fraction(0)
    for c, exps in p.terms:
        t = Fraction(c)
        for v, e in zip(VARS, exps):
            t *= point[v] ** e
        total += t
    return total


class TestGrammar:
    @given(polys())
    def test_render_parse_roundtrip(self, p):
        assert parse(render(p)) == p

    def test_examples(self):
        p = parse("3*c1^2*k - l + 7")
        assert p.terms == ((3, (2, 0, 0, 1, 0)), (-1, (0, 0, 0, 0, 1)), (7, (0, 0, 0, 0, 0)))
        assert parse("-c3").terms == ((-1, (0, 0, 1, 0, 0)),)
        assert parse("0") == SparsePoly(())
        assert render(SparsePoly(())) == "0"

    def test_whitespace_and_newlines(self):
        assert parse("2 *c1 ^ 3\n  + k") == parse("2*c1^3+k")

    @pytest.mark.parametrize("text,line,col", [
        ("2c1", 1, 2),
        ("c1c2", 1, 1),
        ("c1 + + k", 1, 6),
        ("c1^", 1, 4),
        ("c1 * 3", 1, 6),
        ("c1*c1", 1, 4),
        ("c1 + c1", 1, 6),
        ("x + 1", 1, 1),
        ("k +\n  q", 2, 3),
        ("", 1, 1),
        ("0*k", 1, 1),
    ])
    def test_syntax_errors_carry_position(self, text, line, col):
        with pytest.raises(PolySyntaxError) as info:
            parse(text)
        assert (info.value.line, info.value.col) == (line, col)
        assert f"line {line}, col {col}" in str(info.value)

    def test_catalog_error_positions_are_file_relative(self):
        text = "A := c1 + k\n# note\nB := c2 +\n   c3 c1\n"
        with pytest.raises(PolySyntaxError) as info:
            parse_catalog(text)
        assert "in B" in str(info.value)
        assert (info.value.line, info.value.col) == (4, 7)

    def test_catalog_duplicates_and_preamble(self):
        with pytest.raises(PolySyntaxError, match="defined twice"):
            parse_catalog("A := k\nA := l\n")
        with pytest.raises(PolySyntaxError, match="before the first"):
            parse_catalog("junk\nA := k\n")

    @given(st.dictionaries(st.from_regex(r"[A-Z][A-Z0-9_]{0,6}", fullmatch=True), polys(),
                           min_size=1, max_size=4))
    def test_catalog_roundtrip(self, named):
        assert parse_catalog(render_catalog(named)) == named

    def test_sparse_poly_invariants(self):
        with pytest.raises(ValueError):
            SparsePoly(((0, (1, 0, 0, 0, 0)),))
        with pytest.raises(ValueError):
            SparsePoly(((1, (1, 0, 0, 0, 0)), (2, (1, 0, 0, 0, 0))))
        p = parse("c1^3*k + 5*l^2")
        assert p.variables == ("c1", "k", "l")
        assert p.degree("c1") == 3 and p.degree("c2") == 0
        assert p.digit_checksum() == 1 + 5


class TestEvaluate:
    @given(polys(), st.tuples(*[st.fractions(Fraction(-3), Fraction(3), max_denominator=64)] * 5))
    def test_matches_exact_rational_value(self, p, pt):
        point = dict(zip(VARS, pt))
        exact = exact_value(p, point)
        got = evaluate(p, {v: float(x) for v, x in point.items()})
        scale = term_scale(p, {v: float(x) for v, x in point.items()})
        assert abs(got - float(exact)) <= 1e-14 * max(scale, 1.0)

    def test_compensated_sum_beats_naive(self):
        # 1e20 + 1 - 1e20: naive float summation loses the 1
        p = parse("100000000000000000000*k + 1 - 100000000000000000000*l")
        assert evaluate(p, {"k": 1.0, "l": 1.0}) == 1.0

    def test_missing_variable(self):
        with pytest.raises(MissingVariable, match="c2"):
            evaluate(parse("c1 + c2"), {"c1": 1.0})
        assert evaluate(parse("c1"), {"c1": 2.0, "k": np.nan}) == 2.0

    def test_call_and_broadcast(self):
        p = parse("c1*k - 2")
        assert p(c1=2.0, k=3.0) == 4.0
        grid = p({"c1": np.array([1.0, 2.0])[:, None]}, k=np.array([1.0, 2.0, 3.0]))
        assert grid.shape == (2, 3)
        assert grid.tolist() == [[-1, 0, 1], [0, 2, 4]]


class TestCatalog:
    def test_names_and_count(self):
        cat = catalog()
        assert tuple(cat) == CATALOG_NAMES
        assert len(cat) == 30

    @pytest.mark.parametrize("name,expected", [
        ("LS_ANB_1", {"c3": (100, -47)}),
        ("LS_ANB_2", {"c3": (100, -373)}),
        ("LS_LNB_1", {"c3": (20, -1)}),
        ("LS_LNB_2", {"c3": (20, -21)}),
    ])
    def test_linear_factors(self, name, expected):
        p = catalog()[name]
        (slope, const), = expected.values()
        assert sorted(p.terms) == sorted(((slope, (0, 0, 1, 0, 0)), (const, (0, 0, 0, 0, 0))))

    def test_region_factors_use_only_c3_and_k(self):
        for name in ("LS_ANB_3", "LS_ANB_4", "LS_LNB_3", "LS_LNB_4"):
            assert set(catalog()[name].variables) <= {"c3", "k"}

    def test_corruption_names_the_polynomial(self, tmp_path):
        text = default_catalog_path().read_text()
        name = "NT_LNB_c1"
        head = text.index(f"{name} :=")
        i = head + text[head:].index("*") - 1
        digit = text[i]
        bad = text[:i] + str((int(digit) + 1) % 10) + text[i + 1:]
        path = tmp_path / "cat.poly"
        path.write_text(bad)
        with pytest.raises(CatalogIntegrityError) as info:
            load_catalog(path, default_manifest_path())
        assert info.value.name == name
        load_catalog(path, verify=False)

    def test_missing_entry(self, tmp_path):
        text = default_catalog_path().read_text()
        start = text.index("PD_LNB :=")
        end = text.index("PT_ANB_k :=")
        path = tmp_path / "cat.poly"
        path.write_text(text[:start] + text[end:])
        with pytest.raises(CatalogIntegrityError) as info:
            load_catalog(path)
        assert info.value.name == "PD_LNB"

    def test_syntax_error_reported_as_integrity_failure(self, tmp_path):
        text = default_catalog_path().read_text().replace("NS_ANB :=", "NS_ANB := ?", 1)
        path = tmp_path / "cat.poly"
        path.write_text(text)
        with pytest.raises(CatalogIntegrityError) as info:
            load_catalog(path)
        assert info.value.name == "NS_ANB"


class TestIdentities:
    def test_identical_cost_reductions(self):
        for rep in reduce_check_identical_costs(n=300, seed=7):
            assert rep.passed and rep.max_deviation < 1e-9

    @pytest.mark.parametrize("surface,factor,region", [
        ("PD_ANB", "LS_ANB_3", "anb"),
        ("PD_LNB", "LS_LNB_3", "lnb"),
        ("NS_ANB", "LS_ANB_4", "anb"),
        ("NS_LNB", "LS_LNB_4", "lnb"),
    ])
    def test_positive_proportionality(self, surface, factor, region):
        rep = proportionality_check(surface, factor, region, n=200, seed=3)
        assert rep.passed and rep.constant > 0 and rep.max_deviation < 1e-9

    def test_proportionality_detects_wrong_pairing(self):
        rep = proportionality_check("PD_ANB", "LS_ANB_4", "anb", n=50, strict=False)
        assert not rep.passed
