import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triopoly import kernels
from triopoly.linearization import (
    CharPoly3,
    SingularStateError,
    charpoly,
    charpoly_arrays,
    charpoly_partials,
    e2_charpoly,
    e2_coefficients,
    eigenvalues,
    jacobian,
    jacobian_arrays,
    spectral_radius,
)
from triopoly.model import ModelParams, equilibria

from conftest import interior_params


def fd_jacobian(params, s, h=1e-7):
    """Central differences of the raw map, one column per coordinate."""
    args = params.kernel_args()
    j = np.empty((3, 3))
    for c in range(3):
        up = list(s)
        dn = list(s)
        hc = h * max(1.0, abs(s[c]))
        up[c] += hc
        dn[c] -= hc
        fu = np.array(kernels.step_scalar(*args, *up))
        fd = np.array(kernels.step_scalar(*args, *dn))
        j[:, c] = (fu - fd) / (2 * hc)
    return j


def random_state(rng):
    return tuple(rng.uniform(0.05, 1.0, size=3))


class TestJacobian:
    @pytest.mark.parametrize("model", ["anb", "lnb"])
    def test_matches_finite_differences(self, model, rng):
        worst = 0.0
        for _ in range(200):
            c = rng.uniform(0.2, 3.0, size=3)
            p = ModelParams(model, *c, rng.uniform(0.05, 4.0), rng.uniform(0, 1))
            s = random_state(rng)
            ja = jacobian(p, s)
            jn = fd_jacobian(p, s)
            scale = np.maximum(np.abs(ja), 1.0)
            worst = max(worst, float(np.max(np.abs(ja - jn) / scale)))
        assert worst < 1e-6

    def test_symmetric_e2_entries(self):
        # c = 2, l = 1/2: naive slope is 1/(2c sqrt((x+z)/c)) - 1 = -1/4 at x = z = 1/9
        p = ModelParams("anb", 2, 2, 2, 1.0, 0.5)
        j = jacobian(p, equilibria(p).e2)
        assert j[1, 0] == pytest.approx(-0.25, abs=1e-15)
        assert j[0, 0] == 0.5
        assert j[0, 1] == pytest.approx(-0.125, abs=1e-15)
        assert j[1, 1] == 0.0

    def test_lnb_row(self):
        p = ModelParams("lnb", 1.0, 1.0, 1.0, 1.0)
        j = jacobian(p, (0.1, 0.2, 0.3))
        assert j[0].tolist() == pytest.approx([1 - 0.6, 0.5 - 0.6, 0.5 - 0.6])

    def test_singular_states(self):
        with pytest.raises(SingularStateError):
            jacobian(ModelParams("anb", 1, 1, 1, 1), (0.2, 0.0, 0.0))
        with pytest.raises(SingularStateError):
            jacobian(ModelParams("lnb", 1, 1, 1, 1), (0.0, 0.2, 0.0))
        jacobian(ModelParams("lnb", 1, 1, 1, 1), (0.2, 0.0, 0.0))

    def test_array_and_scalar_kernels_agree(self, rng):
        for model in ("anb", "lnb"):
            p = ModelParams(model, 1.2, 0.9, 1.4, 2.0, 0.3)
            s = random_state(rng)
            out = np.empty((3, 3))
            kernels.jacobian_scalar(*p.kernel_args(), *s, out)
            np.testing.assert_array_equal(out, jacobian(p, s))

    def test_broadcast_shape(self):
        j = jacobian_arrays(kernels.ANB, 1.0, 1.0, 1.0, np.linspace(1, 2, 4)[:, None], 0.5,
                            0.1, 0.2, np.linspace(0.1, 0.3, 5))
        assert j.shape == (4, 5, 3, 3)


class TestCharpoly:
    @given(st.lists(st.floats(-3, 3), min_size=9, max_size=9))
    def test_matches_numpy_poly(self, entries):
        j = np.array(entries).reshape(3, 3)
        ref = np.poly(j)  # [1, a2, a1, a0]
        got = charpoly(j)
        np.testing.assert_allclose(got, ref[1:], atol=1e-10 * (1 + np.abs(j).max() ** 3))

    def test_call_evaluates_cubic(self):
        p = CharPoly3(-6.0, 11.0, -6.0)  # roots 1, 2, 3
        assert [p(v) for v in (1.0, 2.0, 3.0)] == [0.0, 0.0, 0.0]
        assert p(0.0) == -6.0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            charpoly(np.eye(2))
        with pytest.raises(ValueError):
            charpoly(np.full((3, 3), np.nan))

    def test_vectorised_e2_coefficients(self):
        ks = np.linspace(0.1, 2.0, 7)
        a2, a1, a0 = e2_coefficients(kernels.ANB, 1.63, 2.1, 2.2, ks, 0.6)
        for i, k in enumerate(ks):
            ref = e2_charpoly(ModelParams("anb", 1.63, 2.1, 2.2, float(k), 0.6))
            assert (a2[i], a1[i], a0[i]) == pytest.approx(ref, abs=1e-15)

    def test_arrays_helper(self):
        j = np.arange(18, dtype=float).reshape(2, 3, 3)
        a2, a1, a0 = charpoly_arrays(j)
        for i in range(2):
            assert (a2[i], a1[i], a0[i]) == pytest.approx(tuple(np.poly(j[i])[1:]), abs=1e-9)


class TestEigen:
    @given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=1), st.floats(-3, 3))
    def test_recovers_constructed_roots(self, pair, real):
        z = pair[0]
        roots = [z, z.conjugate(), real]
        c = np.real(np.poly(roots))
        ev = eigenvalues(CharPoly3(*c[1:]))
        for r in roots:
            assert np.min(np.abs(ev - r)) < 1e-5 * (1 + abs(r))

    def test_sorted_by_modulus(self):
        ev = eigenvalues(CharPoly3(*np.poly([0.1, -0.9, 0.5])[1:]))
        assert np.allclose(ev, [-0.9, 0.5, 0.1])

    def test_conjugate_pair_ordering(self):
        c = np.real(np.poly([0.3 + 0.4j, 0.3 - 0.4j, 0.2]))
        ev = eigenvalues(CharPoly3(*c[1:]))
        assert ev[0].imag < 0 < ev[1].imag
        assert spectral_radius(CharPoly3(*c[1:])) == pytest.approx(0.5, rel=1e-12)

    @given(interior_params())
    def test_eigenvalues_are_matrix_eigenvalues(self, p):
        j = jacobian(p, equilibria(p).e2)
        ref = np.sort_complex(np.linalg.eigvals(j))
        got = np.sort_complex(eigenvalues(charpoly(j)))
        assert np.allclose(got, ref, atol=1e-6 * (1 + np.abs(j).max()))


class TestPartials:
    def test_against_wider_step(self):
        p = ModelParams("anb", 1.63, 2.1, 2.2, 1.2, 0.6)
        a = charpoly_partials(p)
        b = charpoly_partials(p, rel_step=1e-4)
        for name in a:
            assert a[name] == pytest.approx(b[name], rel=1e-5, abs=1e-8)

    def test_k_derivative_is_linear(self):
        # only the third Jacobian row depends on k, and linearly, so every coefficient is affine in k
        p = ModelParams("lnb", 0.5, 0.55, 0.6, 3.0)
        d = charpoly_partials(p, names=("k",))["k"]
        lo = e2_charpoly(p.replace(k=2.0))
        hi = e2_charpoly(p.replace(k=4.0))
        slope = [(h - l_) / 2.0 for h, l_ in zip(hi, lo)]
        assert d == pytest.approx(slope, rel=1e-7, abs=1e-10)

    def test_lnb_skips_l(self):
        assert "l" not in charpoly_partials(ModelParams("lnb", 1, 1, 1, 1))
        assert "l" in charpoly_partials(ModelParams("anb", 1, 1, 1, 1))


def test_no_nan_leak_for_lnb():
    p = ModelParams("lnb", 0.5, 0.55, 0.6, 2.0, 0.7)
    assert all(math.isfinite(v) for v in e2_charpoly(p))
