"""Jacobians of the two maps, cubic characteristic polynomials and their roots."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import kernels
from .model import Model, ModelParams, check_state, e2_arrays


class SingularStateError(ValueError):
    pass


class CharPoly3(NamedTuple):
    """Coefficients of ``lam**3 + a2*lam**2 + a1*lam + a0``."""

    a2: float
    a1: float
    a0: float

    def __call__(self, lam):
        return ((lam + self.a2) * lam + self.a1) * lam + self.a0


def jacobian_arrays(model_code, c1, c2, c3, k, l, x, y, z):
    """Jacobian for broadcastable parameter/state arrays, shape ``(..., 3, 3)``."""
    c1, c2, c3, k, l, x, y, z = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (c1, c2, c3, k, l, x, y, z))
    )
    q = x + y + z
    q3 = q * q * q
    j = np.empty(q.shape + (3, 3))
    if model_code == kernels.ANB:
        g1 = 1.0 / (2.0 * c1) / np.sqrt((y + z) / c1) - 1.0
        j[..., 0, 0] = 1.0 - l
        j[..., 0, 1] = l * g1
        j[..., 0, 2] = l * g1
    else:
        j[..., 0, 0] = 1.0 - c1 * q
        j[..., 0, 1] = 0.5 - c1 * q
        j[..., 0, 2] = 0.5 - c1 * q
    g2 = 1.0 / (2.0 * c2) / np.sqrt((x + z) / c2) - 1.0
    j[..., 1, 0] = g2
    j[..., 1, 1] = 0.0
    j[..., 1, 2] = g2
    r = k * z * (z - x - y) / q3
    j[..., 2, 0] = r
    j[..., 2, 1] = r
    j[..., 2, 2] = 1.0 - k * c3 + k * (x + y) * (x + y - z) / q3
    return j


def jacobian(params: ModelParams, s) -> np.ndarray:
    """Analytic 3x3 Jacobian of the map at state ``s``."""
    s = check_state(s)
    if s.x + s.z <= 0.0:
        raise SingularStateError("Jacobian undefined: x + z must be positive")
    if params.model is Model.ANB and s.y + s.z <= 0.0:
        raise SingularStateError("Jacobian undefined: y + z must be positive for ANB")
    return jacobian_arrays(*params.kernel_args(), *s)


def charpoly_arrays(j):
    j = np.asarray(j, dtype=np.float64)
    a2 = -(j[..., 0, 0] + j[..., 1, 1] + j[..., 2, 2])
    a1 = (
        j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        + j[..., 0, 0] * j[..., 2, 2] - j[..., 0, 2] * j[..., 2, 0]
        + j[..., 1, 1] * j[..., 2, 2] - j[..., 1, 2] * j[..., 2, 1]
    )
    det = (
        j[..., 0, 0] * (j[..., 1, 1] * j[..., 2, 2] - j[..., 1, 2] * j[..., 2, 1])
        - j[..., 0, 1] * (j[..., 1, 0] * j[..., 2, 2] - j[..., 1, 2] * j[..., 2, 0])
        + j[..., 0, 2] * (j[..., 1, 0] * j[..., 2, 1] - j[..., 1, 1] * j[..., 2, 0])
    )
    return a2, a1, -det


def charpoly(j) -> CharPoly3:
    j = np.asarray(j, dtype=np.float64)
    if j.shape != (3, 3) or not np.all(np.isfinite(j)):
        raise ValueError("charpoly expects a finite 3x3 matrix")
    return CharPoly3(*(float(v) for v in charpoly_arrays(j)))


def e2_coefficients(model_code, c1, c2, c3, k, l):
    """``(a2, a1, a0)`` of the Jacobian at the interior equilibrium, array-friendly."""
    x, y, z = e2_arrays(*(np.asarray(v, dtype=np.float64) for v in (c1, c2, c3)))
    with np.errstate(invalid="ignore", divide="ignore"):
        return charpoly_arrays(jacobian_arrays(model_code, c1, c2, c3, k, l, x, y, z))


def e2_charpoly(params: ModelParams) -> CharPoly3:
    return CharPoly3(*(float(v) for v in e2_coefficients(*params.kernel_args())))


def eigenvalues(p: CharPoly3) -> np.ndarray:
    """Roots of the cubic, via the companion matrix plus one Newton polish.

    Sorted by decreasing modulus, then increasing real part, then imaginary
    part. Intended for reports; stability verdicts use Schur-Cohn margins.
    """
    a2, a1, a0 = (float(v) for v in p)
    comp = np.array([[-a2, -a1, -a0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    roots = np.linalg.eigvals(comp).astype(complex)
    poly = CharPoly3(a2, a1, a0)
    polished = []
    # a near-double root can overflow the step; a non-finite candidate never wins below
    with np.errstate(over="ignore", invalid="ignore"):
        for r in roots:
            d = (3.0 * r + 2.0 * a2) * r + a1
            if d != 0:
                cand = r - poly(r) / d
                if abs(poly(cand)) < abs(poly(r)):
                    r = cand
            polished.append(r)
    # drop subnormal imaginary parts so real roots stay real
    out = np.array(polished, dtype=complex)
    out.imag[np.abs(out.imag) < 1e-300] = 0.0
    return np.array(sorted(out, key=lambda r: (-abs(r), r.real, r.imag)))


def spectral_radius(p: CharPoly3) -> float:
    return float(np.max(np.abs(eigenvalues(p))))


def charpoly_partials(params: ModelParams, names=("c1", "c2", "c3", "k", "l"), rel_step=1e-6):
    """Central differences of ``(a2, a1, a0)`` at E2 with respect to parameters.

    The step for parameter ``v`` is ``rel_step * max(|v|, 1)``. Returns a dict
    ``name -> (da2, da1, da0)``. For LNB, ``l`` is skipped.
    """
    base = dict(zip(("c1", "c2", "c3", "k", "l"), params.kernel_args()[1:]))
    code = params.model.code
    out = {}
    for name in names:
        if name == "l" and params.model is Model.LNB:
            continue
        h = rel_step * max(abs(base[name]), 1.0)
        hi = dict(base, **{name: base[name] + h})
        lo = dict(base, **{name: base[name] - h})
        up = e2_coefficients(code, **hi)
        dn = e2_coefficients(code, **lo)
        out[name] = tuple(float((u - d) / (2.0 * h)) for u, d in zip(up, dn))
    return out
