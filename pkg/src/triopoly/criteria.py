"""Schur-Cohn stability test and flip / Neimark-Sacker criteria.

For the cubic ``lam**3 + a2*lam**2 + a1*lam + a0`` all roots lie in the open
unit disk iff the four margins

    s1 = 1 + a2 + a1 + a0          (A(1))
    s2 = 1 - a2 + a1 - a0          (-A(-1))
    s3 = 1 + a1 - a0**2 - a0*a2
    s4 = 1 - a1 - a0**2 + a0*a2

are all positive. A flip is the ``s2 = 0`` face, a Neimark-Sacker the ``s4 = 0``
face, each with the remaining margins positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .linearization import CharPoly3

DEFAULT_TOL = 1e-9


class Verdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def margins(a2, a1, a0):
    """The four Schur-Cohn margins; works elementwise on arrays."""
    s1 = 1.0 + a2 + a1 + a0
    s2 = 1.0 - a2 + a1 - a0
    s3 = 1.0 + a1 - a0 * a0 - a0 * a2
    s4 = 1.0 - a1 - a0 * a0 + a0 * a2
    return s1, s2, s3, s4


def classify_margins(s, tol=DEFAULT_TOL) -> Verdict:
    if all(v > tol for v in s):
        return Verdict.STABLE
    if any(v < -tol for v in s):
        return Verdict.UNSTABLE
    return Verdict.MARGINAL


@dataclass(frozen=True)
class StabilityReport:
    s1: float
    s2: float
    s3: float
    s4: float
    verdict: Verdict
    tol: float

    @property
    def margins(self) -> tuple:
        return (self.s1, self.s2, self.s3, self.s4)

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


def schur_cohn_3(p: CharPoly3, tol: float = DEFAULT_TOL) -> StabilityReport:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    s = tuple(float(v) for v in margins(*p))
    return StabilityReport(*s, verdict=classify_margins(s, tol), tol=tol)


@dataclass(frozen=True)
class SchurCohnResult:
    d_plus: tuple
    d_minus: tuple
    a_at_1: float
    signed_a_at_minus_1: float
    stable: bool


def _determinant_pair(c, i):
    # c[m] is the coefficient of lam**m, with c[n] == 1
    n = len(c) - 1
    upper = np.zeros((i, i))
    hankel = np.zeros((i, i))
    for r in range(i):
        for col in range(r, i):
            upper[r, col] = c[n - (col - r)]
        for col in range(i - r):
            hankel[r, col] = c[i - 1 - r - col]
    return float(np.linalg.det(upper + hankel)), float(np.linalg.det(upper - hankel))


def schur_cohn_general(coeffs: Sequence[float]) -> SchurCohnResult:
    """Determinant form of the Schur-Cohn test for a monic polynomial.

    ``coeffs`` lists ``a_{n-1}, ..., a_0`` (the leading 1 is implied). The
    determinants ``D+_i, D-_i`` for ``i = 1..n-1`` are returned alongside the
    verdict; only odd ``i`` (n even) or even ``i`` (n odd) enter the verdict.
    """
    n = len(coeffs)
    if n < 2:
        raise ValueError("schur_cohn_general needs a polynomial of degree n >= 2")
    c = [float(v) for v in reversed(coeffs)] + [1.0]
    d_plus, d_minus = [], []
    for i in range(1, n):
        dp, dm = _determinant_pair(c, i)
        d_plus.append(dp)
        d_minus.append(dm)
    a1 = float(np.sum(c))
    am1 = float(np.sum([v * (-1.0) ** m for m, v in enumerate(c)]))
    signed = (-1.0) ** n * am1
    start = 1 if n % 2 == 0 else 2
    stable = a1 > 0 and signed > 0 and all(
        d_plus[i - 1] > 0 and d_minus[i - 1] > 0 for i in range(start, n, 2)
    )
    return SchurCohnResult(tuple(d_plus), tuple(d_minus), a1, signed, stable)


class BifurcationKind(str, Enum):
    FLIP = "flip"
    NEIMARK_SACKER = "neimark_sacker"


class DenominatorNearZero(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class BifurcationTest:
    kind: BifurcationKind
    equality_residual: float
    side_conditions: list = field(default_factory=list)  # (name, value, required sign)
    transversality: list = field(default_factory=list)  # (parameter, value)

    def on_surface(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.equality_residual) <= tol

    def sides_hold(self, tol: float = DEFAULT_TOL) -> bool:
        return all(v * sign > tol for _, v, sign in self.side_conditions)

    def transversal(self, tol: float = DEFAULT_TOL) -> bool:
        return all(abs(v) > tol for _, v in self.transversality)

    def holds(self, tol: float = DEFAULT_TOL) -> bool:
        return self.on_surface(tol) and self.sides_hold(tol) and self.transversal(tol)


def flip_test(p: CharPoly3, dp: Mapping[str, Sequence[float]], tol: float = DEFAULT_TOL) -> BifurcationTest:
    """Flip (period-doubling) conditions; ``dp`` maps parameter -> (da2, da1, da0)."""
    a2, a1, a0 = (float(v) for v in p)
    denom = 3.0 - 2.0 * a2 + a1
    if abs(denom) <= tol:
        raise DenominatorNearZero(f"3 - 2*a2 + a1 = {denom!r} is within {tol} of zero")
    s1, s2, s3, s4 = margins(a2, a1, a0)
    sides = [("s1", s1, 1), ("s3", s3, 1), ("s4", s4, 1)]
    trans = [(name, (d0 - d1 + d2) / denom) for name, (d2, d1, d0) in dp.items()]
    return BifurcationTest(BifurcationKind.FLIP, -1.0 + a2 - a1 + a0, sides, trans)


def ns_test(p: CharPoly3, dp: Mapping[str, Sequence[float]], tol: float = DEFAULT_TOL) -> BifurcationTest:
    """Neimark-Sacker conditions; transversality is the parameter derivative of s4."""
    a2, a1, a0 = (float(v) for v in p)
    s1, s2, s3, s4 = margins(a2, a1, a0)
    sides = [("s1", s1, 1), ("-1+a2-a1+a0", -s2, -1), ("s3", s3, 1)]
    trans = [(name, -2.0 * a0 * d0 + a0 * d2 + a2 * d0 - d1) for name, (d2, d1, d0) in dp.items()]
    return BifurcationTest(BifurcationKind.NEIMARK_SACKER, s4, sides, trans)
