"""Parameters, states, the two triopoly maps and their equilibria.

Both games share a naive second firm and a gradient-adjusting third firm. The
first firm is adaptive in the ANB game and uses a local monopolistic
approximation in the LNB game. Price is the reciprocal of total supply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import kernels


class Model(str, Enum):
    ANB = "anb"
    LNB = "lnb"

    @property
    def code(self) -> int:
        return kernels.ANB if self is Model.ANB else kernels.LNB

    @classmethod
    def parse(cls, value: "Model | str") -> "Model":
        if isinstance(value, Model):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown model {value!r}; expected 'anb' or 'lnb'") from None


PARAM_NAMES = ("c1", "c2", "c3", "k", "l")


class Domain(str, Enum):
    """When an orbit counts as having left the model.

    ``POSITIVE`` stops at the first non-positive or non-finite output.
    ``DEFINED`` only stops where the update rules themselves are undefined
    (negative square-root argument, non-positive total supply, overflow), so
    outputs may transiently go negative.
    """

    POSITIVE = "positive"
    DEFINED = "defined"

    @property
    def code(self) -> int:
        return kernels.POSITIVE if self is Domain.POSITIVE else kernels.DEFINED

    @classmethod
    def parse(cls, value: "Domain | str") -> "Domain":
        try:
            return cls(value.lower() if isinstance(value, str) else value)
        except ValueError:
            raise ValueError(f"unknown domain policy {value!r}; expected 'positive' or 'defined'") from None


class ParameterError(ValueError):
    pass


class DomainEscape(ArithmeticError):
    """The map left the economic domain (non-finite or non-positive output)."""

    def __init__(self, coordinate: int, value: float, step: int | None = None):
        self.coordinate = coordinate
        self.value = value
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(f"coordinate {'xyz'[coordinate]} = {value!r} left the domain{where}")


@dataclass(frozen=True)
class ModelParams:
    model: Model
    c1: float
    c2: float
    c3: float
    k: float
    l: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
                raise ParameterError(f"{name} must be a real number, got {v!r}")
            v = float(v)
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("c1", "c2", "c3", "k"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 <= self.l <= 1.0:
            raise ParameterError(f"l must lie in [0, 1], got {self.l!r}")

    def replace(self, **changes) -> "ModelParams":
        fields = {name: getattr(self, name) for name in ("model",) + PARAM_NAMES}
        fields.update(changes)
        return ModelParams(**fields)

    def kernel_args(self) -> tuple:
        """``(model_code, c1, c2, c3, k, l)`` for the kernels.

        LNB never reads ``l``; it is passed as NaN so any accidental use
        poisons the result instead of silently changing it.
        """
        l = self.l if self.model is Model.ANB else math.nan
        return (self.model.code, self.c1, self.c2, self.c3, self.k, l)

    def as_row(self) -> np.ndarray:
        return np.array(self.kernel_args()[1:], dtype=np.float64)


class State(NamedTuple):
    x: float
    y: float
    z: float


def check_state(s) -> State:
    s = State(*(float(v) for v in s))
    if not all(math.isfinite(v) for v in s):
        raise ValueError(f"state must be finite, got {tuple(s)}")
    if min(s) < 0.0:
        raise ValueError(f"outputs must be nonnegative, got {tuple(s)}")
    if s.x + s.y + s.z <= 0.0:
        raise ValueError("total supply x + y + z must be positive")
    return s


def step(params: ModelParams, s, domain: Domain | str = Domain.POSITIVE) -> State:
    """One period of the game. Raises :class:`DomainEscape` on leaving the domain."""
    domain = Domain.parse(domain)
    s = check_state(s) if domain is Domain.POSITIVE else State(*(float(v) for v in s))
    nxt = kernels.step_scalar(*params.kernel_args(), s.x, s.y, s.z)
    bad = kernels.escape_coordinate(s.x, s.y, s.z, *nxt, domain.code)
    if bad >= 0:
        raise DomainEscape(bad, nxt[bad])
    return State(*nxt)


def marginal_profit(firm: int, params: ModelParams, s) -> float:
    """Rivals' output over squared total supply, minus own marginal cost."""
    if firm not in (1, 2, 3):
        raise ValueError(f"firm index must be 1, 2 or 3, got {firm!r}")
    x, y, z = (float(v) for v in s)
    q = x + y + z
    if q == 0.0:
        raise ValueError("marginal profit is undefined at zero total supply")
    own = (x, y, z)[firm - 1]
    cost = (params.c1, params.c2, params.c3)[firm - 1]
    return (q - own) / (q * q) - cost


@dataclass(frozen=True)
class Equilibria:
    e1: State
    e2: State
    e2_interior: bool


def e2_arrays(c1, c2, c3):
    """Interior-candidate equilibrium for broadcastable cost arrays."""
    s2 = (c1 + c2 + c3) ** 2
    return 2.0 * (c2 + c3 - c1) / s2, 2.0 * (c1 + c3 - c2) / s2, 2.0 * (c1 + c2 - c3) / s2


def is_interior(c1, c2, c3):
    return (c2 + c3 > c1) & (c1 + c3 > c2) & (c1 + c2 > c3)


def equilibria(params: ModelParams) -> Equilibria:
    # identical for both games
    c1, c2, c3 = params.c1, params.c2, params.c3
    d = (c1 + c2) ** 2
    e1 = State(c2 / d, c1 / d, 0.0)
    e2 = State(*e2_arrays(c1, c2, c3))
    return Equilibria(e1=e1, e2=e2, e2_interior=bool(is_interior(c1, c2, c3)))
