"""Two-state Markov updating of a No/Yes belief.

A test output supplies the off-diagonal entries of a column-stochastic
2x2 matrix::

    [P(N')]   [1 - P(Y|N)   P(N|Y)    ] [P(N)]
    [P(Y')] = [P(Y|N)       1 - P(N|Y)] [P(Y)]
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable

from .errors import ValidationError


@dataclass(frozen=True)
class BinaryBelief:
    p_no: float
    p_yes: float

    def __post_init__(self):
        if not (0.0 <= self.p_no <= 1.0 and 0.0 <= self.p_yes <= 1.0):
            raise ValidationError(f"belief components must lie in [0, 1]: {self}")
        if abs(self.p_no + self.p_yes - 1.0) > 1e-12:
            raise ValidationError(f"belief components must sum to 1: {self}")

    @classmethod
    def from_yes(cls, p_yes: float) -> "BinaryBelief":
        return cls(1.0 - p_yes, p_yes)


@dataclass(frozen=True)
class TestOutput:
    """False-alarm probability P(Y|N) and miss probability P(N|Y)."""

    __test__ = False  # not a pytest class

    p_false_alarm: float
    p_miss: float

    def __post_init__(self):
        for name in ("p_false_alarm", "p_miss"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p!r}")


def step(b: BinaryBelief, t: TestOutput) -> BinaryBelief:
    p_no = (1.0 - t.p_false_alarm) * b.p_no + t.p_miss * b.p_yes
    p_yes = t.p_false_alarm * b.p_no + (1.0 - t.p_miss) * b.p_yes
    return BinaryBelief(min(p_no, 1.0), min(p_yes, 1.0))


def chain(b: BinaryBelief, outputs: Iterable[TestOutput]) -> BinaryBelief:
    """Apply ``step`` for each output in order."""
    return reduce(step, outputs, b)


def stationary(t: TestOutput) -> BinaryBelief:
    """Fixed point of repeatedly applying ``t``."""
    s = t.p_false_alarm + t.p_miss
    if s == 0.0:
        raise ValidationError("identity transition has no unique stationary point")
    return BinaryBelief.from_yes(t.p_false_alarm / s)
