"""Brute-force full-joint reference.

Everything here works on the complete table over all variables and is kept
deliberately independent of :mod:`legnet.cmd` and :mod:`legnet.net`, so it
can serve as the yardstick for them in tests.  Sizes are capped at 20
variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConvergenceError, ImpossibleEvidenceError, UnreachableMarginError, ValidationError

MAX_VARS = 20


@dataclass(frozen=True, eq=False)
class FullJoint:
    """Joint table over ``vars`` (``vars[0]`` is the least significant bit)."""

    vars: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        names = tuple(self.vars)
        n = len(names)
        if n > MAX_VARS:
            raise ValidationError(f"full joint over {n} variables exceeds the cap of {MAX_VARS}")
        if len(set(names)) != n:
            raise ValidationError(f"duplicate variables in {list(names)}")
        arr = np.array(self.table, dtype=float)
        if arr.shape != (2**n,):
            raise ValidationError(f"joint over {n} variables needs {2**n} entries, got {arr.size}")
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
            raise ValidationError("joint table must be non-negative and sum to 1")
        arr.setflags(write=False)
        object.__setattr__(self, "vars", names)
        object.__setattr__(self, "table", arr)

    def bits(self, v: str) -> np.ndarray:
        """0/1 value of ``v`` at every index."""
        try:
            pos = self.vars.index(v)
        except ValueError:
            raise ValidationError(f"unknown variable {v!r}") from None
        return (np.arange(2 ** len(self.vars)) >> pos) & 1

    def marginal(self, v: str) -> float:
        return float(self.table[self.bits(v) == 1].sum())


def exact_condition(joint: FullJoint, hard: Mapping[str, int]) -> FullJoint:
    """Bayes rule on the full table for hard evidence ``{var: 0|1}``."""
    keep = np.ones(joint.table.size, dtype=bool)
    for v, value in hard.items():
        if value not in (0, 1):
            raise ValidationError(f"hard evidence for {v!r} must be 0 or 1, got {value!r}")
        keep &= joint.bits(v) == value
    mass = joint.table[keep].sum()
    if mass <= 0:
        raise ImpossibleEvidenceError(f"impossible evidence: {dict(hard)} has zero probability")
    return FullJoint(joint.vars, np.where(keep, joint.table / mass, 0.0))


def ipf_project(joint: FullJoint, targets: Mapping[str, float], tol: float = 1e-12,
                max_iter: int = 10_000) -> FullJoint:
    """Cyclic single-variable ratio fitting of ``joint`` to marginal targets.

    Sweeps the targets in mapping order until every marginal is within
    ``tol``.  The limit is the I-projection of ``joint`` onto the set of
    tables meeting all targets.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` sweeps without meeting ``tol``; ``last`` holds the
        final iterate.
    """
    table = joint.table.copy()
    masks = [(v, joint.bits(v) == 1, float(p)) for v, p in targets.items()]
    for v, _, p in masks:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"target for {v!r} outside [0, 1]: {p!r}")

    def residual(t):
        return max((abs(t[m].sum() - p) for _, m, p in masks), default=0.0)

    for _ in range(max_iter):
        if residual(table) <= tol:
            return FullJoint(joint.vars, table)
        for v, m, p in masks:
            on = table[m].sum()
            off = table[~m].sum()
            if (on == 0 and p > 0) or (off == 0 and p < 1):
                raise UnreachableMarginError(f"unreachable margin: P({v}) cannot reach {p!r}")
            if on > 0:
                table[m] *= p / on
            if off > 0:
                table[~m] *= (1 - p) / off
            table /= table.sum()
    res = residual(table)
    if res <= tol:
        return FullJoint(joint.vars, table)
    raise ConvergenceError(f"IPF did not converge in {max_iter} sweeps (residual {res:.3g})",
                           last=FullJoint(joint.vars, table), residual=res)


def marginal_table(joint: FullJoint, subset: Sequence[str]) -> np.ndarray:
    """Distribution over ``subset`` with ``subset[0]`` least significant."""
    sub = np.zeros(joint.table.size, dtype=np.intp)
    for j, v in enumerate(subset):
        sub |= joint.bits(v) << j
    return np.bincount(sub, weights=joint.table, minlength=2 ** len(subset))
