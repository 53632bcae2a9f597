"""Component Marginal Distributions.

A :class:`Cmd` is the joint probability table of one Local Event Group: a
small table over binary variables.  Entry ``n`` holds the probability of the
joint event whose bits are the values of ``vars``, with ``vars[0]`` as the
least significant bit.  For the usual three-variable group ``[I1, I2, O]``
this gives the row order::

    n   O  I2  I1
    0   0   0   0
    1   0   0   1
    ...
    7   1   1   1

All operations are pure and return new tables.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ImpossibleEvidenceError, UnreachableMarginError, ValidationError

NORM_TOL = 1e-9
# p_old counts as "already at the target" when frozen at 0/1 within this.
FROZEN_ATOL = 1e-12


@lru_cache(maxsize=None)
def bit_masks(k: int) -> np.ndarray:
    """Boolean array of shape (k, 2**k); row i is True where bit i is set."""
    idx = np.arange(2**k)
    masks = ((idx[None, :] >> np.arange(k)[:, None]) & 1).astype(bool)
    masks.setflags(write=False)
    return masks


def subevent_index(positions: Sequence[int], k: int) -> np.ndarray:
    """Map every full index to its index within the sub-event over ``positions``.

    The sub-event index uses the same convention: ``positions[0]`` is the
    least significant bit.
    """
    return _subevent_index(tuple(positions), k)


@lru_cache(maxsize=None)
def _subevent_index(positions: tuple[int, ...], k: int) -> np.ndarray:
    idx = np.arange(2**k)
    out = np.zeros(2**k, dtype=np.intp)
    for j, pos in enumerate(positions):
        out |= ((idx >> pos) & 1) << j
    out.setflags(write=False)
    return out


def check_table(table, k: int, what: str = "table") -> np.ndarray:
    arr = np.asarray(table, dtype=float)
    if arr.shape != (2**k,):
        raise ValidationError(f"{what} must have {2**k} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{what} has negative entries")
    total = arr.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValidationError(f"{what} sums to {total!r}, expected 1")
    return arr


@dataclass(frozen=True, eq=False)
class Cmd:
    """Joint table over ordered binary variables with one designated output.

    Parameters
    ----------
    vars : sequence of str
        Variable names; ``vars[0]`` is the least significant index bit.
    table : array_like
        ``2**len(vars)`` non-negative probabilities summing to one.
    output : str, optional
        The output variable.  Defaults to the last variable.
    """

    vars: tuple[str, ...]
    table: np.ndarray
    output: str = None  # type: ignore[assignment]
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.vars)
        if len(names) < 2:
            raise ValidationError("a CMD needs at least 2 variables")
        for v in names:
            if not isinstance(v, str) or not v:
                raise ValidationError(f"invalid variable name {v!r}")
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate variables in {list(names)}")
        out = names[-1] if self.output is None else self.output
        if out not in names:
            raise ValidationError(f"output variable {out!r} not among {list(names)}")
        arr = check_table(self.table, len(names)).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "vars", names)
        object.__setattr__(self, "table", arr)
        object.__setattr__(self, "output", out)
        object.__setattr__(self, "_pos", {v: i for i, v in enumerate(names)})

    @property
    def k(self) -> int:
        return len(self.vars)

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(v for v in self.vars if v != self.output)

    def position(self, v: str) -> int:
        try:
            return self._pos[v]
        except KeyError:
            raise ValidationError(f"unknown variable {v!r} (CMD has {list(self.vars)})") from None

    def _with_table(self, table: np.ndarray) -> "Cmd":
        return Cmd(self.vars, table, self.output)

    def __eq__(self, other):
        if not isinstance(other, Cmd):
            return NotImplemented
        return (self.vars == other.vars and self.output == other.output
                and np.array_equal(self.table, other.table))

    def __hash__(self):
        return hash((self.vars, self.output, self.table.tobytes()))

    @classmethod
    def uniform(cls, vars: Sequence[str], output: str | None = None) -> "Cmd":
        k = len(vars)
        return cls(tuple(vars), np.full(2**k, 1.0 / 2**k), output)


def marginal(cmd: Cmd, v: str) -> float:
    """Probability that ``v`` is true."""
    pos = cmd.position(v)
    # summation rounding can land a hair outside [0, 1]
    return min(float(cmd.table[bit_masks(cmd.k)[pos]].sum()), 1.0)


def joint_over(cmd: Cmd, subset: Sequence[str]) -> np.ndarray:
    """Distribution over the sub-events of ``subset`` (subset[0] least significant)."""
    positions = [cmd.position(v) for v in subset]
    sub = subevent_index(positions, cmd.k)
    return np.bincount(sub, weights=cmd.table, minlength=2 ** len(positions))


def update_to_marginal(cmd: Cmd, v: str, p_new: float) -> Cmd:
    """Minimum-information update making ``P(v) = p_new``.

    Entries with ``v`` true are scaled by ``p_new / p_old`` and the rest by
    ``(1 - p_new) / (1 - p_old)``.  Zero entries stay zero.

    Raises
    ------
    UnreachableMarginError
        If the current marginal is frozen at 0 or 1 and ``p_new`` differs.
    """
    p_new = float(p_new)
    if not 0.0 <= p_new <= 1.0 or math.isnan(p_new):
        raise ValidationError(f"target probability {p_new!r} for {v!r} outside [0, 1]")
    mask = bit_masks(cmd.k)[cmd.position(v)]
    on = float(cmd.table[mask].sum())
    off = float(cmd.table[~mask].sum())
    if on <= 0.0 or off <= 0.0:
        frozen = 0.0 if on <= 0.0 else 1.0
        if abs(p_new - frozen) <= FROZEN_ATOL:
            return cmd
        raise UnreachableMarginError(
            f"unreachable margin: P({v}) is frozen at {frozen:g}, cannot move to {p_new!r}")
    if p_new == on / (on + off):
        return cmd
    # dividing by the two partial sums also renormalizes; divide first so
    # tiny sums cannot overflow the ratio
    out = np.where(mask, cmd.table / on * p_new, cmd.table / off * (1.0 - p_new))
    return cmd._with_table(_renormalize(out))


def impose_margin(cmd: Cmd, subset: Sequence[str], target) -> Cmd:
    """Rescale ``cmd`` so that its joint over ``subset`` equals ``target``.

    ``target`` is indexed like a table over ``subset`` (``subset[0]`` least
    significant).  Each entry is multiplied by target/current of its
    sub-event, the I-projection onto that margin constraint.
    """
    subset = list(subset)
    if len(set(subset)) != len(subset):
        raise ValidationError(f"duplicate variables in subset {subset}")
    tgt = check_table(target, len(subset), what=f"target over {subset}")
    positions = [cmd.position(v) for v in subset]
    sub = subevent_index(positions, cmd.k)
    current = np.bincount(sub, weights=cmd.table, minlength=2 ** len(subset))
    bad = (current <= 0.0) & (tgt > 0.0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise UnreachableMarginError(
            f"unreachable margin: sub-event {j} of {subset} has zero probability "
            f"but target {tgt[j]!r}")
    ratio = np.divide(tgt, current, out=np.zeros_like(tgt), where=current > 0)
    return cmd._with_table(_renormalize(cmd.table * ratio[sub]))


def condition_binary(cmd: Cmd, v: str, value: int) -> Cmd:
    """Hard evidence ``v = value``: zero inconsistent entries and renormalize."""
    if value not in (0, 1):
        raise ValidationError(f"binary evidence must be 0 or 1, got {value!r}")
    mask = bit_masks(cmd.k)[cmd.position(v)]
    keep = mask if value == 1 else ~mask
    mass = float(cmd.table[keep].sum())
    if mass <= 0.0:
        raise ImpossibleEvidenceError(f"impossible evidence: P({v}={value}) is zero")
    if mass == 1.0 and not np.any(cmd.table[~keep]):
        return cmd
    return cmd._with_table(np.where(keep, cmd.table / mass, 0.0))


def kl_divergence(p: Cmd, q: Cmd) -> float:
    """``sum p log(p/q)`` over entries with ``p > 0``.

    Returns ``math.inf`` when ``p`` puts mass where ``q`` has none.
    """
    if p.vars != q.vars:
        raise ValidationError(f"variable lists differ: {list(p.vars)} vs {list(q.vars)}")
    return kl_tables(p.table, q.table)


def kl_tables(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def _renormalize(table: np.ndarray) -> np.ndarray:
    total = table.sum()
    return table / total if total != 1.0 else table


def from_mapping(vars: Sequence[str], probs: Mapping[tuple[int, ...], float],
                 output: str | None = None) -> Cmd:
    """Build a CMD from ``{(bit_of_vars0, bit_of_vars1, ...): p}``; missing events are 0."""
    k = len(vars)
    table = np.zeros(2**k)
    for bits, p in probs.items():
        if len(bits) != k:
            raise ValidationError(f"event {bits} does not have {k} bits")
        table[sum(int(b) << i for i, b in enumerate(bits))] = p
    return Cmd(tuple(vars), table, output)
