"""Maximum-entropy prior CMDs from partial constraints.

Constraints are probabilities of conjunctive events (``{var: 0|1, ...}``);
a variable marginal is the one-variable case.  The estimate starts from the
uniform table and cycles ratio updates over the constraints (iterative
proportional fitting) until every constraint holds, which yields the
maximum-entropy table consistent with them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cmd import Cmd, marginal, update_to_marginal
from .errors import ConvergenceError, InfeasibleConstraintsError, ValidationError
from .net import Leg, LegNet, validate

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class EventConstraint:
    """``P(event) = p`` where ``event`` assigns 0/1 to some variables."""

    event: tuple[tuple[str, int], ...]
    p: float

    def __post_init__(self):
        event = tuple(sorted(dict(self.event).items()))
        if not event:
            raise ValidationError("event constraint needs at least one variable")
        for v, b in event:
            if b not in (0, 1):
                raise ValidationError(f"event value for {v!r} must be 0 or 1, got {b!r}")
        if not 0.0 <= float(self.p) <= 1.0:
            raise ValidationError(f"event probability {self.p!r} outside [0, 1]")
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "p", float(self.p))

    @property
    def variables(self) -> set[str]:
        return {v for v, _ in self.event}

    def describe(self) -> str:
        body = ", ".join(f"{v}={b}" for v, b in self.event)
        return f"P({body}) = {self.p:g}"


@dataclass
class PriorConstraints:
    marginals: dict[str, float] = field(default_factory=dict)
    events: list[EventConstraint] = field(default_factory=list)

    def __post_init__(self):
        for v, p in self.marginals.items():
            if not 0.0 <= float(p) <= 1.0:
                raise ValidationError(f"marginal for {v!r} outside [0, 1]: {p!r}")

    def all_events(self) -> list[EventConstraint]:
        return [EventConstraint(((v, 1),), p) for v, p in self.marginals.items()] + list(self.events)

    def restricted_to(self, vars: Sequence[str]) -> "PriorConstraints":
        keep = set(vars)
        return PriorConstraints(
            {v: p for v, p in self.marginals.items() if v in keep},
            [e for e in self.events if e.variables <= keep])


def _event_mask(vars: Sequence[str], c: EventConstraint) -> np.ndarray:
    idx = np.arange(2 ** len(vars))
    mask = np.ones(idx.size, dtype=bool)
    for v, b in c.event:
        try:
            pos = list(vars).index(v)
        except ValueError:
            raise ValidationError(f"constraint {c.describe()} names unknown variable {v!r}") from None
        mask &= ((idx >> pos) & 1) == b
    return mask


def _check_pairs(constraints: list[EventConstraint]):
    """Cheap necessary conditions: implied events and disjoint events."""
    for a, b in ((x, y) for i, x in enumerate(constraints) for y in constraints[i + 1:]):
        da, db = dict(a.event), dict(b.event)
        if any(da[v] != db[v] for v in da.keys() & db.keys()):
            if a.p + b.p > 1.0 + RESIDUAL_TOL:
                raise InfeasibleConstraintsError(
                    f"infeasible constraints: disjoint events {a.describe()} and {b.describe()} sum above 1")
            continue
        if da.items() <= db.items() and b.p > a.p + RESIDUAL_TOL:
            raise InfeasibleConstraintsError(
                f"infeasible constraints: {b.describe()} implies {a.describe()} but is more probable")
        if db.items() <= da.items() and a.p > b.p + RESIDUAL_TOL:
            raise InfeasibleConstraintsError(
                f"infeasible constraints: {a.describe()} implies {b.describe()} but is more probable")
        if da == db and abs(a.p - b.p) > RESIDUAL_TOL:
            raise InfeasibleConstraintsError(
                f"infeasible constraints: {a.describe()} conflicts with {b.describe()}")


def estimate_cmd(vars: Sequence[str], c: PriorConstraints, output: str | None = None,
                 max_sweeps: int = 100_000) -> Cmd:
    """Maximum-entropy CMD over ``vars`` satisfying ``c``.

    Raises
    ------
    InfeasibleConstraintsError
        When two constraints contradict each other or a constraint needs
        mass where earlier constraints forced zeros.
    ConvergenceError
        When the fit does not reach a residual of 1e-10.
    """
    vars = tuple(vars)
    constraints = c.all_events()
    _check_pairs(constraints)
    masks = [(_event_mask(vars, e), e) for e in constraints]
    table = np.full(2 ** len(vars), 1.0 / 2 ** len(vars))

    def residual():
        return max((abs(table[m].sum() - e.p) for m, e in masks), default=0.0)

    sweeps = 0
    while residual() >= RESIDUAL_TOL:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"prior estimation did not converge in {max_sweeps} sweeps (residual {residual():.3g})",
                last=table.copy(), residual=residual())
        sweeps += 1
        for m, e in masks:
            on, off = table[m].sum(), table[~m].sum()
            if (on == 0 and e.p > 0) or (off == 0 and e.p < 1):
                raise InfeasibleConstraintsError(
                    f"infeasible constraints: {e.describe()} cannot be met after the other "
                    f"constraints forced zeros")
            if on > 0:
                table[m] *= e.p / on
            if off > 0:
                table[~m] *= (1.0 - e.p) / off
            table /= table.sum()
    return Cmd(vars, table, output)


def estimate_net(structure: Sequence[tuple[Sequence[str], str]], c: PriorConstraints,
                 names: Sequence[str] | None = None) -> LegNet:
    """Estimate every LEG of a tree-shaped net consistently.

    ``structure`` lists ``(inputs, output)`` per LEG.  LEGs are estimated in
    breadth-first order; each shared variable's marginal, if not given in
    ``c``, is copied from the first LEG that fixed it, so the CMDs agree on
    every intersection.
    """
    vars_per_leg = [tuple(inputs) + (output,) for inputs, output in structure]
    names = list(names) if names is not None else [f"L{i}" for i in range(len(vars_per_leg))]
    skeleton = LegNet([Leg(Cmd.uniform(vs), n) for vs, n in zip(vars_per_leg, names)])
    problems = [d for d in validate(skeleton, legs_of_size=None) if d.code != "inconsistent"]
    if problems:
        raise ValidationError("; ".join(d.message for d in problems))
    cmds: list[Cmd | None] = [None] * len(vars_per_leg)
    known = dict(c.marginals)
    order = deque([0])
    seen = {0}
    while order:
        i = order.popleft()
        local = c.restricted_to(vars_per_leg[i])
        local.marginals.update({v: known[v] for v in vars_per_leg[i] if v in known})
        cmd = estimate_cmd(vars_per_leg[i], local, output=structure[i][1])
        # snap shared marginals to the inherited value so LEGs agree to rounding
        for v in vars_per_leg[i]:
            if v in known and len(skeleton.containing(v)) > 1:
                cmd = update_to_marginal(cmd, v, known[v])
        cmds[i] = cmd
        for v in vars_per_leg[i]:
            known.setdefault(v, marginal(cmds[i], v))
        for j, _ in skeleton._adjacent[i]:
            if j not in seen:
                seen.add(j)
                order.append(j)
    return LegNet([Leg(cmd, n) for cmd, n in zip(cmds, names)])
