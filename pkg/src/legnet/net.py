"""LEG Nets: groups of CMDs joined by shared variables.

The LEG graph has one node per LEG and an edge between every pair of LEGs
that share variables; the shared variables are the edge's intersection set.
Propagation assumes that graph is a tree, which :func:`validate` checks.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cmd import Cmd, impose_margin, joint_over, marginal, update_to_marginal
from .errors import NumericError, ValidationError
from .oracle import MAX_VARS, FullJoint

CONSISTENCY_TOL = 1e-9
PERMUTATION_LIMIT = 5


@dataclass(frozen=True)
class Leg:
    """One Local Event Group: a CMD plus a display name."""

    cmd: Cmd
    name: str = ""

    @property
    def vars(self) -> tuple[str, ...]:
        return self.cmd.vars

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.cmd.inputs

    @property
    def output(self) -> str:
        return self.cmd.output


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    shared: tuple[str, ...]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    legs: tuple[int, ...] = ()

    def __str__(self):
        return self.message


class LegNet:
    """An immutable collection of LEGs.

    Operations that change probabilities return a new net sharing the
    structure (variables, edges) of the old one.
    """

    __slots__ = ("legs", "variables", "edges", "_containing", "_adjacent")

    def __init__(self, legs: Iterable[Leg | Cmd]):
        legs = tuple(l if isinstance(l, Leg) else Leg(l) for l in legs)
        if not legs:
            raise ValidationError("a LEG Net needs at least one LEG")
        legs = tuple(l if l.name else Leg(l.cmd, f"L{i}") for i, l in enumerate(legs))
        variables: list[str] = []
        containing: dict[str, list[int]] = {}
        for i, leg in enumerate(legs):
            for v in leg.vars:
                if v not in containing:
                    variables.append(v)
                    containing[v] = []
                containing[v].append(i)
        edges = []
        adjacent: list[list[tuple[int, tuple[str, ...]]]] = [[] for _ in legs]
        for i, j in itertools.combinations(range(len(legs)), 2):
            shared = tuple(v for v in legs[i].vars if v in set(legs[j].vars))
            if shared:
                edges.append(Edge(i, j, shared))
                adjacent[i].append((j, shared))
                adjacent[j].append((i, shared))
        self.legs = legs
        self.variables = tuple(variables)
        self.edges = tuple(edges)
        self._containing = {v: tuple(ix) for v, ix in containing.items()}
        self._adjacent = tuple(tuple(a) for a in adjacent)

    def _replace_cmds(self, cmds: Sequence[Cmd]) -> "LegNet":
        new = object.__new__(LegNet)
        new.legs = tuple(Leg(c, l.name) for c, l in zip(cmds, self.legs))
        new.variables = self.variables
        new.edges = self.edges
        new._containing = self._containing
        new._adjacent = self._adjacent
        return new

    def containing(self, v: str) -> tuple[int, ...]:
        try:
            return self._containing[v]
        except KeyError:
            raise ValidationError(f"unknown variable {v!r}") from None

    def goal_variables(self) -> tuple[str, ...]:
        """Outputs that are not an input of any LEG."""
        inputs = {v for leg in self.legs for v in leg.inputs}
        return tuple(dict.fromkeys(l.output for l in self.legs if l.output not in inputs))

    def marginals(self) -> dict[str, float]:
        return {v: marginal_of(self, v) for v in self.variables}

    def __repr__(self):
        return f"LegNet({[l.name for l in self.legs]}, variables={list(self.variables)})"

    def __eq__(self, other):
        if not isinstance(other, LegNet):
            return NotImplemented
        return self.legs == other.legs

    def __hash__(self):
        return hash(self.legs)


def _structure_diagnostics(net: LegNet, legs_of_size: int | None = 3) -> list[Diagnostic]:
    diags = []
    names = [l.name for l in net.legs]
    for name in sorted({n for n in names if names.count(n) > 1}):
        idx = tuple(i for i, n in enumerate(names) if n == name)
        diags.append(Diagnostic("duplicate-name", f"duplicate LEG name {name!r}", idx))
    if legs_of_size is not None:
        for i, leg in enumerate(net.legs):
            if leg.cmd.k != legs_of_size:
                diags.append(Diagnostic(
                    "leg-size",
                    f"LEG {leg.name} has {leg.cmd.k} variables, expected {legs_of_size} "
                    f"(two inputs, one output)", (i,)))
    for e in net.edges:
        if len(e.shared) > 1:
            diags.append(Diagnostic(
                "intersection-size",
                f"intersection set size {len(e.shared)} exceeds 1 "
                f"(LEGs {net.legs[e.a].name} and {net.legs[e.b].name} share {', '.join(e.shared)})",
                (e.a, e.b)))
    parent = list(range(len(net.legs)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cycle_legs: set[int] = set()
    for e in net.edges:
        ra, rb = find(e.a), find(e.b)
        if ra == rb:
            cycle_legs.update((e.a, e.b))
        else:
            parent[ra] = rb
    if cycle_legs:
        diags.append(Diagnostic("cycle", "LEG graph contains a cycle", tuple(sorted(cycle_legs))))
    if len({find(i) for i in range(len(net.legs))}) > 1:
        diags.append(Diagnostic("disconnected", "LEG graph is not connected"))
    return diags


def _inconsistencies(net: LegNet, tol: float = CONSISTENCY_TOL):
    """Yield (variable, max deviation, leg indices) for every shared variable."""
    for v in net.variables:
        legs = net.containing(v)
        if len(legs) < 2:
            continue
        vals = [marginal(net.legs[i].cmd, v) for i in legs]
        yield v, max(vals) - min(vals), legs


def validate(net: LegNet, legs_of_size: int | None = 3) -> list[Diagnostic]:
    """All violations of the LEG Net invariants; empty when the net is sound.

    ``legs_of_size`` enforces the fixed LEG size (3: two inputs and one
    output); pass ``None`` to accept any size.
    """
    diags = _structure_diagnostics(net, legs_of_size)
    for v, delta, legs in _inconsistencies(net):
        if delta > CONSISTENCY_TOL:
            diags.append(Diagnostic("inconsistent", f"inconsistent marginal for {v} (Δ={delta:.3g})", legs))
    return diags


def _require_tree(net: LegNet):
    bad = [d for d in _structure_diagnostics(net, None) if d.code in ("cycle", "disconnected")]
    if bad:
        raise ValidationError("; ".join(d.message for d in bad))


def consistency_error(net: LegNet) -> float:
    """Largest disagreement between LEGs on the marginal of a shared variable."""
    return max((delta for _, delta, _ in _inconsistencies(net)), default=0.0)


def marginal_of(net: LegNet, v: str) -> float:
    """Marginal of ``v`` read from the first LEG containing it."""
    return marginal(net.legs[net.containing(v)[0]].cmd, v)


def set_evidence(net: LegNet, v: str, p: float) -> LegNet:
    """Set ``P(v) = p`` and propagate through the tree.

    The LEG holding ``v`` is updated by ratio updating, then the change
    spreads breadth-first: every child receives its parent's new margin over
    their intersection set.  Hard values 0 and 1 are allowed and act as
    conditioning.
    """
    start = net.containing(v)[0]
    cmds = [l.cmd for l in net.legs]
    cmds[start] = update_to_marginal(cmds[start], v, p)
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j, shared in net._adjacent[i]:
            if j in seen:
                continue
            seen.add(j)
            if len(shared) == 1:
                cmds[j] = update_to_marginal(cmds[j], shared[0], marginal(cmds[i], shared[0]))
            else:
                cmds[j] = impose_margin(cmds[j], shared, joint_over(cmds[i], shared))
            queue.append(j)
    if len(seen) != len(net.legs):
        raise ValidationError("LEG graph is not connected")
    return net._replace_cmds(cmds)


def single_pass(net: LegNet, evidence: Mapping[str, float]) -> LegNet:
    """Apply every evidence value once, in mapping order."""
    for v, p in evidence.items():
        net = set_evidence(net, v, p)
    return net


@dataclass(frozen=True)
class ReportRow:
    iteration: int
    variable: str
    evidence: dict[str, float]
    goals: dict[str, float]
    error: float


@dataclass
class ConvergenceReport:
    rows: list[ReportRow] = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0


def row_error(marginals: Mapping[str, float], targets: Mapping[str, float], just_updated: str) -> float:
    """Largest miss among evidence variables other than ``just_updated``."""
    return max((abs(marginals[u] - t) for u, t in targets.items() if u != just_updated), default=0.0)


def converge(net: LegNet, evidence: Mapping[str, float], tol: float = 1e-7, max_iter: int = 50,
             goals: Sequence[str] | None = None) -> tuple[LegNet, ConvergenceReport]:
    """Sweep the evidence repeatedly until the values stop disturbing each other.

    A report row is appended after every single-variable update.  Iteration
    stops as soon as a row's error drops below ``tol`` or after ``max_iter``
    sweeps.

    Raises
    ------
    NumericError
        Frozen margins and similar failures; the partial report is attached
        as ``exc.report``.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol!r}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be at least 1, got {max_iter!r}")
    for v in evidence:
        net.containing(v)
    goals = tuple(net.goal_variables() if goals is None else goals)
    for g in goals:
        net.containing(g)
    report = ConvergenceReport()
    for sweep in range(1, max_iter + 1):
        report.iterations_used = sweep
        for v, p in evidence.items():
            try:
                net = set_evidence(net, v, p)
            except NumericError as exc:
                exc.report = report
                raise
            ev = {u: marginal_of(net, u) for u in evidence}
            err = row_error(ev, evidence, v)
            report.rows.append(ReportRow(sweep, v, ev, {g: marginal_of(net, g) for g in goals}, err))
            if err < tol:
                report.converged = True
                return net, report
    return net, report


def order_sensitivity(net: LegNet, evidence: Mapping[str, float], goal: str,
                      max_exhaustive: int = PERMUTATION_LIMIT, samples: int = 120,
                      seed: int = 0) -> float:
    """Spread (max - min) of the goal marginal over update orders.

    Each order is a single pass without iteration.  Every permutation is
    tried for up to ``max_exhaustive`` evidence variables, otherwise
    ``samples`` random permutations drawn with ``seed``.
    """
    items = list(evidence.items())
    if len(items) < 2:
        raise ValidationError("order sensitivity needs at least two evidence variables")
    net.containing(goal)
    if len(items) <= max_exhaustive:
        orders: Iterable[Sequence[int]] = itertools.permutations(range(len(items)))
    else:
        rng = np.random.default_rng(seed)
        orders = [rng.permutation(len(items)) for _ in range(samples)]
    values = []
    for order in orders:
        values.append(marginal_of(single_pass(net, dict(items[i] for i in order)), goal))
    return max(values) - min(values)


def joint_extension(net: LegNet) -> FullJoint:
    """The full joint implied by a consistent tree net.

    Product of all CMDs divided by the intersection marginals, one factor
    per edge.
    """
    _require_tree(net)
    n = len(net.variables)
    if n > MAX_VARS:
        raise ValidationError(f"joint extension over {n} variables exceeds the cap of {MAX_VARS}")
    pos = {v: i for i, v in enumerate(net.variables)}
    idx = np.arange(2**n)

    def project(vars_):
        sub = np.zeros(2**n, dtype=np.intp)
        for j, v in enumerate(vars_):
            sub |= ((idx >> pos[v]) & 1) << j
        return sub

    table = np.ones(2**n)
    for leg in net.legs:
        table *= leg.cmd.table[project(leg.vars)]
    for e in net.edges:
        sep = joint_over(net.legs[e.a].cmd, e.shared)
        denom = sep[project(e.shared)]
        table = np.divide(table, denom, out=np.zeros_like(table), where=denom > 0)
    total = table.sum()
    if abs(total - 1.0) > 1e-6:
        raise NumericError(f"joint extension sums to {total!r}; is the net consistent?")
    return FullJoint(net.variables, table / total)
