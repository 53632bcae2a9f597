"""The three-variable worked example and its published update tables.

The prior is a single LEG with inputs I1, I2 and output O.  Two soft
evidence values, P(I1) = 0.9 and P(I2) = 0.1, are applied in both orders,
first once and then for three sweeps.  The golden rows below are the
published 7-decimal values, except the second row of single pass (b),
whose printed P(I2) of 0.1970188 disagrees with its own error column; the
recomputed 0.1970788 is used.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cmd import Cmd
from .errors import ValidationError
from .net import Leg, LegNet, converge, marginal_of, set_evidence

FIGURE2_VARS = ("I1", "I2", "O")
FIGURE2_TABLE = (0.40, 0.05, 0.05, 0.00, 0.00, 0.10, 0.10, 0.30)
TARGETS = {"I1": 0.9, "I2": 0.1}

# (variable, P(I1), P(I2), P(O), error)
TABLE1A = [
    ("I1", 0.9000000, 0.6272727, 0.8181819, 0.5272727),
    ("I2", 0.8200424, 0.1000000, 0.5814776, 0.0799575),
]
TABLE1B = [
    ("I2", 0.3121212, 0.1000000, 0.2525252, 0.5878788),
    ("I1", 0.9000000, 0.1970788, 0.6673082, 0.0970788),
]
# (iteration, variable, P(I1), P(I2), P(O), error)
TABLE2A = [
    (1, "I1", 0.9000000, 0.6272728, 0.8181819, 0.5272728),
    (1, "I2", 0.8200424, 0.1000000, 0.5814776, 0.0799575),
    (2, "I1", 0.9000000, 0.1073947, 0.6366036, 0.0073947),
    (2, "I2", 0.8993579, 0.1000000, 0.6336551, 0.0006421),
    (3, "I1", 0.9000000, 0.1000554, 0.6340969, 0.0000554),
    (3, "I2", 0.8999953, 0.1000000, 0.6340749, 0.0000047),
]
TABLE2B = [
    (1, "I2", 0.3121212, 0.1000000, 0.2525252, 0.5878788),
    (1, "I1", 0.9000000, 0.1970188, 0.6673082, 0.0970788),
    (2, "I2", 0.8908822, 0.1000000, 0.6280743, 0.0091178),
    (2, "I1", 0.9000000, 0.1007928, 0.6343487, 0.0007928),
    (3, "I2", 0.8999316, 0.1000000, 0.6340329, 0.0000684),
    (3, "I1", 0.9000000, 0.1000059, 0.6340800, 0.0000059),
]
# printed P(I2) in TABLE2B row 2 carries the same transposed digits
TABLE2B_CORRECTED = [r if i != 1 else (1, "I1", 0.9000000, 0.1970788, 0.6673082, 0.0970788)
                     for i, r in enumerate(TABLE2B)]

TABLE1_TOL = 1e-6
TABLE2_TOL = 1e-5


def figure2_cmd() -> Cmd:
    return Cmd(FIGURE2_VARS, FIGURE2_TABLE, "O")


def figure2_net() -> LegNet:
    return LegNet([Leg(figure2_cmd(), "L1")])


def builtin_net(name: str) -> LegNet:
    if name == "figure2":
        return figure2_net()
    raise ValidationError(f"unknown builtin net {name!r} (available: figure2)")


@dataclass
class TableRow:
    label: str
    iteration: int
    variable: str
    values: tuple[float, float, float, float]
    expected: tuple[float, float, float, float]
    tol: float

    @property
    def deviation(self) -> float:
        return max(abs(a - b) for a, b in zip(self.values, self.expected))

    @property
    def ok(self) -> bool:
        return self.deviation <= self.tol


def single_pass_rows(order: list[str]) -> list[tuple[str, float, float, float, float]]:
    net = figure2_net()
    rows = []
    for v in order:
        net = set_evidence(net, v, TARGETS[v])
        m = [marginal_of(net, u) for u in FIGURE2_VARS]
        other = next(u for u in order if u != v)
        rows.append((v, *m, abs(marginal_of(net, other) - TARGETS[other])))
    return rows


def sweep_rows(order: list[str], sweeps: int = 3):
    evidence = {v: TARGETS[v] for v in order}
    # tolerance below any reachable error so exactly `sweeps` sweeps run
    _, report = converge(figure2_net(), evidence, tol=1e-300, max_iter=sweeps, goals=("O",))
    return [(r.iteration, r.variable, r.evidence["I1"], r.evidence["I2"], r.goals["O"], r.error)
            for r in report.rows]


def reproduce() -> list[TableRow]:
    """Recompute Tables 1(a), 1(b), 2(a), 2(b) next to their golden values."""
    out = []
    for label, order, golden in (("1a", ["I1", "I2"], TABLE1A), ("1b", ["I2", "I1"], TABLE1B)):
        for got, exp in zip(single_pass_rows(order), golden):
            out.append(TableRow(label, 1, got[0], tuple(got[1:]), tuple(exp[1:]), TABLE1_TOL))
    for label, order, golden in (("2a", ["I1", "I2"], TABLE2A), ("2b", ["I2", "I1"], TABLE2B_CORRECTED)):
        for got, exp in zip(sweep_rows(order), golden):
            out.append(TableRow(label, got[0], got[1], tuple(got[2:]), tuple(exp[2:]), TABLE2_TOL))
    return out
