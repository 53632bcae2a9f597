import itertools

import numpy as np
import pytest

from legnet.cmd import Cmd
from legnet.net import Leg, LegNet
from legnet.tables import FIGURE2_TABLE, figure2_cmd, figure2_net


@pytest.fixture
def fig2():
    return figure2_cmd()


@pytest.fixture
def fig2_net():
    return figure2_net()


@pytest.fixture
def fig2_table():
    return np.array(FIGURE2_TABLE)


def reorder(vars_from, table, vars_to):
    """Re-index a table over ``vars_from`` to the variable order ``vars_to``."""
    k = len(vars_from)
    out = np.zeros(2**k)
    pos = [vars_from.index(v) for v in vars_to]
    for n in range(2**k):
        m = sum(((n >> pos[j]) & 1) << j for j in range(k))
        out[m] = table[n]
    return out


def random_tree_net(rng, n_legs, alpha=1.0):
    """Random consistent tree net of 3-variable LEGs, every table strictly positive.

    Each new LEG attaches through one variable that so far sits in a single
    LEG, so every variable is shared by at most two LEGs.
    """
    counter = itertools.count()
    first = tuple(f"v{next(counter)}" for _ in range(3))
    legs = [_random_cmd(rng, first, rng.dirichlet(np.full(8, alpha)))]
    owner = {v: 0 for v in first}
    for i in range(1, n_legs):
        free = sorted(v for v, c in owner.items() if c is not None)
        s = free[rng.integers(len(free))]
        parent = legs[owner[s]]
        p_s = parent.table[[n for n in range(8) if (n >> parent.vars.index(s)) & 1]].sum()
        new = (f"v{next(counter)}", f"v{next(counter)}")
        # table over (s, new0, new1): P(s) * P(new | s)
        base = np.zeros(8)
        for sv, ps in ((0, 1 - p_s), (1, p_s)):
            cond = rng.dirichlet(np.full(4, alpha))
            for j in range(4):
                base[sv | (j << 1)] = ps * cond[j]
        legs.append(_random_cmd(rng, (s,) + new, base))
        owner[s] = None
        for v in new:
            owner[v] = i
    return LegNet([Leg(c, f"L{i}") for i, c in enumerate(legs)])


def _random_cmd(rng, vars_, table):
    order = [vars_[j] for j in rng.permutation(3)]
    return Cmd(tuple(order), reorder(list(vars_), table, order), order[rng.integers(3)])


@pytest.fixture
def make_random_net():
    return random_tree_net


ACCEPTANCE_LINES = []


def record_acceptance(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
