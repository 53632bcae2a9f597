"""Exit criteria for the whole package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import io
import itertools
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from legnet.cli import run
from legnet.cmd import Cmd, kl_divergence, update_to_marginal
from legnet.documents import load_scenario
from legnet.markov import BinaryBelief, TestOutput, step
from legnet.net import converge, joint_extension, marginal_of, set_evidence, single_pass
from legnet.oracle import exact_condition, ipf_project
from legnet.classifier import simulate
from legnet.tables import TABLE1A, TABLE1B, TABLE2A, TABLE2B_CORRECTED, figure2_cmd, figure2_net

from conftest import random_tree_net, record_acceptance

DATA = Path(__file__).resolve().parent.parent / "data"
VARS = ("I1", "I2", "O")


def _rows(order):
    net, rows = figure2_net(), []
    targets = {"I1": 0.9, "I2": 0.1}
    for v in order:
        net = set_evidence(net, v, targets[v])
        other = next(u for u in order if u != v)
        rows.append([marginal_of(net, u) for u in VARS] + [abs(marginal_of(net, other) - targets[other])])
    return rows


def _dev(rows, golden):
    return max(abs(a - b) for r, g in zip(rows, golden) for a, b in zip(r, g[-4:]))


def test_criterion_1_table1a():
    dev = _dev(_rows(["I1", "I2"]), TABLE1A)
    cmd = figure2_cmd()
    best = np.inf
    for _ in range(50):
        t0 = time.perf_counter()
        update_to_marginal(update_to_marginal(cmd, "I1", 0.9), "I2", 0.1)
        best = min(best, time.perf_counter() - t0)
    ok = dev <= 1e-6 and best < 1e-3
    record_acceptance("1 Table 1(a)", ok, f"max dev {dev:.2e} (tol 1e-6), update time {best * 1e6:.0f} us (< 1 ms)")
    assert dev <= 1e-6
    assert best < 1e-3


def test_criterion_2_table1b():
    rows = _rows(["I2", "I1"])
    dev = _dev(rows, TABLE1B)
    ok = dev <= 1e-6 and abs(rows[1][1] - 0.1970788) <= 1e-6
    record_acceptance("2 Table 1(b)", ok, f"max dev {dev:.2e}, P(I2) row 2 = {rows[1][1]:.7f} (printed 0.1970188 is a typo)")
    assert ok


def test_criterion_3_table2():
    devs = []
    for order, golden in ((["I1", "I2"], TABLE2A), (["I2", "I1"], TABLE2B_CORRECTED)):
        _, rep = converge(figure2_net(), {v: {"I1": 0.9, "I2": 0.1}[v] for v in order},
                          tol=1e-300, max_iter=3, goals=["O"])
        assert [(r.iteration, r.variable) for r in rep.rows] == [g[:2] for g in golden]
        rows = [[r.evidence["I1"], r.evidence["I2"], r.goals["O"], r.error] for r in rep.rows]
        devs.append(_dev(rows, golden))
    ok = max(devs) <= 1e-5
    record_acceptance("3 Table 2", ok, f"max dev (a) {devs[0]:.2e}, (b) {devs[1]:.2e} (tol 1e-5)")
    assert ok


def test_criterion_4_fixed_point():
    a, ra = converge(figure2_net(), {"I1": 0.9, "I2": 0.1}, tol=1e-12, max_iter=50)
    b, rb = converge(figure2_net(), {"I2": 0.1, "I1": 0.9}, tol=1e-12, max_iter=50)
    oracle = ipf_project(joint_extension(figure2_net()), {"I1": 0.9, "I2": 0.1}, tol=1e-14)
    ta, tb = a.legs[0].cmd.table, b.legs[0].cmd.table
    d_ab = np.abs(ta - tb).max()
    d_or = max(np.abs(ta - oracle.table).max(), np.abs(tb - oracle.table).max())
    p_o = marginal_of(a, "O")
    ok = (ra.converged and rb.converged and d_ab <= 1e-9 and d_or <= 1e-9 and abs(p_o - 0.63408) < 1e-5)
    record_acceptance("4 fixed point", ok, f"sweeps {ra.iterations_used}/{rb.iterations_used}, "
                      f"order gap {d_ab:.1e}, oracle gap {d_or:.1e}, P(O) {p_o:.7f}")
    assert ok


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_bin = worst_perm = worst_soft = 0.0
    nets = 0
    for _ in range(120):
        net = random_tree_net(rng, int(rng.integers(1, 6)))
        assert len(net.variables) <= 12
        nets += 1
        full = joint_extension(net)
        # (a) binary evidence
        k = int(rng.integers(1, 4))
        picks = rng.choice(len(net.variables), size=k, replace=False)
        hard = {net.variables[i]: int(rng.integers(2)) for i in picks}
        ref = exact_condition(full, hard)
        results = []
        for perm in itertools.permutations(hard):
            post = single_pass(net, {v: float(hard[v]) for v in perm})
            results.append(np.array([marginal_of(post, u) for u in net.variables]))
        expect = np.array([ref.marginal(u) for u in net.variables])
        worst_bin = max(worst_bin, np.abs(results[0] - expect).max())
        worst_perm = max(worst_perm, max(np.abs(r - results[0]).max() for r in results))
        # (b) single soft evidence
        v = net.variables[int(rng.integers(len(net.variables)))]
        p = float(rng.uniform(0.01, 0.99))
        post = set_evidence(net, v, p)
        ref = ipf_project(full, {v: p})
        worst_soft = max(worst_soft, max(abs(marginal_of(post, u) - ref.marginal(u)) for u in net.variables))
    elapsed = time.perf_counter() - t0
    ok = worst_bin <= 1e-9 and worst_perm <= 1e-12 and worst_soft <= 1e-9 and elapsed < 60
    record_acceptance("5 oracle equivalence", ok, f"{nets} nets, binary {worst_bin:.1e}, permutation {worst_perm:.1e}, "
                      f"soft {worst_soft:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_6_kl_minimality():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    idx = np.arange(8)
    violations = 0
    for _ in range(120):
        prior = Cmd(VARS, rng.dirichlet(np.ones(8)))
        v = VARS[int(rng.integers(3))]
        p = float(rng.uniform(0.01, 0.99))
        best = kl_divergence(update_to_marginal(prior, v, p), prior)
        on = ((idx >> VARS.index(v)) & 1).astype(bool)
        q = rng.dirichlet(np.ones(8), size=1000)
        q[:, on] *= p / q[:, on].sum(axis=1, keepdims=True)
        q[:, ~on] *= (1 - p) / q[:, ~on].sum(axis=1, keepdims=True)
        kl = (q * np.log(q / prior.table)).sum(axis=1)
        violations += int(np.sum(best > kl + 1e-12))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    record_acceptance("6 KL minimality", ok, f"120 priors x 1000 alternatives, {violations} violations, {elapsed:.1f} s")
    assert ok


def test_criterion_7_markov():
    exact = []
    b = step(BinaryBelief(0.5, 0.5), TestOutput(0.2, 0.1))
    exact.append(abs(b.p_no - 0.45) <= 1e-12 and abs(b.p_yes - 0.55) <= 1e-12)
    b0 = BinaryBelief(0.3, 0.7)
    ident = step(b0, TestOutput(0.0, 0.0))
    exact.append(abs(ident.p_no - 0.3) <= 1e-12 and abs(ident.p_yes - 0.7) <= 1e-12)
    absorb = step(BinaryBelief(0.0, 1.0), TestOutput(0.2, 0.1))
    exact.append(abs(absorb.p_no - 0.1) <= 1e-12 and abs(absorb.p_yes - 0.9) <= 1e-12)
    rng = np.random.default_rng(1)
    u = rng.random((100_000, 3))
    worst = 0.0
    b = BinaryBelief(0.5, 0.5)
    for i in range(100_000):
        start = BinaryBelief.from_yes(u[i, 0]) if i % 100 == 0 else b
        b = step(start, TestOutput(u[i, 1], u[i, 2]))
        if b.p_no < 0 or b.p_yes < 0:
            worst = np.inf
        worst = max(worst, abs(b.p_no + b.p_yes - 1.0))
    ok = all(exact) and worst <= 1e-12
    record_acceptance("7 Markov baseline", ok, f"unit examples {sum(exact)}/3, 1e5 steps max simplex gap {worst:.1e}")
    assert ok


def test_criterion_8_simulation():
    sc = load_scenario(DATA / "scenarios" / "three_tests.yaml")
    assert len(sc.objects) == 500 and len(sc.tests) >= 3
    a, b = simulate(sc), simulate(sc)
    deterministic = a == b
    scores = {k: r.score for k, r in a.results.items()}
    # settling: constant measurements, carried posterior vs fresh-prior convergence
    flat = [replace(o, sigma={t: 0.0 for t in o.sigma}) for o in sc.objects[::50]]
    base = replace(sc, objects=flat, slot_count=60, pipeline="legnet")
    carry = simulate(replace(base, fusion_mode="carry-posterior"))
    fresh = simulate(replace(base, fusion_mode="fresh-prior", tol=1e-12))
    gap = max(abs(c[-1] - f[-1]) for c, f in zip(carry.results["legnet"].fused, fresh.results["legnet"].fused))
    ok = deterministic and set(scores) == {"markov", "legnet"} and gap < 1e-4
    record_acceptance("8 simulation protocol", ok, f"500 objects x {sc.slot_count} slots deterministic={deterministic}, "
                      f"scores {scores}, settling gap {gap:.1e} (tol 1e-4)")
    assert ok


def test_criterion_9_cli():
    out = io.StringIO()
    codes = {"reproduce-tables": run(["reproduce-tables"], out=out)}
    found = {}
    for name, message in (("cycle", "LEG graph contains a cycle"),
                          ("oversized_intersection", "intersection set size 2 exceeds 1"),
                          ("inconsistent", "inconsistent marginal for O")):
        out = io.StringIO()
        codes[name] = run(["check", "--net", str(DATA / "nets" / f"{name}.yaml")], out=out)
        found[name] = message in out.getvalue()
    ok = (codes["reproduce-tables"] == 0 and all(codes[n] != 0 for n in found) and all(found.values()))
    record_acceptance("9 CLI", ok, f"exit codes {codes}, diagnostics matched {found}")
    assert ok
