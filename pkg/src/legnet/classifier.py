"""Slot-based real-time classification simulator.

Each object is re-classified in every slot.  Every applicable test turns a
noisy measurement into a :class:`~legnet.markov.TestOutput` and advances its
own Markov belief.  Two pipelines then produce one P(Y) per object:

``markov``
    a single running belief chained through all of the slot's test outputs
    in the configured order;
``legnet``
    the per-test P(Y) values, clamped away from 0 and 1, applied as soft
    evidence to a LEG Net whose goal marginal is the fused probability.

Labels are Y, N or U by two thresholds and scored +1 / -1 / 0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError
from .markov import BinaryBelief, TestOutput, chain, step
from .net import LegNet, converge, marginal_of, set_evidence, validate

FUSION_MODES = ("fresh-prior", "carry-posterior")
PIPELINES = ("markov", "legnet", "both")
LABELS = ("Y", "N", "U")


@dataclass(frozen=True)
class Logistic:
    """``floor + (ceiling - floor) * sigmoid(slope * (m - midpoint))``."""

    midpoint: float = 0.0
    slope: float = 1.0
    floor: float = 0.0
    ceiling: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.floor <= self.ceiling <= 1.0:
            raise ConfigError(f"logistic needs 0 <= floor <= ceiling <= 1, got {self.floor}, {self.ceiling}")
        if not (math.isfinite(self.midpoint) and math.isfinite(self.slope)):
            raise ConfigError("logistic midpoint and slope must be finite")

    def __call__(self, m: float) -> float:
        x = self.slope * (m - self.midpoint)
        # tanh form does not overflow for large |x|
        s = 0.5 * (1.0 + math.tanh(0.5 * x)) if math.isfinite(x) else float(x > 0)
        return min(max(self.floor + (self.ceiling - self.floor) * s, 0.0), 1.0)


@dataclass(frozen=True)
class TestModel:
    """A test: measurement -> (P(Y|N), P(N|Y)), applicable on a measurement range.

    ``variable`` is the LEG Net evidence variable the test drives, if any.
    """

    __test__ = False

    id: str
    false_alarm: Logistic
    miss: Logistic
    variable: str | None = None
    applicable_min: float = -math.inf
    applicable_max: float = math.inf

    def applicable(self, m: float) -> bool:
        return self.applicable_min <= m <= self.applicable_max

    def response(self, m: float) -> TestOutput:
        return TestOutput(self.false_alarm(m), self.miss(m))


@dataclass(frozen=True)
class ObjectState:
    object_id: int
    truth: str
    beliefs: Mapping[str, BinaryBelief]
    fused: float = 0.5
    label: str = "U"
    skipped: frozenset = frozenset()


def integrate_test(state: ObjectState, test: TestModel, measurement: float) -> ObjectState:
    """Advance one test's belief by one Markov step.

    An inapplicable measurement leaves the beliefs alone and adds the test
    id to ``state.skipped``.
    """
    if not test.applicable(measurement):
        return replace(state, skipped=state.skipped | {test.id})
    beliefs = dict(state.beliefs)
    beliefs[test.id] = step(beliefs[test.id], test.response(measurement))
    return replace(state, beliefs=beliefs)


def clamp(p: float, eps: float) -> float:
    return min(max(p, eps), 1.0 - eps)


def fuse_slot(net: LegNet, beliefs: Mapping[str, BinaryBelief], eps: float = 1e-6,
              mode: str = "fresh-prior", goal: str | None = None, tol: float = 1e-7,
              max_iter: int = 200) -> tuple[LegNet, float]:
    """Combine per-test beliefs (keyed by net variable) into the goal marginal.

    In ``fresh-prior`` mode ``net`` is the prior and the evidence is iterated
    to convergence.  In ``carry-posterior`` mode ``net`` is the previous
    slot's posterior and the evidence is applied in one pass.
    """
    if mode not in FUSION_MODES:
        raise ConfigError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")
    if not 0.0 < eps < 0.5:
        raise ConfigError(f"clamp eps must lie in (0, 0.5), got {eps!r}")
    goal = goal or _default_goal(net)
    for v in beliefs:
        if v not in net.variables:
            raise ConfigError(f"test bound to variable {v!r}, which is not in the net")
    evidence = {v: clamp(b.p_yes, eps) for v, b in beliefs.items()}
    if mode == "fresh-prior":
        net, _ = converge(net, evidence, tol=tol, max_iter=max_iter, goals=(goal,))
    else:
        for v, p in evidence.items():
            net = set_evidence(net, v, p)
    return net, marginal_of(net, goal)


def _default_goal(net: LegNet) -> str:
    goals = net.goal_variables()
    if len(goals) != 1:
        raise ConfigError(f"net has goal candidates {list(goals)}; name the goal explicitly")
    return goals[0]


def classify(p: float, theta_n: float = 0.2, theta_y: float = 0.8) -> str:
    if not 0.0 <= theta_n < theta_y <= 1.0:
        raise ConfigError(f"thresholds need 0 <= theta_n < theta_y <= 1, got {theta_n}, {theta_y}")
    if p >= theta_y:
        return "Y"
    if p <= theta_n:
        return "N"
    return "U"


@dataclass(frozen=True)
class ObjectSpec:
    truth: str
    mean: Mapping[str, float]
    sigma: Mapping[str, float]


@dataclass
class Scenario:
    tests: list[TestModel]
    objects: list[ObjectSpec]
    slot_count: int = 10
    seed: int = 0
    theta_n: float = 0.2
    theta_y: float = 0.8
    eps: float = 1e-6
    fusion_mode: str = "fresh-prior"
    pipeline: str = "both"
    net: LegNet | None = None
    goal: str | None = None
    chain_order: list[str] | None = None
    prior_yes: float = 0.5
    decay: float = 0.0
    tol: float = 1e-7
    max_iter: int = 200
    reward: float = 1.0
    penalty: float = -1.0
    unknown_score: float = 0.0

    def pipelines(self) -> tuple[str, ...]:
        return ("markov", "legnet") if self.pipeline == "both" else (self.pipeline,)

    def check(self):
        """Raise :class:`ConfigError` for the first problem found."""
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}; expected one of {PIPELINES}")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"unknown fusion mode {self.fusion_mode!r}")
        if not 0.0 <= self.theta_n < self.theta_y <= 1.0:
            raise ConfigError(f"thresholds need 0 <= theta_n < theta_y <= 1, got {self.theta_n}, {self.theta_y}")
        if not 0.0 < self.eps < 0.5:
            raise ConfigError(f"clamp eps must lie in (0, 0.5), got {self.eps!r}")
        if self.slot_count < 1:
            raise ConfigError("slot_count must be at least 1")
        if not 0.0 <= self.prior_yes <= 1.0 or not 0.0 <= self.decay <= 1.0:
            raise ConfigError("prior_yes and decay must lie in [0, 1]")
        if not self.tests:
            raise ConfigError("scenario defines no tests")
        ids = [t.id for t in self.tests]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate test ids in {ids}")
        if self.chain_order is not None and sorted(self.chain_order) != sorted(ids):
            raise ConfigError(f"chain order {self.chain_order} must list every test exactly once")
        for i, obj in enumerate(self.objects):
            if obj.truth not in ("Y", "N"):
                raise ConfigError(f"object {i}: truth must be Y or N, got {obj.truth!r}")
            for tid in ids:
                if tid not in obj.mean or tid not in obj.sigma:
                    raise ConfigError(f"object {i}: missing mean/sigma for test {tid!r}")
                if obj.sigma[tid] < 0:
                    raise ConfigError(f"object {i}: negative sigma for test {tid!r}")
        if "legnet" in self.pipelines():
            if self.net is None:
                raise ConfigError("legnet pipeline requires a net")
            diags = validate(self.net)
            if diags:
                raise ConfigError("net fails validation: " + "; ".join(map(str, diags)))
            bound = [t.variable for t in self.tests if t.variable is not None]
            if not bound:
                raise ConfigError("no test is bound to a net variable")
            if len(set(bound)) != len(bound):
                raise ConfigError(f"tests must bind distinct net variables, got {bound}")
            for t in self.tests:
                if t.variable is not None and t.variable not in self.net.variables:
                    raise ConfigError(f"test {t.id!r} bound to unknown net variable {t.variable!r}")
            goal = self.goal or _default_goal(self.net)
            if goal not in self.net.variables:
                raise ConfigError(f"goal variable {goal!r} not in the net")
            if goal in bound:
                raise ConfigError(f"goal variable {goal!r} cannot also be a test variable")


@dataclass
class Confusion:
    correct_y: int = 0
    correct_n: int = 0
    wrong_y: int = 0
    wrong_n: int = 0
    unknown: int = 0

    def add(self, truth: str, label: str):
        if label == "U":
            self.unknown += 1
        elif label == truth:
            if label == "Y":
                self.correct_y += 1
            else:
                self.correct_n += 1
        elif label == "Y":
            self.wrong_y += 1
        else:
            self.wrong_n += 1

    @property
    def total(self) -> int:
        return self.correct_y + self.correct_n + self.wrong_y + self.wrong_n + self.unknown


@dataclass
class PipelineResult:
    counts: Confusion = field(default_factory=Confusion)
    score: float = 0.0
    traces: list[str] = field(default_factory=list)
    fused: list[list[float]] = field(default_factory=list)


@dataclass
class PerformanceReport:
    objects: int
    slots: int
    results: dict[str, PipelineResult]
    # wall-clock time is not part of the deterministic content
    runtime_s: float = field(default=0.0, compare=False)


def measurements(sc: Scenario) -> np.ndarray:
    """Gaussian measurements with shape (slots, objects, tests)."""
    rng = np.random.default_rng(sc.seed)
    ids = [t.id for t in sc.tests]
    mean = np.array([[o.mean[t] for t in ids] for o in sc.objects], dtype=float).reshape(len(sc.objects), len(ids))
    sigma = np.array([[o.sigma[t] for t in ids] for o in sc.objects], dtype=float).reshape(len(sc.objects), len(ids))
    noise = rng.standard_normal((sc.slot_count, len(sc.objects), len(ids)))
    return mean[None] + sigma[None] * noise


def simulate(sc: Scenario) -> PerformanceReport:
    """Run every object through every slot and score both pipelines."""
    sc.check()
    started = time.perf_counter()
    data = measurements(sc)
    by_id = {t.id: t for t in sc.tests}
    order = [by_id[i] for i in (sc.chain_order or [t.id for t in sc.tests])]
    pipelines = sc.pipelines()
    goal = None
    if "legnet" in pipelines:
        goal = sc.goal or _default_goal(sc.net)
    results = {p: PipelineResult() for p in pipelines}
    prior = BinaryBelief.from_yes(sc.prior_yes)
    col = {t.id: j for j, t in enumerate(sc.tests)}

    for oi, obj in enumerate(sc.objects):
        state = ObjectState(oi, obj.truth, {t.id: prior for t in sc.tests})
        total = prior
        carried = sc.net
        traces = {p: [] for p in pipelines}
        fused_hist = {p: [] for p in pipelines}
        for s in range(sc.slot_count):
            state = replace(state, skipped=frozenset())
            for t in sc.tests:
                state = integrate_test(state, t, float(data[s, oi, col[t.id]]))
            if sc.decay > 0.0:
                state = replace(state, beliefs={
                    tid: (BinaryBelief.from_yes(b.p_yes + sc.decay * (sc.prior_yes - b.p_yes))
                          if tid in state.skipped else b)
                    for tid, b in state.beliefs.items()})
            if "markov" in pipelines:
                outputs = [t.response(float(data[s, oi, col[t.id]])) for t in order
                           if t.id not in state.skipped]
                total = chain(total, outputs)
                fused_hist["markov"].append(total.p_yes)
                traces["markov"].append(classify(total.p_yes, sc.theta_n, sc.theta_y))
            if "legnet" in pipelines:
                ev = {t.variable: state.beliefs[t.id] for t in sc.tests if t.variable is not None}
                base = sc.net if sc.fusion_mode == "fresh-prior" else carried
                carried, p = fuse_slot(base, ev, sc.eps, sc.fusion_mode, goal, sc.tol, sc.max_iter)
                fused_hist["legnet"].append(p)
                traces["legnet"].append(classify(p, sc.theta_n, sc.theta_y))
        for p in pipelines:
            res = results[p]
            for label in traces[p]:
                res.counts.add(obj.truth, label)
            res.traces.append("".join(traces[p]))
            res.fused.append(fused_hist[p])

    for res in results.values():
        c = res.counts
        res.score = (sc.reward * (c.correct_y + c.correct_n)
                     + sc.penalty * (c.wrong_y + c.wrong_n) + sc.unknown_score * c.unknown)
    return PerformanceReport(len(sc.objects), sc.slot_count, results, time.perf_counter() - started)
