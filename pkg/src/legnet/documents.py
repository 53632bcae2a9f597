"""Net and scenario documents.

Both are YAML files with an explicit ``version`` field.  Probabilities may
be written as YAML numbers or as decimal strings; either way they are parsed
with ``float`` so values round-trip exactly.  Every error raised while
reading a document carries the line number of the offending block.

A net document::

    version: 1
    legs:
      - name: L1
        inputs: [I1, I2]
        output: O
        table: [0.40, 0.05, 0.05, 0.00, 0.00, 0.10, 0.10, 0.30]

``table`` lists P0..P(2^k-1) with the first input as the least significant
bit (for two inputs: rows ``O I2 I1 = 000, 001, 010, ...``).  A LEG may give
``constraints`` (``marginals`` and ``events``) instead of a table, in which
case it is estimated; global ``marginals`` apply to every LEG.  Optional
``evidence`` blocks hold named, ordered evidence sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .classifier import Logistic, ObjectSpec, Scenario, TestModel
from .cmd import Cmd
from .errors import ConfigError, LegNetError, ValidationError
from .estimation import EventConstraint, PriorConstraints, estimate_net
from .net import Leg, LegNet

FORMAT_VERSION = 1


class _LineDict(dict):
    line: int = 0
    key_lines: dict


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    loader.flatten_mapping(node)
    out = _LineDict()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _load_yaml(text: str, error=ValidationError) -> _LineDict:
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise error(f"YAML syntax error: {exc.problem}", mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise error(f"YAML syntax error: {exc}") from None
    if not isinstance(data, dict):
        raise error("document must be a mapping", 1)
    return data


def _line(d, key=None) -> int | None:
    if isinstance(d, _LineDict):
        if key is not None and key in d.key_lines:
            return d.key_lines[key]
        return d.line
    return None


def _float(value, what: str, line, error=ValidationError) -> float:
    if isinstance(value, bool):
        raise error(f"{what}: expected a number, got {value!r}", line)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise error(f"{what}: expected a number, got {value!r}", line) from None


def _prob(value, what: str, line, error=ValidationError) -> float:
    p = _float(value, what, line, error)
    if not 0.0 <= p <= 1.0:
        raise error(f"{what}: probability {p!r} outside [0, 1]", line)
    return p


def _names(value, what: str, line) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
        raise ValidationError(f"{what}: expected a list of variable names", line)
    return tuple(value)


def _check_version(data, error):
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise error(f"unsupported or missing version {version!r} (expected {FORMAT_VERSION})",
                    _line(data, "version") or 1)


def _unknown_keys(d, allowed, what, error=ValidationError):
    extra = [k for k in d if k not in allowed]
    if extra:
        raise error(f"{what}: unknown field {extra[0]!r}", _line(d, extra[0]))


@dataclass
class LegBlock:
    name: str
    inputs: tuple[str, ...]
    output: str
    table: tuple[float, ...] | None = None
    marginals: dict[str, float] = field(default_factory=dict)
    events: tuple[EventConstraint, ...] = ()
    line: int | None = field(default=None, compare=False)

    @property
    def vars(self) -> tuple[str, ...]:
        return self.inputs + (self.output,)


@dataclass
class EvidenceBlock:
    name: str
    targets: dict[str, float]
    line: int | None = field(default=None, compare=False)


@dataclass
class NetDocument:
    legs: list[LegBlock]
    marginals: dict[str, float] = field(default_factory=dict)
    evidence: list[EvidenceBlock] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def leg_line(self, index: int) -> int | None:
        return self.legs[index].line


def _parse_events(raw, where, line) -> tuple[EventConstraint, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ValidationError(f"{where}: events must be a list", line)
    out = []
    for item in raw:
        ln = _line(item) or line
        if not isinstance(item, dict) or "event" not in item or "p" not in item:
            raise ValidationError(f"{where}: each event needs 'event' and 'p'", ln)
        ev = item["event"]
        if not isinstance(ev, dict) or not ev:
            raise ValidationError(f"{where}: 'event' must map variables to 0/1", ln)
        try:
            out.append(EventConstraint(tuple((str(k), v) for k, v in ev.items()),
                                       _prob(item["p"], f"{where} event", ln)))
        except ValidationError as exc:
            raise ValidationError(str(exc), ln) from None
    return tuple(out)


def _parse_marginals(raw, where, line) -> dict[str, float]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{where}: marginals must map variables to probabilities", line)
    return {str(k): _prob(v, f"{where} marginal {k}", _line(raw, k) or line) for k, v in raw.items()}


def parse_net(text: str) -> NetDocument:
    """Parse a net document; raises :class:`ValidationError` with a line number."""
    data = _load_yaml(text)
    _check_version(data, ValidationError)
    _unknown_keys(data, {"version", "legs", "marginals", "evidence", "variables"}, "net document")
    raw_legs = data.get("legs")
    if not isinstance(raw_legs, list) or not raw_legs:
        raise ValidationError("net document needs a non-empty 'legs' list", _line(data, "legs") or 1)
    legs = []
    for i, raw in enumerate(raw_legs):
        ln = _line(raw) or _line(data, "legs")
        if not isinstance(raw, dict):
            raise ValidationError(f"LEG #{i + 1} must be a mapping", ln)
        _unknown_keys(raw, {"name", "inputs", "output", "table", "constraints"}, f"LEG #{i + 1}")
        name = str(raw.get("name", f"L{i}"))
        if "inputs" not in raw or "output" not in raw:
            raise ValidationError(f"LEG {name}: needs 'inputs' and 'output'", ln)
        inputs = _names(raw["inputs"], f"LEG {name} inputs", _line(raw, "inputs"))
        output = raw["output"]
        if not isinstance(output, str) or not output:
            raise ValidationError(f"LEG {name}: output must be a variable name", _line(raw, "output"))
        if output in inputs or len(set(inputs)) != len(inputs):
            raise ValidationError(f"LEG {name}: variables must be distinct", ln)
        block = LegBlock(name, inputs, output, line=ln)
        if ("table" in raw) == ("constraints" in raw):
            raise ValidationError(f"LEG {name}: give exactly one of 'table' or 'constraints'", ln)
        if "table" in raw:
            tl = _line(raw, "table")
            tab = raw["table"]
            k = len(inputs) + 1
            if not isinstance(tab, list) or len(tab) != 2**k:
                raise ValidationError(f"LEG {name}: table must list {2**k} probabilities", tl)
            block.table = tuple(_prob(p, f"LEG {name} table entry P{n}", tl) for n, p in enumerate(tab))
            total = math.fsum(block.table)
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(f"LEG {name}: table sums to {total!r}, expected 1", tl)
        else:
            c = raw["constraints"]
            cl = _line(raw, "constraints")
            if c is None:
                c = {}
            if not isinstance(c, dict):
                raise ValidationError(f"LEG {name}: constraints must be a mapping", cl)
            _unknown_keys(c, {"marginals", "events"}, f"LEG {name} constraints")
            block.marginals = _parse_marginals(c.get("marginals"), f"LEG {name}", cl)
            block.events = _parse_events(c.get("events"), f"LEG {name}", cl)
            for v in list(block.marginals) + [v for e in block.events for v in e.variables]:
                if v not in block.vars:
                    raise ValidationError(f"LEG {name}: constraint on {v!r}, which is not in this LEG", cl)
        legs.append(block)
    names = [b.name for b in legs]
    for b in legs:
        if names.count(b.name) > 1:
            raise ValidationError(f"duplicate LEG name {b.name!r}", b.line)
    all_vars = {v for b in legs for v in b.vars}
    declared = data.get("variables")
    if declared is not None:
        declared = _names(declared, "variables", _line(data, "variables"))
        missing = all_vars - set(declared)
        if missing:
            raise ValidationError(f"variables used but not declared: {sorted(missing)}",
                                  _line(data, "variables"))
    marginals = _parse_marginals(data.get("marginals"), "net", _line(data, "marginals"))
    for v in marginals:
        if v not in all_vars:
            raise ValidationError(f"marginal given for unknown variable {v!r}", _line(data, "marginals"))
    evidence = []
    raw_ev = data.get("evidence") or []
    if not isinstance(raw_ev, list):
        raise ValidationError("'evidence' must be a list", _line(data, "evidence"))
    for i, raw in enumerate(raw_ev):
        ln = _line(raw) or _line(data, "evidence")
        if not isinstance(raw, dict) or not isinstance(raw.get("targets"), dict):
            raise ValidationError("each evidence block needs a 'targets' mapping", ln)
        targets = {}
        for v, p in raw["targets"].items():
            if v not in all_vars:
                raise ValidationError(f"evidence for unknown variable {v!r}", _line(raw["targets"], v) or ln)
            targets[str(v)] = _prob(p, f"evidence {v}", _line(raw["targets"], v) or ln)
        evidence.append(EvidenceBlock(str(raw.get("name", f"E{i}")), targets, ln))
    return NetDocument(legs, marginals, evidence)


def _fmt(p: float) -> float:
    # yaml writes floats with repr, which parses back to the same double
    return float(p)


def dump_net(doc: NetDocument) -> str:
    legs = []
    for b in doc.legs:
        entry: dict[str, Any] = {"name": b.name, "inputs": list(b.inputs), "output": b.output}
        if b.table is not None:
            entry["table"] = [_fmt(p) for p in b.table]
        else:
            c: dict[str, Any] = {}
            if b.marginals:
                c["marginals"] = {v: _fmt(p) for v, p in b.marginals.items()}
            if b.events:
                c["events"] = [{"event": dict(e.event), "p": _fmt(e.p)} for e in b.events]
            entry["constraints"] = c
        legs.append(entry)
    data: dict[str, Any] = {"version": doc.version, "legs": legs}
    if doc.marginals:
        data["marginals"] = {v: _fmt(p) for v, p in doc.marginals.items()}
    if doc.evidence:
        data["evidence"] = [{"name": e.name, "targets": {v: _fmt(p) for v, p in e.targets.items()}}
                            for e in doc.evidence]
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


def build_net(doc: NetDocument) -> LegNet:
    """Turn a document into a net, estimating LEGs given by constraints."""
    if all(b.table is not None for b in doc.legs) and not doc.marginals:
        legs = []
        for b in doc.legs:
            try:
                legs.append(Leg(Cmd(b.vars, b.table, b.output), b.name))
            except ValidationError as exc:
                raise ValidationError(f"LEG {b.name}: {exc}", b.line) from None
        return LegNet(legs)
    if any(b.table is not None for b in doc.legs):
        b = next(b for b in doc.legs if b.table is not None)
        raise ValidationError("mixing explicit tables with constraint blocks is not supported", b.line)
    events = [e for b in doc.legs for e in b.events]
    marginals = dict(doc.marginals)
    for b in doc.legs:
        for v, p in b.marginals.items():
            if v in marginals and marginals[v] != p:
                raise ValidationError(f"LEG {b.name}: marginal for {v} conflicts with another block", b.line)
            marginals[v] = p
    return estimate_net([(b.inputs, b.output) for b in doc.legs],
                        PriorConstraints(marginals, events), names=[b.name for b in doc.legs])


def net_to_document(net: LegNet, evidence: list[EvidenceBlock] | None = None) -> NetDocument:
    legs = []
    for leg in net.legs:
        cmd = leg.cmd
        if cmd.vars[-1] != cmd.output:
            raise ValidationError(f"LEG {leg.name}: output must be the most significant variable to serialize")
        legs.append(LegBlock(leg.name, cmd.inputs, cmd.output, tuple(float(p) for p in cmd.table)))
    return NetDocument(legs, evidence=list(evidence or []))


def load_net_document(path: str | Path) -> NetDocument:
    return parse_net(Path(path).read_text())


def load_net(path: str | Path) -> LegNet:
    if str(path).startswith("builtin:"):
        from .tables import builtin_net
        return builtin_net(str(path)[len("builtin:"):])
    return build_net(load_net_document(path))


def parse_evidence(spec: str) -> dict[str, float]:
    """``"I1=0.9,I2=0.1"`` -> ``{"I1": 0.9, "I2": 0.1}`` (order kept)."""
    out: dict[str, float] = {}
    for part in filter(None, (s.strip() for s in spec.split(","))):
        if "=" not in part:
            raise ConfigError(f"evidence item {part!r} is not VAR=P")
        v, p = (s.strip() for s in part.split("=", 1))
        if not v:
            raise ConfigError(f"evidence item {part!r} has no variable")
        if v in out:
            raise ConfigError(f"evidence for {v!r} given twice")
        out[v] = _prob(p, f"evidence {v}", None, ConfigError)
    if not out:
        raise ConfigError("no evidence given")
    return out


# ---------------------------------------------------------------- scenarios

def _logistic(raw, where, line) -> Logistic:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping with midpoint/slope/floor/ceiling", line)
    _unknown_keys(raw, {"midpoint", "slope", "floor", "ceiling"}, where, ConfigError)
    vals = {k: _float(raw[k], f"{where} {k}", _line(raw, k), ConfigError)
            for k in ("midpoint", "slope", "floor", "ceiling") if k in raw}
    try:
        return Logistic(**vals)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}", _line(raw)) from None


def _per_test(raw, ids, where, line) -> dict[str, float]:
    if isinstance(raw, (int, float, str)) and not isinstance(raw, bool):
        v = _float(raw, where, line, ConfigError)
        return {t: v for t in ids}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a number or a mapping test -> number", line)
    for k in raw:
        if k not in ids:
            raise ConfigError(f"{where}: unknown test {k!r}", _line(raw, k) or line)
    return {k: _float(v, f"{where} {k}", _line(raw, k) or line, ConfigError) for k, v in raw.items()}


SCENARIO_KEYS = {"version", "net", "goal", "slot_count", "seed", "thresholds", "eps", "fusion_mode",
                 "pipeline", "prior_yes", "decay", "chain_order", "scoring", "tests", "objects",
                 "tol", "max_iter"}


def parse_scenario(text: str, base_dir: str | Path = ".") -> Scenario:
    """Parse a scenario document into a checked :class:`Scenario`."""
    data = _load_yaml(text, ConfigError)
    _check_version(data, ConfigError)
    _unknown_keys(data, SCENARIO_KEYS, "scenario", ConfigError)
    raw_tests = data.get("tests")
    if not isinstance(raw_tests, list) or not raw_tests:
        raise ConfigError("scenario needs a non-empty 'tests' list", _line(data, "tests") or 1)
    tests = []
    for raw in raw_tests:
        ln = _line(raw)
        if not isinstance(raw, dict) or "id" not in raw:
            raise ConfigError("each test needs an 'id'", ln)
        _unknown_keys(raw, {"id", "variable", "applicable", "false_alarm", "miss"}, f"test {raw['id']}",
                      ConfigError)
        tid = str(raw["id"])
        app = raw.get("applicable") or {}
        if not isinstance(app, dict):
            raise ConfigError(f"test {tid}: applicable must be a mapping with min/max", _line(raw, "applicable"))
        lo = _float(app.get("min", -math.inf), f"test {tid} applicable min", _line(app, "min"), ConfigError)
        hi = _float(app.get("max", math.inf), f"test {tid} applicable max", _line(app, "max"), ConfigError)
        if lo > hi:
            raise ConfigError(f"test {tid}: applicable min exceeds max", _line(raw, "applicable"))
        for key in ("false_alarm", "miss"):
            if key not in raw:
                raise ConfigError(f"test {tid}: missing {key!r} curve", ln)
        var = raw.get("variable")
        if var is not None and not isinstance(var, str):
            raise ConfigError(f"test {tid}: variable must be a name", _line(raw, "variable"))
        tests.append(TestModel(
            tid,
            _logistic(raw["false_alarm"], f"test {tid} false_alarm", _line(raw, "false_alarm")),
            _logistic(raw["miss"], f"test {tid} miss", _line(raw, "miss")),
            var, lo, hi))
    ids = [t.id for t in tests]
    objects = []
    raw_objs = data.get("objects")
    if not isinstance(raw_objs, list) or not raw_objs:
        raise ConfigError("scenario needs a non-empty 'objects' list", _line(data, "objects") or 1)
    for raw in raw_objs:
        ln = _line(raw)
        if not isinstance(raw, dict):
            raise ConfigError("each object group must be a mapping", ln)
        _unknown_keys(raw, {"truth", "count", "mean", "sigma"}, "object group", ConfigError)
        truth = raw.get("truth")
        if truth not in ("Y", "N"):
            raise ConfigError(f"object truth must be Y or N, got {truth!r}", _line(raw, "truth") or ln)
        count = raw.get("count", 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ConfigError("object count must be a positive integer", _line(raw, "count") or ln)
        mean = _per_test(raw.get("mean", 0.0), ids, "object mean", _line(raw, "mean") or ln)
        sigma = _per_test(raw.get("sigma", 0.0), ids, "object sigma", _line(raw, "sigma") or ln)
        missing = [t for t in ids if t not in mean or t not in sigma]
        if missing:
            raise ConfigError(f"object group lacks mean/sigma for tests {missing}", ln)
        if any(s < 0 for s in sigma.values()):
            raise ConfigError("object sigma must be non-negative", _line(raw, "sigma") or ln)
        objects.extend(ObjectSpec(truth, mean, sigma) for _ in range(count))

    def get(key, default, conv):
        if key not in data:
            return default
        return conv(data[key], key, _line(data, key), ConfigError)

    def as_int(v, what, line, error):
        if not isinstance(v, int) or isinstance(v, bool):
            raise error(f"{what}: expected an integer, got {v!r}", line)
        return v

    def as_str(v, what, line, error):
        if not isinstance(v, str):
            raise error(f"{what}: expected a string, got {v!r}", line)
        return v

    thresholds = data.get("thresholds") or {}
    if not isinstance(thresholds, dict):
        raise ConfigError("thresholds must map theta_n/theta_y to numbers", _line(data, "thresholds"))
    scoring = data.get("scoring") or {}
    if not isinstance(scoring, dict):
        raise ConfigError("scoring must map reward/penalty/unknown to numbers", _line(data, "scoring"))
    chain_order = data.get("chain_order")
    if chain_order is not None:
        if not isinstance(chain_order, list):
            raise ConfigError("chain_order must be a list of test ids", _line(data, "chain_order"))
        chain_order = [str(t) for t in chain_order]

    net = None
    if "net" in data:
        ref = as_str(data["net"], "net", _line(data, "net"), ConfigError)
        path = ref if ref.startswith("builtin:") else Path(base_dir) / ref
        try:
            net = load_net(path)
        except FileNotFoundError:
            raise ConfigError(f"net file {str(path)!r} not found", _line(data, "net")) from None
        except LegNetError as exc:
            raise ConfigError(f"net {ref!r}: {exc}", _line(data, "net")) from None

    sc = Scenario(
        tests=tests, objects=objects,
        slot_count=get("slot_count", 10, as_int),
        seed=get("seed", 0, as_int),
        theta_n=_float(thresholds.get("theta_n", 0.2), "theta_n", _line(thresholds, "theta_n"), ConfigError),
        theta_y=_float(thresholds.get("theta_y", 0.8), "theta_y", _line(thresholds, "theta_y"), ConfigError),
        eps=get("eps", 1e-6, _float),
        fusion_mode=get("fusion_mode", "fresh-prior", as_str),
        pipeline=get("pipeline", "both", as_str),
        net=net,
        goal=get("goal", None, as_str),
        chain_order=chain_order,
        prior_yes=get("prior_yes", 0.5, _float),
        decay=get("decay", 0.0, _float),
        tol=get("tol", 1e-7, _float),
        max_iter=get("max_iter", 200, as_int),
        reward=_float(scoring.get("reward", 1.0), "reward", _line(scoring, "reward"), ConfigError),
        penalty=_float(scoring.get("penalty", -1.0), "penalty", _line(scoring, "penalty"), ConfigError),
        unknown_score=_float(scoring.get("unknown", 0.0), "unknown", _line(scoring, "unknown"), ConfigError),
    )
    try:
        sc.check()
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _guess_line(data, str(exc))
        raise
    return sc


def _guess_line(data, message: str) -> int | None:
    for key in data:
        if isinstance(key, str) and key in message:
            return _line(data, key)
    if "test" in message or "bound" in message:
        return _line(data, "tests")
    if "net" in message or "goal" in message:
        return _line(data, "net")
    return 1


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path.parent)
