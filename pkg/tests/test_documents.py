from pathlib import Path

import numpy as np
import pytest

from legnet.documents import (
    build_net, dump_net, load_net, load_net_document, load_scenario, net_to_document, parse_evidence,
    parse_net, parse_scenario,
)
from legnet.errors import ConfigError, ValidationError
from legnet.net import consistency_error, validate

DATA = Path(__file__).resolve().parent.parent / "data"


def test_figure2_document(fig2_table):
    doc = load_net_document(DATA / "nets" / "figure2.yaml")
    net = build_net(doc)
    np.testing.assert_array_equal(net.legs[0].cmd.table, fig2_table)
    assert net.legs[0].cmd.vars == ("I1", "I2", "O")
    assert doc.evidence[0].targets == {"I1": 0.9, "I2": 0.1}
    assert list(doc.evidence[0].targets) == ["I1", "I2"]


@pytest.mark.parametrize("name", ["figure2.yaml", "chain3.yaml", "chain3_constraints.yaml"])
def test_round_trip(name):
    doc = load_net_document(DATA / "nets" / name)
    again = parse_net(dump_net(doc))
    assert again == doc
    assert parse_net(dump_net(again)) == again


def test_round_trip_of_estimated_net_is_exact():
    net = load_net(DATA / "nets" / "chain3_constraints.yaml")
    doc = net_to_document(net)
    back = build_net(parse_net(dump_net(doc)))
    for a, b in zip(net.legs, back.legs):
        assert a.cmd.table.tobytes() == b.cmd.table.tobytes()


def test_decimal_strings_parse_exactly():
    text = """version: 1
legs:
  - inputs: [a, b]
    output: c
    table: ["0.1", "0.2", "0.3", "0.05", "0.05", "0.1", "0.1", "0.1"]
"""
    net = build_net(parse_net(text))
    assert net.legs[0].cmd.table[0] == 0.1 and net.legs[0].cmd.table[2] == 0.3


@pytest.mark.parametrize("text, line, match", [
    ("version: 2\nlegs: []\n", 1, "version"),
    ("version: 1\nlegs:\n  - inputs: [a, b]\n    output: c\n    table: [0.5, 0.5]\n", 5, "8 probabilities"),
    ("version: 1\nlegs:\n  - inputs: [a, b]\n    output: c\n    table: [1, 0, 0, 0, 0, 0, 0, 0.5]\n", 5, "sums to"),
    ("version: 1\nlegs:\n  - inputs: [a, b]\n    output: c\n", 3, "exactly one of"),
    ("version: 1\nlegs:\n  - inputs: [a, b]\n    output: c\n    colour: red\n    table: []\n", 5, "unknown field"),
    ("version: 1\nlegs: [\n", 3, "YAML syntax"),
    ("version: 1\nlegs:\n  - inputs: [a, b]\n    output: c\n    constraints:\n      marginals: {z: 0.2}\n",
     5, "not in this LEG"),
])
def test_line_anchored_errors(text, line, match):
    with pytest.raises(ValidationError, match=match) as info:
        parse_net(text)
    assert info.value.line == line


def test_malformed_nets_validate_with_diagnostics():
    codes = {}
    for name in ("cycle", "oversized_intersection", "inconsistent"):
        net = load_net(DATA / "nets" / f"{name}.yaml")
        codes[name] = [d.code for d in validate(net)]
    assert codes == {"cycle": ["cycle"], "oversized_intersection": ["intersection-size"],
                     "inconsistent": ["inconsistent"]}


def test_constraint_net_is_consistent():
    net = load_net(DATA / "nets" / "chain3_constraints.yaml")
    assert consistency_error(net) <= 1e-10 and validate(net) == []


def test_parse_evidence():
    assert parse_evidence("I1=0.9, I2=0.1") == {"I1": 0.9, "I2": 0.1}
    for bad in ("I1", "I1=2", "I1=0.1,I1=0.2", "=0.3", ""):
        with pytest.raises(ConfigError):
            parse_evidence(bad)


def test_scenarios_load():
    sc = load_scenario(DATA / "scenarios" / "three_tests.yaml")
    assert len(sc.objects) == 500 and len(sc.tests) == 3
    assert sc.eps == 1e-6 and sc.fusion_mode == "carry-posterior" and sc.chain_order == ["T3", "T2", "T1"]
    assert sc.tests[1].applicable_min == -3.0
    z = load_scenario(DATA / "scenarios" / "zero_noise.yaml")
    assert z.net.variables == ("I1", "I2", "O") and z.objects[0].sigma == {"A": 0.0, "B": 0.0}


@pytest.mark.parametrize("patch, match", [
    ({"fusion_mode: carry-posterior": "fusion_mode: sometimes"}, "fusion mode"),
    ({"variable: T3": "variable: Q"}, "unknown net variable"),
    ({"count: 250": "count: -1"}, "count"),
    ({"net: ../nets/chain3.yaml": "net: ../nets/missing.yaml"}, "not found"),
    ({"theta_n: 0.2": "theta_n: 0.9"}, "thresholds"),
])
def test_scenario_errors(patch, match):
    text = (DATA / "scenarios" / "three_tests.yaml").read_text()
    for a, b in patch.items():
        assert a in text
        text = text.replace(a, b, 1)
    with pytest.raises(ConfigError, match=match) as info:
        parse_scenario(text, DATA / "scenarios")
    assert info.value.line is not None
