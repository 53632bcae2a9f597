import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legnet.errors import ValidationError
from legnet.markov import BinaryBelief, TestOutput, chain, stationary, step

unit = st.floats(0.0, 1.0)


def test_step_examples():
    b = step(BinaryBelief(0.5, 0.5), TestOutput(0.2, 0.1))
    assert b.p_no == pytest.approx(0.45, abs=1e-12) and b.p_yes == pytest.approx(0.55, abs=1e-12)
    b = step(BinaryBelief(0.0, 1.0), TestOutput(0.2, 0.1))
    assert b.p_no == pytest.approx(0.1, abs=1e-12) and b.p_yes == pytest.approx(0.9, abs=1e-12)
    b0 = BinaryBelief(0.3, 0.7)
    assert step(b0, TestOutput(0.0, 0.0)) == b0


def test_chain_examples():
    b = BinaryBelief(0.5, 0.5)
    t1, t2 = TestOutput(0.2, 0.1), TestOutput(0.3, 0.05)
    assert chain(b, []) == b
    assert chain(b, [t1]) == step(b, t1)
    out = chain(b, [t1, t2])
    assert out.p_no == pytest.approx(0.3425, abs=1e-12) and out.p_yes == pytest.approx(0.6575, abs=1e-12)


def test_chain_is_order_dependent():
    b = BinaryBelief(0.5, 0.5)
    t1, t2 = TestOutput(0.2, 0.1), TestOutput(0.3, 0.05)
    assert abs(chain(b, [t1, t2]).p_yes - chain(b, [t2, t1]).p_yes) > 1e-3


def test_contraction_to_stationary():
    t = TestOutput(0.2, 0.1)
    b = BinaryBelief(1.0, 0.0)
    for _ in range(200):
        b = step(b, t)
    assert b.p_yes == pytest.approx(stationary(t).p_yes, abs=1e-12)
    assert stationary(t).p_yes == pytest.approx(2 / 3)


def test_validation():
    with pytest.raises(ValidationError):
        BinaryBelief(0.6, 0.6)
    with pytest.raises(ValidationError):
        TestOutput(1.2, 0.0)
    with pytest.raises(ValidationError):
        stationary(TestOutput(0.0, 0.0))


@settings(max_examples=300)
@given(unit, st.lists(st.tuples(unit, unit), max_size=8))
def test_simplex_preserved(p_yes, outputs):
    b = chain(BinaryBelief.from_yes(p_yes), [TestOutput(*o) for o in outputs])
    assert b.p_no >= 0 and b.p_yes >= 0
    assert abs(b.p_no + b.p_yes - 1.0) <= 1e-12
