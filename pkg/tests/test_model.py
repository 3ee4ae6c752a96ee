import random
from fractions import Fraction

import pytest

from oracles import joint_table
from seqignore.dsl import DSLError, parse_model
from seqignore.fixtures import fixture
from seqignore.model import (
    UNDEFINED,
    Kernel,
    Regime,
    RegimeModel,
    Role,
    StateSpaceError,
    Variable,
    condition,
    marginalize,
    materialize_joint,
    validate_model,
)
from seqignore.random_models import random_model

F = Fraction


def small_model(y_row_s=(F(1, 2), F(1, 2))):
    v = (
        Variable("L1", Role.OBSERVABLE, ("0", "1")),
        Variable("A1", Role.ACTION, ("0", "1")),
        Variable("Y", Role.OUTCOME, ("0", "1")),
    )
    doms = {x.name: x.domain for x in v}
    l1 = Kernel("L1", (), {(): (F(1, 4), F(3, 4))})
    a_o = Kernel("A1", ("L1",), {("0",): (F(1), F(0)), ("1",): (F(1, 3), F(2, 3))})
    a_s = Kernel.point("A1", (), doms, lambda _: "1")
    y = Kernel("Y", ("A1",), {("0",): (F(1), F(0)), ("1",): y_row_s})
    return RegimeModel(
        v,
        {
            "o": Regime("o", "observational", {"L1": l1, "A1": a_o, "Y": y}),
            "s": Regime("s", "interventional", {"L1": l1, "A1": a_s, "Y": y}),
        },
    )


def test_stages_of_extended_base():
    m = fixture("discretesi").model
    (first, last) = m.base.stages
    assert first.observables == () and first.unobserved == ("U",) and first.action == "A"
    assert last.observables == ("Y",) and last.action is None
    assert m.base.n == 1
    assert m.base.domain_variables == ("A", "Y")
    assert m.base.extended_past(2) == ("U", "A")
    assert m.base.domain_past(2) == ("A",)


def test_joint_by_hand():
    j = materialize_joint(small_model(), "o")
    # L1=1 (3/4), A1=1 (2/3), Y=1 (1/2)
    assert j[("1", "1", "1")] == F(1, 4)
    assert j[("0", "1", "0")] == 0
    assert j.total == 1
    assert j.prob(A1="1") == F(1, 2)
    assert j.conditional({"Y": "0"}, {"A1": "0"}) == 1


def test_conditional_on_null_event_is_undefined():
    j = materialize_joint(small_model(), "s")
    assert j.prob(A1="0") == 0
    assert j.conditional({"Y": "1"}, {"A1": "0"}) is UNDEFINED
    assert condition(j, {"A1": "0"}) is UNDEFINED


def test_marginalize_and_condition():
    j = materialize_joint(small_model(), "o")
    m = marginalize(j, ["A1"])
    assert m.variables == ("A1",)
    assert m[("0",)] == F(1, 2)
    c = condition(j, {"L1": "1"})
    assert c.variables == ("A1", "Y")
    assert c.total == 1
    assert c.prob(A1="1") == F(2, 3)


@pytest.mark.parametrize("seed", range(40))
def test_joint_matches_product_of_rows(seed):
    m = random_model(random.Random(seed))
    for rid in m.regimes:
        names, table = joint_table(m, rid)
        assert dict(materialize_joint(m, rid).items()) == table
        assert sum(table.values()) == 1


def test_validation_reports_bad_rows_and_order():
    m = small_model(y_row_s=(F(1, 2), F(1, 3)))
    problems = validate_model(m)
    assert any("sums to 5/6" in p for p in problems)

    v = small_model().variables
    bad = Kernel("L1", ("Y",), {("0",): (F(1), F(0)), ("1",): (F(1), F(0))})
    good = small_model().regimes
    regimes = {
        rid: Regime(rid, r.kind, {**r.kernels, "L1": bad}) for rid, r in good.items()
    }
    problems = validate_model(RegimeModel(v, regimes))
    assert any("ordering violation" in p for p in problems)


def test_free_row_reached_with_positive_mass():
    m = small_model()
    y_free = Kernel("Y", ("A1",), {("0",): None, ("1",): (F(1, 2), F(1, 2))})
    # under s, A1=0 has mass 0 so the free row is fine; under o it is reached
    regimes = {
        "o": m.regimes["o"],
        "s": Regime("s", "interventional", {**m.regimes["s"].kernels, "Y": y_free}),
    }
    assert validate_model(RegimeModel(m.variables, regimes)) == []
    regimes["o"] = Regime("o", "observational", {**m.regimes["o"].kernels, "Y": y_free})
    problems = validate_model(RegimeModel(m.variables, regimes))
    assert problems and "positive probability" in problems[0]


def test_base_shape_errors():
    text = """
variables:
  A : action {0, 1}
  U : unobserved {0, 1}
  Y : outcome {0, 1}
shared:
  kernel U : uniform
  kernel Y : uniform
regime o : observational
  kernel A : uniform
regime s : interventional
  kernel A := 1
"""
    with pytest.raises(DSLError, match="unobserved variables after the last action"):
        parse_model(text)


def test_state_cap(monkeypatch):
    m = small_model()
    monkeypatch.setenv("SEQIGNORE_MAX_STATES", "4")
    fresh = RegimeModel(m.variables, m.regimes)
    with pytest.raises(StateSpaceError, match="SEQIGNORE_MAX_STATES"):
        materialize_joint(fresh, "o")
    monkeypatch.setenv("SEQIGNORE_MAX_STATES", "8")
    assert materialize_joint(RegimeModel(m.variables, m.regimes), "o").total == 1
