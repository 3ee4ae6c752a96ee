import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import oracles
from seqignore.conditions import (
    ConditionError,
    ImplicationViolation,
    PreconditionError,
    check_control_strategy,
    check_extended_positivity,
    check_extended_stability,
    check_lemma1,
    check_positivity,
    check_sequential_irrelevance,
    check_sequential_randomization,
    check_simple_stability,
    condition_report,
)
from seqignore.dsl import parse_model
from seqignore.fixtures import data_text, fixture
from seqignore.random_models import random_model, stable_model, randomized_model, irrelevant_model

F = Fraction
seeds = st.integers(0, 10**6)


def action_ci(model, regime):
    """``A_i _||_ Ū_i | L̄_i, Ā_{i-1}`` at every stage, by the product rule."""
    names, table = oracles.joint_table(model, regime)
    base = model.base
    for stg in base.stages[:-1]:
        ubar = base.unobserved_through(stg.index)
        if ubar and not oracles.ci_holds(
            names, model.domains, table, [stg.action], ubar, base.history_before_action(stg.index)
        ):
            return False
    return True


def irrelevance(model, regime):
    names, table = oracles.joint_table(model, regime)
    base = model.base
    for stg in base.stages:
        ubar = base.unobserved_through(stg.index - 1)
        if stg.observables and ubar and not oracles.ci_holds(
            names, model.domains, table, stg.observables, ubar, base.domain_past(stg.index)
        ):
            return False
    return True


def lemma_cells_hold(model, o, s):
    """Where the history has s-mass and the full cell has o-mass, the cell has s-mass."""
    base = model.base
    no, to = oracles.joint_table(model, o)
    ns, ts = oracles.joint_table(model, s)
    for stg in base.stages:
        hist = list(base.ordered(base.observables_through(stg.index) + base.actions_through(stg.index)))
        full = list(base.ordered(hist + list(base.unobserved_through(stg.index))))
        hs = oracles.marginal(ns, ts, hist)
        fs, fo = oracles.marginal(ns, ts, full), oracles.marginal(no, to, full)
        pos = [full.index(h) for h in hist]
        for cell in fo:
            if tuple(cell[i] for i in pos) in hs and cell not in fs:
                return False
    return True


@given(seeds)
def test_checkers_agree_with_oracles(seed):
    m = random_model(random.Random(seed), max_stages=2, max_domain=3)
    assert bool(check_simple_stability(m, "s")) == oracles.simple_stability(m, "o", "s")
    assert bool(check_positivity(m, "s")) == oracles.positivity(m, "o", "s")
    if m.base.extended:
        assert bool(check_extended_stability(m, "s")) == oracles.extended_stability(m, "o", "s")
        assert bool(check_control_strategy(m, "s")) == action_ci(m, "s")
        assert bool(check_sequential_randomization(m)) == action_ci(m, "o")
        assert bool(check_sequential_irrelevance(m, "s")) == irrelevance(m, "s")
        assert bool(check_sequential_irrelevance(m, "o")) == irrelevance(m, "o")
        no, to = oracles.joint_table(m, "o")
        ns, ts = oracles.joint_table(m, "s")
        assert bool(check_extended_positivity(m, "s")) == all(c in to for c in ts)


@given(seeds)
def test_stable_models_are_stable(seed):
    m = stable_model(random.Random(seed), max_stages=2)
    assert check_extended_stability(m, "s")
    assert check_control_strategy(m, "s")
    lemma = check_lemma1(m, "s")
    assert bool(lemma) == lemma_cells_hold(m, "o", "s")
    assert lemma


@given(seeds)
def test_report_has_no_violations(seed):
    rng = random.Random(seed)
    for make in (randomized_model, irrelevant_model):
        report = condition_report(make(rng, max_stages=2), "s", strict=True)
        assert report["simple-stability"]
        assert not report.violations


def test_positivity_witness_is_minimal():
    rep = check_positivity(fixture("appb").model, "s")
    assert not rep
    (w,) = rep.witnesses
    assert w.event == (("A", "1"),)
    assert (w.s_mass, w.o_mass) == (1, 0)


def test_table_example_verdicts():
    m = fixture("discretesi").model
    r = condition_report(m, "s")
    verdicts = {k: bool(v) for k, v in r.checks.items()}
    assert verdicts == {
        "simple-stability": False,
        "positivity": True,
        "extended-stability": True,
        "extended-positivity": False,
        "control-strategy": True,
        "sequential-randomization": False,
        "sequential-irrelevance(o)": True,
        "sequential-irrelevance(s)": False,
        "lemma1": True,
    }
    assert not r.transfer_safe
    (w,) = r["extended-positivity"].witnesses
    assert w.event == (("U", "1"), ("A", "1"))
    assert w.s_mass == F(175, 1500) and w.o_mass == 0


def test_lemma_needs_its_premises():
    text = data_text("discretesi.model").replace(
        "kernel A : 4/5 1/5", "kernel A | U :\n    0 := 0\n    1 := 1"
    )
    m = parse_model(text)
    with pytest.raises(PreconditionError) as info:
        check_lemma1(m, "s")
    assert [r.condition for r in info.value.failed] == ["control-strategy"]


def test_extended_checks_need_unobserved_variables():
    m = fixture("xor").model
    with pytest.raises(ConditionError, match="extended information base"):
        check_extended_stability(m, "s")
    assert set(condition_report(m, "s").checks) == {"simple-stability", "positivity"}


def test_checks_refuse_observational_regime():
    m = fixture("discretesi").model
    with pytest.raises(ConditionError, match="not interventional"):
        check_simple_stability(m, "o")
    # the control-strategy check may be pointed at any regime
    assert not check_control_strategy(m, "o")


def test_violation_is_raised_in_strict_mode(monkeypatch):
    import seqignore.conditions as c

    m = fixture("discretesi").model
    fake = c.IMPLICATIONS + (("bogus", ("positivity",), "simple-stability"),)
    monkeypatch.setattr(c, "IMPLICATIONS", fake)
    assert condition_report(m, "s").violations
    with pytest.raises(ImplicationViolation, match="bogus"):
        condition_report(m, "s", strict=True)
