import random
from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from seqignore.conditions import check_control_strategy
from seqignore.dsl import parse_model
from seqignore.fixtures import data_text, fixture
from seqignore.grecursion import OutcomeFunctional
from seqignore.model import Kernel, materialize_joint
from seqignore.random_models import random_functional, random_model
from seqignore.strategy import (
    NotIdentifiable,
    Strategy,
    StrategyError,
    enumerate_strategies,
    evaluate,
    instantiate_regime,
    optimize,
    static_strategy,
    strategy_count,
)

F = Fraction
seeds = st.integers(0, 10**6)

TWO_STAGE = """
variables:
  L1 : observable {0, 1}
  A1 : action {0, 1}
  L2 : observable {0, 1, 2}
  A2 : action {0, 1}
  Y : outcome {0, 1}
shared:
  kernel L1 : uniform
  kernel L2 | A1 : uniform
  kernel Y | L2 A2 : uniform
regime o : observational
  kernel A1 : uniform
  kernel A2 : uniform
regime s : interventional
  kernel A1 := 0
  kernel A2 := 0
"""


def test_counts_by_hand():
    assert strategy_count(fixture("xor").model.base) == 2**2
    m = parse_model(TWO_STAGE)
    # A1 sees 2 histories of L1, A2 sees 2 * 3 of (L1, L2)
    assert strategy_count(m.base) == 2**2 * 2**6
    strategies = list(enumerate_strategies(m))
    assert len(strategies) == 256
    ids = [s.id for s in strategies]
    assert len(set(ids)) == 256
    assert ids[0] == "A1=0,0/A2=0,0,0,0,0,0"
    assert ids[1] == "A1=0,0/A2=0,0,0,0,0,1"
    assert ids == sorted(ids)


def test_cap():
    with pytest.raises(StrategyError, match="exceed the cap"):
        list(enumerate_strategies(parse_model(TWO_STAGE), cap=100))


@given(seeds)
def test_instantiated_regimes(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_stages=2, max_domain=3)
    assume(strategy_count(m.base) <= 5000)
    strategies = list(enumerate_strategies(m, cap=5000))
    assert len(strategies) == strategy_count(m.base)
    strat = rng.choice(strategies)
    inst = instantiate_regime(m, strat, "t")
    joint = materialize_joint(inst, "t")
    names = list(joint.variables)
    for cfg, p in joint.items():
        h = dict(zip(names, cfg))
        for a, kernel in strat.decisions.items():
            row = kernel.rows[tuple(h[q] for q in kernel.parents)]
            assert row[m.domain(a).index(h[a])] == 1
    if m.base.extended:
        assert check_control_strategy(inst, "t")
    # nature is copied from the observational regime
    for v in m.variables:
        if v.name not in strat.decisions:
            assert inst.regime("t").kernels[v.name] == m.regime("o").kernels[v.name]


@given(seeds)
def test_affine_rescaling_keeps_the_choice(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_stages=1, max_domain=3)
    assume(strategy_count(m.base) <= 64)
    k = random_functional(rng, m)
    a, b = F(rng.randint(1, 9), rng.randint(1, 9)), F(rng.randint(-9, 9), rng.randint(1, 9))
    first = optimize(m, k)
    second = optimize(m, k.affine(a, b))
    assert first.best.strategy_id == second.best.strategy_id
    assert second.best.consequence == a * first.best.consequence + b


@given(seeds)
def test_verified_transfer_rows_are_correct(seed):
    rng = random.Random(seed)
    m = random_model(rng, max_stages=1, max_domain=3)
    assume(strategy_count(m.base) <= 64)
    k = random_functional(rng, m)
    truth = {r.strategy_id: r.consequence for r in optimize(m, k).rows}
    try:
        result = optimize(m, k, mode="transfer")
    except NotIdentifiable as exc:
        assert all(r.safety == "refused" for r in exc.rows)
        return
    for r in result.rows:
        if r.safety == "verified":
            assert r.consequence == truth[r.strategy_id]
        else:
            assert r.safety == "refused" and r.consequence is None


def test_table_example_transfers_only_the_untreated_arm():
    m = fixture("discretesi").model
    result = optimize(m, OutcomeFunctional.identity(m), mode="transfer")
    assert [(r.strategy_id, r.safety) for r in result.rows] == [("A=0", "verified"), ("A=1", "refused")]
    assert result.best.consequence == F(16, 25)


def test_xor_optimum():
    m = fixture("xor").model
    k = OutcomeFunctional.identity(m)
    oracle = optimize(m, k)
    transfer = optimize(m, k, mode="transfer")
    assert oracle.best.strategy_id == transfer.best.strategy_id == "A1=0,1"
    assert oracle.best.consequence == transfer.best.consequence == 0
    assert [r.consequence for r in oracle.rows] == [F(1, 2), 0, 1, F(1, 2)]


def test_ties_go_to_the_first_encoding():
    m = fixture("xor").model
    result = optimize(m, OutcomeFunctional.constant(m, 3))
    assert result.best.strategy_id == "A1=0,0"


def test_not_identifiable():
    # in the table example A=0 is transferable, since Y given (U, A=0) ignores U;
    # making it depend on U leaves no strategy the observational data can vouch for
    text = data_text("discretesi.model").replace("1 0 : 315/875 560/875", "1 0 : 1/2 1/2")
    m = parse_model(text)
    with pytest.raises(NotIdentifiable) as info:
        optimize(m, OutcomeFunctional.identity(m), mode="transfer")
    assert {r.safety for r in info.value.rows} == {"refused"}


def test_static_strategy_and_bad_strategies():
    m = fixture("discretesi").model
    s = static_strategy(m, {"A": "1"}, "treat")
    assert s.is_static and s.is_deterministic
    inst = instantiate_regime(m, s, "treat")
    assert materialize_joint(inst, "treat").prob(A="1") == 1
    peek = Strategy({"A": Kernel.point("A", ("U",), m.domains, lambda pv: pv["U"])})
    with pytest.raises(StrategyError, match="outside the history"):
        instantiate_regime(m, peek, "peek")
    with pytest.raises(StrategyError, match="observational"):
        instantiate_regime(m, s, "o")
    with pytest.raises(StrategyError, match="is an action"):
        instantiate_regime(m, s, "t", nature={"A": s.decisions["A"]})


def test_evaluate_modes():
    m = fixture("appb").model
    k = OutcomeFunctional.identity(m)
    treat = static_strategy(m, {"A": "1"})
    assert evaluate(m, treat, k).consequence == F(3, 2)
    refused = evaluate(m, treat, k, mode="transfer")
    assert refused.safety == "refused" and refused.consequence is None
    skip = static_strategy(m, {"A": "0"})
    assert evaluate(m, skip, k, mode="transfer").consequence == F(1, 2)


@given(seeds)
def test_oracle_rows_equal_enumeration(seed):
    from seqignore.grecursion import consequence_brute_force

    rng = random.Random(seed)
    m = random_model(rng, max_stages=2, max_domain=2)
    assume(strategy_count(m.base) <= 64)
    k = random_functional(rng, m)
    result = optimize(m, k)
    values = []
    for strat, row in zip(enumerate_strategies(m), result.rows):
        inst = instantiate_regime(m, strat, "t")
        values.append(consequence_brute_force(inst, "t", k))
        assert row.strategy_id == strat.id and row.consequence == values[-1]
    assert result.best.consequence == min(values)
    assert result.best.strategy_id == result.rows[values.index(min(values))].strategy_id


def test_optimize_reports_inherited_kernels():
    result = optimize(fixture("xor").model, OutcomeFunctional.identity(fixture("xor").model))
    assert "observational" in result.notes
    assert result.to_dict()["notes"] == result.notes
