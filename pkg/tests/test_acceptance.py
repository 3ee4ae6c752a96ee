"""Acceptance criteria, one test per criterion.

Each test records a pass/fail line with its runtime; the lines are printed
in pytest's terminal summary and by ``python tests/test_acceptance.py``.
"""

import io
import os
import random
import tempfile
import time
from contextlib import contextmanager
from fractions import Fraction

import oracles
from dags import labelled_dags, queries, unlabelled_dags
from seqignore import cli
from seqignore.ci import check_extended_ci, check_statement, check_stochastic_ci, derivable, mixture_joint
from seqignore.conditions import (
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
from seqignore.diagram import InfluenceDiagram, d_separated, implied_ci, moral_separated
from seqignore.dsl import parse_ci, serialize_model
from seqignore.fixtures import PAIRED_DIAGRAM, fixture, verify_fixture
from seqignore.grecursion import OutcomeFunctional, consequence_brute_force, g_recursion
from seqignore.model import materialize_joint
from seqignore.random_models import random_functional, random_model, randomized_model, irrelevant_model
from seqignore.strategy import optimize

F = Fraction
RESULTS = {}


@contextmanager
def criterion(number, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        RESULTS[number] = ("FAIL", title, time.perf_counter() - start)
        raise
    RESULTS[number] = ("PASS", title, time.perf_counter() - start)


def summary_lines():
    return [
        f"criterion {n}: {status} - {title} ({elapsed:.2f} s)"
        for n, (status, title, elapsed) in sorted(RESULTS.items())
    ]


def run_cli(*argv):
    return cli.run(list(argv), stdout=io.StringIO(), stderr=io.StringIO())


def mass_witness(report):
    return [(dict(w.event), w.s_mass, w.o_mass) for w in report.witnesses]


def discrepancy_at(report, cell, event):
    for w in report.witnesses:
        if dict(w.cell) == cell and dict(w.event) == event:
            return w.left_prob, w.right_prob
    return None


def test_criterion_1_table_example():
    with criterion(1, "table example verdicts, exact"):
        start = time.perf_counter()
        assert verify_fixture("discretesi").passed
        m = fixture("discretesi").model
        ext = check_extended_stability(m, "s")
        assert ext
        w = ext.details["versions"][2]
        assert w.value({"Y": "1"}, {"U": "0", "A": "0"}) == F(16, 25)
        assert w.value({"Y": "1"}, {"U": "1", "A": "1"}) == F(11, 25)
        assert check_control_strategy(m, "s")
        js = materialize_joint(m, "s")
        for u in ("0", "1"):
            assert js.conditional({"A": "1"}, {"U": u}) == F(1, 5)
        assert check_sequential_irrelevance(m, "o")
        irr = check_sequential_irrelevance(m, "s")
        assert not irr
        assert discrepancy_at(irr, {"A": "1"}, {"Y": "1"}) == (F(4, 5), F(11, 25))
        pos = check_extended_positivity(m, "s")
        assert mass_witness(pos) == [({"U": "1", "A": "1"}, F(175, 1500), 0)]
        simple = check_simple_stability(m, "s")
        assert not simple
        assert discrepancy_at(simple, {"A": "1"}, {"Y": "1"}) == (F(4, 5), F(59, 100))
        assert run_cli("fixture", "discretesi", "--verify") == 0
        assert time.perf_counter() - start < 1.0


def test_criterion_2_positivity_failure():
    with criterion(2, "positivity failure, refusal and undefined transfer"):
        start = time.perf_counter()
        m = fixture("appb").model
        pos = check_positivity(m, "s")
        assert mass_witness(pos) == [({"A": "1"}, 1, 0)]
        assert run_cli("evaluate", "appb", "--loss", "l2.loss", "--method", "transfer") == 1
        assert run_cli("evaluate", "appb", "--loss", "l2.loss", "--method", "transfer", "--force") == 3
        k = OutcomeFunctional.identity(m)
        assert g_recursion(m, "s", k) == consequence_brute_force(m, "s", k) == F(3, 2)
        report = verify_fixture("appb")
        assert report.passed
        labels = [r.label for r in report.rows]
        assert any("W_o" in label for label in labels) and any("W_s" in label for label in labels)
        assert time.perf_counter() - start < 1.0


def test_criterion_3_discretized_continuous_example():
    with criterion(3, "discretized example for N = 2, 10, 100"):
        for n in (2, 10, 100):
            start = time.perf_counter()
            m = fixture(f"cts({n})").model
            assert check_extended_stability(m, "s")
            assert check_control_strategy(m, "s")
            assert not check_simple_stability(m, "s")
            y1 = OutcomeFunctional.indicator(m, "1")
            assert consequence_brute_force(m, "o", y1) == 1
            assert consequence_brute_force(m, "s", y1) == F(1, n)
            assert g_recursion(m, "s", y1) == F(1, n)
            assert verify_fixture(f"cts({n})").passed
            assert time.perf_counter() - start < 5.0


def test_criterion_4_recursion_equals_enumeration():
    with criterion(4, "G-recursion equals brute force on 500 random models"):
        rng = random.Random(4)
        zero_cells = 0
        for _ in range(500):
            m = random_model(rng, max_stages=3, max_domain=4, zero_rate=0.3)
            k = random_functional(rng, m)
            for rid in ("o", "s"):
                value = g_recursion(m, rid, k)
                assert value == consequence_brute_force(m, rid, k)
                assert value == g_recursion(m, rid, k, version=lambda h: rng.randint(-999, 999))
                assert value == oracles.recursion_with_arbitrary_versions(m, rid, k, rng)
            joint = materialize_joint(m, "s")
            zero_cells += joint.total == 1 and len(joint.table) < m.state_count()
        assert zero_cells > 100


def test_criterion_5_randomization_implies_stability():
    with criterion(5, "extended stability + randomization + control => simple stability, 200 models"):
        rng = random.Random(5)
        for i in range(200):
            m = randomized_model(rng, max_stages=3)
            assert check_extended_stability(m, "s")
            assert check_sequential_randomization(m)
            assert check_control_strategy(m, "s")
            assert check_simple_stability(m, "s")
            assert not condition_report(m, "s").violations
            if i % 25 == 0:
                assert oracles.simple_stability(m, "o", "s")
                assert run_cli_model(m) != 4


def run_cli_model(m):
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "generated.model")
        with open(path, "w") as fh:
            fh.write(serialize_model(m))
        return run_cli("check", path)


def test_criterion_6_irrelevance_implies_stability():
    with criterion(6, "extended stability + control + irrelevance(s) => simple stability, 200 models"):
        rng = random.Random(6)
        nontrivial = 0
        for _ in range(200):
            m = irrelevant_model(rng, max_stages=3)
            assert check_extended_stability(m, "s")
            assert check_control_strategy(m, "s")
            assert check_sequential_irrelevance(m, "s")
            assert check_simple_stability(m, "s")
            assert check_lemma1(m, "s")
            assert not condition_report(m, "s").violations
            nontrivial += not check_extended_positivity(m, "s")
        # extended positivity is not enforced and often fails
        assert nontrivial > 20


SIGMA = "sigma"


def sigma_statements(rng, model, count):
    names = [v.name for v in model.variables]
    out = []
    while len(out) < count:
        labels = [rng.randrange(4) for _ in names]
        x = {n for n, l in zip(names, labels) if l == 0}
        y = {n for n, l in zip(names, labels) if l == 1}
        z = {n for n, l in zip(names, labels) if l == 2}
        if not x:
            continue
        if rng.random() < 0.5:
            out.append(parse_ci(_fmt(x, y | {SIGMA}, z)))
        elif y:
            out.append(parse_ci(_fmt(x, y, z | {SIGMA})))
    return out


def _fmt(x, y, z):
    text = f"{','.join(sorted(x))} _||_ {','.join(sorted(y))}"
    return text + (f" | {','.join(sorted(z))}" if z else "")


def test_criterion_7_ci_cross_validation():
    with criterion(7, "d-separation vs moralization, diagrams vs fixtures, extended CI vs mixture"):
        # separation is invariant under relabelling, so one DAG per isomorphism
        # class together with every query triple covers every labelled DAG
        checked = 0
        for n in range(1, 6):
            for nodes, edges in unlabelled_dags(n):
                dag = InfluenceDiagram(tuple(nodes), tuple(edges))
                for x, y, z in queries(nodes):
                    assert d_separated(dag, x, y, z).separated == moral_separated(dag, x, y, z)
                    checked += 1
        assert checked > 170000
        for nodes, edges in labelled_dags(4):
            dag = InfluenceDiagram(tuple(nodes), tuple(edges))
            for x, y, z in queries(nodes):
                assert d_separated(dag, x, y, z).separated == moral_separated(dag, x, y, z)

        for name in ["discretesi", "cts(2)", "cts(10)", "appb", "hiv-toy", "xor"]:
            fx = fixture(name)
            for stmt in implied_ci(fx.paired):
                assert check_statement(fx.model, stmt, ("o", "s")), (name, str(stmt))
        assert set(PAIRED_DIAGRAM) == {"discretesi", "cts", "appb", "hiv-toy", "xor"}

        rng = random.Random(7)
        priors = [(F(1, 2), F(1, 2)), (F(1, 10), F(9, 10)), (F(5, 7), F(2, 7))]
        for _ in range(60):
            m = random_model(rng, max_stages=2, max_domain=3)
            mixtures = [mixture_joint(m, {"o": a, "s": b}).joint for a, b in priors]
            for stmt in sigma_statements(rng, m, 5):
                expected = bool(check_extended_ci(m, ("o", "s"), stmt))
                for joint in mixtures:
                    assert bool(check_stochastic_ci(joint, stmt)) == expected


def test_criterion_8_semigraphoid_derivations():
    with criterion(8, "semi-graphoid derivation and non-derivation under the 8-symbol cap"):
        target = parse_ci("Y _||_ sigma | L1,A1")
        start = time.perf_counter()
        t2 = ["L1,U1 _||_ sigma", "Y _||_ sigma | L1,U1,A1", "A1 _||_ U1 | L1,sigma"]
        assert derivable([parse_ci(s) for s in t2], target, cap=8)
        assert time.perf_counter() - start < 10.0
        start = time.perf_counter()
        weak = ["L1,U1 _||_ sigma", "Y _||_ sigma | L1,U1,A1", "Y _||_ U1 | L1,A1,sigma"]
        assert not derivable([parse_ci(s) for s in weak], target, cap=8)
        assert time.perf_counter() - start < 10.0


def test_criterion_9_optimization():
    with criterion(9, "xor optimization: transfer agrees with oracle, affine invariance"):
        m = fixture("xor").model
        k = OutcomeFunctional.identity(m)
        oracle = optimize(m, k, "oracle")
        transfer = optimize(m, k, "transfer")
        assert oracle.best.strategy_id == transfer.best.strategy_id == "A1=0,1"
        assert oracle.best.consequence == transfer.best.consequence == 0
        rng = random.Random(9)
        for _ in range(20):
            a = F(rng.randint(1, 50), rng.randint(1, 50))
            b = F(rng.randint(-50, 50), rng.randint(1, 50))
            for mode in ("oracle", "transfer"):
                assert optimize(m, k.affine(a, b), mode).best.strategy_id == "A1=0,1"


if __name__ == "__main__":
    import sys

    failed = False
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except Exception:
                failed = True
    print("\n".join(summary_lines()))
    sys.exit(1 if failed else 0)
