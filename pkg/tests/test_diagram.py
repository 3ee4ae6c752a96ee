import random

import pytest

from dags import labelled_dags, queries, unlabelled_dags
from oracles import nx_d_separated
from seqignore.diagram import (
    DiagramError,
    InfluenceDiagram,
    d_separated,
    implied_ci,
    moral_separated,
    represents,
    statement_nodes,
)
from seqignore.dsl import parse_ci
from seqignore.fixtures import fixture


def test_dag_counts():
    # 1, 3, 25, 543 labelled DAGs; 1, 2, 6, 31, 302 up to isomorphism
    assert [sum(1 for _ in labelled_dags(n)) for n in range(1, 5)] == [1, 3, 25, 543]
    assert [sum(1 for _ in unlabelled_dags(n)) for n in range(1, 5)] == [1, 2, 6, 31]


def is_active(dag, path, z):
    z = set(z)
    if len(path) < 2 or len(set(path)) != len(path):
        return False
    for a, b in zip(path, path[1:]):
        if (a, b) not in dag.edges and (b, a) not in dag.edges:
            return False
    for a, b, c in zip(path, path[1:], path[2:]):
        collider = (a, b) in dag.edges and (c, b) in dag.edges
        if collider:
            if b not in z and not _desc(dag, b) & z:
                return False
        elif b in z:
            return False
    return True


def _desc(dag, node):
    out, stack = set(), [node]
    while stack:
        for c in dag.children(stack.pop()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


@pytest.mark.parametrize("n", [2, 3, 4])
def test_three_routes_agree_on_all_labelled_dags(n):
    rng = random.Random(n)
    for nodes, edges in labelled_dags(n):
        dag = InfluenceDiagram(tuple(nodes), tuple(edges))
        for x, y, z in queries(nodes):
            res = d_separated(dag, x, y, z)
            assert res.separated == moral_separated(dag, x, y, z)
            if rng.random() < 0.2:
                assert res.separated == nx_d_separated(nodes, edges, x, y, z)
            if not res.separated:
                assert res.path[0] in x and res.path[-1] in y
                assert is_active(dag, res.path, z)


def test_separation_certificate_on_fig5():
    dag = fixture("fig5").diagram
    res = d_separated(dag, {"Y"}, {"sigma"}, {"A"})
    assert not res
    assert res.path == ("Y", "U", "A", "sigma")
    assert res.describe(dag) == "Y <- U -> A <- sigma"
    assert d_separated(dag, {"Y"}, {"sigma"}, {"U", "A"})


@pytest.mark.parametrize("seed", range(15))
def test_implied_statements_shrink_as_edges_are_added(seed):
    rng = random.Random(seed)
    nodes = ["sigma", "L1", "A1", "Y"][: rng.randint(3, 4)] + ["U1"]
    order = nodes[:]
    edges = [(a, b) for i, a in enumerate(order) for b in order[i + 1:] if b != "sigma" and rng.random() < 0.4]
    dag = InfluenceDiagram(tuple(nodes), tuple(edges))
    implied = implied_ci(dag)
    for stmt in implied:
        x, y, z = statement_nodes(stmt)
        assert d_separated(dag, x, y, z)
    for e in edges:
        assert implied <= implied_ci(dag.without_edge(e))


def test_implied_set_is_complete_on_a_small_graph():
    dag = InfluenceDiagram(("sigma", "A", "Y"), (("sigma", "A"), ("A", "Y")))
    implied = implied_ci(dag)
    assert parse_ci("Y _||_ sigma | A") in implied
    assert parse_ci("A _||_ Y") not in implied
    # sigma-free statements come in both orientations
    dag2 = InfluenceDiagram(("A", "B", "C"), (("A", "B"), ("B", "C")))
    both = implied_ci(dag2)
    assert parse_ci("A _||_ C | B") in both and parse_ci("C _||_ A | B") in both


def test_represents_reports_each_statement():
    dag = fixture("fig5").diagram
    report = represents(dag, ["Y _||_ sigma | U, A", "Y _||_ sigma | A"])
    assert [r[1] for r in report.rows] == [True, False]
    assert not report


def test_node_cap_and_bad_queries():
    nodes = tuple(f"N{i}" for i in range(11))
    with pytest.raises(DiagramError, match="cap"):
        implied_ci(InfluenceDiagram(nodes, ()))
    dag = fixture("fig5").diagram
    with pytest.raises(DiagramError):
        d_separated(dag, {"Q"}, {"Y"}, set())
    with pytest.raises(DiagramError):
        statement_nodes(parse_ci("A _||_ U ; regime=o"))
