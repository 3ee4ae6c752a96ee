"""Enumeration of small DAGs and separation queries, shared by the tests."""

import itertools


def labelled_dags(n):
    """Every DAG on nodes ``N0..N{n-1}``: an edge set oriented by some topological order."""
    nodes = [f"N{i}" for i in range(n)]
    seen = set()
    pairs = list(itertools.combinations(range(n), 2))
    for perm in itertools.permutations(range(n)):
        for mask in range(1 << len(pairs)):
            edges = frozenset(
                (nodes[perm[a]], nodes[perm[b]]) for k, (a, b) in enumerate(pairs) if mask >> k & 1
            )
            if edges not in seen:
                seen.add(edges)
                yield nodes, sorted(edges)


def unlabelled_dags(n):
    """One representative per isomorphism class of DAGs on ``n`` nodes."""
    nodes = [f"N{i}" for i in range(n)]
    perms = list(itertools.permutations(range(n)))
    pairs = list(itertools.combinations(range(n), 2))
    seen = set()
    for mask in range(1 << len(pairs)):
        edges = [(a, b) for k, (a, b) in enumerate(pairs) if mask >> k & 1]
        canon = min(tuple(sorted((p[a], p[b]) for a, b in edges)) for p in perms)
        if canon not in seen:
            seen.add(canon)
            yield nodes, [(nodes[a], nodes[b]) for a, b in edges]


def queries(nodes):
    """Every ``(X, Y, Z)`` of disjoint node sets with X and Y non-empty."""
    for labels in itertools.product(range(4), repeat=len(nodes)):
        x = {n for n, l in zip(nodes, labels) if l == 0}
        y = {n for n, l in zip(nodes, labels) if l == 1}
        z = {n for n, l in zip(nodes, labels) if l == 2}
        if x and y:
            yield x, y, z
