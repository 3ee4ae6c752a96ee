"""Influence diagrams: DAGs over stochastic nodes plus an optional regime node.

The regime node is the one named ``sigma``.  Decision nodes are ordinary
stochastic nodes with ``sigma`` among their parents.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .ci import CIStatement
from .model import SIGMA

DEFAULT_NODE_CAP = 10


class DiagramError(ValueError):
    pass


class CycleError(DiagramError):
    def __init__(self, cycle, edge):
        self.cycle = tuple(cycle)
        self.edge = edge
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


@dataclass(frozen=True)
class InfluenceDiagram:
    nodes: tuple
    edges: tuple

    def __post_init__(self):
        nodes = tuple(self.nodes)
        edges = tuple((str(a), str(b)) for a, b in self.edges)
        for a, b in edges:
            for n in (a, b):
                if n not in nodes:
                    nodes += (n,)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if len(set(nodes)) != len(nodes):
            raise DiagramError("duplicate node")
        if len(set(edges)) != len(edges):
            raise DiagramError("duplicate edge")
        if self.parents(SIGMA):
            raise DiagramError(f"the regime node {SIGMA} cannot have parents")
        self._check_acyclic()

    @cached_property
    def _parents(self) -> dict:
        out = {n: [] for n in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return out

    @cached_property
    def _children(self) -> dict:
        out = {n: [] for n in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def parents(self, node) -> tuple:
        return tuple(self._parents.get(node, ()))

    def children(self, node) -> tuple:
        return tuple(self._children.get(node, ()))

    def kind(self, node) -> str:
        self._require([node])
        return "regime" if node == SIGMA else "stochastic"

    @property
    def has_regime(self) -> bool:
        return SIGMA in self.nodes

    def _check_acyclic(self):
        state = {n: 0 for n in self.nodes}
        stack = []

        def visit(n):
            state[n] = 1
            stack.append(n)
            for c in self._children[n]:
                if state[c] == 1:
                    cyc = stack[stack.index(c):] + [c]
                    raise CycleError(cyc, (n, c))
                if state[c] == 0:
                    visit(c)
            stack.pop()
            state[n] = 2

        for n in self.nodes:
            if state[n] == 0:
                visit(n)

    def _require(self, names):
        unknown = [n for n in names if n not in self.nodes]
        if unknown:
            raise DiagramError(f"unknown node(s): {', '.join(sorted(map(str, unknown)))}")

    def ancestors(self, names: Iterable[str]) -> set:
        """``names`` together with all their ancestors."""
        seen = set(names)
        queue = deque(seen)
        while queue:
            for p in self._parents[queue.popleft()]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return seen

    def without_edge(self, edge) -> "InfluenceDiagram":
        return InfluenceDiagram(self.nodes, tuple(e for e in self.edges if e != tuple(edge)))


@dataclass(frozen=True)
class Separation:
    """Outcome of a d-separation query; ``path`` is an active path when connected."""

    separated: bool
    path: Optional[tuple] = None

    def __bool__(self):
        return self.separated

    def describe(self, dag: InfluenceDiagram) -> str:
        if self.separated or not self.path:
            return "separated"
        parts = [self.path[0]]
        for a, b in zip(self.path, self.path[1:]):
            parts.append("->" if b in dag.children(a) else "<-")
            parts.append(b)
        return " ".join(parts)


def _sets(dag, x, y, z):
    x, y, z = set(x), set(y), set(z)
    dag._require(x | y | z)
    if x & y or x & z or y & z:
        raise DiagramError("query sets must be disjoint")
    return x, y, z


def _reachable(dag: InfluenceDiagram, x: set, z: set) -> set:
    """Nodes joined to ``x`` by an active path given ``z`` (Bayes ball)."""
    anc_z = dag.ancestors(z)
    visited = set()
    reached = set()
    queue = deque((n, "up") for n in x)  # "up": arrived from a child
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in z:
            reached.add(node)
        if direction == "up" and node not in z:
            for p in dag.parents(node):
                queue.append((p, "up"))
            for c in dag.children(node):
                queue.append((c, "down"))
        elif direction == "down":
            if node not in z:
                for c in dag.children(node):
                    queue.append((c, "down"))
            if node in anc_z:
                for p in dag.parents(node):
                    queue.append((p, "up"))
    return reached - x


def _active_path(dag: InfluenceDiagram, x: set, y: set, z: set) -> Optional[tuple]:
    """A simple path from ``x`` to ``y`` that is active given ``z``, by DFS."""
    anc_z = dag.ancestors(z)

    def extend(path, into_last):
        # into_last: the edge into path[-1] points at it
        last = path[-1]
        if last in y:
            return tuple(path)
        for nxt, forward in [(c, True) for c in dag.children(last)] + [
            (p, False) for p in dag.parents(last)
        ]:
            if nxt in path or nxt in x:
                continue
            if len(path) > 1:
                collider = into_last and not forward
                if collider and last not in anc_z:
                    continue
                if not collider and last in z:
                    continue
            found = extend(path + [nxt], forward)
            if found:
                return found
        return None

    for start in sorted(x):
        found = extend([start], False)
        if found:
            return found
    return None


def d_separated(dag: InfluenceDiagram, x, y, z=()) -> Separation:
    """d-separation of ``x`` and ``y`` given ``z``, with an active path when it fails."""
    x, y, z = _sets(dag, x, y, z)
    if not x or not y:
        return Separation(True)
    if not (_reachable(dag, x, z) & y):
        return Separation(True)
    return Separation(False, _active_path(dag, x, y, z))


def moral_separated(dag: InfluenceDiagram, x, y, z=()) -> bool:
    """Separation in the moral graph of the ancestral set of ``x ∪ y ∪ z``."""
    x, y, z = _sets(dag, x, y, z)
    if not x or not y:
        return True
    keep = dag.ancestors(x | y | z)
    adj = {n: set() for n in keep}
    for n in keep:
        ps = [p for p in dag.parents(n) if p in keep]
        for p in ps:
            adj[n].add(p)
            adj[p].add(n)
        for a, b in itertools.combinations(ps, 2):
            adj[a].add(b)
            adj[b].add(a)
    seen = set(x)
    queue = deque(x)
    while queue:
        n = queue.popleft()
        for m in adj[n]:
            if m in z or m in seen:
                continue
            if m in y:
                return False
            seen.add(m)
            queue.append(m)
    return True


def to_statement(x, y, z) -> CIStatement:
    """Map node sets to a statement, moving ``sigma`` to a flag (and off the left)."""
    x, y, z = set(x), set(y), set(z)
    if SIGMA in x:
        x, y = y, x
    return CIStatement(
        frozenset(x - {SIGMA}),
        frozenset(y - {SIGMA}),
        frozenset(z - {SIGMA}),
        sigma_in_y=SIGMA in y,
        sigma_in_z=SIGMA in z,
    )


def statement_nodes(stmt: CIStatement) -> tuple:
    if stmt.regime is not None:
        raise DiagramError("regime-pinned statements have no graphical reading")
    sig = {SIGMA}
    return (
        set(stmt.x),
        set(stmt.y) | (sig if stmt.sigma_in_y else set()),
        set(stmt.z) | (sig if stmt.sigma_in_z else set()),
    )


def implied_ci(dag: InfluenceDiagram, cap: int = DEFAULT_NODE_CAP) -> frozenset:
    """Every non-trivial statement over disjoint node sets that d-separation licenses.

    Both orientations of sigma-free statements are included.  For each
    ``(X, Z)`` one reachability pass yields the largest separated ``Y``; all
    of its non-empty subsets follow.
    """
    nodes = sorted(dag.nodes)
    if len(nodes) > cap:
        raise DiagramError(f"diagram has {len(nodes)} nodes, cap is {cap}")
    out = set()
    for assignment in itertools.product(range(3), repeat=len(nodes)):
        x = {n for n, a in zip(nodes, assignment) if a == 1}
        z = {n for n, a in zip(nodes, assignment) if a == 2}
        if not x:
            continue
        free = set(nodes) - x - z
        sep = sorted(free - _reachable(dag, x, z))
        for r in range(1, len(sep) + 1):
            for y in itertools.combinations(sep, r):
                out.add(to_statement(x, y, z))
    return frozenset(out)


@dataclass(frozen=True)
class RepresentationReport:
    rows: tuple  # (statement, implied, Separation)

    @property
    def all_implied(self) -> bool:
        return all(implied for _, implied, _ in self.rows)

    def __bool__(self):
        return self.all_implied


def represents(dag: InfluenceDiagram, statements: Iterable) -> RepresentationReport:
    """Check each statement against the diagram by d-separation."""
    from .dsl import parse_ci

    rows = []
    for stmt in statements:
        if isinstance(stmt, str):
            stmt = parse_ci(stmt)
        x, y, z = statement_nodes(stmt)
        result = d_separated(dag, x, y, z)
        rows.append((stmt, result.separated, result))
    return RepresentationReport(tuple(rows))
