"""Conditional independence: numeric checks and the semi-graphoid calculus.

Numeric checks are exact.  A stochastic statement ``X _||_ Y | Z`` holds on a
joint table when, for every ``z`` of positive mass, the conditional
distribution of ``X`` given ``(y, z)`` is the same for every ``y`` of positive
mass.  Cells of zero mass never constrain anything.

The regime indicator ``sigma`` is not a random variable.  Statements with
``sigma`` on the right of ``_||_`` ask for one conditional table valid in
every regime (a *common version*); statements with ``sigma`` in the
conditioning set ask for independence inside each regime separately.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional

from .model import (
    SIGMA,
    Joint,
    ModelError,
    RegimeModel,
    fmt_assignment,
    marginalize,
    materialize_joint,
)

DEFAULT_CLOSURE_CAP = 8


class ClosureCapError(ValueError):
    pass


@dataclass(frozen=True)
class CIStatement:
    """``x _||_ y | z``, optionally with ``sigma`` in ``y`` or in ``z``.

    ``regime`` pins the statement to one regime (``| z ; regime=s``); such a
    statement is stochastic and cannot also mention ``sigma``.
    """

    x: frozenset
    y: frozenset
    z: frozenset = frozenset()
    sigma_in_y: bool = False
    sigma_in_z: bool = False
    regime: Optional[str] = None

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if SIGMA in self.x | self.y | self.z:
            raise ValueError(f"use the sigma flags, not a variable called {SIGMA!r}")
        if self.sigma_in_y and self.sigma_in_z:
            raise ValueError("sigma cannot be on both sides of the bar")
        if self.regime is not None and (self.sigma_in_y or self.sigma_in_z):
            raise ValueError("a regime-pinned statement cannot mention sigma")
        if self.x & self.y or self.x & self.z or self.y & self.z:
            raise ValueError(f"sides of a CI statement must be disjoint: {self}")

    @classmethod
    def of(cls, x, y, z=(), *, sigma_in_y=False, sigma_in_z=False, regime=None) -> "CIStatement":
        """Build a statement, dropping conditioning variables from ``x`` and ``y``.

        ``x _||_ y | z`` is equivalent to ``x\\z _||_ y\\z | z``, so overlap with
        ``z`` is reduced away; overlap between ``x`` and ``y`` is an error.
        """
        x, y, z = set(x), set(y), set(z)
        for side in (x, y, z):
            if SIGMA in side:
                raise ValueError(f"pass sigma through the flags, not as {SIGMA!r}")
        if (x & y) - z:
            raise ValueError(f"left and right sides overlap: {sorted((x & y) - z)}")
        return cls(frozenset(x - z), frozenset(y - z), frozenset(z), sigma_in_y, sigma_in_z, regime)

    @property
    def extended(self) -> bool:
        return self.sigma_in_y or self.sigma_in_z

    @property
    def trivial(self) -> bool:
        return not self.x or (not self.y and not self.sigma_in_y)

    @property
    def variables(self) -> frozenset:
        return self.x | self.y | self.z

    def symbols(self) -> "SymbolicCI":
        sig = frozenset({SIGMA})
        if self.regime is not None:
            raise ValueError("regime-pinned statements have no symbolic form")
        return SymbolicCI(
            self.x,
            self.y | sig if self.sigma_in_y else self.y,
            self.z | sig if self.sigma_in_z else self.z,
        )

    def swapped(self) -> "CIStatement":
        if self.sigma_in_y:
            raise ValueError("sigma cannot move to the left-hand side")
        return replace(self, x=self.y, y=self.x)

    def __str__(self):
        return format_statement(self.x, self.y, self.z, self.sigma_in_y, self.sigma_in_z, self.regime)


def _side(names, with_sigma=False) -> str:
    items = sorted(names) + ([SIGMA] if with_sigma else [])
    return ",".join(items) if items else "()"


def format_statement(x, y, z, sigma_in_y=False, sigma_in_z=False, regime=None) -> str:
    text = f"{_side(x)} _||_ {_side(y, sigma_in_y)}"
    if z or sigma_in_z:
        text += f" | {_side(z, sigma_in_z)}"
    if regime is not None:
        text += f" ; regime={regime}"
    return text


class SymbolicCI(NamedTuple):
    """A statement over plain symbols; ``sigma`` may sit anywhere."""

    x: frozenset
    y: frozenset
    z: frozenset

    @property
    def trivial(self) -> bool:
        return not self.x or not self.y

    def statement(self) -> CIStatement:
        """Back to a :class:`CIStatement`, using symmetry to keep sigma off the left."""
        x, y, z = self.x, self.y, self.z
        if SIGMA in x:
            x, y = y, x
        return CIStatement(
            x - {SIGMA}, y - {SIGMA}, z - {SIGMA}, sigma_in_y=SIGMA in y, sigma_in_z=SIGMA in z
        )

    def __str__(self):
        text = f"{_side(self.x)} _||_ {_side(self.y)}"
        if self.z:
            text += f" | {_side(self.z)}"
        return text


# ---------------------------------------------------------------------------
# numeric checks


@dataclass(frozen=True)
class Discrepancy:
    """Two conditional probabilities that should agree but do not.

    ``cell`` is the conditioning value ``z``; ``event`` the value of ``X``;
    ``left``/``right`` the two ``Y`` (or ``sigma``) values compared.
    """

    cell: tuple
    event: tuple
    left: tuple
    left_prob: Fraction
    right: tuple
    right_prob: Fraction
    regime: Optional[str] = None
    stage: Optional[int] = None

    def describe(self) -> str:
        cond = fmt_assignment(self.cell)
        ev = fmt_assignment(self.event)
        lhs = fmt_assignment(self.left)
        rhs = fmt_assignment(self.right)
        where = f" in regime {self.regime}" if self.regime else ""
        stage = f"stage {self.stage}: " if self.stage is not None else ""
        return (
            f"{stage}at {cond}{where}: P({ev} | {lhs}) = {self.left_prob} "
            f"vs P({ev} | {rhs}) = {self.right_prob}"
        )

    def to_dict(self) -> dict:
        return {
            "kind": "discrepancy",
            "stage": self.stage,
            "regime": self.regime,
            "cell": dict(self.cell),
            "event": dict(self.event),
            "left": dict(self.left),
            "left_prob": str(self.left_prob),
            "right": dict(self.right),
            "right_prob": str(self.right_prob),
        }


@dataclass(frozen=True)
class VersionTable:
    """A conditional table ``w(x, z)``; rows not pinned by any regime use uniform fill."""

    x_vars: tuple
    z_vars: tuple
    table: Mapping
    constrained_by: Mapping = field(default_factory=dict)

    def value(self, x: Mapping, z: Mapping) -> Fraction:
        zk = tuple(str(z[v]) for v in self.z_vars)
        xk = tuple(str(x[v]) for v in self.x_vars)
        return self.table[zk][xk]

    def to_dict(self) -> dict:
        rows = []
        for zk, dist in self.table.items():
            rows.append(
                {
                    "given": dict(zip(self.z_vars, zk)),
                    "constrained_by": list(self.constrained_by.get(zk, ())),
                    "dist": [
                        {"value": dict(zip(self.x_vars, xk)), "prob": str(p)} for xk, p in dist.items()
                    ],
                }
            )
        return {"x": list(self.x_vars), "z": list(self.z_vars), "rows": rows}


@dataclass(frozen=True)
class Verdict:
    statement: CIStatement
    holds: bool
    witnesses: tuple = ()
    common_version: Optional[VersionTable] = None

    def __bool__(self):
        return self.holds


def _ordered(joint: Joint, names) -> tuple:
    return tuple(v for v in joint.variables if v in set(names))


def _sort_key(joint: Joint, names: tuple):
    index = [{val: i for i, val in enumerate(joint.domains[n])} for n in names]
    return lambda values: tuple(ix[v] for ix, v in zip(index, values))


def _groups(joint: Joint, xs: tuple, ys: tuple, zs: tuple) -> dict:
    """``{z: {y: {x: mass}}}`` over the positive-mass support."""
    m = marginalize(joint, set(xs) | set(ys) | set(zs))
    pos = {v: i for i, v in enumerate(m.variables)}
    xi, yi, zi = ([pos[v] for v in names] for names in (xs, ys, zs))
    out: dict = {}
    for cfg, p in m.items():
        zk = tuple(cfg[i] for i in zi)
        yk = tuple(cfg[i] for i in yi)
        xk = tuple(cfg[i] for i in xi)
        cell = out.setdefault(zk, {}).setdefault(yk, {})
        cell[xk] = cell.get(xk, Fraction(0)) + p
    return out


def _require(joint: Joint, names) -> None:
    missing = set(names) - set(joint.variables)
    if missing:
        raise ModelError(f"unknown variable(s): {', '.join(sorted(missing))}")


def independence_discrepancies(joint: Joint, x, y, z, regime: Optional[str] = None) -> list:
    """Witnesses against ``x _||_ y | z`` on ``joint``; empty iff it holds."""
    _require(joint, set(x) | set(y) | set(z))
    xs, ys, zs = _ordered(joint, x), _ordered(joint, y), _ordered(joint, z)
    if not xs or not ys:
        return []
    groups = _groups(joint, xs, ys, zs)
    xkey, ykey, zkey = _sort_key(joint, xs), _sort_key(joint, ys), _sort_key(joint, zs)
    x_space = sorted(itertools.product(*(joint.domains[v] for v in xs)), key=xkey)
    found = []
    for zk in sorted(groups, key=zkey):
        by_y = groups[zk]
        ref_y = None
        ref = None
        for yk in sorted(by_y, key=ykey):
            masses = by_y[yk]
            total = sum(masses.values(), Fraction(0))
            dist = [masses.get(xk, Fraction(0)) / total for xk in x_space]
            if ref is None:
                ref_y, ref = yk, dist
                continue
            for xk, a, b in zip(x_space, ref, dist):
                if a != b:
                    found.append(
                        Discrepancy(
                            cell=tuple(zip(zs, zk)),
                            event=tuple(zip(xs, xk)),
                            left=tuple(zip(ys, ref_y)),
                            left_prob=a,
                            right=tuple(zip(ys, yk)),
                            right_prob=b,
                            regime=regime,
                        )
                    )
    return found


def check_stochastic_ci(joint: Joint, stmt: CIStatement) -> Verdict:
    """Check a statement on a single joint table.

    If the statement mentions ``sigma`` the joint must carry a ``sigma``
    column (see :func:`mixture_joint`), which is then treated as an ordinary
    random variable.
    """
    if stmt.regime is not None:
        raise ValueError("regime-pinned statements need a model; use check_statement")
    ys = set(stmt.y) | ({SIGMA} if stmt.sigma_in_y else set())
    zs = set(stmt.z) | ({SIGMA} if stmt.sigma_in_z else set())
    found = independence_discrepancies(joint, stmt.x, ys, zs)
    return Verdict(stmt, not found, tuple(found))


def _regime_list(model: RegimeModel, regimes) -> tuple:
    ids = tuple(regimes)
    if not ids:
        raise ModelError("at least one regime is required")
    for rid in ids:
        model.regime(rid)
    return ids


def check_extended_ci(model: RegimeModel, regimes: Iterable[str], stmt: CIStatement) -> Verdict:
    """Check a statement with ``sigma`` across the listed regimes jointly.

    ``sigma`` on the right: holds iff one table ``w(x, z)`` satisfies
    ``p(x | y, z; s) = w(x, z)`` wherever ``p(y, z; s) > 0``, for every listed
    ``s``; the table is returned as ``common_version``.  ``sigma`` in the
    conditioning set: holds iff the stochastic statement holds in each regime.
    """
    ids = _regime_list(model, regimes)
    if not stmt.extended:
        raise ValueError(f"statement {stmt} does not mention sigma")
    for name in stmt.variables:
        model.variable(name)
    if stmt.sigma_in_z:
        found = []
        for rid in ids:
            found.extend(
                independence_discrepancies(materialize_joint(model, rid), stmt.x, stmt.y, stmt.z, rid)
            )
        return Verdict(stmt, not found, tuple(found))
    return _common_version(model, ids, stmt)


def _common_version(model: RegimeModel, ids: tuple, stmt: CIStatement) -> Verdict:
    order = [v.name for v in model.variables]
    xs = tuple(v for v in order if v in stmt.x)
    ys = tuple(v for v in order if v in stmt.y)
    zs = tuple(v for v in order if v in stmt.z)
    domains = model.domains
    x_space = list(itertools.product(*(domains[v] for v in xs)))
    # (z, x) -> (value, source)
    pinned: dict = {}
    sources: dict = {}
    found = []
    for rid in ids:
        joint = materialize_joint(model, rid)
        groups = _groups(joint, xs, ys, zs)
        ykey, zkey = _sort_key(joint, ys), _sort_key(joint, zs)
        for zk in sorted(groups, key=zkey):
            for yk in sorted(groups[zk], key=ykey):
                masses = groups[zk][yk]
                total = sum(masses.values(), Fraction(0))
                src = ((SIGMA, rid),) + tuple(zip(ys, yk))
                sources.setdefault(zk, [])
                if rid not in sources[zk]:
                    sources[zk].append(rid)
                for xk in x_space:
                    value = masses.get(xk, Fraction(0)) / total
                    key = (zk, xk)
                    if key not in pinned:
                        pinned[key] = (value, src)
                    elif pinned[key][0] != value:
                        found.append(
                            Discrepancy(
                                cell=tuple(zip(zs, zk)),
                                event=tuple(zip(xs, xk)),
                                left=pinned[key][1],
                                left_prob=pinned[key][0],
                                right=src,
                                right_prob=value,
                            )
                        )
    if found or not xs:
        return Verdict(stmt, not found, tuple(found))
    table = {}
    uniform = Fraction(1, len(x_space))
    for zk in itertools.product(*(domains[v] for v in zs)):
        table[zk] = {xk: pinned[(zk, xk)][0] if (zk, xk) in pinned else uniform for xk in x_space}
    version = VersionTable(xs, zs, table, {zk: tuple(r) for zk, r in sources.items()})
    return Verdict(stmt, True, (), version)


def check_statement(model: RegimeModel, stmt: CIStatement, regimes: Optional[Iterable[str]] = None) -> Verdict:
    """Dispatch a statement against a model.

    ``sigma`` statements go to :func:`check_extended_ci` over ``regimes``
    (default: all regimes); regime-pinned statements are checked inside
    that regime; plain statements must hold inside every listed regime.
    """
    ids = _regime_list(model, regimes if regimes is not None else model.regimes)
    if stmt.extended:
        return check_extended_ci(model, ids, stmt)
    targets = (stmt.regime,) if stmt.regime is not None else ids
    found = []
    for rid in targets:
        found.extend(
            independence_discrepancies(materialize_joint(model, rid), stmt.x, stmt.y, stmt.z, rid)
        )
    return Verdict(stmt, not found, tuple(found))


@dataclass(frozen=True)
class MixtureJoint:
    """Joint over ``(sigma, variables...)`` with ``sigma`` drawn from ``prior``."""

    prior: Mapping
    joint: Joint


def mixture_joint(model: RegimeModel, prior: Mapping) -> MixtureJoint:
    """Product-space construction: ``P*(sigma=s, v) = prior(s) * P_s(v)``."""
    prior = {rid: Fraction(p) for rid, p in prior.items()}
    if not prior:
        raise ValueError("prior must cover at least one regime")
    for rid, p in prior.items():
        model.regime(rid)
        if p <= 0:
            raise ValueError(f"prior weight for regime {rid} must be positive, got {p}")
    total = sum(prior.values(), Fraction(0))
    if total != 1:
        raise ValueError(f"prior must sum to 1, sums to {total}")
    names = (SIGMA,) + tuple(v.name for v in model.variables)
    domains = {SIGMA: tuple(prior), **model.domains}
    table = {}
    for rid, weight in prior.items():
        for cfg, p in materialize_joint(model, rid).items():
            table[(rid,) + cfg] = weight * p
    return MixtureJoint(prior, Joint(names, domains, table))


@dataclass(frozen=True)
class VersionCheck:
    holds: bool
    mismatches: tuple  # (cell, true conditional expectation, proposed value)


def check_version(joint: Joint, h: Mapping, target: str, given: Iterable[str], w) -> VersionCheck:
    """Is ``w(z)`` a version of ``E{h(target) | given}`` under ``joint``?

    ``h`` maps target values to rationals; ``w`` is called with a dict of the
    conditioning values.  Only cells of positive mass are compared.
    """
    zs = _ordered(joint, given)
    _require(joint, set(zs) | {target})
    m = marginalize(joint, set(zs) | {target})
    pos = {v: i for i, v in enumerate(m.variables)}
    sums: dict = {}
    for cfg, p in m.items():
        zk = tuple(cfg[pos[v]] for v in zs)
        num, den = sums.get(zk, (Fraction(0), Fraction(0)))
        sums[zk] = (num + p * Fraction(h[cfg[pos[target]]]), den + p)
    mismatches = []
    for zk in sorted(sums, key=_sort_key(joint, zs)):
        num, den = sums[zk]
        cell = dict(zip(zs, zk))
        proposed = Fraction(w(cell))
        if num / den != proposed:
            mismatches.append((tuple(cell.items()), num / den, proposed))
    return VersionCheck(not mismatches, tuple(mismatches))


# ---------------------------------------------------------------------------
# semi-graphoid calculus


@dataclass(frozen=True)
class Step:
    rule: str
    conclusion: SymbolicCI
    premises: tuple

    def __str__(self):
        if not self.premises:
            return f"{self.rule}: {self.conclusion}"
        used = "; ".join(str(p) for p in self.premises)
        return f"{self.rule}: {self.conclusion}    [from {used}]"


@dataclass(frozen=True)
class Derivation:
    target: SymbolicCI
    derivable: bool
    trace: tuple

    def __bool__(self):
        return self.derivable


def _as_symbolic(item) -> SymbolicCI:
    if isinstance(item, SymbolicCI):
        return item
    if isinstance(item, str):
        from .dsl import parse_ci

        item = parse_ci(item)
    if isinstance(item, CIStatement):
        return item.symbols()
    raise TypeError(f"not a CI statement: {item!r}")


def _reduce(t: SymbolicCI) -> SymbolicCI:
    x, y, z = t
    if x & y - z:
        raise ValueError(f"left and right sides overlap in {t}")
    return SymbolicCI(frozenset(x - z), frozenset(y - z), frozenset(z))


def _subsets(items: frozenset, proper: bool = True):
    items = sorted(items)
    top = len(items) - (1 if proper else 0)
    for r in range(1, top + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


def _prepare(premises, ground, cap, extra=()):
    prem = [_reduce(_as_symbolic(p)) for p in premises]
    extra = [_reduce(_as_symbolic(e)) for e in extra]
    used = set()
    for t in prem + extra:
        used |= t.x | t.y | t.z
    ground = frozenset(ground) if ground is not None else frozenset(used)
    if len(ground) > cap:
        raise ClosureCapError(f"ground set has {len(ground)} symbols, cap is {cap}")
    outside = used - ground
    if outside:
        raise ValueError(f"symbols outside the ground set: {', '.join(sorted(outside))}")
    return prem, extra, ground


def _closure(premises) -> dict:
    known: dict = {}
    index: dict = {}
    queue: deque = deque()

    def add(t, rule, parents):
        if t.trivial or t in known:
            return
        known[t] = (rule, parents)
        index.setdefault((t.x, t.z), set()).add(t.y)
        queue.append(t)

    for p in sorted(premises, key=str):
        add(p, "premise", ())
    while queue:
        t = queue.popleft()
        x, y, z = t
        add(SymbolicCI(y, x, z), "P1", (t,))
        for w in _subsets(y):
            add(SymbolicCI(x, w, z), "P3", (t,))
            add(SymbolicCI(x, y - w, z | w), "P4", (t,))
        # t as the first contraction premise: x _||_ y | z  and  x _||_ w | (y, z)
        for w in sorted(index.get((x, y | z), ()), key=sorted):
            add(SymbolicCI(x, y | w, z), "P5", (t, SymbolicCI(x, w, y | z)))
        # t as the second premise: t = x _||_ y | (v, z0), needing x _||_ v | z0
        for v in _subsets(z, proper=False):
            z0 = z - v
            if v in index.get((x, z0), ()):
                add(SymbolicCI(x, v | y, z0), "P5", (SymbolicCI(x, v, z0), t))
    return known


def semigraphoid_close(premises, ground=None, cap: int = DEFAULT_CLOSURE_CAP, include_trivial=False) -> frozenset:
    """Least set containing ``premises`` closed under symmetry, decomposition,
    weak union and contraction.

    Statements are over disjoint symbol sets.  Trivial statements (an empty
    side, i.e. instances of ``X _||_ Y | X``) are implied but omitted unless
    ``include_trivial`` is set.
    """
    prem, _, ground = _prepare(premises, ground, cap)
    closed = set(_closure(prem))
    if include_trivial:
        for assignment in itertools.product(range(4), repeat=len(ground)):
            parts = [set(), set(), set()]
            for sym, slot in zip(sorted(ground), assignment):
                if slot < 3:
                    parts[slot].add(sym)
            t = SymbolicCI(*(frozenset(p) for p in parts))
            if t.trivial:
                closed.add(t)
    return frozenset(closed)


def derivable(premises, target, ground=None, cap: int = DEFAULT_CLOSURE_CAP) -> Derivation:
    """Is ``target`` in the semi-graphoid closure of ``premises``?

    The trace lists rule applications in an order where every step's inputs
    are premises or earlier conclusions.
    """
    prem, (goal,), ground = _prepare(premises, ground, cap, extra=(target,))
    if goal.trivial:
        return Derivation(goal, True, (Step("P2", goal, ()),))
    known = _closure(prem)
    if goal not in known:
        return Derivation(goal, False, ())
    steps, seen = [], set()

    def walk(t):
        if t in seen:
            return
        seen.add(t)
        rule, parents = known[t]
        if rule == "premise":
            return
        for p in parents:
            walk(p)
        steps.append(Step(rule, t, parents))

    walk(goal)
    return Derivation(goal, True, tuple(steps))
