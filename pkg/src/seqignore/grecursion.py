"""Consequences ``E{k(Y) ; s}``: brute force, G-recursion, and observational transfer."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional

from .model import (
    ModelError,
    RegimeModel,
    Role,
    fmt_assignment,
    marginalize,
    materialize_joint,
)


class TransferRefused(Exception):
    """Transfer was refused because a required condition fails."""

    def __init__(self, reports):
        self.reports = tuple(reports)
        failing = ", ".join(r.condition for r in self.reports)
        super().__init__(f"transfer refused: {failing} fails")


class UndefinedConditional(Exception):
    """An observational conditional was needed at a history of observational mass zero."""

    def __init__(self, history, regime, block):
        self.history = tuple(history)
        self.regime = regime
        self.block = tuple(block)
        super().__init__(
            f"p({','.join(self.block)} | {fmt_assignment(self.history)} ; {regime}) is undefined: "
            "the history has probability 0 in that regime"
        )


class OutcomeFunctional:
    """A loss or utility ``k`` given as a table over the outcome's values."""

    def __init__(self, values: Mapping):
        self.values = {str(y): Fraction(v) for y, v in values.items()}

    def __call__(self, y) -> Fraction:
        try:
            return self.values[str(y)]
        except KeyError:
            raise ModelError(f"loss has no value for outcome {y!r}") from None

    def __eq__(self, other):
        return isinstance(other, OutcomeFunctional) and self.values == other.values

    def __repr__(self):
        return f"OutcomeFunctional({self.values})"

    def check(self, model: RegimeModel) -> None:
        outcome = outcome_variable(model)
        missing = [y for y in model.domain(outcome) if y not in self.values]
        if missing:
            raise ModelError(f"loss has no value for {outcome}={', '.join(missing)}")
        extra = [y for y in self.values if y not in model.domain(outcome)]
        if extra:
            raise ModelError(f"loss mentions values outside the domain of {outcome}: {', '.join(extra)}")

    def affine(self, a, b=0) -> "OutcomeFunctional":
        return OutcomeFunctional({y: Fraction(a) * v + Fraction(b) for y, v in self.values.items()})

    def __add__(self, other):
        return OutcomeFunctional({y: v + other.values[y] for y, v in self.values.items()})

    @classmethod
    def identity(cls, model: RegimeModel) -> "OutcomeFunctional":
        """``k(y) = y`` for outcomes whose labels are numbers."""
        return cls({y: Fraction(y) for y in model.domain(outcome_variable(model))})

    @classmethod
    def indicator(cls, model: RegimeModel, value) -> "OutcomeFunctional":
        return cls({y: int(y == str(value)) for y in model.domain(outcome_variable(model))})

    @classmethod
    def constant(cls, model: RegimeModel, c) -> "OutcomeFunctional":
        return cls({y: c for y in model.domain(outcome_variable(model))})


def outcome_variable(model: RegimeModel) -> str:
    return next(v.name for v in model.variables if v.role is Role.OUTCOME)


def consequence_brute_force(model: RegimeModel, s: str, k: OutcomeFunctional) -> Fraction:
    """Sum ``p(config ; s) k(y)`` over the full joint table."""
    joint = materialize_joint(model, s)
    yi = joint.variables.index(outcome_variable(model))
    return sum((p * k(cfg[yi]) for cfg, p in joint.items()), Fraction(0))


def _blocks(model: RegimeModel) -> list:
    """Domain-variable blocks in order: ``L_1, A_1, ..., L_n, A_n, L_{n+1}``; empty L-blocks dropped."""
    out = []
    for st in model.base.stages:
        if st.observables:
            out.append(("L", st.index, st.observables))
        if st.action is not None:
            out.append(("A", st.index, (st.action,)))
    return out


@dataclass(frozen=True)
class RecursionTrace:
    """``f`` at every visited history; keys are tuples of ``(name, value)`` pairs."""

    value: Fraction
    table: dict


def _backward(blocks, domains, masses, k, yname, version=None) -> dict:
    """Run the recursion given the mass of each positive prefix at each block boundary."""
    names = [n for _, _, block in blocks for n in block]
    f = {}
    last = masses[len(blocks)]
    yi = names.index(yname)
    for cfg in last:
        f[cfg] = k(cfg[yi])
    for b in range(len(blocks) - 1, -1, -1):
        block = blocks[b][2]
        space = list(itertools.product(*(domains[v] for v in block)))
        width = len(names[: sum(len(bl[2]) for bl in blocks[:b])])
        nxt = {}
        for prefix, mass in masses[b].items():
            total = Fraction(0)
            for vals in space:
                child = prefix + vals
                p = masses[b + 1].get(child, Fraction(0)) / mass
                if p:
                    total += p * f[child]
                elif version is not None:
                    # zero weight: any value here must leave the total alone
                    filler = Fraction(version(tuple(zip(names[: width + len(vals)], child))))
                    total += p * filler
            nxt[prefix] = total
        f.update(nxt)
    return f


def _prefix_masses(joint, blocks) -> list:
    names = [n for _, _, block in blocks for n in block]
    m = marginalize(joint, names)
    order = [m.variables.index(n) for n in names]
    full = {}
    for cfg, p in m.items():
        key = tuple(cfg[i] for i in order)
        full[key] = full.get(key, Fraction(0)) + p
    masses = []
    cuts = [0] + list(itertools.accumulate(len(bl[2]) for bl in blocks))
    for width in cuts:
        level = {}
        for key, p in full.items():
            level[key[:width]] = level.get(key[:width], Fraction(0)) + p
        masses.append(level)
    return masses


def g_recursion(
    model: RegimeModel,
    s: str,
    k: OutcomeFunctional,
    version: Optional[Callable] = None,
    return_table: bool = False,
):
    """Backward recursion over histories of the decision maker's variables.

    ``f`` starts as ``k(y)`` on full histories; each step averages over the
    next block (an action, or a set of observables) under regime ``s``.
    Only histories of positive s-mass are visited.  ``version``, if given,
    supplies ``f`` at zero-mass children; it can never change the answer.
    """
    model.regime(s)
    k.check(model)
    blocks = _blocks(model)
    masses = _prefix_masses(materialize_joint(model, s), blocks)
    f = _backward(blocks, model.domains, masses, k, outcome_variable(model), version)
    value = f[()]
    if return_table:
        names = [n for _, _, block in blocks for n in block]
        table = {tuple(zip(names, h)): v for h, v in f.items()}
        return RecursionTrace(value, table)
    return value


@dataclass(frozen=True)
class TransferResult:
    value: Fraction
    safety: str  # "verified" or "unsafe"
    reports: tuple

    @property
    def verified(self) -> bool:
        return self.safety == "verified"


def transfer_masses(model: RegimeModel, s: str) -> list:
    """Prefix masses of the measure built from o's observable conditionals and s's action kernels."""
    o = model.observational
    blocks = _blocks(model)
    obs = _prefix_masses(materialize_joint(model, o), blocks)
    domains = model.domains
    kernels = model.regime(s).kernels
    names = [n for _, _, block in blocks for n in block]
    masses = [{(): Fraction(1)}]
    width = 0
    for b, (kind, index, block) in enumerate(blocks):
        level = {}
        space = list(itertools.product(*(domains[v] for v in block)))
        for prefix, mass in masses[b].items():
            history = tuple(zip(names[:width], prefix))
            if kind == "L":
                denom = obs[b].get(prefix, Fraction(0))
                if denom == 0:
                    raise UndefinedConditional(history, o, block)
                for vals in space:
                    p = obs[b + 1].get(prefix + vals, Fraction(0)) / denom
                    if p:
                        level[prefix + vals] = mass * p
            else:
                kernel = kernels[block[0]]
                known = dict(history)
                hidden = [p for p in kernel.parents if p not in known]
                if hidden:
                    raise ModelError(
                        f"action kernel {block[0]} in regime {s} reads {', '.join(hidden)}, "
                        "which the decision maker does not observe"
                    )
                row = kernel.row(tuple(known[p] for p in kernel.parents))
                for val, p in zip(domains[block[0]], row):
                    if p:
                        level[prefix + (val,)] = mass * p
        masses.append(level)
        width += len(block)
    return masses


def g_transfer(model: RegimeModel, s: str, k: OutcomeFunctional, policy: str = "require_checks") -> TransferResult:
    """G-recursion with observable conditionals taken from the observational regime.

    ``require_checks`` refuses (:class:`TransferRefused`) unless simple
    stability and positivity hold.  ``force`` computes anyway, flags the
    result ``unsafe`` when the checks fail, and raises
    :class:`UndefinedConditional` when an observational conditional is needed
    at a history the observational regime never produces.
    """
    from .conditions import check_positivity, check_simple_stability

    if policy not in ("require_checks", "force"):
        raise ValueError(f"unknown policy {policy!r}")
    model.regime(s)
    k.check(model)
    reports = (check_simple_stability(model, s), check_positivity(model, s))
    failing = [r for r in reports if not r]
    if failing and policy == "require_checks":
        raise TransferRefused(failing)
    blocks = _blocks(model)
    masses = transfer_masses(model, s)
    f = _backward(blocks, model.domains, masses, k, outcome_variable(model))
    return TransferResult(f[()], "unsafe" if failing else "verified", reports)
