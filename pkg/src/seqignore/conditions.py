"""Checkers for the identifying conditions, each returning a :class:`CheckReport`.

Stage ``i`` runs from 1 to ``n+1``; stage ``n+1`` holds the outcome.  All
comparisons are exact, and conditioning cells of probability zero never
count against a condition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .ci import CIStatement, check_extended_ci, independence_discrepancies
from .model import (
    ModelError,
    RegimeKind,
    RegimeModel,
    fmt_assignment,
    marginalize,
    materialize_joint,
)


class ConditionError(ModelError):
    """A checker cannot run on this model (e.g. no unobserved variables)."""


class PreconditionError(ConditionError):
    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = tuple(failed)


class ImplicationViolation(RuntimeError):
    """A proven implication failed: the premises passed but the conclusion did not."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(v.describe() for v in self.violations))


@dataclass(frozen=True)
class MassWitness:
    """An event with positive mass in one regime and zero mass in the other."""

    event: tuple
    s_mass: Fraction
    o_mass: Fraction
    regime: str
    reference: str

    def describe(self) -> str:
        ev = fmt_assignment(self.event)
        return (
            f"P({ev} ; {self.regime}) = {self.s_mass} but "
            f"P({ev} ; {self.reference}) = {self.o_mass}"
        )

    def to_dict(self) -> dict:
        return {
            "kind": "mass",
            "event": dict(self.event),
            "regime": self.regime,
            "mass": str(self.s_mass),
            "reference": self.reference,
            "reference_mass": str(self.o_mass),
        }


@dataclass(frozen=True)
class LemmaCell:
    stage: int
    cell: tuple
    history_s: Fraction
    full_o: Fraction
    full_s: Fraction

    def describe(self) -> str:
        return (
            f"stage {self.stage}: at {fmt_assignment(self.cell)} p(history; s) = {self.history_s}, "
            f"p(cell; o) = {self.full_o}, yet p(cell; s) = {self.full_s}"
        )

    def to_dict(self) -> dict:
        return {
            "kind": "lemma-cell",
            "stage": self.stage,
            "cell": dict(self.cell),
            "history_s": str(self.history_s),
            "full_o": str(self.full_o),
            "full_s": str(self.full_s),
        }


@dataclass(frozen=True)
class CheckReport:
    condition: str
    regime_pair: tuple
    holds: bool
    witnesses: tuple = ()
    notes: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "regimes": list(self.regime_pair),
            "holds": self.holds,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }
        if self.notes:
            out["notes"] = self.notes
        versions = self.details.get("versions")
        if versions:
            out["common_versions"] = {str(i): v.to_dict() for i, v in versions.items()}
        return out


def _interventional(model: RegimeModel, s: str) -> str:
    if model.regime(s).kind is not RegimeKind.INTERVENTIONAL:
        raise ConditionError(f"regime {s} is not interventional")
    return s


def _require_extended(model: RegimeModel, condition: str) -> None:
    if not model.base.extended:
        raise ConditionError(f"{condition} needs an extended information base (unobserved variables)")


def _sigma_stages(model, s, condition, blocks) -> CheckReport:
    """Common-version check of ``block_i _||_ sigma | past_i`` over ``{o, s}``, stage by stage."""
    o = model.observational
    witnesses, versions = [], {}
    for i, block, past in blocks:
        if not block:
            continue
        stmt = CIStatement.of(block, (), past, sigma_in_y=True)
        verdict = check_extended_ci(model, (o, s), stmt)
        witnesses.extend(replace(w, stage=i) for w in verdict.witnesses)
        if verdict.common_version is not None:
            versions[i] = verdict.common_version
    return CheckReport(
        condition, (o, s), not witnesses, tuple(witnesses), details={"versions": versions}
    )


def check_simple_stability(model: RegimeModel, s: str) -> CheckReport:
    """``L_i _||_ sigma | (L̄_{i-1}, Ā_{i-1})`` for every stage, over ``{o, s}``."""
    _interventional(model, s)
    base = model.base
    blocks = [(st.index, st.observables, base.domain_past(st.index)) for st in base.stages]
    return _sigma_stages(model, s, "simple-stability", blocks)


def check_extended_stability(model: RegimeModel, s: str) -> CheckReport:
    """``(L_i, U_i) _||_ sigma | (L̄_{i-1}, Ū_{i-1}, Ā_{i-1})`` for every stage."""
    _interventional(model, s)
    _require_extended(model, "extended stability")
    base = model.base
    blocks = [
        (st.index, st.observables + st.unobserved, base.extended_past(st.index))
        for st in base.stages
    ]
    return _sigma_stages(model, s, "extended-stability", blocks)


def _minimal_event(names, cfg, marginal) -> tuple:
    """Smallest sub-event of ``cfg`` (first in base order among equals) with zero o-mass.

    ``marginal(sub_names)`` returns the o-marginal table over ``sub_names``.
    """
    positions = range(len(names))
    for r in range(1, len(names) + 1):
        for idx in itertools.combinations(positions, r):
            sub = tuple(names[i] for i in idx)
            if marginal(sub)[tuple(cfg[i] for i in idx)] == 0:
                return tuple(zip(sub, (cfg[i] for i in idx)))
    return tuple(zip(names, cfg))


def _absolute_continuity(model, s, names, condition) -> CheckReport:
    o = model.observational
    js = marginalize(materialize_joint(model, s), names)
    jo = marginalize(materialize_joint(model, o), names)
    order = js.variables
    cache = {}

    def marginal(sub):
        if sub not in cache:
            cache[sub] = marginalize(jo, sub)
        return cache[sub]

    index = [{v: i for i, v in enumerate(js.domains[n])} for n in order]
    events = {}
    for cfg, p in sorted(js.items(), key=lambda kv: [ix[v] for ix, v in zip(index, kv[0])]):
        if jo[cfg] == 0:
            events.setdefault(_minimal_event(order, cfg, marginal), None)
    witnesses = tuple(
        MassWitness(e, js.prob(dict(e)), jo.prob(dict(e)), s, o) for e in events
    )
    return CheckReport(condition, (o, s), not witnesses, witnesses)


def check_positivity(model: RegimeModel, s: str) -> CheckReport:
    """Every configuration of the domain variables with positive s-mass has positive o-mass.

    Witnesses are shrunk to a minimal event that still has o-mass zero.
    """
    _interventional(model, s)
    return _absolute_continuity(model, s, model.base.domain_variables, "positivity")


def check_extended_positivity(model: RegimeModel, s: str) -> CheckReport:
    _interventional(model, s)
    _require_extended(model, "extended positivity")
    return _absolute_continuity(
        model, s, [v.name for v in model.variables], "extended-positivity"
    )


def _action_independence(model, regime, condition, notes="") -> CheckReport:
    base = model.base
    joint = materialize_joint(model, regime)
    witnesses = []
    for st in base.stages[:-1]:
        ubar = base.unobserved_through(st.index)
        found = independence_discrepancies(
            joint, [st.action], ubar, base.history_before_action(st.index), regime
        )
        witnesses.extend(replace(w, stage=st.index) for w in found)
    return CheckReport(condition, (regime,), not witnesses, tuple(witnesses), notes)


def check_control_strategy(model: RegimeModel, s: str) -> CheckReport:
    """``A_i _||_ Ū_i | (L̄_i, Ā_{i-1})`` inside regime ``s``.

    The action kernels being written out in the model stands in for their
    being known.  Any regime may be tested, including the observational one.
    """
    model.regime(s)
    _require_extended(model, "control strategy")
    return _action_independence(
        model, s, "control-strategy", "action kernels taken as known: they are given explicitly"
    )


def check_sequential_randomization(model: RegimeModel) -> CheckReport:
    """``A_i _||_ Ū_i | (L̄_i, Ā_{i-1})`` inside the observational regime."""
    _require_extended(model, "sequential randomization")
    return _action_independence(model, model.observational, "sequential-randomization")


def check_sequential_irrelevance(model: RegimeModel, regime: str) -> CheckReport:
    """``L_i _||_ Ū_{i-1} | (L̄_{i-1}, Ā_{i-1})`` inside ``regime``."""
    model.regime(regime)
    _require_extended(model, "sequential irrelevance")
    base = model.base
    joint = materialize_joint(model, regime)
    witnesses = []
    for st in base.stages:
        ubar = base.unobserved_through(st.index - 1)
        if not st.observables or not ubar:
            continue
        found = independence_discrepancies(
            joint, st.observables, ubar, base.domain_past(st.index), regime
        )
        witnesses.extend(replace(w, stage=st.index) for w in found)
    return CheckReport(
        f"sequential-irrelevance({regime})", (regime,), not witnesses, tuple(witnesses)
    )


def check_lemma1(model: RegimeModel, s: str) -> CheckReport:
    """Scan every cell ``(ū_k, l̄_k, ā_k)``, ``k = 1..n+1``, for positive s-mass of the
    history and positive o-mass of the cell without positive s-mass of the cell.

    Requires extended stability and a control strategy; raises
    :class:`PreconditionError` otherwise.
    """
    _interventional(model, s)
    _require_extended(model, "the positivity-propagation lemma")
    failed = [r for r in (check_extended_stability(model, s), check_control_strategy(model, s)) if not r]
    if failed:
        names = ", ".join(r.condition for r in failed)
        raise PreconditionError(f"preconditions fail: {names}", failed)
    o = model.observational
    base = model.base
    js, jo = materialize_joint(model, s), materialize_joint(model, o)
    domains = model.domains
    witnesses = []
    for st in base.stages:
        k = st.index
        hist = base.ordered(base.observables_through(k) + base.actions_through(k))
        full = base.ordered(hist + base.unobserved_through(k))
        ms, mo = marginalize(js, full), marginalize(jo, full)
        hs = marginalize(js, hist)
        hidx = [ms.variables.index(v) for v in hs.variables]
        for cfg in itertools.product(*(domains[v] for v in ms.variables)):
            a = hs[tuple(cfg[i] for i in hidx)]
            b = mo[cfg]
            if a > 0 and b > 0 and ms[cfg] == 0:
                witnesses.append(LemmaCell(k, tuple(zip(ms.variables, cfg)), a, b, ms[cfg]))
    return CheckReport("lemma1", (o, s), not witnesses, tuple(witnesses))


# ---------------------------------------------------------------------------
# aggregate report

# (name, premises, conclusion); each is a proven implication between checks
IMPLICATIONS = (
    (
        "sequential randomization",
        ("extended-stability", "sequential-randomization", "control-strategy"),
        "simple-stability",
    ),
    (
        "irrelevance under the intervention",
        ("extended-stability", "control-strategy", "sequential-irrelevance(s)"),
        "simple-stability",
    ),
    (
        "extended positivity",
        ("extended-stability", "extended-positivity", "sequential-irrelevance(o)"),
        "simple-stability",
    ),
    ("positivity propagation", ("extended-stability", "control-strategy"), "lemma1"),
    ("marginal positivity", ("extended-positivity",), "positivity"),
)


@dataclass(frozen=True)
class Violation:
    implication: str
    premises: tuple
    conclusion: str

    def describe(self) -> str:
        return (
            f"internal error: {' and '.join(self.premises)} hold but {self.conclusion} fails "
            f"({self.implication})"
        )


@dataclass(frozen=True)
class ConditionReport:
    model_regimes: tuple  # (o, s)
    checks: dict  # key -> CheckReport
    implications: tuple  # (name, premises, conclusion, status)
    violations: tuple

    @property
    def transfer_safe(self) -> bool:
        return bool(self.checks["simple-stability"]) and bool(self.checks["positivity"])

    def __getitem__(self, key) -> CheckReport:
        return self.checks[key]

    def to_dict(self) -> dict:
        return {
            "regimes": list(self.model_regimes),
            "checks": [c.to_dict() for c in self.checks.values()],
            "implications": [
                {"name": n, "premises": list(p), "conclusion": c, "status": st}
                for n, p, c, st in self.implications
            ],
            "transfer_safe": self.transfer_safe,
            "violations": [v.describe() for v in self.violations],
        }


def condition_report(model: RegimeModel, s: Optional[str] = None, strict: bool = False) -> ConditionReport:
    """Run every applicable checker for the pair ``(o, s)`` and audit the implications.

    Keys ``sequential-irrelevance(o)``/``(s)`` refer to the observational and
    the chosen interventional regime.  With ``strict`` a failed implication
    raises :class:`ImplicationViolation`; otherwise it is listed in
    ``violations``.
    """
    if s is None:
        ids = model.interventional
        if len(ids) != 1:
            raise ConditionError("several interventional regimes; choose one")
        s = ids[0]
    _interventional(model, s)
    o = model.observational
    checks = {
        "simple-stability": check_simple_stability(model, s),
        "positivity": check_positivity(model, s),
    }
    if model.base.extended:
        checks["extended-stability"] = check_extended_stability(model, s)
        checks["extended-positivity"] = check_extended_positivity(model, s)
        checks["control-strategy"] = check_control_strategy(model, s)
        checks["sequential-randomization"] = check_sequential_randomization(model)
        checks["sequential-irrelevance(o)"] = check_sequential_irrelevance(model, o)
        checks["sequential-irrelevance(s)"] = check_sequential_irrelevance(model, s)
        try:
            checks["lemma1"] = check_lemma1(model, s)
        except PreconditionError:
            pass
    rows, violations = [], []
    for name, premises, conclusion in IMPLICATIONS:
        if any(p not in checks for p in premises):
            continue
        # lemma1 is only run when its premises pass
        if not all(checks[p] for p in premises):
            status = "premises fail"
        elif checks[conclusion]:
            status = "confirmed"
        else:
            status = "VIOLATED"
            violations.append(Violation(name, premises, conclusion))
        rows.append((name, premises, conclusion, status))
    report = ConditionReport((o, s), checks, tuple(rows), tuple(violations))
    if strict and violations:
        raise ImplicationViolation(violations)
    return report
