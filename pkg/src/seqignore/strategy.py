"""Strategies, interventional regimes built from them, enumeration and selection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Optional

from .model import (
    InformationBase,
    Kernel,
    ModelError,
    Regime,
    RegimeKind,
    RegimeModel,
    validate_model,
)

DEFAULT_STRATEGY_CAP = 10**5


class StrategyError(ModelError):
    pass


class NotIdentifiable(Exception):
    """Every candidate strategy was refused in transfer mode."""

    def __init__(self, rows):
        self.rows = tuple(rows)
        super().__init__("not identifiable from observational data: every strategy was refused")


@dataclass(frozen=True)
class Strategy:
    """One kernel per action, reading only the decision maker's history.

    Static strategies ignore the history; non-randomised ones put all mass on
    one action value in every row.
    """

    decisions: Mapping
    id: Optional[str] = None

    def kernel(self, action: str) -> Kernel:
        return self.decisions[action]

    @property
    def is_static(self) -> bool:
        return all(len(set(k.rows.values())) == 1 for k in self.decisions.values())

    @property
    def is_deterministic(self) -> bool:
        return all(k.is_point_row(key) for k in self.decisions.values() for key in k.rows)

    def check(self, base: InformationBase) -> None:
        if tuple(self.decisions) != base.actions:
            raise StrategyError(
                f"strategy decides {', '.join(self.decisions) or 'nothing'}; "
                f"the information base has actions {', '.join(base.actions)}"
            )
        for st in base.stages[:-1]:
            kernel = self.decisions[st.action]
            allowed = set(base.history_before_action(st.index))
            hidden = [p for p in kernel.parents if p not in allowed]
            if hidden:
                raise StrategyError(
                    f"decision for {st.action} reads {', '.join(hidden)}, outside the history "
                    f"({', '.join(base.history_before_action(st.index)) or 'empty'})"
                )


def static_strategy(model: RegimeModel, choice: Mapping, sid: Optional[str] = None) -> Strategy:
    """Always take ``choice[A]`` at action ``A``."""
    decisions = {}
    for a in model.base.actions:
        decisions[a] = Kernel.point(a, (), model.domains, lambda _, v=choice[a]: v)
    return Strategy(decisions, sid)


def instantiate_regime(
    model: RegimeModel,
    strat: Strategy,
    regime_id: str = "s",
    template: Optional[str] = None,
    nature: Optional[Mapping] = None,
) -> RegimeModel:
    """Add an interventional regime whose actions follow ``strat``.

    Kernels for non-action variables are copied from ``template`` (the
    observational regime by default); ``nature`` overrides individual ones.
    """
    base = model.base
    strat.check(base)
    template = template or model.observational
    source = model.regime(template).kernels
    if regime_id in model.regimes and model.regime(regime_id).kind is RegimeKind.OBSERVATIONAL:
        raise StrategyError(f"regime {regime_id} is the observational regime")
    overrides = dict(nature or {})
    for name in overrides:
        if name in base.actions:
            raise StrategyError(f"{name} is an action; its kernel comes from the strategy")
    kernels = {}
    for v in model.variables:
        if v.name in strat.decisions:
            kernels[v.name] = strat.decisions[v.name]
        else:
            kernels[v.name] = overrides.get(v.name, source[v.name])
    out = model.with_regime(Regime(regime_id, RegimeKind.INTERVENTIONAL, kernels))
    problems = validate_model(out)
    if problems:
        raise StrategyError("; ".join(problems))
    return out


def _block_space(base: InformationBase, i: int) -> list:
    domains = {v.name: v.domain for v in base.variables}
    names = base.observables_through(i)
    return [tuple(zip(names, c)) for c in itertools.product(*(domains[n] for n in names))]


def strategy_count(base: InformationBase) -> int:
    """``prod_i |A_i| ** (number of observable histories l̄_i)``."""
    domains = {v.name: v.domain for v in base.variables}
    total = 1
    for st in base.stages[:-1]:
        total *= len(domains[st.action]) ** len(_block_space(base, st.index))
    return total


def enumerate_strategies(base, cap: int = DEFAULT_STRATEGY_CAP) -> Iterator[Strategy]:
    """Every non-randomised strategy, in lexicographic order of its encoding.

    Once earlier actions are fixed by the strategy, the history at stage
    ``i`` is determined by ``l̄_i``, so a strategy is one action choice per
    ``l̄_i``.  Rows for histories whose past actions disagree with the
    strategy are unreachable and default to the first action value.
    """
    if isinstance(base, RegimeModel):
        base = base.base
    count = strategy_count(base)
    if count > cap:
        raise StrategyError(f"{count} non-randomised strategies exceed the cap of {cap}")
    domains = {v.name: v.domain for v in base.variables}
    stages = base.stages[:-1]
    spaces = [_block_space(base, st.index) for st in stages]
    choice_axes = [
        range(len(domains[st.action])) for st, space in zip(stages, spaces) for _ in space
    ]
    for code in itertools.product(*choice_axes):
        yield _decode(base, domains, stages, spaces, code)


def _decode(base, domains, stages, spaces, code) -> Strategy:
    pos = 0
    plan = {}  # (stage index, l̄_i) -> action value
    for st, space in zip(stages, spaces):
        for lbar in space:
            plan[(st.index, lbar)] = domains[st.action][code[pos]]
            pos += 1
    decisions = {}
    for st in stages:
        parents = base.history_before_action(st.index)

        def choose(pv, st=st):
            lbar = tuple((n, pv[n]) for n in base.observables_through(st.index))
            for prior in stages[: st.index - 1]:
                prior_lbar = tuple((n, pv[n]) for n in base.observables_through(prior.index))
                if pv[prior.action] != plan[(prior.index, prior_lbar)]:
                    return domains[st.action][0]
            return plan[(st.index, lbar)]

        decisions[st.action] = Kernel.point(st.action, parents, domains, choose)
    sid = "/".join(
        f"{st.action}=" + ",".join(plan[(st.index, lbar)] for lbar in space)
        for st, space in zip(stages, spaces)
    )
    return Strategy(decisions, sid)


@dataclass(frozen=True)
class EvaluationRow:
    strategy_id: str
    consequence: Optional[Fraction]
    safety: str  # "verified", "unsafe" or "refused"
    reports: tuple = ()
    key: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "strategy": self.strategy_id,
            "consequence": None if self.consequence is None else str(self.consequence),
            "safety": self.safety,
        }
        if self.safety == "refused":
            out["refused_by"] = [r.to_dict() for r in self.reports]
        return out


@dataclass(frozen=True)
class OptimizationResult:
    best: EvaluationRow
    rows: tuple
    mode: str
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "best": self.best.to_dict(),
            "table": [r.to_dict() for r in self.rows],
            "notes": self.notes,
        }


_EVAL_REGIME = "candidate"
INHERITED_NOTE = "each candidate regime copies its non-action kernels from the observational regime"


def evaluate(model: RegimeModel, strat: Strategy, loss, mode: str = "oracle") -> EvaluationRow:
    """Consequence of ``strat``: by G-recursion on the instantiated regime (``oracle``)
    or from observational conditionals (``transfer``, refused unless the checks pass)."""
    from .grecursion import TransferRefused, g_recursion, g_transfer

    regime_id = _EVAL_REGIME
    while regime_id in model.regimes:
        regime_id += "_"
    inst = instantiate_regime(model, strat, regime_id)
    if mode == "oracle":
        return EvaluationRow(strat.id, g_recursion(inst, regime_id, loss), "verified")
    if mode != "transfer":
        raise ValueError(f"unknown mode {mode!r}")
    try:
        result = g_transfer(inst, regime_id, loss, "require_checks")
    except TransferRefused as exc:
        return EvaluationRow(strat.id, None, "refused", exc.reports)
    return EvaluationRow(strat.id, result.value, result.safety, result.reports)


def optimize(model: RegimeModel, loss, mode: str = "oracle", cap: int = DEFAULT_STRATEGY_CAP) -> OptimizationResult:
    """Evaluate every non-randomised strategy and return the one of least expected loss.

    Ties go to the strategy whose encoding comes first.
    """
    loss.check(model)
    rows = []
    # enumeration order is the lexicographic order of the encodings
    for index, strat in enumerate(enumerate_strategies(model.base, cap)):
        row = evaluate(model, strat, loss, mode)
        rows.append(EvaluationRow(row.strategy_id, row.consequence, row.safety, row.reports, (index,)))
    scored = [r for r in rows if r.consequence is not None]
    if not scored:
        raise NotIdentifiable(rows)
    best = min(scored, key=lambda r: (r.consequence, r.key))
    return OptimizationResult(best, tuple(rows), mode, INHERITED_NOTE)
