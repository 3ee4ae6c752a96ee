"""Variables, information bases, regimes and exact joint tables.

Every probability in the engine is a :class:`fractions.Fraction`.  A model is
a set of regimes over one information base; each regime supplies one kernel
per variable, and the product of the kernels along the information-base order
is the regime's joint distribution.
"""

from __future__ import annotations

import enum
import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

SIGMA = "sigma"
DEFAULT_MAX_STATES = 10**6
MAX_STATES_ENV = "SEQIGNORE_MAX_STATES"

Row = Optional[tuple]  # tuple of Fractions, or None for an unconstrained row


class ModelError(ValueError):
    """Raised for invalid models, unknown regimes and unknown variables."""


class StateSpaceError(ModelError):
    pass


class Role(str, enum.Enum):
    OBSERVABLE = "observable"
    ACTION = "action"
    UNOBSERVED = "unobserved"
    OUTCOME = "outcome"


class RegimeKind(str, enum.Enum):
    OBSERVATIONAL = "observational"
    INTERVENTIONAL = "interventional"


def max_states() -> int:
    raw = os.environ.get(MAX_STATES_ENV)
    if not raw:
        return DEFAULT_MAX_STATES
    try:
        value = int(raw)
    except ValueError:
        raise ModelError(f"{MAX_STATES_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ModelError(f"{MAX_STATES_ENV} must be positive")
    return value


@dataclass(frozen=True)
class Variable:
    name: str
    role: Role
    domain: tuple

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))

    @property
    def is_domain(self) -> bool:
        """True for variables available to the decision maker (everything but U)."""
        return self.role is not Role.UNOBSERVED


@dataclass(frozen=True)
class Stage:
    """One stage ``(L_i, U_i, A_i)``; the final stage has ``action=None``."""

    index: int
    observables: tuple
    unobserved: tuple
    action: Optional[str]


@dataclass(frozen=True)
class InformationBase:
    variables: tuple

    @property
    def sequence(self) -> tuple:
        return tuple(v.name for v in self.variables)

    @property
    def extended(self) -> bool:
        return any(v.role is Role.UNOBSERVED for v in self.variables)

    @cached_property
    def stages(self) -> tuple:
        stages = []
        obs, unobs = [], []
        for var in self.variables:
            if var.role is Role.ACTION:
                stages.append(Stage(len(stages) + 1, tuple(obs), tuple(unobs), var.name))
                obs, unobs = [], []
            elif var.role is Role.UNOBSERVED:
                unobs.append(var.name)
            else:
                obs.append(var.name)
        stages.append(Stage(len(stages) + 1, tuple(obs), tuple(unobs), None))
        return tuple(stages)

    @property
    def n(self) -> int:
        """Number of decision stages."""
        return len(self.stages) - 1

    @property
    def domain_variables(self) -> tuple:
        return tuple(v.name for v in self.variables if v.is_domain)

    @property
    def actions(self) -> tuple:
        return tuple(v.name for v in self.variables if v.role is Role.ACTION)

    def observables_through(self, i: int) -> tuple:
        """Names in L_1..L_i, in order."""
        return tuple(x for st in self.stages[:i] for x in st.observables)

    def unobserved_through(self, i: int) -> tuple:
        return tuple(x for st in self.stages[:i] for x in st.unobserved)

    def actions_through(self, i: int) -> tuple:
        return tuple(st.action for st in self.stages[:i] if st.action is not None)

    def ordered(self, names: Iterable[str]) -> tuple:
        """Sort ``names`` by information-base position."""
        pos = {v.name: i for i, v in enumerate(self.variables)}
        return tuple(sorted(set(names), key=pos.__getitem__))

    def domain_past(self, i: int) -> tuple:
        """``(L̄_{i-1}, Ā_{i-1})`` in information-base order."""
        return self.ordered(self.observables_through(i - 1) + self.actions_through(i - 1))

    def extended_past(self, i: int) -> tuple:
        """``(L̄_{i-1}, Ū_{i-1}, Ā_{i-1})`` in information-base order."""
        return self.ordered(
            self.observables_through(i - 1)
            + self.unobserved_through(i - 1)
            + self.actions_through(i - 1)
        )

    def history_before_action(self, i: int) -> tuple:
        """``(L̄_i, Ā_{i-1})``: what the decision maker knows when choosing A_i."""
        return self.ordered(self.observables_through(i) + self.actions_through(i - 1))

    def violations(self) -> list:
        found = []
        outcomes = [v for v in self.variables if v.role is Role.OUTCOME]
        if len(outcomes) != 1:
            found.append(f"exactly one outcome variable required, found {len(outcomes)}")
        elif self.variables[-1].role is not Role.OUTCOME:
            found.append(f"outcome {outcomes[0].name} must be last in the information base")
        segment_has_u = False
        for var in self.variables:
            if var.role is Role.ACTION:
                segment_has_u = False
            elif var.role is Role.UNOBSERVED:
                segment_has_u = True
            elif segment_has_u and var.role is Role.OBSERVABLE:
                found.append(
                    f"observable {var.name} follows an unobserved variable in the same stage; "
                    "U_i must come after L_i and before A_i"
                )
        if self.stages[-1].unobserved:
            found.append(
                "unobserved variables after the last action are not allowed: "
                + ", ".join(self.stages[-1].unobserved)
            )
        return found


@dataclass(frozen=True)
class Kernel:
    """Conditional table ``p(child | parents)``.

    ``rows`` maps each parent-value tuple to a probability vector over the
    child's domain, or to ``None`` when the row is unconstrained (only legal
    where the parent configuration has probability zero).
    """

    child: str
    parents: tuple
    rows: Mapping

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))

    def row(self, parent_values: tuple) -> Row:
        try:
            return self.rows[tuple(parent_values)]
        except KeyError:
            raise ModelError(
                f"kernel {self.child} has no row for {dict(zip(self.parents, parent_values))}"
            ) from None

    @classmethod
    def from_function(cls, child, parents, domains: Mapping, fn) -> "Kernel":
        """Build a total kernel; ``fn(parent_dict)`` returns a probability vector or None."""
        rows = {}
        for combo in itertools.product(*(domains[p] for p in parents)):
            out = fn(dict(zip(parents, combo)))
            rows[combo] = None if out is None else tuple(Fraction(x) for x in out)
        return cls(child, tuple(parents), rows)

    @classmethod
    def point(cls, child, parents, domains: Mapping, fn) -> "Kernel":
        """Deterministic kernel: ``fn(parent_dict)`` returns the child's value."""
        child_domain = domains[child]

        def vec(pv):
            value = str(fn(pv))
            return tuple(Fraction(int(v == value)) for v in child_domain)

        return cls.from_function(child, parents, domains, vec)

    def is_point_row(self, parent_values: tuple) -> bool:
        row = self.rows.get(tuple(parent_values))
        return row is not None and sum(1 for p in row if p) == 1 and max(row) == 1


@dataclass(frozen=True)
class Regime:
    id: str
    kind: RegimeKind
    kernels: Mapping

    def __post_init__(self):
        object.__setattr__(self, "kind", RegimeKind(self.kind))


@dataclass(frozen=True)
class RegimeModel:
    variables: tuple
    regimes: Mapping
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    @cached_property
    def base(self) -> InformationBase:
        return InformationBase(self.variables)

    @cached_property
    def _by_name(self) -> dict:
        return {v.name: v for v in self.variables}

    def variable(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r}") from None

    def domain(self, name: str) -> tuple:
        return self.variable(name).domain

    @property
    def domains(self) -> dict:
        return {v.name: v.domain for v in self.variables}

    @property
    def observational(self) -> str:
        ids = [r.id for r in self.regimes.values() if r.kind is RegimeKind.OBSERVATIONAL]
        if len(ids) != 1:
            raise ModelError(f"expected exactly one observational regime, found {len(ids)}")
        return ids[0]

    @property
    def interventional(self) -> tuple:
        return tuple(r.id for r in self.regimes.values() if r.kind is RegimeKind.INTERVENTIONAL)

    def regime(self, regime_id: str) -> Regime:
        try:
            return self.regimes[regime_id]
        except KeyError:
            raise ModelError(f"unknown regime {regime_id!r}") from None

    def with_regime(self, regime: Regime) -> "RegimeModel":
        regimes = dict(self.regimes)
        regimes[regime.id] = regime
        return RegimeModel(self.variables, regimes)

    def state_count(self) -> int:
        count = 1
        for v in self.variables:
            count *= len(v.domain)
        return count


class _Undefined:
    """Result of conditioning on an event of probability zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


@dataclass(frozen=True)
class Joint:
    """Exact joint table; only configurations with positive mass are stored."""

    variables: tuple
    domains: Mapping
    table: Mapping

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self, "domains", {v: tuple(self.domains[v]) for v in self.variables}
        )
        object.__setattr__(self, "table", {k: Fraction(p) for k, p in self.table.items() if p})

    def __getitem__(self, config) -> Fraction:
        return self.table.get(tuple(config), Fraction(0))

    def items(self):
        return self.table.items()

    @property
    def total(self) -> Fraction:
        return sum(self.table.values(), Fraction(0))

    def configurations(self) -> Iterator[tuple]:
        """Every configuration of the product space, including zero-mass ones."""
        return itertools.product(*(self.domains[v] for v in self.variables))

    def _positions(self, names: Iterable[str]) -> list:
        pos = {v: i for i, v in enumerate(self.variables)}
        try:
            return [pos[n] for n in names]
        except KeyError as exc:
            raise ModelError(f"unknown variable {exc.args[0]!r}") from None

    def prob(self, assignment: Optional[Mapping] = None, **kwargs) -> Fraction:
        """Marginal probability of a partial assignment."""
        event = dict(assignment or {}, **kwargs)
        idx = self._positions(event)
        wanted = [str(event[n]) for n in event]
        return sum(
            (p for cfg, p in self.table.items() if all(cfg[i] == w for i, w in zip(idx, wanted))),
            Fraction(0),
        )

    def conditional(self, event: Mapping, given: Mapping):
        """``P(event | given)`` or :data:`UNDEFINED` when ``given`` has zero mass."""
        denom = self.prob(given)
        if denom == 0:
            return UNDEFINED
        return self.prob({**given, **event}) / denom


def _structural_violations(model: RegimeModel) -> list:
    found = []
    names = [v.name for v in model.variables]
    seen = set()
    for v in model.variables:
        if v.name in seen:
            found.append(f"duplicate variable name {v.name!r}")
        seen.add(v.name)
        if v.name == SIGMA:
            found.append(f"variable name {SIGMA!r} is reserved for the regime indicator")
        if not v.domain:
            found.append(f"variable {v.name} has an empty domain")
        if len(set(v.domain)) != len(v.domain):
            found.append(f"variable {v.name} has repeated domain values")
    if not model.variables:
        found.append("model has no variables")
        return found
    found.extend(model.base.violations())
    kinds = [r.kind for r in model.regimes.values()]
    if kinds.count(RegimeKind.OBSERVATIONAL) != 1:
        found.append(
            f"exactly one observational regime required, found {kinds.count(RegimeKind.OBSERVATIONAL)}"
        )
    if kinds.count(RegimeKind.INTERVENTIONAL) < 1:
        found.append("at least one interventional regime required")
    position = {n: i for i, n in enumerate(names)}
    for rid, regime in model.regimes.items():
        if rid != regime.id:
            found.append(f"regime keyed {rid!r} has id {regime.id!r}")
        missing = [n for n in names if n not in regime.kernels]
        if missing:
            found.append(f"regime {rid}: no kernel for {', '.join(missing)}")
        for child, kernel in regime.kernels.items():
            where = f"regime {rid}, kernel {child}"
            if child not in position:
                found.append(f"{where}: unknown variable")
                continue
            if kernel.child != child:
                found.append(f"{where}: kernel is for {kernel.child}")
            bad = [p for p in kernel.parents if p not in position]
            if bad:
                found.append(f"{where}: unknown parent(s) {', '.join(bad)}")
                continue
            late = [p for p in kernel.parents if position[p] >= position[child]]
            if late:
                found.append(
                    f"{where}: parent(s) {', '.join(late)} do not precede {child} "
                    "in the information base (ordering violation)"
                )
            if len(set(kernel.parents)) != len(kernel.parents):
                found.append(f"{where}: repeated parent")
            domain = model.domain(child)
            for combo in itertools.product(*(model.domain(p) for p in kernel.parents)):
                label = ", ".join(f"{p}={v}" for p, v in zip(kernel.parents, combo)) or "(no parents)"
                if combo not in kernel.rows:
                    found.append(f"{where}: missing row for {label}")
                    continue
                row = kernel.rows[combo]
                if row is None:
                    continue
                if len(row) != len(domain):
                    found.append(
                        f"{where}: row {label} has {len(row)} entries, domain has {len(domain)}"
                    )
                    continue
                if any(not isinstance(p, Fraction) for p in row):
                    found.append(f"{where}: row {label} has non-rational entries")
                    continue
                if any(p < 0 or p > 1 for p in row):
                    found.append(f"{where}: row {label} has entries outside [0, 1]")
                total = sum(row, Fraction(0))
                if total != 1:
                    found.append(f"{where}: row {label} sums to {total}, not 1")
            extra = [k for k in kernel.rows if len(k) != len(kernel.parents)]
            if extra:
                found.append(f"{where}: rows with wrong arity")
    return found


def validate_model(model: RegimeModel) -> list:
    """Return a list of human-readable violations; empty iff the model is valid."""
    found = _structural_violations(model)
    model._cache["structure"] = found
    if found:
        return found
    if model.state_count() > max_states():
        return [f"state space of {model.state_count()} configurations exceeds cap {max_states()}"]
    for rid in model.regimes:
        try:
            materialize_joint(model, rid)
        except ModelError as exc:
            found.append(str(exc))
    return found


def _check_structure(model: RegimeModel) -> None:
    if "structure" not in model._cache:
        model._cache["structure"] = _structural_violations(model)
    problems = model._cache["structure"]
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems))
    count = model.state_count()
    if count > max_states():
        raise StateSpaceError(
            f"state space of {count} configurations exceeds cap {max_states()} "
            f"(override with {MAX_STATES_ENV})"
        )


def materialize_joint(model: RegimeModel, regime: str) -> Joint:
    """Multiply kernel rows along the information-base order.

    Zero-mass prefixes are dropped as they appear, so unconstrained rows are
    only an error when reached with positive probability.
    """
    model.regime(regime)
    key = ("joint", regime)
    if key in model._cache:
        return model._cache[key]
    _check_structure(model)
    names = [v.name for v in model.variables]
    position = {n: i for i, n in enumerate(names)}
    kernels = model.regimes[regime].kernels
    partial = {(): Fraction(1)}
    for name in names:
        kernel = kernels[name]
        idx = [position[p] for p in kernel.parents]
        domain = model.domain(name)
        grown = {}
        for prefix, mass in partial.items():
            parent_values = tuple(prefix[i] for i in idx)
            row = kernel.row(parent_values)
            if row is None:
                label = ", ".join(f"{p}={v}" for p, v in zip(kernel.parents, parent_values))
                raise ModelError(
                    f"regime {regime}: unconstrained row {name} | {label} is reached "
                    "with positive probability"
                )
            for value, p in zip(domain, row):
                if p:
                    grown[prefix + (value,)] = mass * p
        partial = grown
    joint = Joint(tuple(names), model.domains, partial)
    model._cache[key] = joint
    return joint


def marginalize(joint: Joint, keep: Iterable[str]) -> Joint:
    keep = set(keep)
    unknown = keep - set(joint.variables)
    if unknown:
        raise ModelError(f"unknown variable(s): {', '.join(sorted(unknown))}")
    kept = tuple(v for v in joint.variables if v in keep)
    idx = joint._positions(kept)
    out: dict = {}
    for cfg, p in joint.table.items():
        sub = tuple(cfg[i] for i in idx)
        out[sub] = out.get(sub, Fraction(0)) + p
    return Joint(kept, {v: joint.domains[v] for v in kept}, out)


def condition(joint: Joint, given: Mapping):
    """Renormalised slice of ``joint`` at ``given``, over the remaining variables.

    Returns :data:`UNDEFINED` when the slice has zero mass.
    """
    given = {k: str(v) for k, v in given.items()}
    idx = joint._positions(given)
    for name, value in given.items():
        if value not in joint.domains[name]:
            raise ModelError(f"{value!r} is not in the domain of {name}")
    if not given:
        return joint
    rest = tuple(v for v in joint.variables if v not in given)
    rest_idx = joint._positions(rest)
    wanted = list(given.values())
    sliced = {}
    for cfg, p in joint.table.items():
        if all(cfg[i] == w for i, w in zip(idx, wanted)):
            sliced[tuple(cfg[i] for i in rest_idx)] = p
    mass = sum(sliced.values(), Fraction(0))
    if mass == 0:
        return UNDEFINED
    return Joint(rest, {v: joint.domains[v] for v in rest}, {k: p / mass for k, p in sliced.items()})


def product_space(domains: Mapping, names: Sequence[str]) -> Iterator[tuple]:
    return itertools.product(*(domains[n] for n in names))


def fmt_assignment(pairs) -> str:
    """``A=1,U=0`` rendering for witnesses and messages."""
    if isinstance(pairs, Mapping):
        pairs = pairs.items()
    return ",".join(f"{k}={v}" for k, v in pairs) or "∅"
