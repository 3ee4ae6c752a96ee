"""Named example problems with the verdicts they are known to produce.

``fixture(name)`` returns the model or diagram together with a list of
expectations; ``verify_fixture(name)`` recomputes each one and compares it
exactly.  Models are shipped as DSL text under ``data/``; ``cts(N)`` is
generated on demand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Callable, Optional

from ..ci import check_version
from ..conditions import (
    check_control_strategy,
    check_extended_positivity,
    check_extended_stability,
    check_lemma1,
    check_positivity,
    check_sequential_irrelevance,
    check_sequential_randomization,
    check_simple_stability,
)
from ..diagram import InfluenceDiagram, d_separated
from ..dsl import parse_diagram, parse_model
from ..grecursion import (
    OutcomeFunctional,
    TransferRefused,
    UndefinedConditional,
    consequence_brute_force,
    g_recursion,
    g_transfer,
)
from ..model import RegimeModel, materialize_joint

NAMES = ("cts(N)", "appb", "discretesi", "fig1", "fig2", "fig3", "fig4", "fig5", "hiv-toy", "xor")

# model fixture -> diagram it is paired with
PAIRED_DIAGRAM = {"discretesi": "fig5", "cts": "fig5", "appb": "appb", "hiv-toy": "hiv-toy", "xor": "xor"}


class UnknownFixture(KeyError):
    pass


@dataclass(frozen=True)
class Expectation:
    label: str
    expected: object
    probe: Callable = field(repr=False, compare=False)


@dataclass
class Fixture:
    name: str
    source: str
    model: Optional[RegimeModel] = None
    diagram: Optional[InfluenceDiagram] = None
    paired: Optional[InfluenceDiagram] = None
    expected: list = field(default_factory=list)
    notes: str = ""


def data_text(filename: str) -> str:
    return resources.files(__name__).joinpath("data", filename).read_text(encoding="utf-8")


def cts_source(n: int) -> str:
    """``U`` uniform on ``n`` points; ``o``: ``A = U``; ``s``: ``A`` uniform; ``Y = 1{A = U}``."""
    if n < 2:
        raise ValueError("cts(N) needs N >= 2")
    values = ", ".join(str(i) for i in range(n))
    lines = [
        f"# {n}-point version of the uniform example: Y = 1 exactly when A = U.",
        "variables:",
        f"  U : unobserved {{{values}}}",
        f"  A : action {{{values}}}",
        "  Y : outcome {0, 1}",
        "",
        "shared:",
        "  kernel U : uniform",
        "  kernel Y | U A :",
    ]
    lines += [f"    {i} {i} := 1" for i in range(n)]
    lines += ["    else := 0", "", "regime o : observational", "  kernel A | U :"]
    lines += [f"    {i} := {i}" for i in range(n)]
    lines += ["", "regime s : interventional", "  kernel A : uniform", ""]
    return "\n".join(lines)


def _witness_probs(report, cell, event):
    """Both sides of the first witness at ``cell`` for ``event``, or None."""
    for w in report.witnesses:
        if dict(w.cell) == cell and dict(w.event) == event:
            return (w.left_prob, w.right_prob)
    return None


def _mass_events(report):
    return [(dict(w.event), w.s_mass, w.o_mass) for w in report.witnesses]


def _version(report, stage, x, z):
    table = report.details["versions"].get(stage)
    return None if table is None else table.value(x, z)


def _transfer_outcome(model, s, k, policy):
    try:
        result = g_transfer(model, s, k, policy)
    except TransferRefused as exc:
        return ("refused", tuple(r.condition for r in exc.reports))
    except UndefinedConditional as exc:
        return ("undefined", exc.history)
    return (result.safety, result.value)


def _discretesi() -> Fixture:
    src = data_text("discretesi.model")
    m = parse_model(src)
    y1 = OutcomeFunctional.indicator(m, 1)
    js = materialize_joint(m, "s")
    exp = [
        Expectation("extended stability holds", True, lambda: check_extended_stability(m, "s").holds),
        Expectation(
            "common version w(Y=1|U=0,A=0)",
            Fraction(16, 25),
            lambda: _version(check_extended_stability(m, "s"), 2, {"Y": "1"}, {"U": "0", "A": "0"}),
        ),
        Expectation(
            "common version w(Y=1|U=1,A=1)",
            Fraction(11, 25),
            lambda: _version(check_extended_stability(m, "s"), 2, {"Y": "1"}, {"U": "1", "A": "1"}),
        ),
        Expectation("control strategy under s holds", True, lambda: check_control_strategy(m, "s").holds),
        Expectation("P(A=1|U=0;s)", Fraction(1, 5), lambda: js.conditional({"A": "1"}, {"U": "0"})),
        Expectation("P(A=1|U=1;s)", Fraction(1, 5), lambda: js.conditional({"A": "1"}, {"U": "1"})),
        Expectation(
            "sequential irrelevance under o holds", True, lambda: check_sequential_irrelevance(m, "o").holds
        ),
        Expectation(
            "sequential irrelevance under s holds", False, lambda: check_sequential_irrelevance(m, "s").holds
        ),
        Expectation(
            "irrelevance(s) witness at A=1: P(Y=1|U=0), P(Y=1|U=1)",
            (Fraction(4, 5), Fraction(11, 25)),
            lambda: _witness_probs(check_sequential_irrelevance(m, "s"), {"A": "1"}, {"Y": "1"}),
        ),
        Expectation(
            "extended positivity holds", False, lambda: check_extended_positivity(m, "s").holds
        ),
        Expectation(
            "extended positivity witness (event, s-mass, o-mass)",
            [({"U": "1", "A": "1"}, Fraction(175, 1500), Fraction(0))],
            lambda: _mass_events(check_extended_positivity(m, "s")),
        ),
        Expectation("simple stability holds", False, lambda: check_simple_stability(m, "s").holds),
        Expectation(
            "simple stability witness at A=1: P(Y=1|A=1;o), P(Y=1|A=1;s)",
            (Fraction(4, 5), Fraction(59, 100)),
            lambda: _witness_probs(check_simple_stability(m, "s"), {"A": "1"}, {"Y": "1"}),
        ),
        Expectation("positivity over (A, Y) holds", True, lambda: check_positivity(m, "s").holds),
        Expectation(
            "sequential randomization holds", False, lambda: check_sequential_randomization(m).holds
        ),
        Expectation("positivity-propagation lemma holds", True, lambda: check_lemma1(m, "s").holds),
        Expectation("P(Y=1;s) by brute force", Fraction(945, 1500), lambda: consequence_brute_force(m, "s", y1)),
        Expectation("P(Y=1;s) by G-recursion", Fraction(945, 1500), lambda: g_recursion(m, "s", y1)),
    ]
    notes = (
        "Irrelevance is checked separately in each regime: it holds under o and fails under s. "
        "Every conditional shown is exact."
    )
    return Fixture("discretesi", src, m, paired=_diagram_only("fig5"), expected=exp, notes=notes)


def _w_o(cell):
    return Fraction(cell["L1"]) if cell["A"] == "0" else Fraction(0)


def _w_s(cell):
    return Fraction(2) if cell["A"] == "0" else Fraction(cell["L1"]) + 1


def _appb() -> Fixture:
    src = data_text("appb.model")
    m = parse_model(src)
    k = OutcomeFunctional.identity(m)
    jo, js = materialize_joint(m, "o"), materialize_joint(m, "s")
    ident = {v: Fraction(v) for v in m.domain("L2")}

    def valid(joint, w):
        return check_version(joint, ident, "L2", ("L1", "A"), w).holds

    exp = [
        Expectation("positivity holds", False, lambda: check_positivity(m, "s").holds),
        Expectation(
            "positivity witness (event, s-mass, o-mass)",
            [({"A": "1"}, Fraction(1), Fraction(0))],
            lambda: _mass_events(check_positivity(m, "s")),
        ),
        Expectation("simple stability holds", True, lambda: check_simple_stability(m, "s").holds),
        Expectation("E(L2;s) by brute force", Fraction(3, 2), lambda: consequence_brute_force(m, "s", k)),
        Expectation("E(L2;s) by G-recursion", Fraction(3, 2), lambda: g_recursion(m, "s", k)),
        Expectation(
            "transfer with checks", ("refused", ("positivity",)), lambda: _transfer_outcome(m, "s", k, "require_checks")
        ),
        Expectation(
            "forced transfer",
            ("undefined", (("L1", "0"), ("A", "1"))),
            lambda: _transfer_outcome(m, "s", k, "force"),
        ),
        Expectation("W_o is a version of E(L2|L1,A) under o", True, lambda: valid(jo, _w_o)),
        Expectation("W_o is a version of E(L2|L1,A) under s", False, lambda: valid(js, _w_o)),
        Expectation("W_s is a version of E(L2|L1,A) under s", True, lambda: valid(js, _w_s)),
        Expectation("W_s is a version of E(L2|L1,A) under o", False, lambda: valid(jo, _w_s)),
    ]
    return Fixture("appb", src, m, paired=_diagram_only("appb"), expected=exp)


def _cts(n: int) -> Fixture:
    src = cts_source(n)
    m = parse_model(src)
    y1 = OutcomeFunctional.indicator(m, 1)
    exp = [
        Expectation("extended stability holds", True, lambda: check_extended_stability(m, "s").holds),
        Expectation("control strategy under s holds", True, lambda: check_control_strategy(m, "s").holds),
        Expectation("simple stability holds", False, lambda: check_simple_stability(m, "s").holds),
        Expectation(
            "simple stability witness at A=0: P(Y=1|A=0;o), P(Y=1|A=0;s)",
            (Fraction(1), Fraction(1, n)),
            lambda: _witness_probs(check_simple_stability(m, "s"), {"A": "0"}, {"Y": "1"}),
        ),
        Expectation(
            "sequential irrelevance under o holds", True, lambda: check_sequential_irrelevance(m, "o").holds
        ),
        Expectation(
            "sequential irrelevance under s holds", False, lambda: check_sequential_irrelevance(m, "s").holds
        ),
        Expectation("extended positivity holds", False, lambda: check_extended_positivity(m, "s").holds),
        Expectation("P(Y=1;o)", Fraction(1), lambda: consequence_brute_force(m, "o", y1)),
        Expectation("P(Y=1;s)", Fraction(1, n), lambda: consequence_brute_force(m, "s", y1)),
        Expectation("P(Y=1;s) by G-recursion", Fraction(1, n), lambda: g_recursion(m, "s", y1)),
    ]
    notes = (
        "Discrete stand-in for a continuous model. With finitely many points, irrelevance "
        "under s fails outright; with a continuous treatment it holds only because the "
        "relevant conditionals are degenerate."
    )
    return Fixture(f"cts({n})", src, m, paired=_diagram_only("fig5"), expected=exp, notes=notes)


def _xor() -> Fixture:
    from ..strategy import optimize

    src = data_text("xor.model")
    m = parse_model(src)
    loss = OutcomeFunctional.identity(m)
    exp = [
        Expectation("simple stability holds", True, lambda: check_simple_stability(m, "s").holds),
        Expectation("positivity holds", True, lambda: check_positivity(m, "s").holds),
        Expectation("best strategy (oracle)", ("A1=0,1", Fraction(0)),
                    lambda: (lambda r: (r.best.strategy_id, r.best.consequence))(optimize(m, loss, "oracle"))),
        Expectation("best strategy (transfer)", ("A1=0,1", Fraction(0)),
                    lambda: (lambda r: (r.best.strategy_id, r.best.consequence))(optimize(m, loss, "transfer"))),
    ]
    return Fixture("xor", src, m, paired=_diagram_only("xor"), expected=exp)


def _hiv_toy() -> Fixture:
    src = data_text("hiv-toy.model")
    m = parse_model(src)
    y1 = OutcomeFunctional.indicator(m, 1)
    checks = {
        "extended stability": (check_extended_stability, True),
        "sequential randomization": (lambda mm, s: check_sequential_randomization(mm), True),
        "control strategy under s": (check_control_strategy, True),
        "simple stability": (check_simple_stability, True),
        "positivity": (check_positivity, True),
        "extended positivity": (check_extended_positivity, True),
    }
    exp = [
        Expectation(f"{name} holds", want, lambda fn=fn: fn(m, "s").holds)
        for name, (fn, want) in checks.items()
    ]
    exp.append(
        Expectation(
            "transfer equals G-recursion",
            True,
            lambda: g_transfer(m, "s", y1).value == g_recursion(m, "s", y1),
        )
    )
    return Fixture("hiv-toy", src, m, paired=_diagram_only("hiv-toy"), expected=exp)


def _diagram_only(name: str) -> InfluenceDiagram:
    return parse_diagram(data_text(f"{name}.dag"))


def _figure(name: str) -> Fixture:
    src = data_text(f"{name}.dag")
    dag = parse_diagram(src)

    def sep(x, y, z):
        return lambda: d_separated(dag, x, y, z).separated

    exp = []
    if name == "fig1":
        exp += [
            Expectation("L1 _||_ sigma", True, sep({"L1"}, {"sigma"}, set())),
            Expectation("L2 _||_ sigma | L1,A1", True, sep({"L2"}, {"sigma"}, {"L1", "A1"})),
            Expectation("Y _||_ sigma | L1,A1,L2,A2", True, sep({"Y"}, {"sigma"}, {"L1", "A1", "L2", "A2"})),
        ]
    elif name in ("fig2", "fig3", "fig4"):
        exp += [
            Expectation("L1,U1 _||_ sigma", True, sep({"L1", "U1"}, {"sigma"}, set())),
            Expectation(
                "L2,U2 _||_ sigma | L1,U1,A1", True, sep({"L2", "U2"}, {"sigma"}, {"L1", "U1", "A1"})
            ),
            Expectation(
                "Y _||_ sigma | L1,U1,A1,L2,U2,A2",
                True,
                sep({"Y"}, {"sigma"}, {"L1", "U1", "A1", "L2", "U2", "A2"}),
            ),
        ]
        exp.append(
            Expectation(
                "L2 _||_ sigma | L1,A1",
                name != "fig2",
                sep({"L2"}, {"sigma"}, {"L1", "A1"}),
            )
        )
        exp.append(
            Expectation(
                "Y _||_ sigma | L1,A1,L2,A2",
                name != "fig2",
                sep({"Y"}, {"sigma"}, {"L1", "A1", "L2", "A2"}),
            )
        )
    elif name == "fig5":
        exp += [
            Expectation("U _||_ sigma", True, sep({"U"}, {"sigma"}, set())),
            Expectation("Y _||_ sigma | U,A", True, sep({"Y"}, {"sigma"}, {"U", "A"})),
            Expectation("Y _||_ sigma | A", False, sep({"Y"}, {"sigma"}, {"A"})),
            Expectation(
                "active path for Y _||_ sigma | A",
                ("Y", "U", "A", "sigma"),
                lambda: d_separated(dag, {"Y"}, {"sigma"}, {"A"}).path,
            ),
        ]
    return Fixture(name, src, diagram=dag, expected=exp)


_CTS = re.compile(r"^cts\((\d+)\)$")


def fixture(name: str) -> Fixture:
    """Look up a fixture by name; ``cts(N)`` takes any ``N >= 2``."""
    m = _CTS.match(name)
    if m:
        if int(m.group(1)) < 2:
            raise UnknownFixture(f"cts(N) needs N >= 2, got {name!r}")
        return _cts(int(m.group(1)))
    builders = {
        "discretesi": _discretesi,
        "appb": _appb,
        "xor": _xor,
        "hiv-toy": _hiv_toy,
    }
    if name in builders:
        return builders[name]()
    if name in ("fig1", "fig2", "fig3", "fig4", "fig5"):
        return _figure(name)
    raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(NAMES)}")


@dataclass(frozen=True)
class FixtureRow:
    label: str
    expected: object
    actual: object
    passed: bool


@dataclass(frozen=True)
class FixtureReport:
    name: str
    rows: tuple
    notes: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def __bool__(self):
        return self.passed


def verify_fixture(name) -> FixtureReport:
    """Recompute every expectation of a fixture and compare exactly."""
    fx = name if isinstance(name, Fixture) else fixture(name)
    rows = []
    for e in fx.expected:
        try:
            actual = e.probe()
        except Exception as exc:  # a crash is a mismatch, reported rather than raised
            actual = f"error: {type(exc).__name__}: {exc}"
        rows.append(FixtureRow(e.label, e.expected, actual, actual == e.expected))
    return FixtureReport(fx.name, tuple(rows), fx.notes)
