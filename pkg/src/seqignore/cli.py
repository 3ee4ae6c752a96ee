"""Command-line front end.

Exit codes: 0 success / condition holds, 1 condition fails or refusal,
2 input error, 3 undefined observational conditional during transfer,
4 internal error (a proven implication failed).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .ci import ClosureCapError, derivable
from .conditions import (
    ConditionError,
    PreconditionError,
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
from .diagram import DiagramError, d_separated, moral_separated, statement_nodes
from .dsl import DSLError, parse_ci, parse_diagram, parse_loss, parse_model, parse_strategy
from .fixtures import UnknownFixture, cts_source, data_text, fixture, verify_fixture
from .grecursion import (
    OutcomeFunctional,
    TransferRefused,
    UndefinedConditional,
    consequence_brute_force,
    g_recursion,
    g_transfer,
)
from .model import ModelError
from .strategy import NotIdentifiable, StrategyError, instantiate_regime, optimize

SCHEMA = "seqignore.report/1"
OK, FAILS, INPUT_ERROR, UNDEFINED, INTERNAL = 0, 1, 2, 3, 4

CONDITIONS = {
    "simple-stability": lambda m, s: check_simple_stability(m, s),
    "positivity": lambda m, s: check_positivity(m, s),
    "extended-stability": lambda m, s: check_extended_stability(m, s),
    "extended-positivity": lambda m, s: check_extended_positivity(m, s),
    "control-strategy": lambda m, s: check_control_strategy(m, s),
    "sequential-randomization": lambda m, s: check_sequential_randomization(m),
    "sequential-irrelevance-o": lambda m, s: check_sequential_irrelevance(m, m.observational),
    "sequential-irrelevance-s": lambda m, s: check_sequential_irrelevance(m, s),
    "lemma1": lambda m, s: check_lemma1(m, s),
}


class InputError(Exception):
    pass


def _read_source(arg: str, suffix: str) -> tuple:
    """Text of a file, falling back to a bundled fixture file of the same name."""
    path = Path(arg)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    if arg.startswith("cts(") and suffix == ".model":
        try:
            return cts_source(int(arg[4:-1])), arg
        except ValueError as exc:
            raise InputError(f"bad fixture name {arg!r}: {exc}") from None
    name = path.name if path.suffix else path.name + suffix
    try:
        return data_text(name), f"<fixture {name}>"
    except (FileNotFoundError, OSError):
        raise InputError(f"no such file: {arg}") from None


def _load_model(arg):
    text, label = _read_source(arg, ".model")
    return parse_model(text), label


def _load_loss(arg, model):
    if arg == "identity":
        return OutcomeFunctional.identity(model)
    path = Path(arg)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif ":" in arg and not arg.endswith(".loss"):
        text = arg
    else:
        text, _ = _read_source(arg, ".loss")
    return parse_loss(text, model)


def _q(x) -> str:
    return str(Fraction(x))


def _decimal(x, digits) -> str:
    return format(float(x), f".{digits}g") if isinstance(x, Fraction) else str(x)


def _pick_regime(model, regime):
    if regime is not None:
        model.regime(regime)
        return regime
    ids = model.interventional
    if len(ids) != 1:
        raise InputError(f"several interventional regimes ({', '.join(ids)}); pass --regime")
    return ids[0]


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, payload dict, text lines)


def cmd_check(args):
    model, _ = _load_model(args.model)
    s = _pick_regime(model, args.regime)
    if args.condition == "all":
        report = condition_report(model, s)
        lines = [f"conditions for regimes {report.model_regimes[0]} vs {s}"]
        for name, rep in report.checks.items():
            lines += _render_check(rep)
        lines.append("implications:")
        for name, prem, concl, status in report.implications:
            lines.append(f"  {' & '.join(prem)} => {concl}: {status}")
        lines.append(f"transfer safe: {'yes' if report.transfer_safe else 'no'}")
        if report.violations:
            lines += [v.describe() for v in report.violations]
            return INTERNAL, report.to_dict(), lines
        code = OK if all(report.checks.values()) else FAILS
        return code, report.to_dict(), lines
    try:
        fn = CONDITIONS[args.condition]
    except KeyError:
        raise InputError(
            f"unknown condition {args.condition!r}; choose from all, {', '.join(CONDITIONS)}"
        ) from None
    try:
        rep = fn(model, s)
    except PreconditionError as exc:
        payload = {"condition": args.condition, "error": str(exc)}
        return FAILS, payload, [f"{args.condition}: cannot run: {exc}"]
    return (OK if rep else FAILS), {"checks": [rep.to_dict()]}, _render_check(rep)


def _render_check(rep):
    mark = "holds" if rep.holds else "FAILS"
    lines = [f"  {rep.condition} [{', '.join(rep.regime_pair)}]: {mark}"]
    for w in rep.witnesses[:8]:
        lines.append(f"      {w.describe()}")
    if len(rep.witnesses) > 8:
        lines.append(f"      ... {len(rep.witnesses) - 8} more")
    for i, v in sorted(rep.details.get("versions", {}).items()):
        for zk, dist in v.table.items():
            given = ",".join(f"{a}={b}" for a, b in zip(v.z_vars, zk)) or "∅"
            probs = " ".join(f"{','.join(x)}:{p}" for x, p in dist.items())
            lines.append(f"      version stage {i}: w({','.join(v.x_vars)} | {given}) = {probs}")
    return lines


def cmd_evaluate(args):
    model, _ = _load_model(args.model)
    loss = _load_loss(args.loss, model)
    payload = {"method": args.method}
    if args.strategy:
        text, _ = _read_source(args.strategy, ".strategy")
        strat = parse_strategy(text, model)
        regime = args.regime or "strategy"
        model = instantiate_regime(model, strat, regime, template=args.template)
        payload["strategy"] = strat.id
    else:
        regime = _pick_regime(model, args.regime)
    payload["regime"] = regime
    if args.method == "brute":
        value = consequence_brute_force(model, regime, loss)
        safety = "oracle"
    elif args.method == "g":
        value = g_recursion(model, regime, loss)
        safety = "oracle"
    else:
        policy = "force" if args.force else "require_checks"
        try:
            result = g_transfer(model, regime, loss, policy)
        except TransferRefused as exc:
            payload.update(outcome="refused", refused_by=[r.to_dict() for r in exc.reports])
            lines = [f"transfer refused for regime {regime}:"]
            for r in exc.reports:
                lines += _render_check(r)
            return FAILS, payload, lines
        except UndefinedConditional as exc:
            payload.update(
                outcome="undefined",
                history=dict(exc.history),
                conditional_regime=exc.regime,
                block=list(exc.block),
            )
            return UNDEFINED, payload, [f"error: {exc}"]
        value, safety = result.value, result.safety
    payload.update(outcome="value", consequence=_q(value), safety=safety)
    line = f"E{{k(Y) ; {regime}}} = {value} (~{_decimal(value, args.digits)}) [{args.method}, {safety}]"
    return OK, payload, [line]


def cmd_optimize(args):
    model, _ = _load_model(args.model)
    loss = _load_loss(args.loss, model)
    try:
        result = optimize(model, loss, args.mode)
    except NotIdentifiable as exc:
        payload = {"mode": args.mode, "outcome": "not-identifiable", "table": [r.to_dict() for r in exc.rows]}
        return FAILS, payload, [str(exc)]
    lines = [f"{'strategy':<30} {'consequence':>16}  safety"]
    for r in result.rows:
        value = "-" if r.consequence is None else str(r.consequence)
        lines.append(f"{r.strategy_id:<30} {value:>16}  {r.safety}")
    lines.append(f"best: {result.best.strategy_id} with expected loss {result.best.consequence}")
    lines.append(f"note: {result.notes}")
    return OK, result.to_dict(), lines


def cmd_derive(args):
    text = Path(args.premises).read_text(encoding="utf-8") if Path(args.premises).is_file() else None
    if text is None:
        raise InputError(f"no such file: {args.premises}")
    premises = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            premises.append(parse_ci(line))
    target = parse_ci(args.target)
    ground = None
    if args.ground:
        ground = [g for g in args.ground.replace(",", " ").split() if g]
    try:
        result = derivable(premises, target, ground=ground, cap=args.cap)
    except ClosureCapError as exc:
        raise InputError(str(exc)) from None
    payload = {
        "target": str(result.target),
        "derivable": result.derivable,
        "trace": [{"rule": st.rule, "conclusion": str(st.conclusion),
                   "from": [str(p) for p in st.premises]} for st in result.trace],
    }
    lines = [f"{result.target}: {'derivable' if result.derivable else 'not derivable'}"]
    lines += [f"  {i}. {st}" for i, st in enumerate(result.trace, 1)]
    return (OK if result.derivable else FAILS), payload, lines


def cmd_dsep(args):
    text, _ = _read_source(args.dag, ".dag")
    dag = parse_diagram(text)
    stmt = parse_ci(args.statement)
    x, y, z = statement_nodes(stmt)
    payload = {"statement": str(stmt), "method": args.method}
    if args.method == "moral":
        sep = moral_separated(dag, x, y, z)
        payload["separated"] = sep
        lines = [f"{stmt}: {'separated' if sep else 'not separated'} (moralization)"]
    else:
        res = d_separated(dag, x, y, z)
        sep = res.separated
        payload["separated"] = sep
        lines = [f"{stmt}: {'separated' if sep else 'not separated'} (d-separation)"]
        if not sep:
            payload["active_path"] = list(res.path)
            lines.append(f"  active path: {res.describe(dag)}")
    return (OK if sep else FAILS), payload, lines


def cmd_fixture(args):
    try:
        fx = fixture(args.name)
    except UnknownFixture as exc:
        raise InputError(exc.args[0]) from None
    if not args.verify:
        return OK, {"fixture": fx.name, "source": fx.source}, fx.source.rstrip("\n").splitlines()
    report = verify_fixture(fx)
    rows = [
        {"check": r.label, "expected": _plain(r.expected), "actual": _plain(r.actual), "pass": r.passed}
        for r in report.rows
    ]
    lines = [f"fixture {fx.name}"]
    for r in report.rows:
        lines.append(f"  [{'pass' if r.passed else 'FAIL'}] {r.label}: {_show(r.actual)}")
        if not r.passed:
            lines.append(f"         expected {_show(r.expected)}")
    if fx.notes:
        lines.append(f"  note: {fx.notes}")
    lines.append("all expectations reproduced" if report.passed else "MISMATCH")
    payload = {"fixture": fx.name, "passed": report.passed, "rows": rows}
    return (OK if report.passed else FAILS), payload, lines


def _plain(value):
    """JSON-friendly rendering; rationals become ``n/d`` strings."""
    if isinstance(value, Fraction):
        return _q(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _show(value) -> str:
    return json.dumps(_plain(value), ensure_ascii=False)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqignore", description="Identification checks and strategy evaluation, in exact arithmetic."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--canonical", action="store_true", help="omit run-dependent fields from JSON")
    common.add_argument("--digits", type=int, default=12, help="significant digits for decimal display")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="run condition checks on a model")
    p.add_argument("model")
    p.add_argument("--regime")
    p.add_argument("--condition", default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("evaluate", parents=[common], help="consequence of a regime or strategy")
    p.add_argument("model")
    p.add_argument("--regime")
    p.add_argument("--loss", required=True, help="loss file, inline '0:0,1:1' or 'identity'")
    p.add_argument("--method", choices=("g", "brute", "transfer"), default="g")
    p.add_argument("--force", action="store_true", help="transfer even when the checks fail")
    p.add_argument("--strategy", help="strategy file; evaluated as a new interventional regime")
    p.add_argument("--template", help="regime whose nature kernels a strategy regime copies")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", parents=[common], help="best non-randomised strategy")
    p.add_argument("model")
    p.add_argument("--loss", required=True, help="loss file, inline '0:0,1:1' or 'identity'")
    p.add_argument("--mode", choices=("oracle", "transfer"), default="oracle")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("derive", parents=[common], help="semi-graphoid derivation")
    p.add_argument("--premises", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--ground")
    p.add_argument("--cap", type=int, default=8)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("dsep", parents=[common], help="graphical separation query")
    p.add_argument("dag")
    p.add_argument("statement")
    p.add_argument("--method", choices=("d", "moral"), default="d")
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("fixture", parents=[common], help="show or verify a bundled fixture")
    p.add_argument("name")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_fixture)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        code, payload, lines = args.func(args)
    except (DSLError, ModelError, InputError, DiagramError, StrategyError, ConditionError) as exc:
        code, payload, lines = INPUT_ERROR, {"error": str(exc)}, []
        if isinstance(exc, DSLError):
            payload["diagnostics"] = [
                {"line": d.span.line, "column": d.span.column, "message": d.message} for d in exc.diagnostics
            ]
        print(f"error: {exc}", file=stderr)
    except (OSError, ValueError) as exc:
        code, payload, lines = INPUT_ERROR, {"error": str(exc)}, []
        print(f"error: {exc}", file=stderr)
    if args.format == "json":
        doc = {"schema": SCHEMA, "command": args.command, "exit_code": code, **payload}
        if not args.canonical:
            doc["runtime_ms"] = round((time.perf_counter() - started) * 1000, 3)
            doc["version"] = __version__
        stdout.write(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    else:
        for line in lines:
            stdout.write(line + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
