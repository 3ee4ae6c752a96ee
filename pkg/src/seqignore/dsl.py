"""Text formats: models (``.model``), strategies (``.strategy``), diagrams
(``.dag``), losses (``.loss``) and inline CI statements.

All formats are line oriented with ``#`` comments.  See ``docs/formats.md``
for the grammar; the canonical serialisers here emit text that parses back
to an equal object.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .ci import CIStatement
from .strategy import Strategy
from .model import (
    SIGMA,
    Kernel,
    ModelError,
    Regime,
    RegimeKind,
    RegimeModel,
    Role,
    Variable,
    validate_model,
)

RESERVED = {"kernel", "regime", "shared", "variables", "order", "else", "strategy", "nodes"}
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RATIONAL = re.compile(r"^(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)$")


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    span: Span
    message: str

    def __str__(self):
        return f"{self.span}: {self.message}"


class DSLError(ValueError):
    """Parse failure carrying one or more positioned diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = tuple(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    @classmethod
    def at(cls, span: Span, message: str) -> "DSLError":
        return cls([Diagnostic(span, message)])


@dataclass(frozen=True)
class Token:
    text: str
    span: Span


_PUNCT = (":=", "->", "→", ":", "|", "{", "}", ",")


def _tokenize(line: str, lineno: int) -> list:
    """Split one line into tokens; ``#`` starts a comment."""
    tokens = []
    i, n = 0, len(line)
    while i < n:
        ch = line[i]
        if ch == "#":
            break
        if ch.isspace():
            i += 1
            continue
        for p in _PUNCT:
            if line.startswith(p, i):
                tokens.append(Token(p, Span(lineno, i + 1)))
                i += len(p)
                break
        else:
            start = i
            while i < n and not line[i].isspace() and line[i] != "#":
                if any(line.startswith(p, i) for p in _PUNCT) and not (
                    line.startswith("-", i) and not line.startswith("->", i)
                ):
                    break
                i += 1
            tokens.append(Token(line[start:i], Span(lineno, start + 1)))
    return tokens


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw, lineno)
        if toks:
            yield lineno, toks


def parse_rational(token: Token) -> Fraction:
    if not _RATIONAL.match(token.text):
        raise DSLError.at(token.span, f"bad probability literal {token.text!r}")
    value = Fraction(token.text)
    return value


def _expect(tokens, i, text, what) -> int:
    if i >= len(tokens) or tokens[i].text != text:
        span = tokens[i].span if i < len(tokens) else _end_span(tokens)
        found = tokens[i].text if i < len(tokens) else "end of line"
        raise DSLError.at(span, f"expected {what} {text!r}, found {found!r}")
    return i + 1


def _end_span(tokens) -> Span:
    last = tokens[-1]
    return Span(last.span.line, last.span.column + len(last.text))


def _name(token: Token, what="name") -> str:
    if not _NAME.match(token.text) or token.text in RESERVED:
        raise DSLError.at(token.span, f"invalid {what} {token.text!r}")
    return token.text


# ---------------------------------------------------------------------------
# rows shared by kernels and strategies


@dataclass
class _RowSpec:
    key: Optional[tuple]  # None for ``else``
    kind: str  # "probs", "point", "uniform", "free"
    probs: tuple = ()
    point: Optional[str] = None
    span: Span = Span(0, 0)


def _row_body(tokens, i, span, allow_free=True) -> _RowSpec:
    """Parse what follows the row key: ``: p1 p2 ...``, ``:= v``, ``: uniform`` or ``: *``."""
    if i >= len(tokens):
        raise DSLError.at(span, "row needs ':' followed by probabilities, or ':=' and a value")
    op = tokens[i]
    rest = tokens[i + 1 :]
    if op.text == ":=":
        if len(rest) != 1:
            raise DSLError.at(op.span, "':=' takes exactly one value")
        return _RowSpec(None, "point", point=rest[0].text, span=span)
    if op.text != ":":
        raise DSLError.at(op.span, f"expected ':' or ':=', found {op.text!r}")
    if not rest:
        raise DSLError.at(op.span, "row has no probabilities")
    if len(rest) == 1 and rest[0].text == "uniform":
        return _RowSpec(None, "uniform", span=span)
    if len(rest) == 1 and rest[0].text == "*":
        if not allow_free:
            raise DSLError.at(rest[0].span, "unconstrained rows are not allowed here")
        return _RowSpec(None, "free", span=span)
    probs = []
    for tok in rest:
        if tok.text == ",":
            continue
        probs.append(parse_rational(tok))
    return _RowSpec(None, "probs", probs=tuple(probs), span=span)


def _row_vector(spec: _RowSpec, domain: tuple, what: str):
    if spec.kind == "free":
        return None
    if spec.kind == "uniform":
        return tuple(Fraction(1, len(domain)) for _ in domain)
    if spec.kind == "point":
        if spec.point not in domain:
            raise DSLError.at(spec.span, f"{spec.point!r} is not a value of {what}")
        return tuple(Fraction(int(v == spec.point)) for v in domain)
    if len(spec.probs) != len(domain):
        raise DSLError.at(
            spec.span, f"row has {len(spec.probs)} entries but {what} has {len(domain)} values"
        )
    if any(p > 1 for p in spec.probs):
        raise DSLError.at(spec.span, "probabilities must lie in [0, 1]")
    total = sum(spec.probs, Fraction(0))
    if total != 1:
        raise DSLError.at(spec.span, f"row sums to {total}, not 1")
    return spec.probs


def _build_rows(child, parents, domains, specs, header_span, what, default=None) -> dict:
    """Expand row specs into a total table.  ``default`` fills unlisted rows if given."""
    rows: dict = {}
    spans: dict = {}
    fallback = None
    for spec in specs:
        if spec.key is None:
            if fallback is not None:
                raise DSLError.at(spec.span, "duplicate 'else' row")
            fallback = spec
            continue
        if len(spec.key) != len(parents):
            raise DSLError.at(
                spec.span, f"row key has {len(spec.key)} values, expected {len(parents)}"
            )
        for p, v in zip(parents, spec.key):
            if v not in domains[p]:
                raise DSLError.at(spec.span, f"{v!r} is not a value of {p}")
        if spec.key in rows:
            raise DSLError.at(spec.span, f"duplicate row {' '.join(spec.key)}")
        rows[spec.key] = _row_vector(spec, domains[child], what)
        spans[spec.key] = spec.span
    missing = []
    for combo in itertools.product(*(domains[p] for p in parents)):
        if combo in rows:
            continue
        if fallback is not None:
            rows[combo] = _row_vector(fallback, domains[child], what)
        elif default is not None:
            rows[combo] = default
        else:
            missing.append(combo)
    if missing:
        shown = "; ".join(",".join(f"{p}={v}" for p, v in zip(parents, m)) for m in missing[:4])
        more = f" (+{len(missing) - 4} more)" if len(missing) > 4 else ""
        raise DSLError.at(header_span, f"kernel {child} is missing rows for {shown}{more}")
    ordered = {}
    for combo in itertools.product(*(domains[p] for p in parents)):
        ordered[combo] = rows[combo]
    return ordered


def _parse_row_line(tokens, nparents_hint=None) -> _RowSpec:
    """``v1 v2 : probs`` / ``v1 v2 := v`` / ``else ...``."""
    i = 0
    key = []
    while i < len(tokens) and tokens[i].text not in (":", ":="):
        key.append(tokens[i].text)
        i += 1
    span = tokens[0].span
    if i >= len(tokens):
        raise DSLError.at(span, "row needs ':' or ':='")
    spec = _row_body(tokens, i, span)
    if key == ["else"]:
        spec.key = None
    else:
        spec.key = tuple(key)
    return spec


# ---------------------------------------------------------------------------
# models


@dataclass
class _KernelDraft:
    child: str
    parents: tuple
    header: Span
    inline: Optional[_RowSpec]
    rows: list


def parse_model(text: str) -> RegimeModel:
    """Parse model text into a validated :class:`RegimeModel`."""
    variables: list = []
    var_spans: dict = {}
    order: Optional[list] = None
    order_span = None
    shared: list = []
    regimes: list = []  # (id, kind, span, drafts)
    section = None
    draft: Optional[_KernelDraft] = None

    def close_draft():
        nonlocal draft
        draft = None

    for lineno, toks in _lines(text):
        head = toks[0].text
        if head == "variables":
            _expect(toks, 1, ":", "")
            if len(toks) > 2:
                raise DSLError.at(toks[2].span, "unexpected text after 'variables:'")
            section, draft = "variables", None
        elif head == "order":
            i = _expect(toks, 1, ":", "")
            order = [_name(t, "variable") for t in toks[i:] if t.text != ","]
            order_span = toks[0].span
            section, draft = None, None
        elif head == "shared":
            _expect(toks, 1, ":", "")
            if len(toks) > 2:
                raise DSLError.at(toks[2].span, "unexpected text after 'shared:'")
            section, draft = "shared", None
        elif head == "regime":
            if len(toks) < 4:
                raise DSLError.at(toks[0].span, "expected 'regime <id> : observational|interventional'")
            rid = _name(toks[1], "regime id")
            _expect(toks, 2, ":", "")
            kind = toks[3].text
            if kind not in ("observational", "interventional"):
                raise DSLError.at(toks[3].span, f"unknown regime kind {kind!r}")
            if len(toks) > 4:
                raise DSLError.at(toks[4].span, "unexpected text after regime kind")
            if any(r[0] == rid for r in regimes):
                raise DSLError.at(toks[1].span, f"duplicate regime {rid!r}")
            regimes.append((rid, kind, toks[1].span, []))
            section, draft = "regime", None
        elif head == "kernel":
            if section == "shared":
                target = shared
            elif section == "regime":
                target = regimes[-1][3]
            else:
                raise DSLError.at(toks[0].span, "'kernel' must appear inside 'shared:' or a regime")
            draft = _parse_kernel_header(toks)
            target.append(draft)
        elif section == "variables":
            variables.append(_parse_variable(toks))
            var_spans[variables[-1].name] = toks[0].span
        elif draft is not None:
            if draft.inline is not None:
                raise DSLError.at(toks[0].span, "kernel with an inline row cannot have row lines")
            draft.rows.append(_parse_row_line(toks))
        else:
            raise DSLError.at(toks[0].span, f"unexpected {head!r}")

    return _assemble_model(variables, var_spans, order, order_span, shared, regimes)


def _parse_variable(toks) -> Variable:
    name = _name(toks[0], "variable name")
    if name == SIGMA:
        raise DSLError.at(toks[0].span, f"{SIGMA!r} is reserved for the regime indicator")
    i = _expect(toks, 1, ":", "")
    if i >= len(toks):
        raise DSLError.at(toks[0].span, "missing role")
    role = toks[i].text
    if role not in {r.value for r in Role}:
        raise DSLError.at(toks[i].span, f"unknown role {role!r}")
    values = [t for t in toks[i + 1 :] if t.text not in (",",)]
    if values and values[0].text == "{":
        if values[-1].text != "}":
            raise DSLError.at(values[-1].span, "missing '}'")
        values = values[1:-1]
    labels = []
    for t in values:
        if t.text in ("{", "}", ":", ":=", "|"):
            raise DSLError.at(t.span, f"unexpected {t.text!r} in domain")
        if t.text in labels:
            raise DSLError.at(t.span, f"repeated domain value {t.text!r}")
        labels.append(t.text)
    if not labels:
        raise DSLError.at(toks[0].span, f"variable {name} has an empty domain")
    return Variable(name, Role(role), tuple(labels))


def _parse_kernel_header(toks) -> _KernelDraft:
    if len(toks) < 2:
        raise DSLError.at(toks[0].span, "expected 'kernel CHILD [| PARENTS] :'")
    child = _name(toks[1], "variable")
    i = 2
    parents = []
    if i < len(toks) and toks[i].text == "|":
        i += 1
        while i < len(toks) and toks[i].text not in (":", ":="):
            if toks[i].text != ",":
                parents.append(_name(toks[i], "variable"))
            i += 1
    if i >= len(toks) or toks[i].text not in (":", ":="):
        raise DSLError.at(toks[-1].span, "kernel header must end with ':' (or carry an inline row)")
    inline = None
    if i + 1 < len(toks) or toks[i].text == ":=":
        inline = _row_body(toks, i, toks[0].span)
    return _KernelDraft(child, tuple(parents), toks[1].span, inline, [])


def _finish_kernel(d: _KernelDraft, domains: Mapping, position: Mapping) -> Kernel:
    if d.child not in domains:
        raise DSLError.at(d.header, f"unknown variable {d.child!r}")
    for p in d.parents:
        if p not in domains:
            raise DSLError.at(d.header, f"unknown parent {p!r}")
        if position[p] >= position[d.child]:
            raise DSLError.at(
                d.header, f"parent {p} does not precede {d.child} in the information base"
            )
    if len(set(d.parents)) != len(d.parents):
        raise DSLError.at(d.header, "repeated parent")
    what = d.child
    if d.inline is not None:
        vec = _row_vector(d.inline, domains[d.child], what)
        rows = {combo: vec for combo in itertools.product(*(domains[p] for p in d.parents))}
    else:
        if not d.rows:
            raise DSLError.at(d.header, f"kernel {d.child} has no rows")
        rows = _build_rows(d.child, d.parents, domains, d.rows, d.header, what)
    return Kernel(d.child, d.parents, rows)


def _assemble_model(variables, var_spans, order, order_span, shared, regimes) -> RegimeModel:
    if not variables:
        raise DSLError.at(Span(1, 1), "model declares no variables")
    by_name = {}
    for v in variables:
        if v.name in by_name:
            raise DSLError.at(var_spans[v.name], f"duplicate variable {v.name!r}")
        by_name[v.name] = v
    if order is not None:
        unknown = [n for n in order if n not in by_name]
        if unknown:
            raise DSLError.at(order_span, f"unknown variable {unknown[0]!r} in order")
        if sorted(order) != sorted(by_name):
            missing = sorted(set(by_name) - set(order))
            raise DSLError.at(
                order_span, "order must list every variable exactly once"
                + (f"; missing {', '.join(missing)}" if missing else "")
            )
        variables = [by_name[n] for n in order]
    domains = {v.name: v.domain for v in variables}
    position = {v.name: i for i, v in enumerate(variables)}
    if not regimes:
        raise DSLError.at(Span(1, 1), "model declares no regimes")

    shared_kernels = {}
    for d in shared:
        if d.child in shared_kernels:
            raise DSLError.at(d.header, f"duplicate kernel for {d.child}")
        shared_kernels[d.child] = _finish_kernel(d, domains, position)

    built = {}
    spans = {}
    for rid, kind, span, drafts in regimes:
        kernels = dict(shared_kernels)
        for d in drafts:
            if d.child in kernels:
                where = "shared block and regime" if d.child in shared_kernels else "regime"
                raise DSLError.at(d.header, f"duplicate kernel for {d.child} ({where} {rid})")
            kernels[d.child] = _finish_kernel(d, domains, position)
        missing = [v.name for v in variables if v.name not in kernels]
        if missing:
            raise DSLError.at(span, f"regime {rid} has no kernel for {', '.join(missing)}")
        built[rid] = Regime(rid, RegimeKind(kind), {v.name: kernels[v.name] for v in variables})
        spans[rid] = span
    model = RegimeModel(tuple(variables), built)
    problems = validate_model(model)
    if problems:
        diags = []
        for msg in problems:
            span = Span(1, 1)
            match = re.match(r"regime (\w+)", msg)
            if match and match.group(1) in spans:
                span = spans[match.group(1)]
            elif "outcome" in msg or "observable" in msg or "unobserved" in msg:
                span = order_span or var_spans.get(variables[-1].name, Span(1, 1))
            diags.append(Diagnostic(span, msg))
        raise DSLError(diags)
    return model


def _fmt_row(row, domain) -> str:
    if row is None:
        return ": *"
    if sum(1 for p in row if p) == 1:
        return ":= " + domain[[i for i, p in enumerate(row) if p][0]]
    return ": " + " ".join(str(p) for p in row)


def _fmt_kernel(kernel: Kernel, domains: Mapping, indent="  ") -> list:
    domain = domains[kernel.child]
    head = f"{indent}kernel {kernel.child}"
    if kernel.parents:
        head += " | " + " ".join(kernel.parents)
        lines = [head + " :"]
        for combo in itertools.product(*(domains[p] for p in kernel.parents)):
            lines.append(f"{indent}  {' '.join(combo)} {_fmt_row(kernel.rows[combo], domain)}")
        return lines
    return [f"{head} {_fmt_row(kernel.rows[()], domain)}"]


def serialize_model(model: RegimeModel) -> str:
    """Canonical model text: kernels equal in every regime go to ``shared:``."""
    lines = ["variables:"]
    for v in model.variables:
        lines.append(f"  {v.name} : {v.role.value} {{{', '.join(v.domain)}}}")
    regimes = list(model.regimes.values())
    domains = model.domains
    shared = [
        v.name
        for v in model.variables
        if all(r.kernels[v.name] == regimes[0].kernels[v.name] for r in regimes[1:])
    ] if len(regimes) > 1 else []
    if shared:
        lines += ["", "shared:"]
        for name in shared:
            lines += _fmt_kernel(regimes[0].kernels[name], domains)
    for r in regimes:
        lines += ["", f"regime {r.id} : {r.kind.value}"]
        for v in model.variables:
            if v.name not in shared:
                lines += _fmt_kernel(r.kernels[v.name], domains)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CI statements

_IND_OPS = ("_||_", "⫫", "_|_")


def parse_ci(text: str, variables: Optional[Iterable[str]] = None) -> CIStatement:
    """Parse ``X1,X2 _||_ Y1,sigma | Z1 [; regime=s]``.

    Empty sides may be written ``()`` or ``∅``.  ``variables``, if given,
    restricts the accepted names.
    """
    known = set(variables) if variables is not None else None
    body, _, suffix = text.partition(";")
    regime = None
    if suffix.strip():
        m = re.fullmatch(r"\s*regime\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*", suffix)
        if not m:
            raise DSLError.at(Span(1, len(body) + 2), f"bad regime suffix {suffix.strip()!r}")
        regime = m.group(1)
    for op in _IND_OPS:
        if op in body:
            left, right = body.split(op, 1)
            break
    else:
        raise DSLError.at(Span(1, 1), "missing independence operator '_||_'")
    if "|" in right.replace("_||_", ""):
        right, cond = right.split("|", 1)
    else:
        cond = ""
    offset = {"x": 1, "y": len(left) + len(op) + 1, "z": len(left) + len(op) + len(right) + 2}

    def names(part: str, col: int):
        out, sigma = [], False
        for m in re.finditer(r"[^\s,()]+|\(\s*\)", part):
            tok = m.group(0)
            span = Span(1, col + m.start())
            if tok in ("∅",) or tok.startswith("("):
                continue
            if tok == SIGMA:
                sigma = True
                continue
            if not _NAME.match(tok):
                raise DSLError.at(span, f"unknown token {tok!r}")
            if known is not None and tok not in known:
                raise DSLError.at(span, f"unknown variable {tok!r}")
            out.append(tok)
        return out, sigma

    xs, sx = names(left, offset["x"])
    ys, sy = names(right, offset["y"])
    zs, sz = names(cond, offset["z"])
    if sx:
        raise DSLError.at(Span(1, 1), "sigma cannot appear on the left of '_||_'")
    if sy and sz:
        raise DSLError.at(Span(1, offset["z"]), "sigma cannot appear on both sides of the bar")
    if not xs:
        if not (set(zs) & set(xs)) and not left.strip() in ("()", "∅"):
            raise DSLError.at(Span(1, 1), "left side is empty")
    if (set(xs) & set(ys)) - set(zs):
        raise DSLError.at(Span(1, offset["y"]), f"sides overlap: {sorted(set(xs) & set(ys))}")
    if regime is not None and (sy or sz):
        raise DSLError.at(Span(1, len(body) + 2), "a regime-pinned statement cannot mention sigma")
    return CIStatement.of(xs, ys, zs, sigma_in_y=sy, sigma_in_z=sz, regime=regime)


def format_ci(stmt: CIStatement) -> str:
    return str(stmt)


# ---------------------------------------------------------------------------
# strategies


def parse_strategy(text: str, model: RegimeModel) -> Strategy:
    """Parse a strategy against ``model``'s information base.

    Histories (and whole actions) the file leaves out default to the first
    value of the action's domain.
    """
    base = model.base
    domains = model.domains
    blocks = []  # (action, parents, header span, inline spec, rows)
    sid = None
    for lineno, toks in _lines(text):
        head = toks[0]
        if head.text == "strategy":
            if len(toks) < 2:
                raise DSLError.at(head.span, "expected 'strategy <id>'")
            # ids such as A1=0,1/A2=1 span several tokens
            sid = "".join(t.text for t in toks[1:])
            continue
        if head.text in domains and model.variable(head.text).role is Role.ACTION:
            i = 1
            parents = []
            if i < len(toks) and toks[i].text == "|":
                i += 1
                while i < len(toks) and toks[i].text not in (":", ":="):
                    if toks[i].text != ",":
                        parents.append(toks[i])
                    i += 1
            if i >= len(toks):
                raise DSLError.at(toks[-1].span, "expected ':' or ':='")
            inline = None
            if i + 1 < len(toks) or toks[i].text == ":=":
                inline = _row_body(toks, i, head.span, allow_free=False)
            if any(b[0] == head.text for b in blocks):
                raise DSLError.at(head.span, f"duplicate decision rule for {head.text}")
            blocks.append((head.text, parents, head.span, inline, []))
            continue
        if not blocks:
            if head.text in domains:
                raise DSLError.at(head.span, f"{head.text} is not an action variable")
            raise DSLError.at(head.span, f"unknown action {head.text!r}")
        if blocks[-1][3] is not None:
            raise DSLError.at(head.span, "decision with an inline row cannot have row lines")
        spec = _parse_row_line(toks)
        if spec.kind == "free":
            raise DSLError.at(spec.span, "strategies cannot leave rows unconstrained")
        blocks[-1][4].append(spec)

    decisions = {}
    for action, parent_toks, span, inline, rows in blocks:
        stage = next(st for st in base.stages if st.action == action)
        allowed = set(base.history_before_action(stage.index))
        parents = []
        for t in parent_toks:
            if t.text not in domains:
                raise DSLError.at(t.span, f"unknown variable {t.text!r}")
            if t.text not in allowed:
                raise DSLError.at(
                    t.span,
                    f"{action} may only read the decision maker's history "
                    f"({', '.join(base.ordered(allowed)) or 'nothing'}), not {t.text}",
                )
            parents.append(t.text)
        parents = tuple(parents)
        if len(set(parents)) != len(parents):
            raise DSLError.at(span, "repeated parent")
        default = tuple(Fraction(int(i == 0)) for i in range(len(domains[action])))
        if inline is not None:
            vec = _row_vector(inline, domains[action], action)
            table = {c: vec for c in itertools.product(*(domains[p] for p in parents))}
        else:
            table = _build_rows(action, parents, domains, rows, span, action, default=default)
        decisions[action] = Kernel(action, parents, table)
    for action in base.actions:
        if action not in decisions:
            first = tuple(Fraction(int(i == 0)) for i in range(len(domains[action])))
            decisions[action] = Kernel(action, (), {(): first})
    return Strategy({a: decisions[a] for a in base.actions}, sid)


def serialize_strategy(strategy: Strategy, model: RegimeModel) -> str:
    domains = model.domains
    lines = [f"strategy {strategy.id}"] if strategy.id else []
    for action, kernel in strategy.decisions.items():
        domain = domains[action]
        if not kernel.parents:
            lines.append(f"{action} {_fmt_row(kernel.rows[()], domain)}")
            continue
        lines.append(f"{action} | {' '.join(kernel.parents)} :")
        for combo in itertools.product(*(domains[p] for p in kernel.parents)):
            lines.append(f"  {' '.join(combo)} {_fmt_row(kernel.rows[combo], domain)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# diagrams


def parse_diagram(text: str):
    """Parse ``.dag`` text: optional ``nodes:`` line, then ``A -> B`` edges.

    Edges may be chained (``A -> B -> C``) or comma separated.  The node
    called ``sigma`` is the regime indicator.
    """
    from .diagram import CycleError, InfluenceDiagram

    declared = None
    nodes: list = []
    edges: list = []
    spans = {}
    for lineno, toks in _lines(text):
        if toks[0].text == "nodes":
            i = _expect(toks, 1, ":", "")
            declared = []
            for t in toks[i:]:
                if t.text == ",":
                    continue
                name = _name(t, "node")
                if name in declared:
                    raise DSLError.at(t.span, f"duplicate node {name!r}")
                declared.append(name)
            continue
        chain = []
        for t in toks:
            if t.text == ",":
                chain.append(None)
            else:
                chain.append(t)
        segments, cur = [], []
        for t in chain:
            if t is None:
                segments.append(cur)
                cur = []
            else:
                cur.append(t)
        segments.append(cur)
        for seg in segments:
            if not seg:
                continue
            names = seg[0::2]
            arrows = seg[1::2]
            if len(seg) < 3 or len(names) != len(arrows) + 1:
                raise DSLError.at(seg[0].span, "expected an edge 'A -> B'")
            for a in arrows:
                if a.text not in ("->", "→"):
                    raise DSLError.at(a.span, f"expected '->', found {a.text!r}")
            for t in names:
                _name(t, "node")
            for src, dst in zip(names, names[1:]):
                edge = (src.text, dst.text)
                if edge in spans:
                    raise DSLError.at(src.span, f"duplicate edge {src.text} -> {dst.text}")
                spans[edge] = src.span
                edges.append(edge)
                for n in edge:
                    if n not in nodes:
                        nodes.append(n)
    if declared is not None:
        for edge, span in spans.items():
            for n in edge:
                if n not in declared:
                    raise DSLError.at(span, f"unknown node {n!r}")
        nodes = declared
    for (src, dst), span in spans.items():
        if dst == SIGMA:
            raise DSLError.at(span, f"the regime node {SIGMA} cannot have parents")
        if src == dst:
            raise DSLError.at(span, f"self loop on {src}")
    try:
        return InfluenceDiagram(tuple(nodes), tuple(edges))
    except CycleError as exc:
        first = spans[exc.edge] if exc.edge in spans else Span(1, 1)
        raise DSLError.at(first, str(exc)) from None


def serialize_diagram(dag) -> str:
    lines = ["nodes: " + " ".join(dag.nodes)] if dag.nodes else []
    lines += [f"{a} -> {b}" for a, b in dag.edges]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# losses


def parse_loss(text: str, model: Optional[RegimeModel] = None):
    """Parse ``value : rational`` lines (or inline ``v:r, v:r``) into an OutcomeFunctional."""
    from .grecursion import OutcomeFunctional

    values: dict = {}
    source = text.replace(",", "\n") if "\n" not in text.strip() else text
    for lineno, toks in _lines(source):
        if len(toks) != 3 or toks[1].text != ":":
            raise DSLError.at(toks[0].span, "expected 'value : rational'")
        label = toks[0].text
        if label in values:
            raise DSLError.at(toks[0].span, f"duplicate outcome value {label!r}")
        m = re.fullmatch(r"-?(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)", toks[2].text)
        if not m:
            raise DSLError.at(toks[2].span, f"bad rational {toks[2].text!r}")
        values[label] = Fraction(toks[2].text)
    if not values:
        raise DSLError.at(Span(1, 1), "loss specifies no values")
    k = OutcomeFunctional(values)
    if model is not None:
        try:
            k.check(model)
        except ModelError as exc:
            raise DSLError.at(Span(1, 1), str(exc)) from None
    return k


def serialize_loss(k) -> str:
    return "".join(f"{v} : {r}\n" for v, r in k.values.items())
