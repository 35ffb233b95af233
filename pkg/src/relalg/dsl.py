"""The declaration language: lexer, parser, and elaboration into engine values.

A document declares named algebroids, jets blocks, realizations, and options.
Parsing is total: every byte is consumed or a located error is raised.  The
expression syntax is shared between scalars and forms; ``^`` is wedge between
forms and integer power on scalars, disambiguated during elaboration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .algebroid import Realization, RelAlgebroid, VariableLevels
from .forms import Form, Frame
from .jets import JetChart, SolvedPDE, pde_algebroid
from .scalar import Scalar, trig_rewrite

__all__ = ["DslError", "Document", "parse", "format_document"]

_KEYWORDS = {
    "algebroid",
    "jets",
    "realization",
    "option",
    "base",
    "fiber",
    "frame",
    "opaque",
    "independent",
    "dependent",
    "order",
    "rule",
    "coords",
    "map",
    "for",
    "D",
    "sin",
    "cos",
}

_SYMBOLS = "{}();:,=+-*/^'"


class DslError(ValueError):
    def __init__(self, message: str, line: int, col: int, expected=None):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected)) if expected else ()
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "int" | symbol | "eof"
    text: str
    line: int
    col: int


def _lex(source: str) -> list:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            tokens.append(Token("id", text, line, col))
            col += i - start
            continue
        if ch.isdigit():
            start = i
            while i < n and source[i].isdigit():
                i += 1
            tokens.append(Token("int", source[start:i], line, col))
            col += i - start
            continue
        if ch in _SYMBOLS:
            tokens.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise DslError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class Document:
    flags: tuple  # (name, True) pairs
    algebroids: tuple  # (name, RelAlgebroid)
    jets: tuple  # (name, SolvedPDE)
    realizations: tuple  # (name, target algebroid name, Realization)

    def flag(self, name: str) -> bool:
        return dict(self.flags).get(name, False)

    def algebroid_map(self) -> dict:
        return dict(self.algebroids)

    def jets_map(self) -> dict:
        return dict(self.jets)

    def target_names(self) -> list:
        return [name for name, _ in self.algebroids] + [name for name, _ in self.jets]

    def resolve(self, name: Optional[str]):
        """(kind, name, RelAlgebroid) for a named or unique target."""
        targets = self.target_names()
        if name is None:
            if not targets:
                raise ValueError("document declares no algebroid or jets block")
            if len(targets) > 1:
                raise ValueError(
                    "document declares several targets; pick one of: "
                    + ", ".join(targets)
                )
            name = targets[0]
        algs = self.algebroid_map()
        if name in algs:
            return "algebroid", name, algs[name]
        jets = self.jets_map()
        if name in jets:
            return "jets", name, pde_algebroid(jets[name], _jets_opaque(jets[name]))
        raise ValueError(f"no algebroid or jets block named {name}")


def _jets_opaque(pde: SolvedPDE):
    opaque = getattr(pde, "_opaque", ())
    return opaque


# -- expression AST ----------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise DslError(
                f"expected {what or kind}, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.col,
                expected={what or kind},
            )
        return self.next()

    def expect_id(self, what: str = "identifier") -> Token:
        return self.expect("id", what)

    # expression parsing: + - | * / | unary - | ^ | atoms
    def parse_expr(self):
        node = self.parse_term()
        while self.peek().kind in "+-":
            op = self.next()
            rhs = self.parse_term()
            node = ("bin", op.kind, node, rhs, (op.line, op.col))
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek().kind in "*/":
            op = self.next()
            rhs = self.parse_unary()
            node = ("bin", op.kind, node, rhs, (op.line, op.col))
        return node

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            return ("neg", self.parse_unary(), (tok.line, tok.col))
        return self.parse_power()

    def parse_power(self):
        node = self.parse_atom()
        while self.peek().kind == "^":
            op = self.next()
            rhs = self.parse_atom()
            node = ("bin", "^", node, rhs, (op.line, op.col))
        return node

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return ("num", int(tok.text), (tok.line, tok.col))
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "id":
            self.next()
            primes = 0
            while self.peek().kind == "'":
                self.next()
                primes += 1
            if self.peek().kind == "(":
                self.next()
                args = []
                if self.peek().kind != ")":
                    args.append(self.parse_expr())
                    while self.peek().kind == ",":
                        self.next()
                        args.append(self.parse_expr())
                self.expect(")")
                return ("call", tok.text, primes, tuple(args), (tok.line, tok.col))
            if primes:
                raise DslError(
                    "primes need a function application", tok.line, tok.col
                )
            return ("name", tok.text, (tok.line, tok.col))
        raise DslError(
            f"expected an expression, found {tok.text or 'end of input'!r}",
            tok.line,
            tok.col,
            expected={"expression"},
        )


# -- elaboration -------------------------------------------------------------


class _Env:
    """Name resolution for one expression context."""

    def __init__(self, frame: Optional[Frame], variables, opaque, extra_forms=None):
        self.frame = frame
        self.variables = set(variables)
        self.opaque = dict(opaque)
        self.extra_forms = dict(extra_forms or {})


def _elaborate(node, env: _Env):
    kind = node[0]
    if kind == "num":
        return ("scalar", Scalar.rational(node[1]))
    if kind == "name":
        _, name, pos = node
        if env.frame is not None and name in env.frame.names:
            return ("form", Form.basis(env.frame, (env.frame.index(name),)))
        if name in env.extra_forms:
            return ("form", env.extra_forms[name])
        if name in env.variables:
            return ("scalar", Scalar.var(name))
        raise DslError(f"undeclared symbol {name}", pos[0], pos[1])
    if kind == "call":
        _, name, primes, args, pos = node
        values = []
        for arg in args:
            value = _elaborate(arg, env)
            if value[0] != "scalar":
                raise DslError("function arguments must be scalars", pos[0], pos[1])
            values.append(value[1])
        if name in ("sin", "cos"):
            if primes:
                raise DslError(f"{name} takes no primes; differentiate instead", pos[0], pos[1])
            if len(values) != 1:
                raise DslError(f"{name} takes one argument", pos[0], pos[1])
            return ("scalar", Scalar.sin(values[0]) if name == "sin" else Scalar.cos(values[0]))
        if name not in env.opaque:
            raise DslError(f"undeclared function {name}", pos[0], pos[1])
        arity = env.opaque[name]
        if len(values) != arity:
            raise DslError(
                f"function {name} declared /{arity}, called with {len(values)} argument(s)",
                pos[0],
                pos[1],
            )
        if primes and arity != 1:
            raise DslError("primes require a unary function", pos[0], pos[1])
        orders = (primes,) if arity == 1 else (0,) * arity
        return ("scalar", Scalar.func(name, values, orders=orders))
    if kind == "neg":
        _, inner, pos = node
        value = _elaborate(inner, env)
        if value[0] == "scalar":
            return ("scalar", -value[1])
        return ("form", -value[1])
    if kind == "bin":
        _, op, left, right, pos = node
        lhs = _elaborate(left, env)
        rhs = _elaborate(right, env)
        return _apply_bin(op, lhs, rhs, pos)
    raise AssertionError(f"unknown AST node {node!r}")


def _apply_bin(op, lhs, rhs, pos):
    line, col = pos
    lk, lv = lhs
    rk, rv = rhs
    if op in "+-":
        if lk != rk:
            if lk == "scalar" and lv.is_zero():
                lk, lv = "form", Form.zero(rv.frame, rv.degree)
            elif rk == "scalar" and rv.is_zero():
                rk, rv = "form", Form.zero(lv.frame, lv.degree)
            else:
                raise DslError("cannot add a scalar and a form", line, col)
        if lk == "scalar":
            return ("scalar", lv + rv if op == "+" else lv - rv)
        try:
            return ("form", lv + rv if op == "+" else lv - rv)
        except ValueError as exc:
            raise DslError(str(exc), line, col) from None
    if op == "*":
        if lk == "scalar" and rk == "scalar":
            return ("scalar", lv * rv)
        if lk == "scalar":
            return ("form", rv.scale(lv))
        if rk == "scalar":
            return ("form", lv.scale(rv))
        raise DslError("use ^ to multiply forms (wedge product)", line, col)
    if op == "/":
        if lk != "scalar" or rk != "scalar":
            raise DslError("division is only defined for scalars", line, col)
        try:
            return ("scalar", lv / rv)
        except (ValueError, ZeroDivisionError) as exc:
            raise DslError(str(exc), line, col) from None
    if op == "^":
        if lk == "form" and rk == "form":
            return ("form", lv.wedge(rv))
        if lk == "scalar" and rk == "scalar":
            const = rv.constant_value()
            if const is None or const.denominator != 1:
                raise DslError("exponents must be integer constants", line, col)
            try:
                return ("scalar", lv ** int(const))
            except (ValueError, TypeError) as exc:
                raise DslError(str(exc), line, col) from None
        raise DslError("cannot mix a scalar and a form under ^", line, col)
    raise AssertionError(f"unknown operator {op}")


# -- top-level parsing --------------------------------------------------------


def parse(source: str, trig_override: Optional[bool] = None) -> Document:
    """Parse a document; elaboration runs under the document's flags.

    ``trig_override`` forces the trig-rewrite setting regardless of the
    document's own ``option trig_rewrite;`` declarations.
    """
    tokens = _lex(source)
    p = _Parser(tokens)
    flags = []
    items = []  # ("algebroid"|"jets"|"realization", name, payload, pos)
    names = set()
    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind != "id":
            raise DslError(
                f"expected a declaration, found {tok.text!r}", tok.line, tok.col
            )
        if tok.text == "option":
            p.next()
            name = p.expect_id("option name")
            if name.text not in ("trig_rewrite",):
                raise DslError(f"unknown option {name.text}", name.line, name.col)
            p.expect(";")
            flags.append((name.text, True))
            continue
        if tok.text in ("algebroid", "jets", "realization"):
            kind = p.next().text
            name = p.expect_id(f"{kind} name")
            if name.text in names:
                raise DslError(f"duplicate name {name.text}", name.line, name.col)
            names.add(name.text)
            target = None
            if kind == "realization":
                for_tok = p.expect_id("'for'")
                if for_tok.text != "for":
                    raise DslError("expected 'for'", for_tok.line, for_tok.col)
                target = p.expect_id("algebroid name").text
            p.expect("{")
            body = _collect_body(p)
            items.append((kind, name.text, target, body, (name.line, name.col)))
            continue
        raise DslError(
            f"expected a declaration, found {tok.text!r}", tok.line, tok.col
        )

    trig = trig_override if trig_override is not None else dict(flags).get(
        "trig_rewrite", False
    )
    with trig_rewrite(trig):
        return _elaborate_document(flags, items)


def _collect_body(p: _Parser) -> list:
    """Grab statements up to the matching brace: (head token, tokens...)."""
    statements = []
    while True:
        tok = p.peek()
        if tok.kind == "}":
            p.next()
            return statements
        if tok.kind == "eof":
            raise DslError("unterminated block", tok.line, tok.col)
        stmt = []
        while p.peek().kind not in (";", "}", "eof"):
            stmt.append(p.next())
        if p.peek().kind != ";":
            tok = p.peek()
            raise DslError("expected ';'", tok.line, tok.col, expected={";"})
        p.next()
        if stmt:
            statements.append(stmt)


def _stmt_parser(stmt: list) -> _Parser:
    eof = Token("eof", "", stmt[-1].line, stmt[-1].col + max(len(stmt[-1].text), 1))
    return _Parser(stmt + [eof])


def _expect_done(sp: _Parser):
    tok = sp.peek()
    if tok.kind != "eof":
        raise DslError(f"unexpected {tok.text!r}", tok.line, tok.col)


def _id_list(sp: _Parser) -> list:
    names = []
    seen = set()
    while True:
        tok = sp.expect_id()
        if tok.text in seen:
            raise DslError(f"duplicate name {tok.text}", tok.line, tok.col)
        seen.add(tok.text)
        names.append(tok.text)
        if sp.peek().kind != ",":
            return names
        sp.next()


def _elaborate_document(flags, items) -> Document:
    algebroids = []
    jets_blocks = []
    realizations = []
    for kind, name, target, body, pos in items:
        if kind == "algebroid":
            algebroids.append((name, _build_algebroid(body, pos)))
        elif kind == "jets":
            jets_blocks.append((name, _build_jets(body, pos)))
        else:
            alg = dict(algebroids).get(target)
            if alg is None:
                raise DslError(
                    f"realization {name} targets unknown algebroid {target}",
                    pos[0],
                    pos[1],
                )
            realizations.append((name, target, _build_realization(body, alg, pos)))
    return Document(
        flags=tuple(flags),
        algebroids=tuple(algebroids),
        jets=tuple(jets_blocks),
        realizations=tuple(realizations),
    )


def _build_algebroid(body, pos) -> RelAlgebroid:
    base: list = []
    fiber: list = []
    frame_names: list = []
    opaque: list = []
    d_rules: list = []  # (target token, expr AST)
    for stmt in body:
        sp = _stmt_parser(stmt)
        head = sp.expect_id("statement")
        if head.text in ("base", "fiber", "frame"):
            sp.expect(":")
            names = _id_list(sp) if sp.peek().kind != "eof" else []
            _expect_done(sp)
            dest = {"base": base, "fiber": fiber, "frame": frame_names}[head.text]
            for n in names:
                if n in base + fiber + frame_names:
                    raise DslError(f"duplicate name {n}", head.line, head.col)
            dest.extend(names)
        elif head.text == "opaque":
            while True:
                fname = sp.expect_id("function name")
                sp.expect("/")
                arity = sp.expect("int", "arity")
                opaque.append((fname.text, int(arity.text)))
                if sp.peek().kind != ",":
                    break
                sp.next()
            _expect_done(sp)
        elif head.text == "D":
            target = sp.expect_id("frame covector or base variable")
            sp.expect("=")
            expr = sp.parse_expr()
            _expect_done(sp)
            d_rules.append((target, expr))
        else:
            raise DslError(f"unknown statement {head.text}", head.line, head.col)
    if not frame_names:
        raise DslError("algebroid needs a frame declaration", pos[0], pos[1])
    frame = Frame(frame_names)
    env = _Env(frame, base + fiber, opaque)
    dtheta = {name: Form.zero(frame, 2) for name in frame_names}
    dbase = {name: Form.zero(frame, 1) for name in base}
    for target, expr in d_rules:
        value = _elaborate(expr, env)
        if target.text in dtheta:
            form = _coerce_form(value, frame, 2, target)
            dtheta[target.text] = form
        elif target.text in dbase:
            form = _coerce_form(value, frame, 1, target)
            dbase[target.text] = form
        else:
            raise DslError(
                f"D-rule target {target.text} is neither a covector nor a base variable",
                target.line,
                target.col,
            )
    return RelAlgebroid(
        frame,
        VariableLevels(base, fiber, opaque),
        [dtheta[n] for n in frame_names],
        [(n, dbase[n]) for n in base],
    )


def _coerce_form(value, frame: Frame, degree: int, tok: Token) -> Form:
    kind, v = value
    if kind == "scalar":
        if v.is_zero():
            return Form.zero(frame, degree)
        if degree == 0:
            return Form.of_scalar(frame, v)
        raise DslError(
            f"D {tok.text} needs a degree-{degree} form, found a scalar",
            tok.line,
            tok.col,
        )
    if v.is_zero():
        return Form.zero(frame, degree)
    if v.degree != degree:
        raise DslError(
            f"D {tok.text} needs a degree-{degree} form, found degree {v.degree}",
            tok.line,
            tok.col,
        )
    return v


def _build_jets(body, pos) -> SolvedPDE:
    independent: list = []
    dependent: list = []
    order: Optional[int] = None
    opaque: list = []
    rule_stmts: list = []
    for stmt in body:
        sp = _stmt_parser(stmt)
        head = sp.expect_id("statement")
        if head.text in ("independent", "dependent"):
            sp.expect(":")
            names = _id_list(sp)
            _expect_done(sp)
            (independent if head.text == "independent" else dependent).extend(names)
        elif head.text == "order":
            sp.expect(":")
            value = sp.expect("int", "order")
            _expect_done(sp)
            order = int(value.text)
        elif head.text == "opaque":
            while True:
                fname = sp.expect_id("function name")
                sp.expect("/")
                arity = sp.expect("int", "arity")
                opaque.append((fname.text, int(arity.text)))
                if sp.peek().kind != ",":
                    break
                sp.next()
            _expect_done(sp)
        elif head.text == "rule":
            target = sp.expect_id("jet coordinate")
            sp.expect("=")
            expr = sp.parse_expr()
            _expect_done(sp)
            rule_stmts.append((target, expr))
        else:
            raise DslError(f"unknown statement {head.text}", head.line, head.col)
    if not independent or not dependent or order is None:
        raise DslError(
            "jets blocks need independent, dependent and order declarations",
            pos[0],
            pos[1],
        )
    chart = JetChart(independent, dependent, order)
    coords = [name for name, _, _ in chart.derivative_coordinates()]
    env = _Env(None, list(chart.independent) + coords, opaque)
    rules = []
    for target, expr in rule_stmts:
        value = _elaborate(expr, env)
        if value[0] != "scalar":
            raise DslError("jet rules must be scalar equations", target.line, target.col)
        rules.append((target.text, value[1]))
    try:
        pde = SolvedPDE(chart, rules)
    except ValueError as exc:
        raise DslError(str(exc), pos[0], pos[1]) from None
    object.__setattr__(pde, "_opaque", tuple(opaque))
    return pde


def _build_realization(body, alg: RelAlgebroid, pos) -> Realization:
    coords: list = []
    theta_stmts: list = []
    map_stmts: list = []
    for stmt in body:
        sp = _stmt_parser(stmt)
        head = sp.expect_id("statement")
        if head.text == "coords":
            sp.expect(":")
            coords.extend(_id_list(sp))
            _expect_done(sp)
        elif head.text == "map":
            target = sp.expect_id("variable")
            sp.expect("=")
            expr = sp.parse_expr()
            _expect_done(sp)
            map_stmts.append((target, expr))
        else:
            sp.expect("=")
            expr = sp.parse_expr()
            _expect_done(sp)
            theta_stmts.append((head, expr))
    if not coords:
        raise DslError("realization needs a coords declaration", pos[0], pos[1])
    dt_frame = Frame(tuple("d" + t for t in coords))
    env = _Env(dt_frame, coords, dict(alg.levels.opaque))
    theta = []
    for target, expr in theta_stmts:
        if target.text not in alg.frame.names:
            raise DslError(
                f"{target.text} is not a covector of the target algebroid",
                target.line,
                target.col,
            )
        value = _elaborate(expr, env)
        form = _coerce_form(value, dt_frame, 1, target)
        theta.append((target.text, form))
    base_map = []
    fiber_map = []
    for target, expr in map_stmts:
        value = _elaborate(expr, env)
        if value[0] != "scalar":
            raise DslError("map statements must be scalar", target.line, target.col)
        if target.text in alg.levels.base:
            base_map.append((target.text, value[1]))
        elif target.text in alg.levels.fiber:
            fiber_map.append((target.text, value[1]))
        else:
            raise DslError(
                f"{target.text} is not a variable of the target algebroid",
                target.line,
                target.col,
            )
    return Realization(coords, theta, base_map, fiber_map)


# -- unparser -----------------------------------------------------------------


def format_document(doc: Document) -> str:
    """Canonical text for a document; parse(format_document(d)) == parse(src)."""
    from .report import format_form

    lines = []
    for name, enabled in doc.flags:
        if enabled:
            lines.append(f"option {name};")
    for name, alg in doc.algebroids:
        lines.append(f"algebroid {name} {{")
        lines.append("  frame: " + ", ".join(alg.frame.names) + ";")
        if alg.levels.base:
            lines.append("  base: " + ", ".join(alg.levels.base) + ";")
        if alg.levels.fiber:
            lines.append("  fiber: " + ", ".join(alg.levels.fiber) + ";")
        if alg.levels.opaque:
            decls = ", ".join(f"{n}/{a}" for n, a in alg.levels.opaque)
            lines.append(f"  opaque {decls};")
        for i, covector in enumerate(alg.frame.names, start=1):
            lines.append(f"  D {covector} = {format_form(alg.dtheta_of(i))};")
        for var, form in alg.dbase:
            lines.append(f"  D {var} = {format_form(form)};")
        lines.append("}")
    for name, pde in doc.jets:
        chart = pde.chart
        lines.append(f"jets {name} {{")
        lines.append("  independent: " + ", ".join(chart.independent) + ";")
        lines.append("  dependent: " + ", ".join(chart.dependent) + ";")
        lines.append(f"  order: {chart.order};")
        opaque = getattr(pde, "_opaque", ())
        if opaque:
            decls = ", ".join(f"{n}/{a}" for n, a in opaque)
            lines.append(f"  opaque {decls};")
        for target, rhs in pde.rules:
            lines.append(f"  rule {target} = {rhs};")
        lines.append("}")
    for name, target, r in doc.realizations:
        lines.append(f"realization {name} for {target} {{")
        lines.append("  coords: " + ", ".join(r.coords) + ";")
        for covector, form in r.theta:
            lines.append(f"  {covector} = {format_form(form)};")
        for var, value in list(r.base_map) + list(r.fiber_map):
            lines.append(f"  map {var} = {value};")
        lines.append("}")
    return "\n".join(lines) + "\n"
