"""Report assembly: run a command on a document, emit text and JSON.

Reports are byte-deterministic for a fixed input: every mapping is built in
a fixed order and serialized with sorted keys; the timing field is the only
nondeterministic part and is dropped in deterministic mode.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from . import dsl
from .algebroid import (
    RelAlgebroid,
    check_lie,
    derivation_to_bracket,
    realization_check,
    realization_frame_minor,
    validate,
)
from .forms import Form
from .prolong import (
    AdjoinRule,
    ProlongationStep,
    parse_adjoin_target,
    prolong,
    tower,
)
from .scalar import Scalar, format_scalar, trig_rewrite

__all__ = ["Report", "run", "format_form", "format_solved_rule", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

EXIT_CLEAN = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2


@dataclass
class Report:
    exit_code: int
    payload: dict
    text: str

    def to_json(self) -> str:
        return json.dumps(self.payload, sort_keys=True, indent=2) + "\n"


# -- formatting ---------------------------------------------------------------


def _coeff_piece(value: Scalar):
    """(sign, body) for joining form terms into a readable sum."""
    terms = value.terms
    if len(terms) == 1:
        mono, q = terms[0]
        if q < 0:
            return "-", format_scalar(Scalar(((mono, -q),)))
        return "+", format_scalar(value)
    return "+", "(" + format_scalar(value) + ")"


def format_form(form: Form) -> str:
    if form.is_zero():
        return "0"
    pieces = []
    for indices, value in form.terms:
        basis = "^".join(form.frame.name(i) for i in indices)
        sign, body = _coeff_piece(value)
        if not basis:
            pieces.append((sign, body))
        elif body == "1":
            pieces.append((sign, basis))
        else:
            pieces.append((sign, f"{body}*{basis}"))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


def format_solved_rule(rule) -> str:
    """Particular part plus the fresh parameters factored out."""
    pieces = []
    if not rule.particular.is_zero():
        pieces.append(format_form(rule.particular))
    for param, form in rule.kernel:
        if len(form.terms) == 1:
            rendered = format_form(form)
            if rendered.startswith("-"):
                pieces.append(f"{param}*({rendered})")
            else:
                pieces.append(f"{param}*{rendered}")
        else:
            pieces.append(f"{param}*({format_form(form)})")
    return " + ".join(pieces) if pieces else "0"


def form_json(form: Form) -> dict:
    return {
        ",".join(str(i) for i in indices): format_scalar(value)
        for indices, value in form.terms
    }


def structure_json(alg: RelAlgebroid) -> dict:
    d = {}
    for i, name in enumerate(alg.frame.names, start=1):
        d[name] = form_json(alg.dtheta_of(i))
    for var, form in alg.dbase:
        d[var] = form_json(form)
    return {
        "frame": list(alg.frame.names),
        "base": list(alg.levels.base),
        "fiber": list(alg.levels.fiber),
        "opaque": [f"{n}/{a}" for n, a in alg.levels.opaque],
        "D": d,
    }


def structure_text(alg: RelAlgebroid, indent: str = "  ") -> list:
    lines = []
    for i, name in enumerate(alg.frame.names, start=1):
        lines.append(f"{indent}D {name} = {format_form(alg.dtheta_of(i))}")
    for var, form in alg.dbase:
        lines.append(f"{indent}D {var} = {format_form(form)}")
    return lines


def step_json(step: ProlongationStep) -> dict:
    rules = {}
    for var, rule in step.rules:
        rules[var] = {
            "particular": form_json(rule.particular),
            "kernel": {param: form_json(f) for param, f in rule.kernel},
        }
    return {
        "verdict": step.verdict,
        "parameters": list(step.params),
        "rules": rules,
        "obstructions": [
            {"equation": format_scalar(s), "source": _prov_str(p)}
            for s, p in step.obstructions
        ],
        "residual_constants": [
            {"value": str(q), "source": _prov_str(p)}
            for q, p in step.residual_constants
        ],
        "assumptions": [format_scalar(s) for s in step.assumptions],
    }


def _prov_str(provenance) -> str:
    kind, name, indices = provenance
    where = ",".join(str(i) for i in indices)
    return f"D^2 {name} @ ({where})"


def step_text(step: ProlongationStep, level: int, indent: str = "  ") -> list:
    lines = []
    if step.verdict == "underdetermined":
        count = step.parameter_count
        noun = "parameter" if count == 1 else "parameters"
        lines.append(f"level {level}: underdetermined ({count} fresh {noun})")
    else:
        lines.append(f"level {level}: {step.verdict}")
    for var, rule in step.rules:
        lines.append(f"{indent}D{level} {var} = {format_solved_rule(rule)}")
    for name, form in step.residual_forms():
        lines.append(f"{indent}residual D^2 {name} = {format_form(form)}")
    if step.assumptions:
        rendered = ", ".join(format_scalar(s) for s in step.assumptions)
        lines.append(f"{indent}assumes nonzero: {rendered}")
    return lines


# -- command execution --------------------------------------------------------


def _parse_adjoin(expressions: Sequence[str], doc_alg: RelAlgebroid):
    """Each entry is an equation ``lhs = rhs`` (or an expression, read = 0)."""
    rules = []
    env_vars = list(doc_alg.levels.all_vars)
    opaque = list(doc_alg.levels.opaque)
    for raw in expressions:
        if "=" in raw:
            lhs_text, rhs_text = raw.split("=", 1)
        else:
            lhs_text, rhs_text = raw, "0"
        lhs = _parse_scalar(lhs_text, env_vars, opaque)
        rhs = _parse_scalar(rhs_text, env_vars, opaque)
        target, solved = parse_adjoin_target(lhs - rhs)
        rules.append((target, solved))
    return AdjoinRule(rules)


def _parse_scalar(text: str, variables, opaque) -> Scalar:
    tokens = dsl._lex(text)
    parser = dsl._Parser(tokens)
    ast = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "eof":
        raise dsl.DslError(f"unexpected {tok.text!r}", tok.line, tok.col)
    env = dsl._Env(None, variables, opaque)
    kind, value = dsl._elaborate(ast, env)
    if kind != "scalar":
        raise ValueError("adjoined constraints must be scalar equations")
    return value


def run(
    source: str,
    command: str,
    *,
    name: Optional[str] = None,
    depth: int = 1,
    adjoin: Sequence[str] = (),
    trig: bool = False,
    deterministic: bool = False,
    realization: Optional[str] = None,
) -> Report:
    """Execute a command against a document; never raises for input errors."""
    started = time.perf_counter()
    try:
        doc = dsl.parse(source, trig_override=True if trig else None)
    except dsl.DslError as exc:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "error": {"message": exc.message, "line": exc.line, "column": exc.col},
        }
        text = f"error: {exc.line}:{exc.col}: {exc.message}\n"
        return Report(EXIT_USAGE, payload, text)

    effective_trig = trig or doc.flag("trig_rewrite")
    options = {
        "trig_rewrite": effective_trig,
        "deterministic": deterministic,
    }
    if command in ("prolong", "tower"):
        options["adjoin"] = list(adjoin)
    if command == "tower":
        options["depth"] = depth

    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "options": options,
    }
    lines = []

    try:
        with trig_rewrite(effective_trig):
            exit_code = _execute(
                command, doc, payload, lines,
                name=name, depth=depth, adjoin=adjoin, realization=realization,
            )
    except (dsl.DslError, ValueError, RuntimeError) as exc:
        message = getattr(exc, "message", str(exc))
        payload["error"] = {"message": message}
        return Report(EXIT_USAGE, payload, f"error: {message}\n")

    if not deterministic:
        payload["timing_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
    text = "\n".join(lines) + "\n" if lines else ""
    payload["exit_code"] = exit_code
    return Report(exit_code, payload, text)


def _execute(command, doc, payload, lines, *, name, depth, adjoin, realization):
    if command == "realize":
        return _run_realize(doc, payload, lines, realization)

    kind, target, alg = doc.resolve(name)
    payload["target"] = {"name": target, "kind": kind}
    lines.append(f"{command} {target}")

    if command == "jets":
        if kind != "jets":
            raise ValueError(f"{target} is not a jets block")
        payload["structure"] = structure_json(alg)
        lines.extend(structure_text(alg))
        return EXIT_CLEAN

    if command == "check":
        return _run_check(alg, payload, lines)
    if command == "bracket":
        return _run_bracket(alg, payload, lines)

    rules = _parse_adjoin(adjoin, alg) if adjoin else None
    if command == "prolong":
        return _run_prolong(alg, payload, lines, rules)
    if command == "tower":
        return _run_tower(alg, payload, lines, depth, rules)
    raise ValueError(f"unknown command {command}")


def _run_check(alg: RelAlgebroid, payload, lines) -> int:
    problems = validate(alg)
    payload["diagnostics"] = problems
    payload["structure"] = structure_json(alg)
    if problems:
        for p in problems:
            lines.append(f"  invalid: {p}")
        return EXIT_USAGE
    lines.append("  well-formed: yes")
    if alg.levels.fiber:
        fibers = ", ".join(alg.levels.fiber)
        payload["lie"] = None
        lines.append(f"  relative over fiber level ({fibers}); D^2 test needs prolongation")
        return EXIT_CLEAN
    obstructions = check_lie(alg)
    payload["lie"] = {
        "is_lie_algebroid": not obstructions,
        "obstructions": {name: form_json(f) for name, f in obstructions},
    }
    if obstructions:
        lines.append("  Lie algebroid: no")
        for gen, form in obstructions:
            lines.append(f"    D^2 {gen} = {format_form(form)}")
        return EXIT_VERDICT
    lines.append("  Lie algebroid: yes")
    return EXIT_CLEAN


def _run_bracket(alg: RelAlgebroid, payload, lines) -> int:
    problems = validate(alg)
    if problems:
        payload["diagnostics"] = problems
        for p in problems:
            lines.append(f"  invalid: {p}")
        return EXIT_USAGE
    tables = derivation_to_bracket(alg)
    c_json = {}
    for (i, j, k), value in tables.c:
        c_json.setdefault(f"{j},{k}", {})[str(i)] = format_scalar(value)
    rho_json = {}
    for (var, i), value in tables.rho:
        rho_json.setdefault(var, {})[str(i)] = format_scalar(value)
    payload["bracket"] = {"c": c_json, "rho": rho_json}
    names = alg.frame.names
    for j in range(1, len(names) + 1):
        for k in range(j + 1, len(names) + 1):
            parts = []
            for i in range(1, len(names) + 1):
                value = tables.c_full(i, j, k)
                if value.is_zero():
                    continue
                sign, body = _coeff_piece(value)
                rendered = f"e{i}" if body == "1" else f"{body}*e{i}"
                parts.append((sign, rendered))
            if parts:
                joined = ("-" if parts[0][0] == "-" else "") + parts[0][1]
                for sign, body in parts[1:]:
                    joined += f" {sign} {body}"
                lines.append(f"  [e{j}, e{k}] = {joined}")
    anchor_zero = True
    for i in range(1, len(names) + 1):
        parts = []
        for (var, idx), value in tables.rho:
            if idx != i or value.is_zero():
                continue
            anchor_zero = False
            sign, body = _coeff_piece(value)
            rendered = f"d/d{var}" if body == "1" else f"{body}*d/d{var}"
            parts.append((sign, rendered))
        if parts:
            joined = ("-" if parts[0][0] == "-" else "") + parts[0][1]
            for sign, body in parts[1:]:
                joined += f" {sign} {body}"
            lines.append(f"  rho(e{i}) = {joined}")
    if anchor_zero:
        lines.append("  anchor: 0")
    return EXIT_CLEAN


def _lie_with_rules(alg: RelAlgebroid, rules) -> list:
    obstructions = check_lie(alg)
    if rules is not None:
        reduced = []
        for name, form in obstructions:
            rewritten = rules.apply_form(form)
            if not rewritten.is_zero():
                reduced.append((name, rewritten))
        return reduced
    return obstructions


def _run_prolong(alg: RelAlgebroid, payload, lines, rules) -> int:
    step, successor = prolong(alg, adjoin=rules)
    payload["step"] = step_json(step)
    lines.extend(step_text(step, 1))
    if successor is None:
        payload["successor"] = None
        return EXIT_VERDICT
    payload["successor"] = structure_json(successor)
    if not successor.levels.fiber:
        obstructions = _lie_with_rules(successor, rules)
        payload["successor_lie"] = not obstructions
        lines.append(
            "  successor Lie algebroid: " + ("yes" if not obstructions else "no")
        )
    return EXIT_CLEAN


def _run_tower(alg: RelAlgebroid, payload, lines, depth, rules) -> int:
    result = tower(alg, depth, adjoin=rules)
    payload["levels"] = []
    for idx, level in enumerate(result.levels, start=1):
        entry = {
            "level": idx,
            "structure": structure_json(level.alg),
            "step": step_json(level.step),
            "checks": {
                "extension": level.extension_ok,
                "completion": level.completion_ok,
            },
        }
        payload["levels"].append(entry)
        lines.extend(step_text(level.step, idx))
    stopped = result.stopped_early()
    payload["stopped_early"] = stopped
    if stopped:
        lines.append(f"stopped at level {len(result.levels)}: {result.levels[-1].step.verdict}")
        return EXIT_VERDICT
    lines.append(f"no obstruction up to depth {depth}")
    return EXIT_CLEAN


def _run_realize(doc, payload, lines, realization_name) -> int:
    entries = {name: (target, r) for name, target, r in doc.realizations}
    if realization_name is None:
        if len(entries) != 1:
            raise ValueError(
                "document declares several realizations; pick one of: "
                + ", ".join(entries)
            )
        realization_name = next(iter(entries))
    if realization_name not in entries:
        raise ValueError(f"no realization named {realization_name}")
    target, r = entries[realization_name]
    alg = doc.algebroid_map()[target]
    payload["target"] = {"name": target, "kind": "algebroid"}
    payload["realization"] = realization_name
    lines.append(f"realize {realization_name} -> {target}")
    minor = realization_frame_minor(alg, r)
    residuals = realization_check(alg, r)
    payload["frame_minor"] = format_scalar(minor) if minor is not None else None
    payload["residuals"] = {name: form_json(f) for name, f in residuals}
    if minor is None:
        lines.append("  coframe map degenerate: no nonvanishing top minor")
    else:
        lines.append(f"  assumes nonzero minor: {format_scalar(minor)}")
    if residuals:
        for gen, form in residuals:
            lines.append(f"  residual {gen}: {format_form(form)}")
        lines.append("  realization: no")
        return EXIT_VERDICT
    lines.append("  realization: yes")
    return EXIT_CLEAN
