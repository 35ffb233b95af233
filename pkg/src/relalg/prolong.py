"""Prolongation: extension ansatz, torsion, the linear system, towers.

The pipeline treats one level at a time: mint unknowns xi for every fiber
variable and frame direction, compute the torsion forms of the extended
derivation, extract an affine system in the unknowns, solve it over the
scalar fraction field, and promote fiber variables one level down with the
solved rules adjoined.  Fresh parameters (the next fiber level) are named
c1, c2, ... skipping any name already taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .algebroid import RelAlgebroid, derive, validate
from .forms import Form
from .linsolve import (
    AffineEquation,
    NonPolynomialSolution,
    SolvedSystem,
    solve_affine_system,
)
from .scalar import (
    FuncAtom,
    Scalar,
    Var,
    ZERO,
    diff,
    generated_name,
    is_zero,
    normalize,
    substitute_atoms,
)

__all__ = [
    "ExtensionAnsatz",
    "LinearSystem",
    "ProlongationStep",
    "Tower",
    "TowerLevel",
    "AdjoinRule",
    "parse_adjoin_target",
    "make_ansatz",
    "torsion",
    "extract_system",
    "solve",
    "prolong",
    "tower",
    "NonPolynomialSolution",
]

DETERMINED = "determined"
UNDERDETERMINED = "underdetermined"
OBSTRUCTED = "obstructed"
EMPTY = "empty"


@dataclass(frozen=True)
class ExtensionAnsatz:
    alg: RelAlgebroid
    unknowns: tuple  # generated names, one per (fiber var, frame index)
    rules: tuple  # (fiber var, 1-Form sum of xi * theta)

    def rule_map(self) -> dict:
        return dict(self.rules)

    def unknown_source(self) -> dict:
        """Generated unknown name -> (fiber variable, frame index)."""
        out = {}
        for name in self.unknowns:
            var, idx = name.rsplit("@", 1)
            out[name] = (var, int(idx))
        return out


def make_ansatz(alg: RelAlgebroid) -> ExtensionAnsatz:
    """Fresh unknowns xi and the extension rule Dy = sum xi_i theta^i."""
    unknowns = []
    rules = []
    for var in alg.levels.fiber:
        entries = {}
        for i in range(1, alg.frame.rank + 1):
            name = generated_name(var, i)
            unknowns.append(name)
            entries[(i,)] = Scalar.var(name)
        rules.append((var, Form(alg.frame, 1, entries)))
    return ExtensionAnsatz(alg, tuple(unknowns), tuple(rules))


def torsion(ansatz: ExtensionAnsatz) -> list:
    """Forms that must vanish for the extension to be a completion.

    One degree-3 form per frame covector (the extended derivation applied to
    D theta^i) and one degree-2 form per base variable (applied to D x).
    """
    alg = ansatz.alg
    rules = ansatz.rule_map()
    out = []
    for i in range(1, alg.frame.rank + 1):
        form = derive(alg, alg.dtheta_of(i), fiber_rules=rules)
        out.append((("frame", alg.frame.name(i)), form))
    for var, dx in alg.dbase:
        form = derive(alg, dx, fiber_rules=rules)
        out.append((("base", var), form))
    return out


@dataclass(frozen=True)
class LinearSystem:
    equations: tuple  # AffineEquation
    unknowns: tuple  # generated names in declaration order


def _affine_split(value: Scalar, unknown_set, provenance) -> AffineEquation:
    coeffs: dict = {}
    const = ZERO
    for mono, q in value.terms:
        hits = []
        for atom, exp in mono:
            if isinstance(atom, Var) and atom.name in unknown_set:
                hits.append((atom, exp))
            else:
                # Unknowns must never hide inside opaque arguments.
                assert not (atom.free_vars() & unknown_set), (
                    "solver unknown nested inside an atom"
                )
        if not hits:
            const = const + Scalar((( mono, q),))
            continue
        assert len(hits) == 1 and hits[0][1] == 1, "torsion must be affine in the unknowns"
        atom = hits[0][0]
        rest = tuple(pair for pair in mono if pair[0] != atom)
        coeffs[atom.name] = coeffs.get(atom.name, ZERO) + Scalar(((rest, q),))
    entries = tuple((u, c) for u, c in coeffs.items() if not c.is_zero())
    entries = tuple(sorted(entries, key=lambda uc: uc[0]))
    return AffineEquation(entries, normalize(const), provenance)


def extract_system(
    torsion_forms: Sequence, unknowns: Sequence[str], rewrite: Optional["AdjoinRule"] = None
) -> LinearSystem:
    """One equation per wedge-monomial coefficient of each torsion form."""
    unknown_set = frozenset(unknowns)
    equations = []
    for label, form in torsion_forms:
        for indices, value in form.terms:
            if rewrite is not None:
                value = rewrite.apply(value)
            if value.is_zero():
                continue
            kind, name = label
            equations.append(_affine_split(value, unknown_set, (kind, name, indices)))
    equations = tuple(eq for eq in equations if eq.coeffs or not eq.const.is_zero())
    return LinearSystem(equations, tuple(unknowns))


@dataclass(frozen=True)
class SolvedRule:
    particular: Form
    kernel: tuple  # (parameter name, Form)

    def combined(self) -> Form:
        total = self.particular
        for param, form in self.kernel:
            total = total + form.scale(Scalar.var(param))
        return total


@dataclass(frozen=True)
class ProlongationStep:
    verdict: str
    ansatz: ExtensionAnsatz
    system: LinearSystem
    rules: tuple  # (fiber var, SolvedRule)
    params: tuple  # fresh parameter names, elimination order
    obstructions: tuple  # (Scalar, provenance)
    residual_constants: tuple  # (Fraction, provenance)
    assumptions: tuple  # Scalars assumed nonzero

    @property
    def parameter_count(self) -> int:
        return len(self.params)

    def rule_map(self) -> dict:
        return dict(self.rules)

    def residual_forms(self) -> list:
        """Residuals grouped back into forms, one per offending generator."""
        frame = self.ansatz.alg.frame
        grouped: dict = {}
        for value, (kind, name, indices) in list(self.obstructions) + [
            (Scalar.rational(q), prov) for q, prov in self.residual_constants
        ]:
            key = (kind, name)
            form = grouped.get(key)
            piece = Form(frame, len(indices), {indices: value})
            grouped[key] = piece if form is None else form + piece
        return [(key[1], form) for key, form in grouped.items()]


def solve(
    system: LinearSystem,
    ansatz: ExtensionAnsatz,
    param_names: Optional[Sequence[str]] = None,
) -> ProlongationStep:
    """Eliminate, classify residuals, and assemble solved extension rules."""
    solved: SolvedSystem = solve_affine_system(system.equations, system.unknowns)

    if param_names is None:
        param_names = _fresh_parameter_names(
            ansatz.alg.used_names(), len(solved.free_unknowns)
        )
    else:
        param_names = list(param_names)
    if len(param_names) < len(solved.free_unknowns):
        raise ValueError("not enough parameter names supplied")
    rename = {
        unk: param_names[pos] for pos, unk in enumerate(solved.free_unknowns)
    }

    if solved.nonzero_constants:
        verdict = EMPTY
    elif solved.obstructions:
        verdict = OBSTRUCTED
    elif solved.free_unknowns:
        verdict = UNDERDETERMINED
    else:
        verdict = DETERMINED

    source = ansatz.unknown_source()
    rules = []
    for var in ansatz.alg.levels.fiber:
        particular_entries: dict = {}
        kernel_entries: dict = {}
        for unknown in ansatz.unknowns:
            u_var, idx = source[unknown]
            if u_var != var:
                continue
            particular, kernel = solved.values[unknown]
            if not particular.is_zero():
                particular_entries[(idx,)] = particular
            for free_unknown, coeff in kernel.items():
                param = rename[free_unknown]
                kernel_entries.setdefault(param, {})
                if not coeff.is_zero():
                    kernel_entries[param][(idx,)] = coeff
        frame = ansatz.alg.frame
        kernel_forms = tuple(
            (param, Form(frame, 1, entries))
            for param, entries in sorted(
                kernel_entries.items(), key=lambda kv: param_names.index(kv[0])
            )
            if entries
        )
        rules.append((var, SolvedRule(Form(frame, 1, particular_entries), kernel_forms)))

    used_params = tuple(param_names[: len(solved.free_unknowns)])

    step = ProlongationStep(
        verdict=verdict,
        ansatz=ansatz,
        system=system,
        rules=tuple(rules),
        params=used_params,
        obstructions=solved.obstructions,
        residual_constants=solved.nonzero_constants,
        assumptions=solved.assumptions,
    )
    if verdict in (DETERMINED, UNDERDETERMINED):
        _verify_back_substitution(step)
    return step


def _verify_back_substitution(step: ProlongationStep) -> None:
    bindings = {}
    source = step.ansatz.unknown_source()
    rule_map = step.rule_map()
    for unknown in step.ansatz.unknowns:
        var, idx = source[unknown]
        bindings[unknown] = rule_map[var].combined().coeff((idx,))
    from .scalar import substitute

    for eq in step.system.equations:
        total = eq.const
        for u, c in eq.coeffs:
            total = total + c * bindings[u]
        if not is_zero(substitute(total, bindings)):
            raise AssertionError(
                f"solved rules do not satisfy the equation from {eq.provenance}"
            )


def _fresh_parameter_names(used, count: int, base: str = "c") -> list:
    names = []
    idx = 1
    while len(names) < count:
        candidate = f"{base}{idx}"
        if candidate not in used:
            names.append(candidate)
        idx += 1
    return names


class AdjoinRule:
    """Substitution rules derived from constraints adjoined by the caller.

    Each constraint is solved for a variable or an opaque-derivative atom
    that occurs linearly with a rational-constant coefficient.  Rules for
    higher derivative orders are derived on demand by differentiating the
    base rule, so differentiated coefficients stay reduced.
    """

    def __init__(self, rules: Sequence[tuple]):
        # rules: (target, rhs) with target a Var name or a FuncAtom
        self._var_rules = {}
        self._func_rules = {}
        for target, rhs in rules:
            if isinstance(target, str):
                self._var_rules[target] = rhs
            elif isinstance(target, FuncAtom):
                if len(target.args) != 1 or not isinstance(
                    _single_var(target.args[0]), str
                ):
                    raise ValueError(
                        "function constraints must be in a single plain variable"
                    )
                self._func_rules[(target.name, target.args)] = (
                    target.orders[0],
                    rhs,
                )
            else:
                raise TypeError(f"cannot adjoin a rule for {target!r}")

    def is_empty(self) -> bool:
        return not self._var_rules and not self._func_rules

    def apply(self, value: Scalar) -> Scalar:
        from .scalar import substitute

        guard = 0
        while True:
            guard += 1
            if guard > 100:
                raise RuntimeError("adjoined rules do not terminate")
            replacements = {}
            for atom in value.atoms():
                if isinstance(atom, FuncAtom):
                    key = (atom.name, atom.args)
                    hit = self._func_rules.get(key)
                    if hit is not None and atom.orders[0] >= hit[0]:
                        base_order, rhs = hit
                        arg_var = _single_var(atom.args[0])
                        derived = rhs
                        for _ in range(atom.orders[0] - base_order):
                            derived = diff(derived, arg_var)
                        replacements[atom] = derived
            changed = False
            if replacements:
                value = substitute_atoms(value, replacements)
                changed = True
            if self._var_rules:
                hit_vars = value.free_vars() & set(self._var_rules)
                if hit_vars:
                    value = substitute(
                        value, {v: self._var_rules[v] for v in hit_vars}
                    )
                    changed = True
            if not changed:
                return value

    def apply_form(self, form: Form) -> Form:
        return form.map_coeffs(self.apply)

    def apply_algebroid(self, alg: RelAlgebroid) -> RelAlgebroid:
        return RelAlgebroid(
            alg.frame,
            alg.levels,
            tuple(self.apply_form(f) for f in alg.dtheta),
            tuple((v, self.apply_form(f)) for v, f in alg.dbase),
        )


def _single_var(s: Scalar):
    """The variable name if s is a bare variable, else None."""
    if len(s.terms) != 1:
        return None
    mono, q = s.terms[0]
    if q != 1 or len(mono) != 1 or mono[0][1] != 1:
        return None
    atom = mono[0][0]
    return atom.name if isinstance(atom, Var) else None


def parse_adjoin_target(constraint: Scalar) -> tuple:
    """Solve ``constraint = 0`` for the best linear atom; returns (target, rhs).

    Candidates are opaque-derivative atoms (highest order first) and plain
    variables, occurring linearly with a rational-constant coefficient.
    """
    candidates = []
    for mono, q in constraint.terms:
        if len(mono) != 1 or mono[0][1] != 1:
            continue
        atom = mono[0][0]
        if isinstance(atom, FuncAtom) and len(atom.args) == 1:
            if _single_var(atom.args[0]) is None:
                continue
            candidates.append((1, atom.orders[0], atom, q))
        elif isinstance(atom, Var):
            candidates.append((0, 0, atom, q))
    if not candidates:
        raise ValueError(
            "constraint has no variable or derivative atom occurring linearly"
        )
    candidates.sort(key=lambda c: (c[0], c[1], c[2].sort_key()), reverse=True)
    _, _, atom, q = candidates[0]
    atom_scalar = Scalar._from_map({((atom, 1),): q})
    rhs = (constraint - atom_scalar) / Scalar.rational(-q)
    if isinstance(atom, Var):
        return atom.name, rhs
    return atom, rhs


def prolong(
    alg: RelAlgebroid,
    adjoin: Optional[AdjoinRule] = None,
) -> tuple:
    """One prolongation step: (step, successor algebroid or None)."""
    problems = validate(alg)
    if problems:
        raise ValueError("invalid algebroid: " + "; ".join(problems))
    if adjoin is not None and not adjoin.is_empty():
        alg = adjoin.apply_algebroid(alg)
    ansatz = make_ansatz(alg)
    forms = torsion(ansatz)
    system = extract_system(forms, ansatz.unknowns, rewrite=adjoin)
    step = solve(system, ansatz)
    if step.verdict in (OBSTRUCTED, EMPTY):
        return step, None
    levels = alg.levels.promote(step.params)
    dbase = list(alg.dbase)
    for var, rule in step.rules:
        dbase.append((var, rule.combined()))
    successor = RelAlgebroid(alg.frame, levels, alg.dtheta, dbase)
    return step, successor


@dataclass(frozen=True)
class TowerLevel:
    alg: RelAlgebroid
    step: ProlongationStep
    successor: Optional[RelAlgebroid]
    extension_ok: Optional[bool]
    completion_ok: Optional[bool]


@dataclass(frozen=True)
class Tower:
    levels: tuple
    requested_depth: int
    final: Optional[RelAlgebroid]

    @property
    def verdicts(self) -> tuple:
        return tuple(level.step.verdict for level in self.levels)

    def stopped_early(self) -> bool:
        return self.final is None


def _verify_level(alg: RelAlgebroid, successor: RelAlgebroid) -> tuple:
    """Check the extension and completion identities on generators."""
    extension_ok = successor.dtheta == alg.dtheta
    old_rules = dict(alg.dbase)
    new_rules = dict(successor.dbase)
    for var, form in old_rules.items():
        if not (new_rules[var] - form).is_zero():
            extension_ok = False
    completion_ok = True
    for i in range(1, alg.frame.rank + 1):
        if not derive(successor, alg.dtheta_of(i)).is_zero():
            completion_ok = False
    for _, form in alg.dbase:
        if not derive(successor, form).is_zero():
            completion_ok = False
    return extension_ok, completion_ok


def tower(
    alg: RelAlgebroid,
    depth: int,
    adjoin: Optional[AdjoinRule] = None,
) -> Tower:
    """Iterate prolongation to the requested depth or an early verdict."""
    if depth < 1:
        raise ValueError("depth must be positive")
    levels = []
    current = alg
    for _ in range(depth):
        step, successor = prolong(current, adjoin=adjoin)
        if successor is None:
            levels.append(TowerLevel(current, step, None, None, None))
            return Tower(tuple(levels), depth, None)
        extension_ok, completion_ok = _verify_level(current, successor)
        levels.append(
            TowerLevel(current, step, successor, extension_ok, completion_ok)
        )
        current = successor
    return Tower(tuple(levels), depth, current)
