"""Structure equations of a derivation relative to a submersion.

A RelAlgebroid records a coframe, a two-level variable list (base
coordinates downstairs, fiber coordinates upstairs), the degree-2 forms
D(theta^i) and the degree-1 forms D(x) for every base variable.  The
derivation on fiber variables is deliberately left open; supplying rules
for them is what prolongation does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .forms import Form, Frame
from .scalar import Scalar, ZERO as SZERO, diff, is_zero, substitute

__all__ = [
    "VariableLevels",
    "RelAlgebroid",
    "Realization",
    "FiberCoefficientError",
    "BracketTables",
    "validate",
    "apply_D",
    "derive",
    "derivation_to_bracket",
    "bracket_to_derivation",
    "check_lie",
    "realization_check",
    "realization_frame_minor",
]


class FiberCoefficientError(ValueError):
    """A form meant to live downstairs mentions a fiber variable."""


@dataclass(frozen=True)
class VariableLevels:
    base: tuple
    fiber: tuple
    opaque: tuple = ()  # (name, arity) pairs

    def __init__(self, base: Sequence[str], fiber: Sequence[str], opaque=()):
        object.__setattr__(self, "base", tuple(base))
        object.__setattr__(self, "fiber", tuple(fiber))
        object.__setattr__(self, "opaque", tuple((str(n), int(a)) for n, a in opaque))
        overlap = set(self.base) & set(self.fiber)
        if overlap:
            raise ValueError(f"variables on both levels: {sorted(overlap)}")

    @property
    def all_vars(self) -> tuple:
        return self.base + self.fiber

    def opaque_names(self) -> tuple:
        return tuple(n for n, _ in self.opaque)

    def promote(self, fresh_fiber: Sequence[str]) -> "VariableLevels":
        """Fiber variables become base; new fiber level from fresh names."""
        return VariableLevels(self.base + self.fiber, tuple(fresh_fiber), self.opaque)


@dataclass(frozen=True)
class RelAlgebroid:
    frame: Frame
    levels: VariableLevels
    dtheta: tuple  # one degree-2 Form per frame covector
    dbase: tuple  # (variable name, degree-1 Form) per base variable

    def __init__(self, frame: Frame, levels: VariableLevels, dtheta, dbase):
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "dtheta", tuple(dtheta))
        object.__setattr__(self, "dbase", tuple((str(v), f) for v, f in dbase))

    def dbase_map(self) -> dict:
        return dict(self.dbase)

    def dtheta_of(self, index: int) -> Form:
        """Structure form of the covector with 1-based index."""
        return self.dtheta[index - 1]

    def used_names(self) -> set:
        names = set(self.frame.names)
        names.update(self.levels.all_vars)
        names.update(self.levels.opaque_names())
        return names

    def __eq__(self, other):
        if not isinstance(other, RelAlgebroid):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.levels == other.levels
            and self.dtheta == other.dtheta
            and self.dbase == other.dbase
        )

    def __hash__(self):
        return hash((self.frame, self.levels, self.dtheta, self.dbase))


def validate(alg: RelAlgebroid) -> list:
    """Structural diagnostics; empty list means the data is well-formed."""
    problems = []
    n = alg.frame.rank
    if len(alg.dtheta) != n:
        problems.append(
            f"expected {n} structure forms for the frame, found {len(alg.dtheta)}"
        )
    declared = set(alg.levels.all_vars)
    arity = dict(alg.levels.opaque)
    reserved = set(alg.frame.names) | set(alg.levels.opaque_names())
    clash = declared & reserved
    if clash:
        problems.append(f"names declared at several roles: {sorted(clash)}")

    def scan_scalar(s: Scalar, where: str):
        for name in sorted(s.free_vars()):
            if name not in declared:
                problems.append(f"unknown variable {name} in {where}")
        for atom in s.atoms():
            fn = getattr(atom, "name", None)
            args = getattr(atom, "args", None)
            if args is not None and fn is not None:
                if fn not in arity:
                    problems.append(f"undeclared opaque function {fn} in {where}")
                elif arity[fn] != len(args):
                    problems.append(
                        f"function {fn} used with {len(args)} argument(s), declared /{arity[fn]} in {where}"
                    )
                for sub in args:
                    scan_scalar(sub, where)

    for i, form in enumerate(alg.dtheta, start=1):
        name = alg.frame.name(i) if i <= n else f"#{i}"
        if not form.is_zero() and form.degree != 2:
            problems.append(f"D {name} must have degree 2, found degree {form.degree}")
        if form.frame != alg.frame:
            problems.append(f"D {name} is expressed over a different frame")
        for _, c in form.terms:
            scan_scalar(c, f"D {name}")

    seen = set()
    for var, form in alg.dbase:
        if var not in alg.levels.base:
            problems.append(f"D-rule given for {var}, which is not a base variable")
        if var in seen:
            problems.append(f"duplicate D-rule for {var}")
        seen.add(var)
        if not form.is_zero() and form.degree != 1:
            problems.append(f"D {var} must have degree 1, found degree {form.degree}")
        if form.frame != alg.frame:
            problems.append(f"D {var} is expressed over a different frame")
        for _, c in form.terms:
            scan_scalar(c, f"D {var}")
    for var in alg.levels.base:
        if var not in seen:
            problems.append(f"missing D-rule for base variable {var}")
    return problems


def _coefficient_differential(
    alg: RelAlgebroid, value: Scalar, fiber_rules: Optional[Mapping[str, Form]]
) -> Form:
    """D f = sum over variables of (df/dv) D v, as a 1-form."""
    result = Form.zero(alg.frame, 1)
    rules = alg.dbase_map()
    for name in sorted(value.free_vars()):
        partial = diff(value, name)
        if partial.is_zero():
            continue
        rule = rules.get(name)
        if rule is None and fiber_rules is not None:
            rule = fiber_rules.get(name)
        if rule is None:
            if name in alg.levels.fiber:
                raise FiberCoefficientError(
                    f"coefficient depends on fiber variable {name}; "
                    "the relative derivation is not defined there"
                )
            raise ValueError(f"no derivation rule for variable {name}")
        result = result + rule.scale(partial)
    return result


def _basis_differential(alg: RelAlgebroid, indices: tuple) -> Form:
    """Leibniz expansion of D(theta^{i1} ^ ... ^ theta^{id})."""
    result = Form.zero(alg.frame, len(indices) + 1)
    for pos, idx in enumerate(indices):
        prefix = Form.basis(alg.frame, indices[:pos]) if pos else None
        suffix = (
            Form.basis(alg.frame, indices[pos + 1 :])
            if pos + 1 < len(indices)
            else None
        )
        piece = alg.dtheta_of(idx)
        if prefix is not None:
            piece = prefix.wedge(piece)
        if suffix is not None:
            piece = piece.wedge(suffix)
        if pos % 2:
            piece = -piece
        result = result + piece
    return result


def derive(
    alg: RelAlgebroid,
    form: Form,
    fiber_rules: Optional[Mapping[str, Form]] = None,
) -> Form:
    """Apply the structure-equation derivation to a homogeneous form.

    With ``fiber_rules`` the derivation is the extension that sends each
    fiber variable to the given 1-form; without them, coefficients must only
    involve base variables.
    """
    if form.frame != alg.frame:
        raise ValueError("form is expressed over a different frame")
    result = Form.zero(alg.frame, form.degree + 1)
    for indices, value in form.terms:
        df = _coefficient_differential(alg, value, fiber_rules)
        if indices:
            basis = Form.basis(alg.frame, indices)
            result = result + df.wedge(basis)
            result = result + _basis_differential(alg, indices).scale(value)
        else:
            result = result + df
    return result.normalized()


def apply_D(alg: RelAlgebroid, form: Form) -> Form:
    """The relative derivation on forms whose coefficients live downstairs."""
    for _, value in form.terms:
        bad = value.free_vars() & set(alg.levels.fiber)
        if bad:
            raise FiberCoefficientError(
                f"form coefficients mention fiber variable(s) {sorted(bad)}"
            )
    return derive(alg, form)


@dataclass(frozen=True)
class BracketTables:
    """Structure functions in bracket form: anchors and bracket constants."""

    rank: int
    c: tuple  # ((i, j, k), Scalar) with j < k, nonzero entries only
    rho: tuple  # ((variable, i), Scalar), nonzero entries only

    def c_map(self) -> dict:
        return dict(self.c)

    def rho_map(self) -> dict:
        return dict(self.rho)

    def c_full(self, i: int, j: int, k: int) -> Scalar:
        if j == k:
            return SZERO
        table = self.c_map()
        if j < k:
            return table.get((i, j, k), SZERO)
        return -table.get((i, k, j), SZERO)


def derivation_to_bracket(alg: RelAlgebroid) -> BracketTables:
    """Read bracket constants and anchor components off the structure forms.

    Convention: D theta^i = -(1/2) c^i_jk theta^j ^ theta^k summed over all
    (j, k), so the stored coefficient at j < k is -c^i_jk; and
    D x = rho^x_i theta^i.
    """
    c_entries = []
    for i in range(1, alg.frame.rank + 1):
        for (j, k), value in alg.dtheta_of(i).terms:
            c_entries.append(((i, j, k), -value))
    rho_entries = []
    for var, form in alg.dbase:
        for (idx,), value in form.terms:
            rho_entries.append(((var, idx), value))
    return BracketTables(alg.frame.rank, tuple(c_entries), tuple(rho_entries))


def bracket_to_derivation(
    c: Mapping, rho: Mapping, levels: VariableLevels, frame: Frame
) -> RelAlgebroid:
    """Inverse of derivation_to_bracket; rejects non-antisymmetric input.

    ``c`` maps (i, j, k) to Scalars (either triangle, or both when they are
    honest negatives); ``rho`` maps (variable, i) to Scalars.
    """
    triangle: dict = {}
    for (i, j, k), value in c.items():
        value = value if isinstance(value, Scalar) else Scalar.rational(value)
        if j == k:
            if not value.is_zero():
                raise ValueError(f"c^{i}_{j}{k} must vanish on the diagonal")
            continue
        key = (i, j, k) if j < k else (i, k, j)
        oriented = value if j < k else -value
        if key in triangle:
            if not (triangle[key] - oriented).is_zero():
                raise ValueError(f"c table is not antisymmetric at {key}")
        else:
            triangle[key] = oriented
    dtheta = []
    for i in range(1, frame.rank + 1):
        entries = {
            (j, k): -value
            for (ti, j, k), value in triangle.items()
            if ti == i and not value.is_zero()
        }
        dtheta.append(Form(frame, 2, entries))
    rho_by_var: dict = {v: {} for v in levels.base}
    for (var, idx), value in rho.items():
        value = value if isinstance(value, Scalar) else Scalar.rational(value)
        if var not in rho_by_var:
            raise ValueError(f"anchor entry for undeclared base variable {var}")
        if not value.is_zero():
            rho_by_var[var][(idx,)] = value
    dbase = [(var, Form(frame, 1, rho_by_var[var])) for var in levels.base]
    return RelAlgebroid(frame, levels, dtheta, dbase)


def check_lie(alg: RelAlgebroid) -> list:
    """Nonzero forms among D(D theta^i) and D(D x); empty iff Lie algebroid.

    Only defined for ordinary algebroids (no fiber level).
    """
    if alg.levels.fiber:
        raise ValueError("check_lie needs an empty fiber level; prolong first")
    obstructions = []
    for i in range(1, alg.frame.rank + 1):
        square = derive(alg, alg.dtheta_of(i))
        if not square.is_zero():
            obstructions.append((alg.frame.name(i), square))
    for var, form in alg.dbase:
        square = derive(alg, form)
        if not square.is_zero():
            obstructions.append((var, square))
    return obstructions


@dataclass(frozen=True)
class Realization:
    """Candidate solution data: coordinates, coframe expressions, and maps."""

    coords: tuple
    theta: tuple  # (frame covector name, 1-Form over the coordinate coframe)
    base_map: tuple  # (base variable, Scalar in coords)
    fiber_map: tuple  # (fiber variable, Scalar in coords)

    def __init__(self, coords, theta, base_map, fiber_map=()):
        object.__setattr__(self, "coords", tuple(coords))
        object.__setattr__(self, "theta", tuple(theta))
        object.__setattr__(self, "base_map", tuple(base_map))
        object.__setattr__(self, "fiber_map", tuple(fiber_map))

    def coordinate_frame(self) -> Frame:
        return Frame(tuple("d" + t for t in self.coords))

    def bindings(self) -> dict:
        out = dict(self.base_map)
        out.update(dict(self.fiber_map))
        return out


def _coordinate_d(frame: Frame, coords: tuple, form: Form) -> Form:
    """Exterior derivative in coordinates: d(h dt^I) = (dh/dt^b) dt^b ^ dt^I."""
    result = Form.zero(frame, form.degree + 1)
    for indices, value in form.terms:
        for b, t in enumerate(coords, start=1):
            partial = diff(value, t)
            if partial.is_zero():
                continue
            piece = Form(frame, 1, {(b,): partial})
            if indices:
                piece = piece.wedge(Form.basis(frame, indices))
            result = result + piece
    return result


def _pullback(alg: RelAlgebroid, r: Realization, form: Form) -> Form:
    """Substitute the realization maps and coframe expressions into a form."""
    target = r.coordinate_frame()
    bindings = r.bindings()
    theta_map = dict(r.theta)
    result = Form.zero(target, form.degree)
    for indices, value in form.terms:
        piece = Form.of_scalar(target, substitute(value, bindings))
        for idx in indices:
            name = alg.frame.name(idx)
            if name not in theta_map:
                raise ValueError(f"realization gives no expression for {name}")
            piece = piece.wedge(theta_map[name])
        result = result + piece
    return result


def realization_check(alg: RelAlgebroid, r: Realization) -> list:
    """Residuals of the realization equations; empty iff r is a realization.

    For each covector: d(theta^i) - pullback(D theta^i); for each base
    variable: d(a) - pullback(D x).  All computed in the realization's
    coordinates.
    """
    target = r.coordinate_frame()
    theta_map = dict(r.theta)
    residuals = []
    for i in range(1, alg.frame.rank + 1):
        name = alg.frame.name(i)
        if name not in theta_map:
            raise ValueError(f"realization gives no expression for {name}")
        lhs = _coordinate_d(target, r.coords, theta_map[name])
        rhs = _pullback(alg, r, alg.dtheta_of(i))
        residual = (lhs - rhs).normalized()
        if not residual.is_zero():
            residuals.append((name, residual))
    bindings = r.bindings()
    for var, form in alg.dbase:
        if var not in bindings:
            raise ValueError(f"realization gives no map for base variable {var}")
        value = bindings[var]
        value = value if isinstance(value, Scalar) else Scalar.rational(value)
        lhs = _coordinate_d(target, r.coords, Form.of_scalar(target, value))
        rhs = _pullback(alg, r, form)
        residual = (lhs - rhs).normalized()
        if not residual.is_zero():
            residuals.append((var, residual))
    return residuals


def _det(matrix) -> Scalar:
    if len(matrix) == 1:
        return matrix[0][0]
    total = SZERO
    for col in range(len(matrix)):
        minor = [row[:col] + row[col + 1 :] for row in matrix[1:]]
        term = matrix[0][col] * _det(minor)
        total = total + (term if col % 2 == 0 else -term)
    return total


def realization_frame_minor(alg: RelAlgebroid, r: Realization):
    """A nonvanishing n x n minor of the coframe coefficient matrix, or None.

    Full rank at generic points is an assumption, not a theorem: the minor is
    reported so the caller can record it.
    """
    n = alg.frame.rank
    d = len(r.coords)
    if d < n:
        return None
    theta_map = dict(r.theta)
    rows = []
    for name in alg.frame.names:
        form = theta_map.get(name)
        if form is None:
            return None
        rows.append([form.coeff((a,)) for a in range(1, d + 1)])
    from itertools import combinations

    for cols in combinations(range(d), n):
        det = _det([[row[c] for c in cols] for row in rows])
        if not is_zero(det):
            return det
    return None
