"""Gaussian elimination over the fraction field of the scalar ring.

Pivots may be arbitrary nonzero scalars; non-constant pivots are recorded as
genericity assumptions.  The solved values handed back are polynomial again:
kernel vectors are cleared of denominators, and particular solutions are
repaired by shifting the free parameters (an affine change of the fresh
coordinates) when a denominator blocks exact division.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .scalar import (
    ONE,
    Scalar,
    TrigAtom,
    ZERO,
    divide_exact,
    substitute_atoms,
    trig_rewrite_enabled,
)

__all__ = [
    "Frac",
    "NonPolynomialSolution",
    "AffineEquation",
    "SolvedSystem",
    "solve_affine_system",
    "primitive_part",
]


class NonPolynomialSolution(RuntimeError):
    """The solution cannot be written with polynomial coefficients."""


def _content(s: Scalar) -> Fraction:
    num_gcd = 0
    den_lcm = 1
    for _, q in s.terms:
        num_gcd = _gcd(num_gcd, abs(q.numerator))
        den_lcm = den_lcm * q.denominator // _gcd(den_lcm, q.denominator)
    if num_gcd == 0:
        return Fraction(1)
    return Fraction(num_gcd, den_lcm)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _leading_sign(s: Scalar) -> int:
    # Highest structural monomial decides the sign; any fixed rule works.
    if s.is_zero():
        return 1
    return 1 if s.terms[-1][1] > 0 else -1


def primitive_part(s: Scalar) -> Scalar:
    """Strip rational content and normalize the leading sign to +."""
    if s.is_zero():
        return s
    factor = Fraction(_leading_sign(s), 1) / _content(s)
    return s * Scalar.rational(factor)


@dataclass(frozen=True)
class Frac:
    """A quotient of scalars, normalized eagerly via exact division."""

    num: Scalar
    den: Scalar

    @staticmethod
    def of(num: Scalar, den: Scalar = ONE) -> "Frac":
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            return Frac(ZERO, ONE)
        q = divide_exact(num, den)
        if q is not None:
            return Frac(q, ONE)
        sign = _leading_sign(den)
        scale = Fraction(sign, 1) / _content(den)
        return Frac(num * Scalar.rational(scale), den * Scalar.rational(scale))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den == ONE

    def is_rational_const(self) -> bool:
        return self.num.is_rational_const() and self.den.is_rational_const()

    def __add__(self, other: "Frac") -> "Frac":
        if self.den == other.den:
            return Frac.of(self.num + other.num, self.den)
        return Frac.of(self.num * other.den + other.num * self.den, self.den * other.den)

    def __sub__(self, other: "Frac") -> "Frac":
        return self + (-other)

    def __neg__(self) -> "Frac":
        return Frac(-self.num, self.den)

    def __mul__(self, other: "Frac") -> "Frac":
        return Frac.of(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "Frac") -> "Frac":
        if other.is_zero():
            raise ZeroDivisionError("division by zero fraction")
        return Frac.of(self.num * other.den, self.den * other.num)


@dataclass(frozen=True)
class AffineEquation:
    """sum(coeff * unknown) + const = 0 with polynomial coefficients."""

    coeffs: tuple  # ((unknown name, Scalar), ...) nonzero entries
    const: Scalar
    provenance: tuple  # (kind, name, index tuple)

    def coeff_map(self) -> dict:
        return dict(self.coeffs)


@dataclass
class SolvedSystem:
    values: dict  # unknown -> (particular Scalar, {param: Scalar})
    free_unknowns: tuple  # unknowns that became parameters, declaration order
    obstructions: tuple  # (Scalar, provenance) residuals, neither 0 nor constant
    nonzero_constants: tuple  # (Fraction, provenance) contradictions
    assumptions: tuple  # Scalars assumed nonzero during elimination


class _Row:
    __slots__ = ("coeffs", "const", "provenance")

    def __init__(self, coeffs: dict, const: Frac, provenance):
        self.coeffs = coeffs
        self.const = const
        self.provenance = provenance

    def entry(self, col: str) -> Frac:
        return self.coeffs.get(col, Frac(ZERO, ONE))


def _reduce_mod_atom(e: Scalar, atom) -> Optional[Scalar]:
    """Reduce a scalar modulo a single pivot atom (and the trig relation)."""
    reduced = substitute_atoms(e, {atom: ZERO})
    if isinstance(atom, TrigAtom) and atom.kind == "sin":
        # sin(u) = 0 forces cos(u)^2 = 1.
        partner = TrigAtom("cos", atom.arg)
        changed = True
        guard = 0
        while changed and guard < 64:
            guard += 1
            changed = False
            acc: dict = {}
            for mono, q in reduced.terms:
                new = []
                for a, exp in mono:
                    if a == partner and exp >= 2:
                        exp = exp % 2
                        changed = True
                    if exp:
                        new.append((a, exp))
                key = tuple(sorted(new, key=lambda kv: kv[0].sort_key()))
                acc[key] = acc.get(key, Fraction(0)) + q
            reduced = _scalar_from_map(acc)
    return reduced


def _scalar_from_map(acc: dict) -> Scalar:
    total = ZERO
    for mono, q in acc.items():
        if q == 0:
            continue
        part = Scalar.rational(q)
        for atom, exp in mono:
            part = part * (_atom_scalar(atom) ** exp)
        total = total + part
    return total


def _atom_scalar(atom) -> Scalar:
    return Scalar._from_map({((atom, 1),): Fraction(1)})


def _single_atom_of(pivot: Scalar):
    """The atom if pivot is (rational * atom^k), else None."""
    if len(pivot.terms) != 1:
        return None
    mono, _ = pivot.terms[0]
    if len(mono) != 1:
        return None
    return mono[0][0]


def solve_affine_system(
    equations: Sequence[AffineEquation], unknowns: Sequence[str]
) -> SolvedSystem:
    unknowns = list(unknowns)
    order = {u: i for i, u in enumerate(unknowns)}
    rows = []
    for eq in equations:
        coeffs = {
            u: Frac.of(c) for u, c in eq.coeffs if not c.is_zero() and u in order
        }
        rows.append(_Row(coeffs, Frac.of(eq.const), eq.provenance))

    assumptions: list = []
    pivots: dict = {}  # col -> row index
    pivot_rows: set = set()

    def record_assumption(value: Scalar):
        prim = primitive_part(value)
        if prim.is_rational_const():
            return
        if all(not (prim - seen).is_zero() for seen in assumptions):
            assumptions.append(prim)

    while True:
        best = None
        best_rank = None
        for col in unknowns:
            if col in pivots:
                continue
            for ridx, row in enumerate(rows):
                if ridx in pivot_rows:
                    continue
                entry = row.coeffs.get(col)
                if entry is None or entry.is_zero():
                    continue
                rank = (0 if entry.is_rational_const() else 1, order[col], ridx)
                if best_rank is None or rank < best_rank:
                    best_rank = rank
                    best = (col, ridx)
        if best is None:
            break
        col, ridx = best
        row = rows[ridx]
        pivot = row.coeffs[col]
        if not pivot.is_rational_const():
            record_assumption(pivot.num)
        pivots[col] = ridx
        pivot_rows.add(ridx)
        # Normalize the pivot row, then eliminate the column everywhere else.
        inv = Frac(ONE, ONE) / pivot
        row.coeffs = {u: v * inv for u, v in row.coeffs.items() if not v.is_zero()}
        row.const = row.const * inv
        for other_idx, other in enumerate(rows):
            if other_idx == ridx:
                continue
            factor = other.coeffs.get(col)
            if factor is None or factor.is_zero():
                continue
            for u, v in row.coeffs.items():
                updated = other.entry(u) - factor * v
                if updated.is_zero():
                    other.coeffs.pop(u, None)
                else:
                    other.coeffs[u] = updated
            other.const = other.const - factor * row.const
            other.coeffs.pop(col, None)

    free = tuple(u for u in unknowns if u not in pivots)

    obstructions: list = []
    nonzero_constants: list = []
    for ridx, row in enumerate(rows):
        if ridx in pivot_rows:
            continue
        if any(not v.is_zero() for v in row.coeffs.values()):
            raise AssertionError("non-pivot row still mentions unknowns")
        if row.const.is_zero():
            continue
        residual = row.const.num  # denominator nonzero by assumption
        const = residual.constant_value()
        if const is not None:
            nonzero_constants.append((const, row.provenance))
        else:
            prim = primitive_part(residual)
            if all(not (prim - seen).is_zero() for seen, _ in obstructions):
                obstructions.append((prim, row.provenance))

    # Solved rows in scalar form: A * xi_p + sum B_f * xi_f + C = 0.
    solved_rows = []
    for col, ridx in sorted(pivots.items(), key=lambda kv: order[kv[0]]):
        row = rows[ridx]
        dens = [ONE]
        for u, v in row.coeffs.items():
            if u != col:
                dens.append(v.den)
        dens.append(row.const.den)
        lcd = ONE
        seen: list = []
        for d in dens:
            if d == ONE:
                continue
            if all(not (d - s).is_zero() for s in seen):
                seen.append(d)
                lcd = lcd * d
        a_p = lcd  # pivot entry was normalized to 1 before clearing
        b = {}
        for u, v in row.coeffs.items():
            if u == col:
                continue
            cleared = v * Frac.of(lcd)
            if not cleared.is_polynomial():
                raise AssertionError("row clearing failed")
            if not cleared.num.is_zero():
                b[u] = cleared.num
        c_cleared = row.const * Frac.of(lcd)
        if not c_cleared.is_polynomial():
            raise AssertionError("row clearing failed")
        solved_rows.append((col, a_p, b, c_cleared.num))

    shifts = {f: ZERO for f in free}
    _repair_particulars(solved_rows, shifts, free)

    values: dict = {}
    for f in free:
        kernel = {f: ONE}
        values[f] = (shifts[f], kernel)
    for col, a_p, b, c0 in solved_rows:
        numerator = c0
        for f, coeff in b.items():
            if not shifts[f].is_zero():
                numerator = numerator + coeff * shifts[f]
        particular = divide_exact(-numerator, a_p)
        if particular is None:
            raise NonPolynomialSolution(
                f"particular solution for {col} is not polynomial "
                f"(denominator {a_p})"
            )
        values[col] = (particular, {})

    # Kernel vectors per free unknown, denominators cleared, content removed.
    for f in free:
        vector = {f: Frac.of(ONE)}
        for col, a_p, b, _ in solved_rows:
            coeff = b.get(f)
            if coeff is not None:
                vector[col] = Frac.of(-coeff, a_p)
        lcd = ONE
        seen = []
        for v in vector.values():
            d = v.den
            if d == ONE:
                continue
            if all(not (d - s).is_zero() for s in seen):
                seen.append(d)
                lcd = lcd * d
        cleared: dict = {}
        for u, v in vector.items():
            scaled = v * Frac.of(lcd)
            if not scaled.is_polynomial():
                raise NonPolynomialSolution(f"kernel vector for {f} kept a denominator")
            cleared[u] = scaled.num
        contents = [c for c in (_content(s) for s in cleared.values() if not s.is_zero())]
        if contents:
            common = contents[0]
            for c in contents[1:]:
                num = _gcd(common.numerator, c.numerator)
                den = common.denominator * c.denominator // _gcd(
                    common.denominator, c.denominator
                )
                common = Fraction(num, den)
            if common != 1:
                inv = Scalar.rational(Fraction(1, 1) / common)
                cleared = {u: s * inv for u, s in cleared.items()}
        for u, s in cleared.items():
            if s.is_zero():
                continue
            particular, kernel = values[u]
            kernel = dict(kernel)
            kernel[f] = s
            values[u] = (particular, kernel)
        # Parameter direction on the free unknown itself.
        particular, kernel = values[f]
        values[f] = (particular, {f: cleared[f]})

    return SolvedSystem(
        values=values,
        free_unknowns=free,
        obstructions=tuple(obstructions),
        nonzero_constants=tuple(nonzero_constants),
        assumptions=tuple(assumptions),
    )


def _repair_particulars(solved_rows, shifts: dict, free: Sequence[str]) -> None:
    """Shift free parameters until every particular solution divides exactly.

    Shifting parameter f by a scalar delta replaces the origin of the affine
    solution set; validity does not depend on delta.  Candidates come from
    exact division and from trig-pair inverses modulo the pivot.
    """

    def numerator_of(row):
        _, _, b, c0 = row
        total = c0
        for f, coeff in b.items():
            if not shifts[f].is_zero():
                total = total + coeff * shifts[f]
        return total

    guard = 0
    while True:
        guard += 1
        if guard > 8 * (len(solved_rows) + 1):
            raise NonPolynomialSolution("parameter-shift repair did not converge")
        bad = None
        for row in solved_rows:
            if divide_exact(-numerator_of(row), row[1]) is None:
                bad = row
                break
        if bad is None:
            return
        col, a_p, b, _ = bad
        n = numerator_of(bad)
        fixed = False
        for f in free:
            coeff = b.get(f)
            if coeff is None or coeff.is_zero():
                continue
            delta = divide_exact(-n, coeff)
            if delta is not None:
                shifts[f] = shifts[f] + delta
                fixed = True
                break
            if trig_rewrite_enabled():
                atom = _single_atom_of(a_p)
                if atom is not None:
                    square = _reduce_mod_atom(coeff * coeff, atom)
                    rho = square.constant_value() if square is not None else None
                    if rho:
                        delta = (-n * coeff) / Scalar.rational(rho)
                        shifts[f] = shifts[f] + delta
                        fixed = True
                        break
        if not fixed:
            raise NonPolynomialSolution(
                f"cannot make the solved value for {col} polynomial"
            )
