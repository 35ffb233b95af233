"""Exact scalar arithmetic with a canonical normal form.

Scalars are multivariate polynomials over the rationals whose atoms are
variables, opaque function applications (with formal derivative orders),
and the built-ins sin/cos.  Every operation returns a canonical value, so
equality-to-zero is a structural check.

Division is only defined by nonzero rational constants; rational-function
quotients live in the linear solver, not here.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence, Union

__all__ = [
    "Atom",
    "Var",
    "TrigAtom",
    "FuncAtom",
    "Scalar",
    "ScalarLike",
    "normalize",
    "diff",
    "is_zero",
    "substitute",
    "evaluate",
    "divide_exact",
    "trig_rewrite",
    "trig_rewrite_enabled",
    "format_scalar",
    "GENERATED_SEP",
    "generated_name",
    "display_name",
]

# Opt-in rewrite sin(u)^2 -> 1 - cos(u)^2.  Context-local so concurrent runs
# with different settings cannot interfere.
_TRIG_REWRITE: ContextVar[bool] = ContextVar("relalg_trig_rewrite", default=False)

# Generated variable names (solver unknowns) carry this separator, which the
# surface syntax cannot produce, so they never collide with declared names.
GENERATED_SEP = "@"


def trig_rewrite_enabled() -> bool:
    return _TRIG_REWRITE.get()


@contextmanager
def trig_rewrite(enabled: bool = True) -> Iterator[None]:
    token = _TRIG_REWRITE.set(enabled)
    try:
        yield
    finally:
        _TRIG_REWRITE.reset(token)


def generated_name(base: str, index: int) -> str:
    return f"{base}{GENERATED_SEP}{index}"


def display_name(name: str) -> str:
    """Human form of a possibly generated name: ``z@1`` prints as ``z_1``."""
    return name.replace(GENERATED_SEP, "_")


class Atom:
    """Base of the atom hierarchy; atoms are the indeterminates of Scalars."""

    def sort_key(self):
        raise NotImplementedError

    def free_vars(self) -> frozenset:
        raise NotImplementedError


@dataclass(frozen=True)
class Var(Atom):
    name: str

    def sort_key(self):
        return (self.name, 0, (), ())

    def free_vars(self):
        return frozenset((self.name,))

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True)
class TrigAtom(Atom):
    kind: str  # "sin" | "cos"
    arg: "Scalar"

    def sort_key(self):
        return (self.kind, 1, (), (self.arg.sort_key(),))

    def free_vars(self):
        return self.arg.free_vars()

    def __repr__(self):
        return f"{self.kind}({self.arg})"


@dataclass(frozen=True)
class FuncAtom(Atom):
    """Opaque application ``f^(orders)(args)``.

    ``orders`` tracks one formal derivative order per argument slot; for the
    unary case this is the usual prime count.
    """

    name: str
    orders: tuple
    args: tuple

    def sort_key(self):
        return (self.name, 2, self.orders, tuple(a.sort_key() for a in self.args))

    def free_vars(self):
        out: frozenset = frozenset()
        for a in self.args:
            out |= a.free_vars()
        return out

    def __repr__(self):
        return format_atom(self)


# A monomial is a tuple of (atom, exponent) pairs, sorted by atom key,
# exponents >= 1.  The empty tuple is the constant monomial.
Mono = tuple

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    merged = {}
    for atom, exp in a:
        merged[atom] = merged.get(atom, 0) + exp
    for atom, exp in b:
        merged[atom] = merged.get(atom, 0) + exp
    return tuple(sorted(merged.items(), key=lambda kv: kv[0].sort_key()))


def _mono_degree(m: Mono) -> int:
    return sum(exp for _, exp in m)


def _mono_key(m: Mono):
    return tuple((atom.sort_key(), exp) for atom, exp in m)


def _mono_lex_cmp(a: Mono, b: Mono) -> int:
    """Graded lexicographic comparison with atom-key variable order."""
    da, db = _mono_degree(a), _mono_degree(b)
    if da != db:
        return -1 if da < db else 1
    ia = {atom.sort_key(): exp for atom, exp in a}
    ib = {atom.sort_key(): exp for atom, exp in b}
    for key in sorted(set(ia) | set(ib)):
        ea, eb = ia.get(key, 0), ib.get(key, 0)
        if ea != eb:
            # Higher exponent on the earlier atom wins.
            return 1 if ea > eb else -1
    return 0


def _mono_divides(den: Mono, num: Mono) -> bool:
    have = {atom: exp for atom, exp in num}
    return all(have.get(atom, 0) >= exp for atom, exp in den)


def _mono_div(num: Mono, den: Mono) -> Mono:
    have = {atom: exp for atom, exp in num}
    for atom, exp in den:
        have[atom] -= exp
    return tuple(
        sorted(((a, e) for a, e in have.items() if e), key=lambda kv: kv[0].sort_key())
    )


ScalarLike = Union["Scalar", int, Fraction]


class Scalar:
    """Immutable canonical polynomial; use the arithmetic operators."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, _terms: tuple = ()):  # internal; use the constructors
        object.__setattr__(self, "_terms", _terms)
        object.__setattr__(self, "_hash", None)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def rational(value) -> "Scalar":
        q = Fraction(value)
        if q == 0:
            return ZERO
        return Scalar((((), q),))

    @staticmethod
    def var(name: str) -> "Scalar":
        return Scalar._from_map({((Var(name), 1),): _ONE})

    @staticmethod
    def func(name: str, args: Sequence[ScalarLike], orders: Sequence[int] = None) -> "Scalar":
        sargs = tuple(_coerce(a) for a in args)
        if orders is None:
            sorders = (0,) * len(sargs)
        else:
            sorders = tuple(int(d) for d in orders)
            if len(sorders) != len(sargs):
                raise ValueError("one derivative order per argument expected")
        if any(d < 0 for d in sorders):
            raise ValueError("derivative orders must be nonnegative")
        atom = FuncAtom(name, sorders, sargs)
        return Scalar._from_map({((atom, 1),): _ONE})

    @staticmethod
    def sin(arg: ScalarLike) -> "Scalar":
        return Scalar._from_map({((TrigAtom("sin", _coerce(arg)), 1),): _ONE})

    @staticmethod
    def cos(arg: ScalarLike) -> "Scalar":
        return Scalar._from_map({((TrigAtom("cos", _coerce(arg)), 1),): _ONE})

    @staticmethod
    def _from_map(terms: Mapping) -> "Scalar":
        if trig_rewrite_enabled():
            terms = _reduce_trig(terms)
        cleaned = [(m, q) for m, q in terms.items() if q != 0]
        cleaned.sort(key=lambda t: _mono_key(t[0]))
        return Scalar(tuple(cleaned))

    # -- basic structure ----------------------------------------------------

    @property
    def terms(self) -> tuple:
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def constant_value(self):
        """The Fraction value if this is a rational constant, else None."""
        if not self._terms:
            return _ZERO
        if len(self._terms) == 1 and self._terms[0][0] == ():
            return self._terms[0][1]
        return None

    def is_rational_const(self) -> bool:
        return self.constant_value() is not None

    def free_vars(self) -> frozenset:
        out: frozenset = frozenset()
        for mono, _ in self._terms:
            for atom, _exp in mono:
                out |= atom.free_vars()
        return out

    def atoms(self):
        seen = []
        found = set()
        for mono, _ in self._terms:
            for atom, _exp in mono:
                if atom not in found:
                    found.add(atom)
                    seen.append(atom)
        return seen

    def sort_key(self):
        return tuple(
            (_mono_key(m), (q.numerator, q.denominator)) for m, q in self._terms
        )

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        acc = dict(self._terms)
        for mono, q in other._terms:
            val = acc.get(mono, _ZERO) + q
            if val == 0:
                acc.pop(mono, None)
            else:
                acc[mono] = val
        return Scalar._from_map(acc)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(tuple((m, -q) for m, q in self._terms))

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        acc: dict = {}
        for m1, q1 in self._terms:
            for m2, q2 in other._terms:
                mono = _mono_mul(m1, m2)
                val = acc.get(mono, _ZERO) + q1 * q2
                if val == 0:
                    acc.pop(mono, None)
                else:
                    acc[mono] = val
        return Scalar._from_map(acc)

    __rmul__ = __mul__

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            raise TypeError("integer exponent expected")
        if exponent < 0:
            const = self.constant_value()
            if const is None or const == 0:
                raise ValueError("negative powers only of nonzero rational constants")
            return Scalar.rational(const ** exponent)
        result = ONE
        base = self
        n = exponent
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __truediv__(self, other):
        other = _coerce(other)
        const = other.constant_value()
        if const is None or const == 0:
            raise ValueError("division only by nonzero rational constants")
        return self * Scalar.rational(Fraction(1, 1) / const)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = _coerce(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self._terms)
            object.__setattr__(self, "_hash", h)
        return h

    def __str__(self):
        return format_scalar(self)

    def __repr__(self):
        return f"Scalar({format_scalar(self)})"


def _coerce(value: ScalarLike) -> Scalar:
    if isinstance(value, Scalar):
        return value
    if isinstance(value, (int, Fraction)):
        return Scalar.rational(value)
    raise TypeError(f"cannot coerce {type(value).__name__} to Scalar")


ZERO = Scalar()
ONE = Scalar((((), _ONE),))


def _reduce_trig(terms: Mapping) -> dict:
    """Rewrite sin(u)^k for k >= 2 via sin^2 = 1 - cos^2, fixpoint."""
    out: dict = {}
    work = list(terms.items())
    while work:
        mono, q = work.pop()
        if q == 0:
            continue
        target = None
        for atom, exp in mono:
            if isinstance(atom, TrigAtom) and atom.kind == "sin" and exp >= 2:
                target = (atom, exp)
                break
        if target is None:
            val = out.get(mono, _ZERO) + q
            if val == 0:
                out.pop(mono, None)
            else:
                out[mono] = val
            continue
        atom, exp = target
        rest = tuple((a, e) for a, e in mono if a is not atom and a != atom)
        if exp % 2:
            rest = _mono_mul(rest, ((atom, 1),))
        half = exp // 2
        cos_sq = ((TrigAtom("cos", atom.arg), 2),)
        # (1 - cos^2)^half expanded binomially.
        for j in range(half + 1):
            coeff = q * Fraction(math.comb(half, j)) * (-1) ** j
            mono_j = rest
            for _ in range(j):
                mono_j = _mono_mul(mono_j, cos_sq)
            work.append((mono_j, coeff))
    return out


def normalize(e: ScalarLike) -> Scalar:
    """Re-canonicalize under the current trig-rewrite setting; idempotent."""
    e = _coerce(e)
    acc: dict = {}
    for mono, q in e._terms:
        acc[mono] = acc.get(mono, _ZERO) + q
    return Scalar._from_map(acc)


def is_zero(e: ScalarLike) -> bool:
    return normalize(e).is_zero()


def _atom_diff(atom: Atom, v: str) -> Scalar:
    if isinstance(atom, Var):
        return ONE if atom.name == v else ZERO
    if isinstance(atom, TrigAtom):
        inner = diff(atom.arg, v)
        if inner.is_zero():
            return ZERO
        if atom.kind == "sin":
            outer = Scalar._from_map({((TrigAtom("cos", atom.arg), 1),): _ONE})
        else:
            outer = -Scalar._from_map({((TrigAtom("sin", atom.arg), 1),): _ONE})
        return outer * inner
    if isinstance(atom, FuncAtom):
        total = ZERO
        for slot, arg in enumerate(atom.args):
            inner = diff(arg, v)
            if inner.is_zero():
                continue
            orders = tuple(
                d + 1 if i == slot else d for i, d in enumerate(atom.orders)
            )
            bumped = Scalar._from_map({((FuncAtom(atom.name, orders, atom.args), 1),): _ONE})
            total = total + bumped * inner
        return total
    raise TypeError(f"unknown atom {atom!r}")


def diff(e: ScalarLike, v: str) -> Scalar:
    """Formal partial derivative with respect to the variable named ``v``."""
    e = _coerce(e)
    total = ZERO
    for mono, q in e._terms:
        for idx, (atom, exp) in enumerate(mono):
            datom = _atom_diff(atom, v)
            if datom.is_zero():
                continue
            rest = list(mono)
            if exp == 1:
                del rest[idx]
            else:
                rest[idx] = (atom, exp - 1)
            part = Scalar._from_map({tuple(rest): q * exp})
            total = total + part * datom
    return total


def _sub_atom(atom: Atom, bindings: Mapping[str, Scalar]) -> Scalar:
    if isinstance(atom, Var):
        if atom.name in bindings:
            return _coerce(bindings[atom.name])
        return Scalar._from_map({((atom, 1),): _ONE})
    if isinstance(atom, TrigAtom):
        new_arg = substitute(atom.arg, bindings)
        return Scalar._from_map({((TrigAtom(atom.kind, new_arg), 1),): _ONE})
    if isinstance(atom, FuncAtom):
        new_args = tuple(substitute(a, bindings) for a in atom.args)
        return Scalar._from_map(
            {((FuncAtom(atom.name, atom.orders, new_args), 1),): _ONE}
        )
    raise TypeError(f"unknown atom {atom!r}")


def substitute(e: ScalarLike, bindings: Mapping[str, ScalarLike]) -> Scalar:
    """Simultaneous substitution of variables, then normalization."""
    e = _coerce(e)
    clean = {k: _coerce(v) for k, v in bindings.items()}
    total = ZERO
    for mono, q in e._terms:
        part = Scalar.rational(q)
        for atom, exp in mono:
            part = part * (_sub_atom(atom, clean) ** exp)
        total = total + part
    return total


def substitute_atoms(e: ScalarLike, replacements: Mapping[Atom, Scalar]) -> Scalar:
    """Replace whole atoms (recursing into arguments), then normalize."""
    e = _coerce(e)
    total = ZERO
    for mono, q in e._terms:
        part = Scalar.rational(q)
        for atom, exp in mono:
            if atom in replacements:
                repl = replacements[atom]
            elif isinstance(atom, TrigAtom):
                repl = Scalar._from_map(
                    {((TrigAtom(atom.kind, substitute_atoms(atom.arg, replacements)), 1),): _ONE}
                )
            elif isinstance(atom, FuncAtom):
                repl = Scalar._from_map(
                    {(
                        (
                            FuncAtom(
                                atom.name,
                                atom.orders,
                                tuple(substitute_atoms(a, replacements) for a in atom.args),
                            ),
                            1,
                        ),
                    ): _ONE}
                )
            else:
                repl = Scalar._from_map({((atom, 1),): _ONE})
            part = part * (repl ** exp)
        total = total + part
    return total


def evaluate(e: ScalarLike, env: Mapping[str, float]) -> float:
    """Numeric evaluation at a point; opaque function atoms are rejected."""
    e = _coerce(e)
    total = 0.0
    for mono, q in e._terms:
        part = float(q)
        for atom, exp in mono:
            part *= _eval_atom(atom, env) ** exp
        total += part
    return total


def _eval_atom(atom: Atom, env: Mapping[str, float]) -> float:
    if isinstance(atom, Var):
        try:
            return float(env[atom.name])
        except KeyError:
            raise ValueError(f"no value for variable {atom.name}") from None
    if isinstance(atom, TrigAtom):
        inner = evaluate(atom.arg, env)
        return math.sin(inner) if atom.kind == "sin" else math.cos(inner)
    raise ValueError(f"cannot numerically evaluate opaque atom {atom!r}")


# -- exact division ---------------------------------------------------------


def _leading_term(e: Scalar):
    best = None
    for mono, q in e._terms:
        if best is None or _mono_lex_cmp(mono, best[0]) > 0:
            best = (mono, q)
    return best


def divide_exact(num: Scalar, den: Scalar):
    """Exact quotient num/den in the polynomial ring, or None.

    When the trig rewrite is active the division is attempted in the quotient
    ring modulo sin^2 + cos^2 = 1 as well, by splitting along a sin atom of
    the denominator.
    """
    num = _coerce(num)
    den = _coerce(den)
    if den.is_zero():
        return None
    if num.is_zero():
        return ZERO
    const = den.constant_value()
    if const is not None:
        return num / den
    q = _divide_free(num, den)
    if q is not None:
        return q
    if trig_rewrite_enabled():
        return _divide_trig(num, den)
    return None


def _divide_free(num: Scalar, den: Scalar):
    lt_den = _leading_term(den)
    quotient: dict = {}
    rem = num
    steps = 0
    limit = 4 * (len(num._terms) + 1) * (len(den._terms) + 1) + 16
    while not rem.is_zero():
        steps += 1
        if steps > limit:
            return None
        lt_rem = _leading_term(rem)
        if not _mono_divides(lt_den[0], lt_rem[0]):
            return None
        mono = _mono_div(lt_rem[0], lt_den[0])
        coeff = lt_rem[1] / lt_den[1]
        quotient[mono] = quotient.get(mono, _ZERO) + coeff
        rem = rem - Scalar._from_map({mono: coeff}) * den
    return Scalar._from_map(quotient)


def _split_on_atom(e: Scalar, atom: Atom):
    """Write e = lo + hi*atom (atom appearing to first power only)."""
    lo: dict = {}
    hi: dict = {}
    for mono, q in e._terms:
        exp = 0
        rest = []
        for a, k in mono:
            if a == atom:
                exp = k
            else:
                rest.append((a, k))
        if exp == 0:
            lo[tuple(rest)] = lo.get(tuple(rest), _ZERO) + q
        elif exp == 1:
            hi[tuple(rest)] = hi.get(tuple(rest), _ZERO) + q
        else:
            return None
    return Scalar._from_map(lo), Scalar._from_map(hi)


def _divide_trig(num: Scalar, den: Scalar):
    # Pick a sin atom present in the denominator; split both sides over the
    # module basis {1, sin} and solve the 2x2 system over the cos-subring.
    sin_atoms = [
        a for a in den.atoms() if isinstance(a, TrigAtom) and a.kind == "sin"
    ]
    for s in sin_atoms:
        parts_num = _split_on_atom(num, s)
        parts_den = _split_on_atom(den, s)
        if parts_num is None or parts_den is None:
            continue
        n0, n1 = parts_num
        d0, d1 = parts_den
        c = Scalar._from_map({((TrigAtom("cos", s.arg), 1),): _ONE})
        sin_sq = ONE - c * c
        delta = d0 * d0 - d1 * d1 * sin_sq
        if delta.is_zero():
            continue
        q0 = divide_exact(n0 * d0 - n1 * d1 * sin_sq, delta)
        if q0 is None:
            continue
        q1 = divide_exact(n1 * d0 - n0 * d1, delta)
        if q1 is None:
            continue
        s_scalar = Scalar._from_map({((s, 1),): _ONE})
        candidate = q0 + q1 * s_scalar
        if (candidate * den - num).is_zero():
            return candidate
    return None


# -- formatting -------------------------------------------------------------


def format_atom(atom: Atom) -> str:
    if isinstance(atom, Var):
        return display_name(atom.name)
    if isinstance(atom, TrigAtom):
        return f"{atom.kind}({format_scalar(atom.arg)})"
    if isinstance(atom, FuncAtom):
        args = ", ".join(format_scalar(a) for a in atom.args)
        if len(atom.orders) == 1:
            marks = "'" * atom.orders[0]
            return f"{atom.name}{marks}({args})"
        if any(atom.orders):
            marks = "^(" + ",".join(str(d) for d in atom.orders) + ")"
            return f"{atom.name}{marks}({args})"
        return f"{atom.name}({args})"
    raise TypeError(f"unknown atom {atom!r}")


def _format_mono(mono: Mono) -> str:
    factors = []
    for atom, exp in mono:
        base = format_atom(atom)
        factors.append(base if exp == 1 else f"{base}^{exp}")
    return "*".join(factors)


def format_scalar(e: Scalar) -> str:
    if e.is_zero():
        return "0"
    # Constants last reads naturally: iterate high-to-low monomial key.
    pieces = []
    for mono, q in reversed(e._terms):
        mono_str = _format_mono(mono)
        mag = abs(q)
        if not mono_str:
            body = str(mag)
        elif mag == 1:
            body = mono_str
        else:
            body = f"{mag}*{mono_str}"
        pieces.append(("-" if q < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out
