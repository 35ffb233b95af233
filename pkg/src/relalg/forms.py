"""Exterior algebra over a finite coframe.

Forms are degree-homogeneous, stored sparsely as maps from strictly
increasing 1-based index tuples to Scalar coefficients.  Zero coefficients
are pruned after every operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .scalar import Scalar, ScalarLike, ZERO as SZERO, normalize

__all__ = ["Frame", "Form", "wedge", "add", "scale", "coeff", "form_eq"]


@dataclass(frozen=True)
class Frame:
    """An ordered list of covector names; the order is fixed for good."""

    names: tuple

    def __init__(self, names: Sequence[str]):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError("frame covector names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def rank(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        """1-based index of a covector name."""
        return self.names.index(name) + 1

    def name(self, index: int) -> str:
        return self.names[index - 1]


def _merge_sign(left: tuple, right: tuple):
    """Concatenate sorted index tuples; returns (sorted tuple, sign) or None."""
    if set(left) & set(right):
        return None
    merged = list(left)
    sign = 1
    for idx in right:
        pos = len(merged)
        while pos > 0 and merged[pos - 1] > idx:
            pos -= 1
        sign *= (-1) ** (len(merged) - pos)
        merged.insert(pos, idx)
    return tuple(merged), sign


def _sort_indices(indices: Sequence[int]):
    """Sort a tuple of distinct indices, tracking the permutation parity."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return tuple(idx), sign


class Form:
    """A homogeneous exterior form with Scalar coefficients."""

    __slots__ = ("frame", "degree", "_terms")

    def __init__(self, frame: Frame, degree: int, terms: Mapping = ()):
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        self.frame = frame
        self.degree = degree
        acc = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for indices, value in items:
            value = value if isinstance(value, Scalar) else Scalar.rational(value)
            if value.is_zero():
                continue
            sorted_idx = _sort_indices(indices)
            if sorted_idx is None:
                continue
            idx, sign = sorted_idx
            if len(idx) != degree:
                raise ValueError(f"index tuple {indices} has wrong length for degree {degree}")
            if idx and (idx[0] < 1 or idx[-1] > frame.rank):
                raise ValueError(f"index out of range for rank-{frame.rank} frame: {indices}")
            value = value if sign == 1 else -value
            prev = acc.get(idx)
            total = value if prev is None else prev + value
            if total.is_zero():
                acc.pop(idx, None)
            else:
                acc[idx] = total
        self._terms = tuple(sorted(acc.items(), key=lambda kv: kv[0]))

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(frame: Frame, degree: int) -> "Form":
        return Form(frame, degree)

    @staticmethod
    def basis(frame: Frame, indices: Sequence[int]) -> "Form":
        return Form(frame, len(indices), {tuple(indices): Scalar.rational(1)})

    @staticmethod
    def of_scalar(frame: Frame, value: ScalarLike) -> "Form":
        return Form(frame, 0, {(): value})

    # -- structure ----------------------------------------------------------

    @property
    def terms(self) -> tuple:
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def coeff(self, indices: Sequence[int]) -> Scalar:
        sorted_idx = _sort_indices(indices)
        if sorted_idx is None:
            return SZERO
        idx, sign = sorted_idx
        for stored, value in self._terms:
            if stored == idx:
                return value if sign == 1 else -value
        return SZERO

    def map_coeffs(self, fn) -> "Form":
        return Form(self.frame, self.degree, {idx: fn(c) for idx, c in self._terms})

    def free_vars(self) -> frozenset:
        out: frozenset = frozenset()
        for _, c in self._terms:
            out |= c.free_vars()
        return out

    # -- arithmetic ---------------------------------------------------------

    def _check_compat(self, other: "Form"):
        if self.frame != other.frame:
            raise ValueError("forms live over different frames")
        if self.degree != other.degree and self._terms and other._terms:
            raise ValueError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other: "Form") -> "Form":
        self._check_compat(other)
        degree = self.degree if self._terms or not other._terms else other.degree
        acc = dict(self._terms)
        for idx, value in other._terms:
            prev = acc.get(idx)
            total = value if prev is None else prev + value
            if total.is_zero():
                acc.pop(idx, None)
            else:
                acc[idx] = total
        return Form(self.frame, degree, acc)

    def __neg__(self) -> "Form":
        return Form(self.frame, self.degree, {i: -c for i, c in self._terms})

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, s: ScalarLike) -> "Form":
        s = s if isinstance(s, Scalar) else Scalar.rational(s)
        return Form(self.frame, self.degree, {i: s * c for i, c in self._terms})

    def wedge(self, other: "Form") -> "Form":
        if self.frame != other.frame:
            raise ValueError("forms live over different frames")
        acc = {}
        for i1, c1 in self._terms:
            for i2, c2 in other._terms:
                merged = _merge_sign(i1, i2)
                if merged is None:
                    continue
                idx, sign = merged
                value = c1 * c2
                if sign < 0:
                    value = -value
                prev = acc.get(idx)
                total = value if prev is None else prev + value
                if total.is_zero():
                    acc.pop(idx, None)
                else:
                    acc[idx] = total
        return Form(self.frame, self.degree + other.degree, acc)

    def normalized(self) -> "Form":
        """Re-canonicalize coefficients under the ambient trig setting."""
        return self.map_coeffs(normalize)

    def __eq__(self, other):
        if not isinstance(other, Form):
            return NotImplemented
        if self.frame != other.frame:
            return False
        if not self._terms and not other._terms:
            return True
        return self.degree == other.degree and self._terms == other._terms

    def __hash__(self):
        return hash((self.frame, self.degree, self._terms))

    def __str__(self):
        from .report import format_form

        return format_form(self)

    def __repr__(self):
        return f"Form({self.__str__()})"


def wedge(a: Form, b: Form) -> Form:
    return a.wedge(b)


def add(a: Form, b: Form) -> Form:
    return a + b


def scale(s: ScalarLike, a: Form) -> Form:
    return a.scale(s)


def coeff(a: Form, indices: Sequence[int]) -> Scalar:
    return a.coeff(indices)


def form_eq(a: Form, b: Form) -> bool:
    if a.frame != b.frame:
        return False
    if a.is_zero() and b.is_zero():
        return True
    if a.degree != b.degree:
        return False
    return (a - b).is_zero()
