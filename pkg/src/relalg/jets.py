"""Coordinate jet spaces and solved-form PDEs as relative algebroids.

A chart J^k(R^n, R^m) promotes derivatives to coordinates u_I for sorted
multi-indices I.  Total differentiation makes the order-k coordinates a
fiber level over the rest, and a PDE in solved (graph) form is imported by
substituting its rules into that structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Optional, Sequence

from .algebroid import RelAlgebroid, VariableLevels
from .forms import Form, Frame
from .scalar import Scalar, diff, is_zero, normalize, substitute

__all__ = [
    "JetChart",
    "SolvedPDE",
    "PdeInconsistency",
    "total_derivative_algebroid",
    "pde_algebroid",
    "pde_prolong_oracle",
]


class PdeInconsistency(ValueError):
    """Mixed total derivatives of the rules disagree."""

    def __init__(self, coordinate: str, residual: Scalar):
        self.coordinate = coordinate
        self.residual = residual
        super().__init__(
            f"prolongation is inconsistent at {coordinate}: residual {residual}"
        )


@dataclass(frozen=True)
class JetChart:
    independent: tuple
    dependent: tuple
    order: int

    def __init__(self, independent: Sequence[str], dependent: Sequence[str], order: int):
        independent = tuple(independent)
        dependent = tuple(dependent)
        if order < 0:
            raise ValueError("order must be nonnegative")
        if set(independent) & set(dependent):
            raise ValueError("independent and dependent names overlap")
        object.__setattr__(self, "independent", independent)
        object.__setattr__(self, "dependent", dependent)
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return len(self.independent)

    @property
    def m(self) -> int:
        return len(self.dependent)

    def multi_indices(self, length: int):
        """Sorted multi-indices of the given length over 1..n."""
        return list(combinations_with_replacement(range(1, self.n + 1), length))

    def coord_name(self, dependent: str, index: tuple) -> str:
        letters = "".join(self.independent[i - 1] for i in index)
        return dependent if not index else f"{dependent}_{letters}"

    def derivative_coordinates(self, upto: Optional[int] = None):
        """(name, dependent, index) triples for 0 <= |index| <= upto."""
        upto = self.order if upto is None else upto
        out = []
        for length in range(0, upto + 1):
            for dep in self.dependent:
                for index in self.multi_indices(length):
                    out.append((self.coord_name(dep, index), dep, index))
        return out

    def coordinate_count(self) -> int:
        """Derivative coordinates only; matches m * C(n + k, k)."""
        return self.m * comb(self.n + self.order, self.order)

    def bump(self, index: tuple, direction: int) -> tuple:
        return tuple(sorted(index + (direction,)))


@dataclass(frozen=True)
class SolvedPDE:
    """Rules assigning some top-order coordinates as functions of the rest."""

    chart: JetChart
    rules: tuple  # (coordinate name, Scalar rhs)

    def __init__(self, chart: JetChart, rules):
        rules = tuple((str(name), rhs) for name, rhs in rules)
        top = {
            chart.coord_name(dep, idx)
            for dep in chart.dependent
            for idx in chart.multi_indices(chart.order)
        }
        assigned = [name for name, _ in rules]
        if len(set(assigned)) != len(assigned):
            raise ValueError("a coordinate is assigned twice")
        for name, rhs in rules:
            if name not in top:
                raise ValueError(f"{name} is not a top-order coordinate")
            mentioned = rhs.free_vars() & set(assigned)
            if mentioned:
                raise ValueError(
                    f"rule for {name} mentions assigned coordinate(s) {sorted(mentioned)}"
                )
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "rules", rules)

    def rule_map(self) -> dict:
        return dict(self.rules)


def total_derivative_algebroid(chart: JetChart, opaque=()) -> RelAlgebroid:
    """The horizontal-derivative structure on J^k: D u_I = u_{I+a} dx^a.

    Frame covectors are named d<x> after the independent variables; they are
    closed.  Coordinates of order below k are base variables, order-k
    coordinates form the fiber level.
    """
    if chart.order < 1:
        raise ValueError("total derivatives need order at least 1")
    frame = Frame(tuple("d" + x for x in chart.independent))
    base = list(chart.independent)
    fiber = []
    dbase = []
    for x_pos, x in enumerate(chart.independent, start=1):
        dbase.append((x, Form.basis(frame, (x_pos,))))
    for name, dep, index in chart.derivative_coordinates():
        if len(index) == chart.order:
            fiber.append(name)
            continue
        base.append(name)
        entries = {}
        for a in range(1, chart.n + 1):
            entries[(a,)] = Scalar.var(chart.coord_name(dep, chart.bump(index, a)))
        dbase.append((name, Form(frame, 1, entries)))
    levels = VariableLevels(base, fiber, opaque)
    return RelAlgebroid(frame, levels, [Form.zero(frame, 2)] * chart.n, dbase)


def pde_algebroid(pde: SolvedPDE, opaque=()) -> RelAlgebroid:
    """Substitute the solved rules into the total-derivative structure.

    Assigned top-order coordinates are eliminated; the unassigned ones stay
    as the fiber level.
    """
    total = total_derivative_algebroid(pde.chart, opaque)
    rules = pde.rule_map()
    fiber = tuple(v for v in total.levels.fiber if v not in rules)
    levels = VariableLevels(total.levels.base, fiber, total.levels.opaque)
    dbase = [
        (var, form.map_coeffs(lambda c: substitute(c, rules)))
        for var, form in total.dbase
    ]
    return RelAlgebroid(total.frame, levels, total.dtheta, dbase)


def _total_derivative(pde: SolvedPDE, value: Scalar, direction: int) -> Scalar:
    """Total derivative D_a of a scalar in chart coordinates.

    Chain rule over every chart coordinate; order-k coordinates bump into
    order-(k+1) ones, with assigned coordinates replaced by their rules.
    """
    chart = pde.chart
    rules = pde.rule_map()
    total = diff(value, chart.independent[direction - 1])
    for name, dep, index in chart.derivative_coordinates():
        partial = diff(value, name)
        if partial.is_zero():
            continue
        bump_name = chart.coord_name(dep, chart.bump(index, direction))
        if bump_name in rules:
            bumped = rules[bump_name]
        else:
            bumped = Scalar.var(bump_name)
        total = total + partial * bumped
    return normalize(total)


def pde_prolong_oracle(pde: SolvedPDE) -> SolvedPDE:
    """Classical prolongation: totally differentiate each rule once.

    Produces the order-(k+1) solved system; raises PdeInconsistency when two
    differentiation paths assign different values to the same coordinate.
    """
    chart = pde.chart
    new_chart = JetChart(chart.independent, chart.dependent, chart.order + 1)
    produced: dict = {}
    name_info = {
        chart.coord_name(dep, idx): (dep, idx)
        for dep in chart.dependent
        for idx in chart.multi_indices(chart.order)
    }
    for name, rhs in pde.rules:
        dep, index = name_info[name]
        for a in range(1, chart.n + 1):
            target = chart.coord_name(dep, chart.bump(index, a))
            value = _total_derivative(pde, rhs, a)
            if target in produced:
                residual = normalize(produced[target] - value)
                if not residual.is_zero():
                    raise PdeInconsistency(target, residual)
            else:
                produced[target] = value
    # New rules may reference each other (a D_y pass bumps u_x into u_xy);
    # reduce to a solved form by substituting until no produced name remains.
    guard = 0
    while True:
        guard += 1
        if guard > len(produced) + 2:
            raise PdeInconsistency("<cycle>", Scalar.rational(0))
        dirty = False
        for target in sorted(produced):
            value = produced[target]
            hits = value.free_vars() & set(produced)
            if hits:
                produced[target] = normalize(
                    substitute(value, {h: produced[h] for h in hits})
                )
                dirty = True
        if not dirty:
            break
    ordered = sorted(produced.items(), key=lambda kv: kv[0])
    return SolvedPDE(new_chart, tuple(ordered))
