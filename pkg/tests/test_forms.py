import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relalg import Form, Frame, Scalar, coeff, form_eq, wedge

frame3 = Frame(["theta1", "theta2", "theta3"])
phi = Scalar.var("phi")


def basis(*indices):
    return Form.basis(frame3, indices)


def test_wedge_antisymmetry():
    assert coeff(wedge(basis(1), basis(2)), (1, 2)) == Scalar.rational(1)
    assert coeff(wedge(basis(2), basis(1)), (1, 2)) == Scalar.rational(-1)


def test_wedge_self_annihilates():
    assert wedge(basis(1), basis(1)).is_zero()


def test_wedge_gradient_direction():
    dK = basis(1).scale(Scalar.cos(phi)) + basis(2).scale(Scalar.sin(phi))
    result = wedge(dK, basis(1))
    assert result == Form(frame3, 2, {(1, 2): -Scalar.sin(phi)})


def test_add_cancels():
    w = wedge(basis(1), basis(2))
    assert (w + (-w)).is_zero()


def test_coeff_reads_scalar():
    K = Scalar.var("K")
    form = Form(frame3, 2, {(1, 2): K})
    assert coeff(form, (1, 2)) == K
    assert coeff(form, (2, 1)) == -K
    assert coeff(form, (1, 3)).is_zero()


def test_form_eq_orientation():
    a = wedge(basis(3), basis(2))
    b = -wedge(basis(2), basis(3))
    assert form_eq(a, b)


def test_add_degree_mismatch_raises():
    with pytest.raises(ValueError):
        _ = basis(1) + wedge(basis(1), basis(2))


def test_add_frame_mismatch_raises():
    other = Frame(["e1", "e2"])
    with pytest.raises(ValueError):
        _ = basis(1) + Form.basis(other, (1,))


def test_unsorted_indices_normalize_with_sign():
    assert Form(frame3, 2, {(3, 1): Scalar.rational(1)}) == Form(
        frame3, 2, {(1, 3): Scalar.rational(-1)}
    )


def test_repeated_index_is_zero():
    assert Form(frame3, 2, {(1, 1): Scalar.var("x")}).is_zero()


# -- randomized algebra properties ---------------------------------------------

_coeffs = st.one_of(
    st.integers(-2, 2).map(Scalar.rational),
    st.sampled_from(["x", "K"]).map(Scalar.var),
)


def _forms(degree):
    from itertools import combinations

    tuples = list(combinations(range(1, 4), degree))
    return st.lists(
        st.tuples(st.sampled_from(tuples), _coeffs), min_size=0, max_size=3
    ).map(lambda pairs: _assemble(degree, pairs))


def _assemble(degree, pairs):
    form = Form.zero(frame3, degree)
    for indices, value in pairs:
        form = form + Form(frame3, degree, {indices: value})
    return form


_degrees = st.integers(0, 2)


@settings(deadline=None)
@given(_degrees.flatmap(lambda d: st.tuples(st.just(d), _forms(d))), _degrees.flatmap(lambda d: st.tuples(st.just(d), _forms(d))))
def test_wedge_graded_commutative(a_pair, b_pair):
    da, a = a_pair
    db, b = b_pair
    lhs = wedge(a, b)
    rhs = wedge(b, a)
    if (da * db) % 2:
        rhs = -rhs
    assert form_eq(lhs, rhs)


@settings(deadline=None)
@given(_forms(1), _forms(1), _forms(1))
def test_wedge_associative(a, b, c):
    assert form_eq(wedge(wedge(a, b), c), wedge(a, wedge(b, c)))


@settings(deadline=None)
@given(_forms(1), _forms(1), _forms(1))
def test_wedge_distributes(a, b, c):
    assert form_eq(wedge(a + b, c), wedge(a, c) + wedge(b, c))


@settings(deadline=None)
@given(_forms(2), _forms(2))
def test_high_degree_vanishes(a, b):
    assert wedge(a, b).is_zero()
