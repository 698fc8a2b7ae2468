"""Hypothesis strategies for terms and points."""

from fractions import Fraction

from hypothesis import strategies as st

from regulus.terms import Const, Var, add, apply_basic, mul, npow

rationals = st.fractions(
    min_value=Fraction(-4), max_value=Fraction(4), max_denominator=8)

small_naturals = st.integers(min_value=0, max_value=3)


def variables(n: int):
    return st.integers(min_value=1, max_value=n).map(Var)


def polynomial_terms(n: int, max_leaves: int = 8):
    """Random polynomial terms in at most n variables."""
    leaves = st.one_of(rationals.map(Const), variables(n))

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: add(*ab)),
            st.tuples(children, children).map(lambda ab: mul(*ab)),
            st.tuples(children, st.integers(min_value=0, max_value=3))
            .map(lambda ae: npow(ae[0], ae[1])),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def smooth_terms(n: int, max_leaves: int = 6):
    """Polynomials plus occasional exp wrappers, kept shallow so evaluation
    stays in floating range on [-1, 1]^n."""
    leaves = st.one_of(rationals.map(Const), variables(n))

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: add(*ab)),
            st.tuples(children, children).map(lambda ab: mul(*ab)),
            st.tuples(children, st.integers(min_value=0, max_value=2))
            .map(lambda ae: npow(ae[0], ae[1])),
            children.map(lambda c: apply_basic("exp", c)),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def rational_points(n: int):
    return st.tuples(*(rationals for _ in range(n)))


def float_points(n: int, half_width: float = 1.0):
    coord = st.floats(min_value=-half_width, max_value=half_width,
                      allow_nan=False, allow_infinity=False)
    return st.tuples(*(coord for _ in range(n)))
