import random
from fractions import Fraction

import pytest

from regulus.acceptance import random_regular_system
from regulus.closure import NotRegularError, augment, lift_point
from regulus.terms import (
    Const, Var, add, apply_basic, evaluate, mul, npow, subtract,
)
from regulus.witness import FunctionSystem, is_regular_at, q_witness

x1, x2 = Var(1), Var(2)


def exp(t):
    return apply_basic("exp", t)


class TestAugment:
    def test_single_coordinate(self):
        system = FunctionSystem(1, (x1,))
        bigger = augment(system)
        assert bigger.dim == 2
        assert bigger.functions == (x1, subtract(x2, 1))
        assert is_regular_at(bigger, (0, 1)).regular

    def test_degenerate_square_has_no_common_zero(self):
        system = FunctionSystem(1, (npow(x1, 2),))
        bigger = augment(system)
        # new function is 4 x2 x1^2 - 1; at x1 = 0 it equals -1
        assert bigger.functions[1] == add(mul(4, x2, npow(x1, 2)), Const(Fraction(-1)))
        assert evaluate(bigger.functions[1], (0, 123)) == -1

    def test_curve(self):
        system = FunctionSystem(2, (subtract(x2, exp(x1)),))
        bigger = augment(system)
        saturator = bigger.functions[1]
        point = (0, 1, Fraction(1, 2))
        assert evaluate(bigger.functions[0], point) == 0
        assert evaluate(saturator, point) == 0
        assert is_regular_at(bigger, point, tol_res=0, tol_reg=0).regular

    def test_too_many_functions_rejected(self):
        system = FunctionSystem(1, (x1, npow(x1, 2)))
        with pytest.raises(Exception):
            augment(system)


class TestLiftPoint:
    def test_coordinates_append_one(self):
        system = FunctionSystem(2, (x1, x2))
        assert lift_point(system, (0, 0)) == (0, 0, Fraction(1))

    def test_curve_appends_half(self):
        system = FunctionSystem(2, (subtract(x2, exp(x1)),))
        lifted = lift_point(system, (0, 1), tol_res=1e-9, tol_reg=1e-6)
        assert lifted == (0, 1, Fraction(1, 2))

    def test_not_regular_refused(self):
        system = FunctionSystem(1, (npow(x1, 2),))
        with pytest.raises(NotRegularError):
            lift_point(system, (Fraction(0),))

    def test_round_trip(self):
        system = FunctionSystem(2, (subtract(x2, exp(x1)),))
        point = (0, 1)
        assert lift_point(system, point, tol_res=1e-9, tol_reg=1e-6)[:-1] \
            == point


class TestCubicWitnessBound:
    def test_random_regular_points_exact(self):
        rng = random.Random(99)
        for _ in range(50):
            system, anchor = random_regular_system(rng)
            q_val = evaluate(q_witness(system), anchor)
            lifted = lift_point(system, anchor)
            bigger = augment(system)
            q0_val = evaluate(q_witness(bigger), lifted)
            assert isinstance(q0_val, Fraction)
            assert q0_val >= q_val ** 3
            assert is_regular_at(bigger, lifted).regular

    def test_float_mode_with_relative_slack(self):
        rng = random.Random(100)
        for _ in range(20):
            system, anchor = random_regular_system(rng)
            point = tuple(float(v) for v in anchor)
            q_val = float(evaluate(q_witness(system), point))
            lifted = lift_point(system, point,
                                tol_res=1e-9, tol_reg=1e-6)
            q0_val = float(evaluate(q_witness(augment(system)), lifted))
            assert q0_val >= q_val ** 3 * (1 - 1e-9)
