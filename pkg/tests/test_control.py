import math
import random
from fractions import Fraction

import pytest

from regulus.acceptance import random_smooth_term
from regulus.control import (
    ControlData, ControlError, basic_control, combine, combine_compose,
    combine_shift, constant_control, coordinate_control, implicit_control,
    shared_control, term_control, term_evaluator, verify_control,
)
from regulus.terms import (
    Const, Var, add, apply_basic, mul, npow, partial, subtract,
)
from regulus.witness import FunctionSystem

x1, x2 = Var(1), Var(2)


def exp(t):
    return apply_basic("exp", t)


def sample_points(rng, n, count, half_width=1.0):
    return [tuple(rng.uniform(-half_width, half_width) for _ in range(n))
            for _ in range(count)]


class TestGeneratorCertificates:
    def test_exp_template(self):
        cert = basic_control("exp")
        assert all(c == 1 for c in cert.coeffs)
        assert all(e == 1 for e in cert.exps)
        rng = random.Random(1)
        report = verify_control(term_evaluator(exp(x1)), cert,
                                sample_points(rng, 1, 100, 3.0), 4, 1)
        assert report.passed

    def test_constant(self):
        cert = constant_control(Fraction(-7, 2))
        assert cert.coeffs[0] == Fraction(7, 2)
        assert all(c == 0 for c in cert.coeffs[1:])
        report = verify_control(term_evaluator(Const(Fraction(-7, 2))), cert,
                                [(0.0,)], 3, 1)
        assert report.passed

    def test_coordinate(self):
        cert = coordinate_control(2, 2)
        rng = random.Random(2)
        report = verify_control(term_evaluator(x2), cert,
                                sample_points(rng, 2, 50, 5.0), 4, 2)
        assert report.passed

    def test_unregistered_name(self):
        with pytest.raises(Exception):
            basic_control("sinh")


class TestCombine:
    def test_sum_of_constants(self):
        a = constant_control(Fraction(3))
        b = constant_control(Fraction(-2))
        c = combine("sum", a, b)
        assert c.coeffs[0] == Fraction(5)

    def test_product_sampled(self):
        t = mul(x1, exp(x1))
        cert = combine("product",
                       coordinate_control(1, 1),
                       combine_compose(basic_control("exp"),
                                       coordinate_control(1, 1),
                                       inner_term=x1))
        rng = random.Random(3)
        report = verify_control(term_evaluator(t), cert,
                                sample_points(rng, 1, 100), 4, 1)
        assert report.passed

    def test_partial_shift_invariant_for_exp(self):
        cert = basic_control("exp")
        shifted = combine("partial-shift", cert)
        assert shifted.coeffs == cert.coeffs[1:]
        assert shifted.exps == cert.exps[1:]

    def test_shift_coherence(self):
        # if the certificate holds for f at order k+1, the shifted one
        # holds for any first partial at order k
        rng = random.Random(4)
        t = add(npow(x1, 3), mul(x1, exp(x1)))
        cert = term_control(t, 1, order_cap=5)
        shifted = combine_shift(cert)
        report = verify_control(term_evaluator(partial(t, 1)), shifted,
                                sample_points(rng, 1, 60), 4, 1)
        assert report.passed

    def test_unknown_op(self):
        with pytest.raises(ControlError):
            combine("quotient", constant_control(1), constant_control(1))


class TestTermControl:
    def test_random_composites_sound(self):
        rng = random.Random(5)
        for _ in range(12):
            n = rng.randint(1, 2)
            t = random_smooth_term(rng, n)
            dims = max(t.arity, 1)
            cert = term_control(t, dims)
            report = verify_control(term_evaluator(t), cert,
                                    sample_points(rng, dims, 40), 4, dims)
            assert report.passed, to_source_safe(t)

    def test_monotonicity(self):
        t = mul(x1, exp(x1))
        cert = term_control(t, 1)
        rng = random.Random(6)
        pts = sample_points(rng, 1, 40)
        base = verify_control(term_evaluator(t), cert, pts, 4, 1)
        bigger = ControlData(
            omega=cert.omega,
            coeffs=tuple(c * 2 for c in cert.coeffs),
            exps=tuple(e + 1 for e in cert.exps))
        grown = verify_control(term_evaluator(t), bigger, pts, 4, 1)
        assert base.passed
        assert grown.passed
        assert grown.max_ratio <= base.max_ratio

    def test_shared_control_dominates(self):
        certs = [term_control(npow(x1, 2), 1), term_control(exp(x1), 1)]
        merged = shared_control(certs)
        rng = random.Random(7)
        pts = sample_points(rng, 1, 40)
        for t in (npow(x1, 2), exp(x1)):
            report = verify_control(term_evaluator(t), merged, pts, 4, 1)
            assert report.passed


def to_source_safe(t):
    from regulus.terms import to_source
    return to_source(t)[:80]


class TestVerifyControl:
    def test_halved_coefficient_fails_with_worst_point(self):
        cert = basic_control("exp")
        bad = ControlData(omega=cert.omega,
                          coeffs=(Fraction(1, 2),) + cert.coeffs[1:],
                          exps=cert.exps)
        rng = random.Random(8)
        report = verify_control(term_evaluator(exp(x1)), bad,
                                sample_points(rng, 1, 50, 2.0), 0, 1)
        assert not report.passed
        assert report.worst_point is not None
        assert report.max_ratio > 1

    def test_zero_function_with_zero_bound(self):
        cert = ControlData(omega=Const(Fraction(1)),
                           coeffs=(Fraction(0),) * 3,
                           exps=(0, 0, 0))
        report = verify_control(lambda p, a: 0.0, cert, [(0.5,)], 2, 1)
        assert report.passed
        assert report.max_ratio == 0.0

    def test_order_beyond_cap_rejected(self):
        cert = constant_control(1, order_cap=2)
        with pytest.raises(ControlError):
            verify_control(lambda p, a: 0.0, cert, [(0.0,)], 3, 1)

    def test_report_serializes(self):
        cert = basic_control("exp")
        report = verify_control(term_evaluator(exp(x1)), cert, [(0.0,)], 2, 1)
        data = report.to_json_dict()
        assert set(data) == {"max_ratio", "worst_point", "worst_alpha",
                             "per_order", "passed"}


class TestImplicitControl:
    def test_exp_chart_certificate(self):
        g = subtract(x2, exp(x1))
        system = FunctionSystem(2, (g,))
        cert = implicit_control(system, term_control(g, 2),
                                partial(g, 2), (0.0, 1.0), order_cap=4)
        rng = random.Random(9)
        pts = sample_points(rng, 1, 100)
        report = verify_control(lambda p, a: math.exp(p[0]), cert, pts, 4, 1)
        assert report.passed

    def test_circle_chart_against_finite_differences(self):
        g = subtract(add(npow(x1, 2), npow(x2, 2)), Const(Fraction(1)))
        system = FunctionSystem(2, (g,))
        cert = implicit_control(system, term_control(g, 2),
                                partial(g, 2), (0.0, 1.0), order_cap=3)
        rng = random.Random(10)
        pts = [(rng.uniform(-0.5, 0.5),) for _ in range(60)]

        def fd_phi(point, alpha):
            y = point[0]
            h = 1e-3
            k = sum(alpha)

            def phi(t):
                return math.sqrt(1 - t * t)

            if k == 0:
                return phi(y)
            if k == 1:
                return (phi(y + h) - phi(y - h)) / (2 * h)
            if k == 2:
                return (phi(y + h) - 2 * phi(y) + phi(y - h)) / h ** 2
            return (phi(y + 2 * h) - 2 * phi(y + h) + 2 * phi(y - h)
                    - phi(y - 2 * h)) / (2 * h ** 3)

        report = verify_control(fd_phi, cert, pts, 3, 1)
        assert report.passed

    def test_linear_system_higher_orders_vanish(self):
        # affine equation: solved coordinate is affine, derivatives of
        # order >= 2 are zero, so any certificate passes there
        g = subtract(x2, mul(3, x1))
        system = FunctionSystem(2, (g,))
        cert = implicit_control(system, term_control(g, 2),
                                partial(g, 2), (0.0, 0.0), order_cap=3)

        def phi_ev(point, alpha):
            k = sum(alpha)
            if k == 0:
                return 3 * point[0]
            if k == 1:
                return 3.0
            return 0.0

        rng = random.Random(11)
        report = verify_control(phi_ev, cert,
                                sample_points(rng, 1, 40), 3, 1)
        assert report.passed

    def test_anchor_with_vanishing_delta_rejected(self):
        g = subtract(add(npow(x1, 2), npow(x2, 2)), Const(Fraction(1)))
        system = FunctionSystem(2, (g,))
        with pytest.raises(ControlError):
            implicit_control(system, term_control(g, 2), partial(g, 2),
                             (1.0, 0.0))
