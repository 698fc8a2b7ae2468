"""Derivative-growth certificates: |D^alpha f| <= C_k * omega^{E_k}.

A certificate is a control function omega (kept >= 1 so exponent maxima stay
sound), a coefficient sequence C indexed by derivative order, and an exponent
sequence E.  Certificates for the generators (constants, coordinates,
registered basics) combine through sums, products, compositions, and
derivative shifts, and propagate through implicit-function charts where the
control function picks up the inverse square of the chart determinant.

Certificates are deliberately generous: the bookkeeping uses explicit
recursive term counts rather than sharp constants, and soundness is checked
by sampling (:func:`verify_control`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

from .numeric import eval_float, track_chart
from .terms import (
    Basic, Const, Power, Product, REGISTRY, Scalar, Sum, Term, Var, add,
    d_alpha, graded_multi_indices, npow, subst,
)
from .witness import FunctionSystem


class ControlError(Exception):
    pass


OmegaLike = Union[Term, Callable[[Sequence[float]], float]]


@dataclass(frozen=True)
class ControlData:
    """Certificate (omega, C, E) valid for derivative orders 0..order_cap."""

    omega: OmegaLike
    coeffs: tuple[Scalar, ...]
    exps: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.exps):
            raise ControlError("coefficient and exponent sequences differ in length")
        if not self.coeffs:
            raise ControlError("certificate must cover at least order 0")
        for c in self.coeffs:
            if c < 0:
                raise ControlError("coefficients must be nonnegative")
        for e in self.exps:
            if not isinstance(e, int) or e < 0:
                raise ControlError("exponents must be naturals")

    @property
    def order_cap(self) -> int:
        return len(self.coeffs) - 1

    def omega_at(self, point) -> float:
        if isinstance(self.omega, Term):
            return eval_float(self.omega, point)
        return float(self.omega(point))

    def bound_at(self, point, order: int) -> float:
        """The certified bound C_order * omega(point)^{E_order}."""
        if order > self.order_cap:
            raise ControlError(
                f"order {order} beyond certified cap {self.order_cap}")
        w = self.omega_at(point)
        try:
            return float(self.coeffs[order]) * w ** self.exps[order]
        except OverflowError:
            return math.inf


DEFAULT_ORDER_CAP = 8


# ---------------------------------------------------------------------------
# Generator certificates
# ---------------------------------------------------------------------------


def basic_control(name: str, order_cap: int = DEFAULT_ORDER_CAP) -> ControlData:
    """Certificate template for a registered basic, in its argument slot."""
    entry = REGISTRY.get(name)
    return ControlData(
        omega=entry.control_omega,
        coeffs=tuple(Fraction(entry.control_coeff(k))
                     for k in range(order_cap + 1)),
        exps=tuple(int(entry.control_exp(k)) for k in range(order_cap + 1)),
    )


def constant_control(value, order_cap: int = DEFAULT_ORDER_CAP) -> ControlData:
    value = Fraction(value)
    coeffs = (abs(value),) + tuple(Fraction(0) for _ in range(order_cap))
    return ControlData(omega=Const(Fraction(1)), coeffs=coeffs,
                       exps=tuple(0 for _ in range(order_cap + 1)))


def coordinate_control(index: int, n: int,
                       order_cap: int = DEFAULT_ORDER_CAP) -> ControlData:
    """|x_i| <= 1 + sum x_j^2, first derivatives are 0 or 1, rest vanish."""
    if not (1 <= index <= n):
        raise ControlError(f"coordinate {index} out of range for dimension {n}")
    omega = add(Const(Fraction(1)),
                *(npow(Var(j), 2) for j in range(1, n + 1)))
    coeffs = [Fraction(1), Fraction(1)] + [Fraction(0)] * (order_cap - 1)
    exps = [1, 1] + [1] * (order_cap - 1)
    return ControlData(omega=omega, coeffs=tuple(coeffs[:order_cap + 1]),
                       exps=tuple(exps[:order_cap + 1]))


# ---------------------------------------------------------------------------
# Combination rules
# ---------------------------------------------------------------------------


def _common_cap(*data: ControlData) -> int:
    return min(d.order_cap for d in data)


def _omega_sum(a: OmegaLike, b: OmegaLike) -> OmegaLike:
    if isinstance(a, Term) and isinstance(b, Term):
        return add(a, b)

    def both(point):
        wa = eval_float(a, point) if isinstance(a, Term) else float(a(point))
        wb = eval_float(b, point) if isinstance(b, Term) else float(b(point))
        return wa + wb

    return both


def combine_sum(a: ControlData, b: ControlData) -> ControlData:
    cap = _common_cap(a, b)
    return ControlData(
        omega=_omega_sum(a.omega, b.omega),
        coeffs=tuple(a.coeffs[k] + b.coeffs[k] for k in range(cap + 1)),
        exps=tuple(max(a.exps[k], b.exps[k]) for k in range(cap + 1)),
    )


def combine_product(a: ControlData, b: ControlData) -> ControlData:
    """Leibniz: 2^k subterms, each a product of lower-order bounds."""
    cap = _common_cap(a, b)
    coeffs = []
    exps = []
    for k in range(cap + 1):
        ca = max(a.coeffs[: k + 1])
        cb = max(b.coeffs[: k + 1])
        coeffs.append(Fraction(2) ** k * ca * cb)
        exps.append(max(a.exps[: k + 1]) + max(b.exps[: k + 1]))
    return ControlData(omega=_omega_sum(a.omega, b.omega),
                       coeffs=tuple(coeffs), exps=tuple(exps))


def combine_shift(a: ControlData) -> ControlData:
    """Certificate for any first partial: drop order zero."""
    if a.order_cap < 1:
        raise ControlError("cannot shift a certificate that only covers order 0")
    return ControlData(omega=a.omega, coeffs=a.coeffs[1:], exps=a.exps[1:])


@lru_cache(maxsize=128)
def _bell(k: int) -> int:
    """Set-partition counts via the Bell triangle (explicit recursion)."""
    if k == 0:
        return 1
    row = [1]
    for _ in range(k - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def combine_compose(outer: ControlData, inner: ControlData,
                    inner_term: Optional[Term] = None) -> ControlData:
    """Certificate for outer(inner(x)) via labeled-partition chain-rule counts.

    The order-k derivative expands over set partitions of the k derivative
    steps (Bell(k) summands), each a derivative of the outer function times a
    product of at most k inner-derivative blocks.
    """
    cap = _common_cap(outer, inner)
    if not isinstance(outer.omega, Term) or inner_term is None:
        raise ControlError(
            "composition needs a symbolic outer control function and the "
            "inner term")
    composed = subst(outer.omega, {1: inner_term})
    omega: OmegaLike = _omega_sum(composed, inner.omega)
    coeffs = [outer.coeffs[0]]
    exps = [outer.exps[0]]
    for k in range(1, cap + 1):
        c_out = max(outer.coeffs[: k + 1])
        c_in = max(Fraction(1), max(inner.coeffs[: k + 1]))
        coeffs.append(Fraction(_bell(k)) * c_out * c_in ** k)
        exps.append(max(outer.exps[: k + 1]) + k * max(inner.exps[: k + 1]))
    return ControlData(omega=omega, coeffs=tuple(coeffs), exps=tuple(exps))


def combine(op: str, *data, **kwargs) -> ControlData:
    """Dispatch: ``sum``, ``product``, ``partial-shift``, or ``compose``."""
    if op == "sum":
        a, b = data
        return combine_sum(a, b)
    if op == "product":
        a, b = data
        return combine_product(a, b)
    if op == "partial-shift":
        (a,) = data
        return combine_shift(a)
    if op == "compose":
        a, b = data
        return combine_compose(a, b, **kwargs)
    raise ControlError(f"unknown combination {op!r}")


def term_control(t: Term, n: int,
                 order_cap: int = DEFAULT_ORDER_CAP) -> ControlData:
    """Certificate for an arbitrary term by structural recursion."""
    if n < t.arity:
        raise ControlError("dimension smaller than term arity")

    def walk(node: Term) -> ControlData:
        if isinstance(node, Const):
            return constant_control(node.value, order_cap)
        if isinstance(node, Var):
            return coordinate_control(node.index, n, order_cap)
        if isinstance(node, Sum):
            acc = walk(node.children[0])
            for c in node.children[1:]:
                acc = combine_sum(acc, walk(c))
            return acc
        if isinstance(node, Product):
            acc = walk(node.children[0])
            for c in node.children[1:]:
                acc = combine_product(acc, walk(c))
            return acc
        if isinstance(node, Power):
            base = walk(node.base)
            acc = base
            for _ in range(node.exponent - 1):
                acc = combine_product(acc, base)
            return acc
        assert isinstance(node, Basic)
        if len(node.args) != 1:
            raise ControlError(
                "control propagation through multi-argument basics is not "
                "supported")
        return combine_compose(basic_control(node.name, order_cap),
                               walk(node.args[0]),
                               inner_term=node.args[0])

    return walk(t)


def shared_control(certs: Sequence[ControlData]) -> ControlData:
    """One certificate dominating several: summed omega, pointwise maxima."""
    if not certs:
        raise ControlError("need at least one certificate")
    cap = min(c.order_cap for c in certs)
    omega: OmegaLike = certs[0].omega
    for c in certs[1:]:
        omega = _omega_sum(omega, c.omega)
    return ControlData(
        omega=omega,
        coeffs=tuple(max(c.coeffs[k] for c in certs) for k in range(cap + 1)),
        exps=tuple(max(c.exps[k] for c in certs) for k in range(cap + 1)),
    )


# ---------------------------------------------------------------------------
# Implicit-function propagation
# ---------------------------------------------------------------------------


def implicit_control(system: FunctionSystem, data: ControlData,
                     delta: Term, anchor: Sequence[float],
                     order_cap: int = 4) -> ControlData:
    """Certificate for the solved coordinates of an implicit chart.

    Convention: the last ``m`` variables (m = number of equations) are solved
    in terms of the first ``n_free``.  ``data`` must certify every equation;
    ``delta`` is the determinant of the solved-block Jacobian, which must stay
    away from zero on the verification domain.

    The control function is the composition proxy
    ``(1 + omega-along-chart) * (1 + delta-along-chart^-2)``, evaluated by
    Newton-tracking the solved coordinates from the anchor.  Coefficients and
    exponents follow the order-by-order induction: order 1 comes from the
    Cramer quotient; order k differentiates the previous quotient form, whose
    monomial count, factor counts, and determinant powers are tracked by an
    explicit recursion.  Every bound is a deliberate overestimate.
    """
    m = system.size
    n_total = system.dim
    n_free = n_total - m
    if n_free < 1:
        raise ControlError("chart needs at least one free variable")
    free_idx = tuple(range(1, n_free + 1))
    solved_idx = tuple(range(n_free + 1, n_total + 1))
    anchor = tuple(float(v) for v in anchor)
    if len(anchor) != n_total:
        raise ControlError("anchor has wrong dimension")
    if abs(eval_float(delta, anchor)) < 1e-12:
        raise ControlError("solved-block determinant vanishes at the anchor")

    def chart_point(free_values) -> tuple[float, ...]:
        return track_chart(system.functions, free_idx, solved_idx,
                           tuple(float(v) for v in free_values),
                           anchor[n_free:])

    def rho(free_values) -> float:
        full = chart_point(free_values)
        w = data.omega_at(full)
        d = eval_float(delta, full)
        return (1.0 + w) * (1.0 + d ** -2)

    cap = min(order_cap, data.order_cap)
    c_max = max(Fraction(1), max(data.coeffs[: cap + 1]))
    e_max = max(data.exps[: cap + 1])

    # Bookkeeping recursion: after k chart derivations each monomial has at
    # most g_k derivative-of-equation factors and p_k solved-derivative
    # factors over delta^{d_k}; differentiating branches over every factor
    # (product rule), each branch fanning out through the chain rule.
    fact_m = Fraction(math.factorial(m))
    count = [Fraction(0), Fraction(m) * fact_m]
    g_factors = [0, m]
    p_factors = [0, 0]
    d_power = [0, 1]
    for k in range(1, cap):
        branches = g_factors[k] + p_factors[k] + 1
        count.append(count[k] * branches * (m + 1) * m * fact_m)
        g_factors.append(g_factors[k] + m)
        p_factors.append(p_factors[k] + 1)
        d_power.append(d_power[k] + 2)

    coeffs: list[Fraction] = [c_max]
    exps: list[int] = [e_max]
    for k in range(1, cap + 1):
        prev_c = max([Fraction(1)] + coeffs[1:])
        prev_e = max([0] + exps[1:])
        coeffs.append(count[k] * c_max ** g_factors[k] * prev_c ** p_factors[k])
        exps.append(g_factors[k] * e_max + p_factors[k] * prev_e + d_power[k])

    return ControlData(omega=rho, coeffs=tuple(coeffs), exps=tuple(exps))


# ---------------------------------------------------------------------------
# Verification by sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlReport:
    """Worst observed ratio |D^alpha f| / bound per order; <= 1 means pass."""

    max_ratio: float
    worst_point: Optional[tuple[float, ...]]
    worst_alpha: Optional[tuple[int, ...]]
    per_order: dict[int, float]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "worst_point": list(self.worst_point) if self.worst_point else None,
            "worst_alpha": list(self.worst_alpha) if self.worst_alpha else None,
            "per_order": {str(k): v for k, v in sorted(self.per_order.items())},
            "passed": self.passed,
        }


def term_evaluator(f: Term):
    """Derivative evaluator for a term: (point, alpha) -> value."""

    def ev(point, alpha):
        return eval_float(d_alpha(f, tuple(alpha)), point)

    return ev


def verify_control(evaluator, data: ControlData, samples,
                   order_cap: int, dims: int) -> ControlReport:
    """Check the certified inequality at every sample and order.

    ``evaluator(point, alpha)`` supplies |D^alpha f|-values; violations are
    reported as data (ratios), not raised.
    """
    if order_cap > data.order_cap:
        raise ControlError(
            f"order {order_cap} beyond certificate cap {data.order_cap}")
    per_order: dict[int, float] = {k: 0.0 for k in range(order_cap + 1)}
    worst = (0.0, None, None)
    for point in samples:
        point = tuple(float(v) for v in point)
        for alpha in graded_multi_indices(dims, order_cap):
            order = sum(alpha)
            value = abs(float(evaluator(point, alpha)))
            bound = data.bound_at(point, order)
            if value == 0.0:
                ratio = 0.0
            elif bound == 0.0:
                ratio = math.inf
            else:
                ratio = value / bound
            if ratio > per_order[order]:
                per_order[order] = ratio
            if ratio > worst[0]:
                worst = (ratio, point, alpha)
    return ControlReport(
        max_ratio=worst[0],
        worst_point=worst[1],
        worst_alpha=worst[2],
        per_order=per_order,
        passed=worst[0] <= 1.0,
    )
