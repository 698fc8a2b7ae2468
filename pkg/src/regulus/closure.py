"""Turning a regular zero set into a full zero set in one extra variable.

Appending ``x_{n+1} * Q - 1`` (with Q the regularity witness) forces the new
variety to avoid the non-regular locus entirely: wherever Q vanishes the new
equation reads -1 = 0.  Points lift by appending 1/Q, and the witness of the
augmented system at a lifted point is bounded below by Q cubed, so regularity
survives the lift with a quantified margin.
"""

from __future__ import annotations

from fractions import Fraction

from .terms import Const, Var, add, mul, scalar_is_exact
from .witness import FunctionSystem, is_regular_at, q_witness


class ClosureError(Exception):
    pass


class NotRegularError(ClosureError):
    """The point to lift is not a regular zero of the system."""


def augment(system: FunctionSystem) -> FunctionSystem:
    """Append ``x_{n+1} * Q - 1`` and grow the ambient dimension by one."""
    if system.size > system.dim:
        raise ClosureError(
            "augmentation needs at most as many functions as variables")
    q = q_witness(system)
    saturator = add(mul(Var(system.dim + 1), q), Const(Fraction(-1)))
    return FunctionSystem(system.dim + 1, system.functions + (saturator,))


def lift_point(system: FunctionSystem, point, tol_res=0, tol_reg=0):
    """Lift a regular zero onto the augmented variety by appending 1/Q.

    Refuses when the witness value is below ``tol_reg`` (division blow-up).
    Exact rational points with exact witness values lift exactly.
    """
    verdict = is_regular_at(system, point, tol_res=tol_res, tol_reg=tol_reg)
    if not verdict.regular:
        raise NotRegularError(
            f"point is not a regular zero: residual={verdict.residual}, "
            f"witness={verdict.witness_value}")
    q_value = verdict.witness_value
    if scalar_is_exact(q_value):
        last = Fraction(1) / q_value
    else:
        last = 1.0 / q_value
    return tuple(point) + (last,)
