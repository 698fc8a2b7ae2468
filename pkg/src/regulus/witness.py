"""Gradients, Jacobians, and the sum-of-squared-minors regularity witness.

For a system f_1, ..., f_p in n variables, the witness Q is the sum of the
squares of all p x p minors of the Jacobian.  At a common zero, Q is positive
exactly when the gradients are linearly independent, so membership in the
regular zero set reduces to one residual check plus one sign check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Sequence

from .terms import (
    Const, Scalar, Term, ZERO, add, evaluate, mul, npow, partial,
)

DET_SIZE_CAP = 8


class WitnessError(Exception):
    pass


class DeterminantTooLarge(WitnessError):
    """Symbolic determinant requested beyond the supported size cap."""


@dataclass(frozen=True)
class FunctionSystem:
    """An ambient dimension and an ordered tuple of function terms."""

    dim: int
    functions: tuple[Term, ...]

    def __post_init__(self):
        if len(self.functions) < 1:
            raise WitnessError("a system needs at least one function")
        if self.dim < 1:
            raise WitnessError("ambient dimension must be >= 1")
        for f in self.functions:
            if f.arity > self.dim:
                raise WitnessError(
                    f"function of arity {f.arity} exceeds dimension {self.dim}")

    @property
    def size(self) -> int:
        return len(self.functions)


@dataclass(frozen=True)
class RegularityVerdict:
    """Residual and witness values at a point, with the tolerances used."""

    residual: Scalar
    witness_value: Scalar
    regular: bool
    tol_res: Scalar
    tol_reg: Scalar


def grad(f: Term, n: int) -> tuple[Term, ...]:
    """Gradient as a length-n tuple of terms."""
    if f.arity > n:
        raise WitnessError(f"arity {f.arity} exceeds requested dimension {n}")
    return tuple(partial(f, j) for j in range(1, n + 1))


@lru_cache(maxsize=512)
def jacobian(system: FunctionSystem) -> tuple[tuple[Term, ...], ...]:
    """Rows are the gradients of the system's functions."""
    return tuple(grad(f, system.dim) for f in system.functions)


def sym_det(rows: Sequence[Sequence[Term]]) -> Term:
    """Symbolic determinant by cofactor expansion (size capped)."""
    k = len(rows)
    for row in rows:
        if len(row) != k:
            raise WitnessError("determinant needs a square matrix")
    if k > DET_SIZE_CAP:
        raise DeterminantTooLarge(
            f"determinant size {k} exceeds cap {DET_SIZE_CAP}")

    def det(idx_rows: tuple[int, ...], idx_cols: tuple[int, ...]) -> Term:
        if len(idx_rows) == 1:
            return rows[idx_rows[0]][idx_cols[0]]
        pieces = []
        r = idx_rows[0]
        rest = idx_rows[1:]
        for pos, c in enumerate(idx_cols):
            entry = rows[r][c]
            minor_cols = idx_cols[:pos] + idx_cols[pos + 1:]
            piece = mul(entry, det(rest, minor_cols))
            if pos % 2:
                piece = mul(Const(Fraction(-1)), piece)
            pieces.append(piece)
        return add(*pieces)

    return det(tuple(range(k)), tuple(range(k)))


@lru_cache(maxsize=512)
def q_witness(system: FunctionSystem) -> Term:
    """Sum of squares of all maximal minors of the Jacobian.

    With more functions than variables there are no p x p submatrices and the
    witness is identically zero, so no point can test as regular.
    """
    p, n = system.size, system.dim
    if p > n:
        return ZERO
    rows = jacobian(system)
    pieces = []
    for cols in combinations(range(n), p):
        minor = sym_det([[rows[i][c] for c in cols] for i in range(p)])
        pieces.append(npow(minor, 2))
    return add(*pieces)


def minor_determinants(system: FunctionSystem) -> tuple[Term, ...]:
    """The individual maximal minors whose squares sum to the witness."""
    p, n = system.size, system.dim
    if p > n:
        return ()
    rows = jacobian(system)
    return tuple(
        sym_det([[rows[i][c] for c in cols] for i in range(p)])
        for cols in combinations(range(n), p))


def is_regular_at(system: FunctionSystem, point, tol_res=0, tol_reg=0) -> RegularityVerdict:
    """Test membership in the regular zero set at a point.

    The point is regular when every residual is within ``tol_res`` and the
    witness value clears ``tol_reg``.  A zero ``tol_reg`` demands strict
    positivity, which is exact on polynomial systems at rational points.
    """
    residual: Scalar = Fraction(0)
    for f in system.functions:
        value = evaluate(f, point)
        magnitude = -value if value < 0 else value
        if magnitude > residual:
            residual = magnitude
    q_value = evaluate(q_witness(system), point)
    on_variety = residual <= tol_res
    witness_ok = q_value > 0 if tol_reg == 0 else q_value >= tol_reg
    return RegularityVerdict(
        residual=residual,
        witness_value=q_value,
        regular=bool(on_variety and witness_ok),
        tol_res=tol_res,
        tol_reg=tol_reg,
    )
