"""Numeric point services: zero finding, Newton refinement, constrained
minimum distance, rank with tolerance, and flatness probing.

All tolerances live in one table (:data:`DEFAULTS`) so runs are reproducible
from a single source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .terms import (
    Term, d_alpha, evaluate, graded_multi_indices, is_zero_term, partial,
)
from .witness import FunctionSystem, grad


class NumericError(Exception):
    pass


class NonConvergence(NumericError):
    def __init__(self, message, point=None, residual=None):
        super().__init__(message)
        self.point = point
        self.residual = residual


class SingularJacobian(NumericError):
    pass


class NoFeasiblePoint(NumericError):
    """No start reached the constraint set within tolerance."""


@dataclass(frozen=True)
class NumericDefaults:
    """Central tolerance table governing all numeric routines."""

    tol_res: float = 1e-9
    tol_reg: float = 1e-6
    tol_nonflat: float = 1e-7
    fd_step: float = 1e-5
    multistart: int = 8
    dedup_radius: float = 1e-6
    newton_iters: int = 25
    polish_tol: float = 1e-13


DEFAULTS = NumericDefaults()


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box given by per-dimension intervals."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise NumericError("box bounds must have equal lengths")
        for lo, hi in zip(self.lower, self.upper):
            if lo > hi:
                raise NumericError(f"empty interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @staticmethod
    def cube(n: int, half_width: float = 2.0, center: float = 0.0) -> "Box":
        return Box(tuple(center - half_width for _ in range(n)),
                   tuple(center + half_width for _ in range(n)))

    def contains(self, point, slack: float = 0.0) -> bool:
        return all(lo - slack <= x <= hi + slack
                   for lo, hi, x in zip(self.lower, self.upper, point))

    def clip(self, point: np.ndarray) -> np.ndarray:
        return np.clip(point, self.lower, self.upper)

    def grid(self, per_dim: int) -> Iterable[tuple[float, ...]]:
        axes = [np.linspace(lo, hi, per_dim)
                for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=-1)
        for row in flat:
            yield tuple(float(v) for v in row)

    def hull_with(self, *points, margin: float = 0.0) -> "Box":
        lo = list(self.lower)
        hi = list(self.upper)
        for p in points:
            for i, x in enumerate(p):
                lo[i] = min(lo[i], float(x))
                hi[i] = max(hi[i], float(x))
        return Box(tuple(v - margin for v in lo), tuple(v + margin for v in hi))


def _as_float_point(point) -> tuple[float, ...]:
    return tuple(float(v) for v in point)


def eval_float(t: Term, point: Sequence[float]) -> float:
    return float(evaluate(t, point))


@lru_cache(maxsize=2048)
def _grad_terms(f: Term, n: int) -> tuple[Term, ...]:
    return grad(f, n)


@lru_cache(maxsize=512)
def _hessian_terms(f: Term, n: int) -> tuple[tuple[Term, ...], ...]:
    g = _grad_terms(f, n)
    return tuple(tuple(partial(g[i], j + 1) for j in range(n)) for i in range(n))


def _jac_at(functions: Sequence[Term], n: int, x: np.ndarray) -> np.ndarray:
    point = tuple(float(v) for v in x)
    return np.array([[eval_float(g, point) for g in _grad_terms(f, n)]
                     for f in functions], dtype=float)


def _res_at(functions: Sequence[Term], x: np.ndarray) -> np.ndarray:
    point = tuple(float(v) for v in x)
    return np.array([eval_float(f, point) for f in functions], dtype=float)


# ---------------------------------------------------------------------------
# Zero finding
# ---------------------------------------------------------------------------


def find_zero(f: Term, box: Box, grid_per_dim: int = 9,
              tol: float = DEFAULTS.tol_res) -> list[tuple[float, ...]]:
    """Grid-scan a box for zeros of a single function, Newton-polished.

    Candidates are grid points that are already small, change sign against a
    forward neighbor, or are local minima of |f| along some axis (to catch
    tangential zeros).  Each candidate is polished along the gradient.  The
    result is deduplicated and sorted; an empty list is a valid outcome.
    """
    if grid_per_dim < 2:
        raise NumericError("grid_per_dim must be >= 2")
    n = box.dim
    axes = [np.linspace(lo, hi, grid_per_dim)
            for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    values = np.array([eval_float(f, tuple(p)) for p in pts])
    shape = (grid_per_dim,) * n
    grid_vals = values.reshape(shape)

    candidates: list[np.ndarray] = []
    seen = set()

    def push(flat_idx):
        if flat_idx not in seen:
            seen.add(flat_idx)
            candidates.append(pts[flat_idx])

    small = np.abs(values) <= max(tol, 1e-12)
    for flat_idx in np.nonzero(small)[0]:
        push(int(flat_idx))

    idx_grid = np.arange(values.size).reshape(shape)
    for axis in range(n):
        lead = np.take(grid_vals, range(1, grid_per_dim), axis=axis)
        base = np.take(grid_vals, range(grid_per_dim - 1), axis=axis)
        sign_change = (lead * base) < 0
        base_idx = np.take(idx_grid, range(grid_per_dim - 1), axis=axis)
        for flat_idx in base_idx[sign_change].ravel():
            push(int(flat_idx))
        # interior local minima of |f| along this axis
        mids = np.take(np.abs(grid_vals), range(1, grid_per_dim - 1), axis=axis)
        left = np.take(np.abs(grid_vals), range(grid_per_dim - 2), axis=axis)
        right = np.take(np.abs(grid_vals), range(2, grid_per_dim), axis=axis)
        local_min = (mids <= left) & (mids <= right)
        mid_idx = np.take(idx_grid, range(1, grid_per_dim - 1), axis=axis)
        for flat_idx in mid_idx[local_min].ravel():
            push(int(flat_idx))

    gradient = _grad_terms(f, n)
    zeros: list[tuple[float, ...]] = []
    for cand in candidates:
        x = np.array(cand, dtype=float)
        for _ in range(60):
            fx = eval_float(f, tuple(x))
            if abs(fx) <= 1e-14:
                break
            g = np.array([eval_float(g_j, tuple(x)) for g_j in gradient])
            g2 = float(g @ g)
            if g2 < 1e-18:
                break
            x = x - (fx / g2) * g
        if abs(eval_float(f, tuple(x))) <= tol and box.contains(x, slack=1e-9):
            zeros.append(tuple(float(v) for v in x))

    deduped: list[tuple[float, ...]] = []
    for z in sorted(zeros):
        if all(max(abs(a - b) for a, b in zip(z, kept)) > DEFAULTS.dedup_radius
               for kept in deduped):
            deduped.append(z)
    return deduped


def newton_refine(system: FunctionSystem, start, iters: int = DEFAULTS.newton_iters,
                  tol: float = 1e-12) -> tuple[float, ...]:
    """Newton iteration on a square system; quadratic near simple zeros."""
    n = system.dim
    if system.size != n:
        raise NumericError("newton_refine needs a square system (p == n)")
    x = np.array(_as_float_point(start), dtype=float)
    for _ in range(iters):
        res = _res_at(system.functions, x)
        if float(np.max(np.abs(res))) <= tol:
            return tuple(float(v) for v in x)
        jac = _jac_at(system.functions, n, x)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            raise SingularJacobian(
                f"singular Jacobian at {tuple(float(v) for v in x)}") from None
        x = x + step
    res = _res_at(system.functions, x)
    if float(np.max(np.abs(res))) <= tol:
        return tuple(float(v) for v in x)
    raise NonConvergence("Newton did not converge",
                         point=tuple(float(v) for v in x),
                         residual=float(np.max(np.abs(res))))


def gauss_newton_polish(functions: Sequence[Term], n: int, start,
                        tol: float = DEFAULTS.polish_tol,
                        iters: int = 40) -> tuple[float, ...]:
    """Least-norm Newton steps onto the common zero set of ``functions``.

    Works for underdetermined systems (fewer functions than variables);
    returns the best point reached even if the target tolerance is missed.
    """
    funcs = [f for f in functions if not is_zero_term(f)]
    x = np.array(_as_float_point(start), dtype=float)
    if not funcs:
        return tuple(float(v) for v in x)
    best = x.copy()
    best_res = float(np.max(np.abs(_res_at(funcs, x))))
    for _ in range(iters):
        res = _res_at(funcs, x)
        norm = float(np.max(np.abs(res)))
        if norm < best_res:
            best, best_res = x.copy(), norm
        if norm <= tol:
            break
        jac = _jac_at(funcs, n, x)
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        x = x + step
    res = _res_at(funcs, x)
    if float(np.max(np.abs(res))) <= best_res:
        best = x
    return tuple(float(v) for v in best)


# ---------------------------------------------------------------------------
# Constrained minimum distance
# ---------------------------------------------------------------------------


def _dedupe_terms(terms: Iterable[Term]) -> list[Term]:
    out: list[Term] = []
    seen = set()
    for t in terms:
        if is_zero_term(t) or t in seen:
            continue
        seen.add(t)
        out.append(t)
    return out


def min_distance_point(system: FunctionSystem, target, eta,
                       box: Optional[Box] = None,
                       starts: Sequence[Sequence[float]] = (),
                       multistart: int = DEFAULTS.multistart,
                       tol_res: float = DEFAULTS.tol_res,
                       seed: int = 0) -> tuple[float, ...]:
    """Point of (locally) minimum distance from ``eta`` on the constraint set.

    The constraints are the system's functions plus ``target`` (a term, an
    iterable of terms, or None).  Strategy: multi-start feasibility projection,
    projected gradient descent on the squared distance, then Newton polishing
    of the stationarity system.  Returns the best feasible point found; the
    search is confined to ``box``, so unattained infima surface as
    boundary-limited results.
    """
    n = system.dim
    if target is None:
        target_terms: tuple[Term, ...] = ()
    elif isinstance(target, Term):
        target_terms = (target,)
    else:
        target_terms = tuple(target)
    cons = _dedupe_terms(list(system.functions) + list(target_terms))
    eta_f = np.array(_as_float_point(eta), dtype=float)
    if len(eta_f) != n:
        raise NumericError("eta has wrong dimension")
    if box is None:
        box = Box.cube(n, half_width=2.0).hull_with(eta_f, margin=1.0)
    if not cons:
        return tuple(float(v) for v in box.clip(eta_f))

    rng = np.random.default_rng(seed)
    start_list = [np.array(_as_float_point(s), dtype=float) for s in starts]
    start_list.append(box.clip(eta_f.copy()))
    lows = np.array(box.lower)
    highs = np.array(box.upper)
    while len(start_list) < len(starts) + max(1, multistart):
        start_list.append(lows + rng.random(n) * (highs - lows))

    def feasibility(x: np.ndarray, max_iter: int = 60) -> np.ndarray:
        for _ in range(max_iter):
            res = _res_at(cons, x)
            if float(np.max(np.abs(res))) <= 1e-13:
                break
            jac = _jac_at(cons, n, x)
            step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            limit = float(np.max(np.abs(step)))
            if limit > 1.0:
                step = step / limit
            x = box.clip(x + step)
        return x

    def objective(x: np.ndarray) -> float:
        d = x - eta_f
        return float(d @ d)

    def descend(x: np.ndarray) -> np.ndarray:
        for _ in range(150):
            jac = _jac_at(cons, n, x)
            g = 2.0 * (x - eta_f)
            lam, *_ = np.linalg.lstsq(jac.T, g, rcond=None)
            g_tan = g - jac.T @ lam
            if float(np.max(np.abs(g_tan))) <= 1e-10:
                break
            step_len = 0.5
            improved = False
            base = objective(x)
            for _ in range(25):
                trial = feasibility(box.clip(x - step_len * g_tan), max_iter=20)
                if (float(np.max(np.abs(_res_at(cons, trial)))) <= 1e-9
                        and objective(trial) < base - 1e-15):
                    x = trial
                    improved = True
                    break
                step_len *= 0.5
            if not improved:
                break
        return x

    def kkt_polish(x: np.ndarray) -> np.ndarray:
        p = len(cons)
        jac = _jac_at(cons, n, x)
        lam, *_ = np.linalg.lstsq(jac.T, -2.0 * (x - eta_f), rcond=None)
        z = np.concatenate([x, lam])
        hessians = [_hessian_terms(c, n) for c in cons]

        def residual(z):
            x_, lam_ = z[:n], z[n:]
            jac_ = _jac_at(cons, n, x_)
            top = 2.0 * (x_ - eta_f) + jac_.T @ lam_
            return np.concatenate([top, _res_at(cons, x_)])

        r = residual(z)
        for _ in range(40):
            norm = float(np.max(np.abs(r)))
            if norm <= 1e-13:
                break
            x_, lam_ = z[:n], z[n:]
            point = tuple(float(v) for v in x_)
            hess = 2.0 * np.eye(n)
            for i in range(p):
                h_i = np.array([[eval_float(hessians[i][a][b], point)
                                 for b in range(n)] for a in range(n)])
                hess += lam_[i] * h_i
            jac_ = _jac_at(cons, n, x_)
            kkt = np.block([[hess, jac_.T], [jac_, np.zeros((p, p))]])
            step, *_ = np.linalg.lstsq(kkt, -r, rcond=None)
            if not np.all(np.isfinite(step)):
                break
            scale = 1.0
            moved = False
            for _ in range(20):
                trial = z + scale * step
                r_trial = residual(trial)
                if float(np.max(np.abs(r_trial))) < norm:
                    z, r = trial, r_trial
                    moved = True
                    break
                scale *= 0.5
            if not moved:
                break
        return z[:n]

    best_point: Optional[np.ndarray] = None
    best_obj = float("inf")
    for start in start_list:
        try:
            x = feasibility(box.clip(start))
            if float(np.max(np.abs(_res_at(cons, x)))) > 1e-7:
                continue
            x = descend(x)
            x = kkt_polish(x)
        except (FloatingPointError, np.linalg.LinAlgError):
            continue
        if float(np.max(np.abs(_res_at(cons, x)))) > tol_res:
            continue
        if not box.contains(x, slack=1e-7):
            continue
        obj = objective(x)
        if (obj < best_obj - 1e-12
                or (abs(obj - best_obj) <= 1e-12
                    and best_point is not None
                    and tuple(x) < tuple(best_point))):
            best_point, best_obj = x, obj
    if best_point is None:
        raise NoFeasiblePoint(
            "no start reached the constraint set within tolerance")
    return tuple(float(v) for v in best_point)


# ---------------------------------------------------------------------------
# Chart tracking (solve the solved block as the free block moves)
# ---------------------------------------------------------------------------


def track_chart(functions: Sequence[Term], free_idx: Sequence[int],
                solved_idx: Sequence[int], free_values: Sequence[float],
                solved_start: Sequence[float], tol: float = 1e-13,
                iters: int = 60) -> tuple[float, ...]:
    """Newton-solve the solved coordinates given values for the free ones.

    Variable indices are 1-based.  The square block of partial derivatives
    with respect to the solved variables must stay invertible along the way.
    """
    free_idx = tuple(free_idx)
    solved_idx = tuple(solved_idx)
    if len(functions) != len(solved_idx):
        raise NumericError("need exactly one equation per solved variable")
    n = len(free_idx) + len(solved_idx)
    y = np.array(_as_float_point(solved_start), dtype=float)

    def assemble(yv):
        point = [0.0] * n
        for pos, j in enumerate(free_idx):
            point[j - 1] = float(free_values[pos])
        for pos, j in enumerate(solved_idx):
            point[j - 1] = float(yv[pos])
        return tuple(point)

    block = [[partial(f, j) for j in solved_idx] for f in functions]
    for _ in range(iters):
        point = assemble(y)
        res = np.array([eval_float(f, point) for f in functions])
        if float(np.max(np.abs(res))) <= tol:
            return assemble(y)
        mat = np.array([[eval_float(block[i][k], point)
                         for k in range(len(solved_idx))]
                        for i in range(len(functions))])
        try:
            step = np.linalg.solve(mat, -res)
        except np.linalg.LinAlgError:
            raise SingularJacobian("solved block became singular") from None
        y = y + step
    raise NonConvergence("chart tracking did not converge",
                         point=assemble(y))


# ---------------------------------------------------------------------------
# Rank and flatness
# ---------------------------------------------------------------------------


def numeric_rank(rows, tol=0) -> int:
    """Rank by complete-pivot elimination.

    With exact (int/Fraction) entries and ``tol == 0`` the computation is
    exact.  Otherwise pivots at or below ``tol * max |initial entry|`` count
    as zero.
    """
    matrix = [list(r) for r in rows]
    if not matrix or not matrix[0]:
        return 0
    exact = tol == 0 and all(
        isinstance(v, (int, Fraction)) and not isinstance(v, bool)
        for r in matrix for v in r)
    if exact:
        work = [[Fraction(v) for v in r] for r in matrix]
        threshold = Fraction(0)
    else:
        work = [[float(v) for v in r] for r in matrix]
        biggest = max((abs(v) for r in work for v in r), default=0.0)
        threshold = float(tol) * biggest

    m, n = len(work), len(work[0])
    rank = 0
    row_perm = list(range(m))
    col_perm = list(range(n))
    for step in range(min(m, n)):
        pivot_val = None
        pivot_rc = None
        for i in range(step, m):
            for j in range(step, n):
                v = abs(work[row_perm[i]][col_perm[j]])
                if pivot_val is None or v > pivot_val:
                    pivot_val = v
                    pivot_rc = (i, j)
        if pivot_val is None or pivot_val <= threshold:
            break
        i, j = pivot_rc
        row_perm[step], row_perm[i] = row_perm[i], row_perm[step]
        col_perm[step], col_perm[j] = col_perm[j], col_perm[step]
        rank += 1
        pr = row_perm[step]
        pc = col_perm[step]
        pivot = work[pr][pc]
        for i2 in range(step + 1, m):
            r2 = row_perm[i2]
            factor = work[r2][pc] / pivot
            if factor == 0:
                continue
            for j2 in range(step, n):
                c2 = col_perm[j2]
                work[r2][c2] -= factor * work[pr][c2]
    return rank


def flat_probe(f: Term, point, order_cap: int,
               tol: float = DEFAULTS.tol_nonflat) -> bool:
    """True iff every derivative up to total order ``order_cap`` is within tol."""
    if order_cap < 0:
        raise NumericError("order cap must be >= 0")
    n = f.arity
    if n == 0:
        value = evaluate(f, ())
        return abs(value) <= tol
    for alpha in graded_multi_indices(n, order_cap):
        value = evaluate(d_alpha(f, alpha), point)
        if abs(value) > tol:
            return False
    return True
