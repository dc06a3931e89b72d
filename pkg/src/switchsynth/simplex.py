"""Bounded-variable revised simplex with Bland's rule.

Solves

    minimize    c @ x
    subject to  A @ x == b,  lower <= x <= upper

by a two-phase method. Phase 1 appends one artificial column per row and
minimizes their sum; phase 2 (optional) then optimizes ``c`` from the
phase-1 basis. Nonbasic variables sit at one of their bounds, so box
constraints never become rows. Entering and leaving choices follow Bland's
smallest-index rule, which rules out cycling on the heavily degenerate
circulation systems this package feeds in; runs are deterministic.

Problems here are tiny (tens of columns), so the basis is refactored from
scratch with a dense solve every iteration instead of being updated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SimplexResult", "simplex"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: tuple[int, ...] = ()

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _primal(A, b, lo, hi, basis, at_upper):
    x = np.where(at_upper, hi, lo).astype(float)
    x[basis] = 0.0
    rhs = b - A @ x
    x[basis] = np.linalg.solve(A[:, basis], rhs)
    return x


def _iterate(c, A, b, lo, hi, basis, at_upper, max_iter, tol):
    """Run simplex pivots in place; return (status, iterations)."""
    m, n = A.shape
    is_basic = np.zeros(n, dtype=bool)
    is_basic[basis] = True
    for it in range(max_iter):
        B = A[:, basis]
        x = _primal(A, b, lo, hi, basis, at_upper)
        y = np.linalg.solve(B.T, c[basis])
        d = c - A.T @ y

        entering = -1
        for j in range(n):
            if is_basic[j] or hi[j] - lo[j] <= 0.0:
                continue
            if (not at_upper[j] and d[j] < -tol) or (at_upper[j] and d[j] > tol):
                entering = j
                break
        if entering < 0:
            return OPTIMAL, it

        direction = 1.0 if not at_upper[entering] else -1.0
        w = np.linalg.solve(B, A[:, entering]) * direction
        # basic values move as x_B - theta * w
        theta = hi[entering] - lo[entering]
        leave_pos = -1
        leave_to_upper = False
        for i in range(m):
            var = basis[i]
            if w[i] > tol:
                step = (x[var] - lo[var]) / w[i]
                to_upper = False
            elif w[i] < -tol and np.isfinite(hi[var]):
                step = (hi[var] - x[var]) / (-w[i])
                to_upper = True
            else:
                continue
            step = max(step, 0.0)
            if step < theta - tol:
                theta, leave_pos, leave_to_upper = step, i, to_upper
            elif leave_pos >= 0 and step <= theta + tol and var < basis[leave_pos]:
                # Bland: among tied blocking variables the smallest index leaves
                leave_pos, leave_to_upper = i, to_upper
        if not np.isfinite(theta):
            return UNBOUNDED, it + 1

        if leave_pos < 0:
            at_upper[entering] = not at_upper[entering]
            continue
        leaving = basis[leave_pos]
        basis[leave_pos] = entering
        is_basic[leaving] = False
        is_basic[entering] = True
        at_upper[leaving] = leave_to_upper
        at_upper[entering] = False
    return ITERATION_LIMIT, max_iter


def simplex(c, A, b, lower, upper, *, max_iter=10_000, tol=1e-9, feas_tol=1e-8) -> SimplexResult:
    """Two-phase bounded-variable simplex.

    Parameters
    ----------
    c : (n,) array or None
        Objective. ``None`` (or all zeros) stops after phase 1 and returns
        the first basic feasible solution found.
    A, b : (m, n) and (m,) arrays
        Equality system.
    lower, upper : (n,) arrays
        Finite lower bounds; upper bounds may be ``inf``.
    max_iter : int
        Pivot budget shared by both phases.

    Returns
    -------
    SimplexResult
        ``x`` is a basic solution of the original system when the status is
        ``"optimal"``; otherwise ``None``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        raise ValueError("upper bound below lower bound")

    # nonbasic originals start at their lower bound; artificials absorb the residual
    residual = b - A @ lo
    sign = np.where(residual < 0, -1.0, 1.0)
    A1 = np.hstack([A * sign[:, None], np.eye(m)])
    b1 = b * sign
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    at_upper = np.zeros(n + m, dtype=bool)

    status, used = _iterate(c1, A1, b1, lo1, hi1, basis, at_upper, max_iter, tol)
    if status != OPTIMAL:
        return SimplexResult(status, None, np.nan, used)
    x1 = _primal(A1, b1, lo1, hi1, basis, at_upper)
    infeasibility = x1[n:].sum()
    if infeasibility > feas_tol * max(1.0, np.abs(b).max(initial=0.0)):
        return SimplexResult(INFEASIBLE, None, np.nan, used, tuple(basis))

    total = used
    if c is not None and np.any(np.asarray(c) != 0):
        # artificials are pinned at zero for phase 2
        hi1[n:] = 0.0
        c2 = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        status, used = _iterate(c2, A1, b1, lo1, hi1, basis, at_upper, max_iter - total, tol)
        total += used
        if status != OPTIMAL:
            return SimplexResult(status, None, np.nan, total)
        x1 = _primal(A1, b1, lo1, hi1, basis, at_upper)

    x = np.clip(x1[:n], lo, hi)
    objective = float(np.dot(c, x)) if c is not None else 0.0
    return SimplexResult(OPTIMAL, x, objective, total, tuple(basis))
