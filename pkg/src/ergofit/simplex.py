"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x = b, x >= 0``.  Redundant equality rows are
detected at the end of phase one and dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleLPError, InvalidArgumentError, ResourceBudgetError

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    status: str
    iterations: int
    basis: np.ndarray


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _run(T, basis, ncols, tol, max_iter, it0):
    """Bland pivots on tableau T whose last row is the reduced-cost row."""
    m = T.shape[0] - 1
    it = it0
    while True:
        red = T[-1, :ncols]
        cand = np.nonzero(red < -tol)[0]
        if cand.size == 0:
            return OPTIMAL, it
        j = int(cand[0])
        col = T[:m, j]
        pos = np.nonzero(col > tol)[0]
        if pos.size == 0:
            return UNBOUNDED, it
        ratios = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + tol * max(1.0, abs(rmin))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(T, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise ResourceBudgetError(f"simplex exceeded {max_iter} pivots")


def solve_lp(c, A, b, tol: float = 1e-10, max_iter: int = 200_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise InvalidArgumentError("inconsistent LP dimensions")
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase one: artificial identity block
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    status, it = _run(T, basis, n + m, tol, max_iter, 0)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > 1e-8 * scale:
        raise InfeasibleLPError(f"LP is infeasible (phase-one residual {-T[-1, -1]:.3g})")
    # drive artificials out of the basis; rows with no real pivot are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            row = T[r, :n]
            nz = np.nonzero(np.abs(row) > 1e-9)[0]
            if nz.size:
                j = int(nz[0])
                _pivot(T, r, j)
                basis[r] = j
            else:
                keep[r] = False
    rows = np.nonzero(keep)[0]
    T2 = np.zeros((rows.size + 1, n + 1))
    T2[:-1, :n] = T[rows, :n]
    T2[:-1, -1] = T[rows, -1]
    basis = basis[rows]
    # reduced costs for the real objective
    T2[-1, :n] = c
    T2[-1, -1] = 0.0
    cb = c[basis]
    T2[-1] -= cb @ T2[:-1]
    status, it = _run(T2, basis, n, tol, max_iter, it)
    x = np.zeros(n)
    x[basis] = T2[:-1, -1]
    x[np.abs(x) < 1e-15] = 0.0
    value = float(c @ x) if status == OPTIMAL else -np.inf
    return LPResult(x, value, status, it, basis)
