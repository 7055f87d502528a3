"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x = b, x >= 0`` for the tiny programs that show up
here (a handful of equality rows, up to a few thousand columns).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, NumericError

TOL = 1e-11


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list[int], ncols: int, max_iter: int) -> int:
    """Iterate on tableau ``T`` whose last row is the reduced-cost row."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        red = T[-1, :ncols]
        entering = np.flatnonzero(red < -TOL)
        if entering.size == 0:
            return it
        col = int(entering[0])
        column = T[:m, col]
        pos = column > TOL
        if not pos.any():
            raise NumericError("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise NumericError("simplex iteration limit reached")


def solve_standard_lp(c, A, b, max_iter: int = 10_000) -> LPResult:
    """Minimize ``c @ x`` over ``{x >= 0 : A x = b}``.

    Raises :class:`InfeasibleError` when the feasible set is empty.
    """
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).ravel()
    c = np.array(c, dtype=float).ravel()
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificial columns n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    it1 = _run(T, basis, n + m, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[-1, -1] > 1e-9 * scale:
        raise InfeasibleError("no feasible point")

    # drive remaining artificials out of the basis
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > TOL)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
            # else: redundant row, dropped below
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros(n + 1)])
    basis = [basis[r] for r in keep]

    # phase 2 cost row
    T[-1, :n] = c
    T[-1, -1] = 0.0
    for r, j in enumerate(basis):
        T[-1] -= c[j] * T[r]
    it2 = _run(T, basis, n, max_iter)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    return LPResult(x=x, value=float(c @ x), iterations=it1 + it2)
