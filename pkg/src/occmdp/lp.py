"""Dense two-phase revised simplex for ``min c.x  s.t.  A x = b, x >= 0``.

The basis inverse is kept explicitly, updated by rank-one (eta) pivots and
recomputed from scratch every ``REFACTOR_EVERY`` pivots.  Entering columns
follow Dantzig's most-negative reduced cost; after ``DEGENERATE_LIMIT``
consecutive degenerate pivots the solver switches to Bland's smallest-index
rule until a pivot makes progress again.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-11
OPT_TOL = 1e-9
FEAS_TOL = 1e-8
ARTIFICIAL_ZERO = 1e-10
DEGENERATE_LIMIT = 50
REFACTOR_EVERY = 64


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Equality-form linear program with nonnegative variables."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape != (b.size, c.size):
            raise ValueError(f"dimension mismatch: A is {A.shape}, b has {b.size}, c has {c.size}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(eq=False)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float
    basis: list[int]
    iterations: int
    redundant_rows: list[int] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Revised-simplex state over a column subset of a fixed matrix."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.pivots = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.solve(B, np.eye(B.shape[0])) if B.size else np.zeros((0, 0))
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def pivot(self, row, col, w):
        piv = w[row]
        self.Binv[row] /= piv
        self.xB[row] /= piv
        w = w.copy()
        w[row] = 0.0
        self.Binv -= np.outer(w, self.Binv[row])
        self.xB -= w * self.xB[row]
        self.basis[row] = col
        self.pivots += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def run(self, cost, allowed, max_iter):
        """Minimize ``cost`` over columns in ``allowed``; return status."""
        degenerate = 0
        allowed = np.asarray(allowed, dtype=int)
        for _ in range(max_iter):
            y = cost[self.basis] @ self.Binv
            d = cost[allowed] - y @ self.A[:, allowed]
            d[np.isin(allowed, self.basis)] = 0.0
            neg = np.flatnonzero(d < -OPT_TOL)
            if neg.size == 0:
                return "optimal"
            bland = degenerate > DEGENERATE_LIMIT
            j = allowed[neg[0]] if bland else allowed[neg[np.argmin(d[neg])]]
            w = self.Binv @ self.A[:, j]
            rows = np.flatnonzero(w > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = np.maximum(self.xB[rows], 0.0) / w[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12]
            if bland:
                r = min(ties, key=lambda i: self.basis[i])
            else:
                r = ties[np.argmax(w[ties])]
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, j, w)
        raise RuntimeError(f"simplex did not terminate within {max_iter} iterations")


def solve_lp(p: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve ``p`` and return a basic optimal solution (or a failure status).

    Rows found linearly dependent during phase I are dropped and reported in
    ``redundant_rows`` (indices into ``p.A``).
    """
    m, n = p.shape
    A = p.A.copy()
    b = p.b.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    # phase I: artificial identity block appended after the n structural columns
    A1 = np.hstack([A, np.eye(m)])
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(A1, b, range(n, n + m))
    status = tab.run(cost1, np.arange(n + m), max_iter)
    iterations = tab.pivots
    if status != "optimal":  # cannot happen for a bounded-below phase I
        raise RuntimeError("phase I failed")
    tab.refactor()
    infeas = float(cost1[tab.basis] @ tab.xB)
    if infeas > FEAS_TOL:
        return LpSolution("infeasible", None, float("nan"), [], iterations)

    # drive remaining artificials out of the basis, or drop their rows
    keep_rows = list(range(m))
    redundant = []
    r = 0
    while r < len(tab.basis):
        col = tab.basis[r]
        if col < n:
            r += 1
            continue
        row_coeffs = tab.Binv[r] @ A1[:, :n]
        nonbasic = [j for j in range(n) if j not in tab.basis]
        cand = [j for j in nonbasic if abs(row_coeffs[j]) > PIVOT_TOL]
        if cand:
            j = max(cand, key=lambda j: abs(row_coeffs[j]))
            tab.pivot(r, j, tab.Binv @ A1[:, j])
            iterations += 1
            r += 1
            continue
        orig_row = col - n
        redundant.append(orig_row)
        pos = keep_rows.index(orig_row)
        keep_rows.pop(pos)
        del tab.basis[r]
        A1 = np.delete(A1, pos, axis=0)
        b = np.delete(b, pos)
        tab.A, tab.b = A1, b
        tab.refactor()
    log.debug("phase I done: %d pivots, redundant rows %s", iterations, redundant)

    # phase II over structural columns only
    cost2 = np.concatenate([p.c, np.zeros(m)])
    status = tab.run(cost2, np.arange(n), max_iter)
    iterations = tab.pivots
    if status == "unbounded":
        return LpSolution("unbounded", None, float("-inf"), list(tab.basis), iterations, sorted(redundant))
    tab.refactor()
    x = np.zeros(n)
    xb = tab.xB.copy()
    xb[(xb < 0) & (xb > -ARTIFICIAL_ZERO)] = 0.0
    for i, col in enumerate(tab.basis):
        if col < n:
            x[col] = xb[i]
    return LpSolution("optimal", x, float(p.c @ x), list(tab.basis), iterations, sorted(redundant))


def reduced_costs(p: LpProblem, basis: list[int]) -> np.ndarray:
    """Reduced costs of every column for a final ``basis``.

    The duals come from a least-squares solve, so a basis that is short by
    the redundant rows still gives exact reduced costs.
    """
    B = p.A[:, basis]
    y, *_ = np.linalg.lstsq(B.T, p.c[basis], rcond=None)
    return p.c - y @ p.A
