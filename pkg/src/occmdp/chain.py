"""Structure of the Markov chain induced by a stationary policy."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.sparse.csgraph import connected_components

from .measures import OccupationMeasure
from .occupation import INVARIANCE_TOL, invariance_residual
from .policy import disintegrate, policy_kernel

EDGE_TOL = 1e-12
KAC_TOL = 1e-8


class ChainError(ValueError):
    """Raised when a matrix is not stochastic or a state is not recurrent."""


def check_stochastic(P, tol: float = 1e-9) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ChainError(f"expected a square matrix, got shape {P.shape}")
    if np.any(P < -tol) or np.any(np.abs(P.sum(axis=1) - 1.0) > tol):
        raise ChainError("matrix is not row-stochastic")
    return P


def dobrushin(P) -> float:
    """Half the largest L1 distance between two rows of ``P``."""
    P = np.asarray(P, dtype=float)
    best = 0.0
    for i in range(P.shape[0]):
        best = max(best, float(np.abs(P[i] - P[i:]).sum(axis=1).max()))
    return min(1.0, 0.5 * best)  # rounding can push disjoint rows past 1


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def stationary_on(P: np.ndarray, states) -> np.ndarray:
    """Invariant law of ``P`` restricted to a closed class ``states``.

    Solves ``pi (I - P_CC) = 0`` with the last balance equation replaced by
    ``sum pi = 1``.  Returns a full-length vector that vanishes off the class.
    """
    states = np.asarray(sorted(states), dtype=int)
    Q = P[np.ix_(states, states)]
    k = len(states)
    M = (np.eye(k) - Q).T
    M[-1] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    sol = np.linalg.solve(M, rhs)
    out = np.zeros(P.shape[0])
    out[states] = np.clip(sol, 0.0, None)
    return out / out.sum()


def period_of(P: np.ndarray, states) -> int:
    """Period of an irreducible class, from BFS levels."""
    states = sorted(states)
    inside = set(states)
    level = {states[0]: 0}
    queue = [states[0]]
    d = 0
    while queue:
        nxt = []
        for x in queue:
            for y in np.flatnonzero(P[x] > EDGE_TOL):
                y = int(y)
                if y not in inside:
                    continue
                if y in level:
                    d = gcd(d, level[x] + 1 - level[y])
                else:
                    level[y] = level[x] + 1
                    nxt.append(y)
        queue = nxt
    return abs(d) if d else 1


@dataclass(eq=False)
class ChainReport:
    recurrent_classes: list[list[int]]
    transient: list[int]
    stationary: list[np.ndarray]
    unichain: bool
    alpha: float
    periods: list[int]

    @property
    def aperiodic(self) -> bool:
        return all(p == 1 for p in self.periods)

    def to_dict(self) -> dict:
        return {
            "recurrent_classes": self.recurrent_classes,
            "transient": self.transient,
            "stationary": [s.tolist() for s in self.stationary],
            "unichain": self.unichain,
            "alpha": self.alpha,
            "periods": self.periods,
        }


def analyze_chain(P) -> ChainReport:
    """Recurrent classes, invariant laws and Dobrushin coefficient of ``P``."""
    P = check_stochastic(P)
    adj = (P > EDGE_TOL).astype(int)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    classes, transient = [], []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        leaves = np.any(adj[members][:, labels != c])
        if leaves:
            transient.extend(int(s) for s in members)
        else:
            classes.append([int(s) for s in members])
    classes.sort(key=lambda c: c[0])
    return ChainReport(
        recurrent_classes=classes,
        transient=sorted(transient),
        stationary=[stationary_on(P, c) for c in classes],
        unichain=len(classes) == 1,
        alpha=dobrushin(P),
        periods=[period_of(P, c) for c in classes],
    )


def absorption_probabilities(P, report: ChainReport | None = None) -> np.ndarray:
    """``(n_states, n_classes)`` probabilities of ending in each recurrent class."""
    P = np.asarray(P, dtype=float)
    report = report or analyze_chain(P)
    n = P.shape[0]
    out = np.zeros((n, len(report.recurrent_classes)))
    for i, cls in enumerate(report.recurrent_classes):
        out[cls, i] = 1.0
    tr = report.transient
    if tr:
        Q = P[np.ix_(tr, tr)]
        R = np.stack([P[tr][:, cls].sum(axis=1) for cls in report.recurrent_classes], axis=1)
        out[tr] = np.linalg.solve(np.eye(len(tr)) - Q, R)
    return out


def ergodic_decomposition(mu: OccupationMeasure) -> list[tuple[float, OccupationMeasure]]:
    """Write an invariant occupation measure as a mixture over recurrent classes."""
    if invariance_residual(mu) > INVARIANCE_TOL:
        raise ValueError("occupation measure is not invariant")
    m = mu.model
    _, gamma, _ = disintegrate(mu)
    report = analyze_chain(policy_kernel(m, gamma))
    parts = []
    for cls in report.recurrent_classes:
        mask = np.isin(m.pair_state, cls)
        w = float(mu.values[mask].sum())
        if w <= 0:
            continue
        vals = np.where(mask, mu.values, 0.0)
        parts.append((w, OccupationMeasure(m, vals / w)))
    return parts


@dataclass(eq=False)
class ReturnTimeStats:
    state: int
    expected_return: float
    visits: np.ndarray
    hitting_times: np.ndarray
    kac_error: float


def return_time_stats(P, a: int) -> ReturnTimeStats:
    """Expected return time to ``a`` and expected visits per excursion.

    ``hitting_times[x]`` is the mean time to reach ``a`` from ``x`` (``inf``
    outside ``a``'s class); ``visits[x] / expected_return`` reproduces the
    invariant law, and ``kac_error`` is the largest deviation from it.
    """
    P = check_stochastic(P)
    report = analyze_chain(P)
    cls = next((c for c in report.recurrent_classes if a in c), None)
    if cls is None:
        raise ChainError(f"state {a} is transient")
    n = P.shape[0]
    rest = [x for x in cls if x != a]
    h = np.full(n, np.inf)
    h[a] = 0.0
    g = np.zeros(n)
    g[a] = 1.0
    if rest:
        Q = P[np.ix_(rest, rest)]
        I = np.eye(len(rest))
        h[rest] = np.linalg.solve(I - Q, np.ones(len(rest)))
        g[rest] = np.linalg.solve((I - Q).T, P[a, rest])
    expected = 1.0 + float(P[a, rest] @ h[rest]) if rest else 1.0
    pi = report.stationary[report.recurrent_classes.index(cls)]
    kac = float(np.abs(g / expected - pi).max())
    return ReturnTimeStats(a, expected, g, h, kac)
