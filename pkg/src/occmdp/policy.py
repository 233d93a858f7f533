"""Policy operations: disintegration, induced kernels, mixing and quantization."""
from __future__ import annotations

import numpy as np

from .measures import PROB_TOL, OccupationMeasure, StationaryPolicy, _state_sum
from .model import FiniteMdp, discretize


def disintegrate(mu: OccupationMeasure) -> tuple[np.ndarray, StationaryPolicy, float]:
    """Split ``mu(x,u) = pi(x) gamma(u|x)``.

    Off the support of ``pi`` the policy is the Dirac mass at the first
    admissible action.  The third return value is the ``pi``-mass of states
    where ``gamma`` is Dirac.
    """
    m = mu.model
    pi = mu.state_marginal()
    off = m.state_offsets
    rows = []
    for x in range(m.n_states):
        seg = np.clip(mu.values[off[x]:off[x + 1]], 0.0, None)
        if pi[x] > 0 and seg.sum() > 0:
            rows.append(seg / seg.sum())
        else:
            r = np.zeros(len(m.admissible[x]))
            r[0] = 1.0
            rows.append(r)
    gamma = StationaryPolicy(m, rows)
    dirac = np.array([gamma.is_dirac(x) for x in range(m.n_states)])
    return pi, gamma, float(pi[dirac].sum())


def policy_kernel(m: FiniteMdp, gamma: StationaryPolicy) -> np.ndarray:
    """State transition matrix ``P(y|x) = sum_u gamma(u|x) T(y|x,u)``."""
    if gamma.model is not m and gamma.model.pairs != m.pairs:
        raise ValueError("policy belongs to a different model")
    weighted = gamma.pair_probs[:, None] * m.pair_kernel
    out = np.zeros((m.n_states, m.n_states))
    np.add.at(out, m.pair_state, weighted)
    return out


def policy_cost(m: FiniteMdp, gamma: StationaryPolicy) -> np.ndarray:
    """Per-state expected running cost under ``gamma``."""
    return _state_sum(m, gamma.pair_probs * m.pair_cost)


def mix_policies(g1: StationaryPolicy, g2: StationaryPolicy, theta) -> StationaryPolicy:
    """Row-wise mixture ``theta(x) g1(.|x) + (1 - theta(x)) g2(.|x)``."""
    m = g1.model
    if g2.model.pairs != m.pairs:
        raise ValueError("policies belong to different models")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (m.n_states,))
    if np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("mixing weights must lie in [0, 1]")
    return StationaryPolicy(m, [t * r1 + (1 - t) * r2 for t, r1, r2 in zip(theta, g1.rows, g2.rows)])


def apportion(probs, k: int) -> list[int]:
    """Largest-remainder split of ``k`` slots by ``probs``; ties go to the lower index."""
    probs = np.asarray(probs, dtype=float)
    quota = probs * k
    counts = np.floor(quota + 1e-12).astype(int)
    rem = quota - counts
    left = k - int(counts.sum())
    while left < 0:
        j = min((j for j in range(len(probs)) if counts[j] > 0), key=lambda j: rem[j])
        counts[j] -= 1
        rem[j] += 1.0
        left += 1
    order = sorted(range(len(probs)), key=lambda j: (-round(rem[j], 12), j))
    for j in order[:left]:
        counts[j] += 1
    return [int(c) for c in counts]


def lift_policy(gamma: StationaryPolicy, k: int) -> StationaryPolicy:
    """Piecewise-constant copy of a grid policy on the ``k``-times refined grid."""
    fine = refine_model(gamma.model, k)
    return StationaryPolicy(fine, [gamma.rows[i // k] for i in range(fine.n_states)])


def refine_model(m: FiniteMdp, k: int) -> FiniteMdp:
    if m.grid is None:
        raise ValueError("model is not grid-structured (build it with discretize)")
    if k < 1:
        raise ValueError("refinement factor must be at least 1")
    if k == 1:
        return m
    return discretize(m.grid.source.with_grid(m.n_states * k))


def quantize_policy(gamma: StationaryPolicy, k: int) -> StationaryPolicy:
    """Deterministic policy on the ``k``-times refined grid.

    Each coarse cell's ``k`` subcells receive actions in increasing index
    order with counts from :func:`apportion`, so per-cell action
    frequencies are within ``1/k`` of the coarse row.
    """
    fine = refine_model(gamma.model, k)
    coarse = gamma.model
    actions = []
    for x, row in enumerate(gamma.rows):
        counts = apportion(row, k)
        for j, cnt in enumerate(counts):
            actions.extend([coarse.admissible[x][j]] * cnt)
    return StationaryPolicy.deterministic(fine, actions)


def cell_frequencies(policy: StationaryPolicy, k: int) -> np.ndarray:
    """Per coarse cell action frequencies of a refined policy, ``(N, n_actions)``."""
    d = policy.dense()
    n = d.shape[0] // k
    return d.reshape(n, k, -1).mean(axis=1)


__all__ = [
    "PROB_TOL",
    "StationaryPolicy",
    "apportion",
    "cell_frequencies",
    "disintegrate",
    "lift_policy",
    "mix_policies",
    "policy_cost",
    "policy_kernel",
    "quantize_policy",
    "refine_model",
]
