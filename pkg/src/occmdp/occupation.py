"""Occupation-measure linear program and related measure operations."""
from __future__ import annotations

import numpy as np

from .lp import LpProblem, LpSolution, solve_lp
from .measures import OccupationMeasure, StationaryPolicy
from .model import FiniteMdp, ModelError, validate_model
from .policy import policy_kernel

INVARIANCE_TOL = 1e-8


def build_occupation_lp(m: FiniteMdp) -> LpProblem:
    """LP over admissible pairs: ``n_states`` balance rows, then normalization.

    Balance row ``y`` reads ``sum_u mu(y,u) - sum_{x,u} mu(x,u) T(y|x,u) = 0``.
    The balance rows sum to zero, so one of them is always redundant.
    """
    problems = validate_model(m)
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems))
    n, k = m.n_states, m.n_pairs
    A = np.zeros((n + 1, k))
    A[m.pair_state, np.arange(k)] = 1.0
    A[:n] -= m.pair_kernel.T
    A[n] = 1.0
    b = np.zeros(n + 1)
    b[n] = 1.0
    return LpProblem(c=m.pair_cost.copy(), A=A, b=b)


def solve_occupation_lp(m: FiniteMdp) -> tuple[OccupationMeasure, LpSolution]:
    """Optimal invariant occupation measure and the raw LP solution."""
    sol = solve_lp(build_occupation_lp(m))
    if not sol.optimal:
        raise RuntimeError(f"occupation LP returned status {sol.status}")
    x = np.clip(sol.x, 0.0, None)
    return OccupationMeasure(m, x / x.sum()), sol


def invariance_residual(mu: OccupationMeasure) -> float:
    """Total-variation gap between the state marginal and its one-step image."""
    return 0.5 * float(np.abs(mu.state_marginal() - mu.image()).sum())


def expected_cost(mu: OccupationMeasure) -> float:
    return float(mu.values @ mu.model.pair_cost)


def occupation_of_policy(m: FiniteMdp, gamma: StationaryPolicy, pi) -> OccupationMeasure:
    """``mu(x,u) = pi(x) gamma(u|x)`` for a ``gamma``-invariant state law ``pi``."""
    pi = np.asarray(pi, dtype=float)
    P = policy_kernel(m, gamma)
    defect = float(np.abs(pi @ P - pi).sum())
    if defect > INVARIANCE_TOL:
        raise ValueError(f"state law is not invariant for the policy (L1 defect {defect:.3g})")
    return OccupationMeasure(m, pi[m.pair_state] * gamma.pair_probs)


def mix_occupations(mu1: OccupationMeasure, mu2: OccupationMeasure, kappa: float) -> OccupationMeasure:
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie strictly between 0 and 1")
    if mu1.model.pairs != mu2.model.pairs:
        raise ValueError("measures live on different models")
    return OccupationMeasure(mu1.model, kappa * mu1.values + (1 - kappa) * mu2.values)


def occupation_rows(mu: OccupationMeasure) -> list[tuple[int, int, float]]:
    """``(x, u, mass)`` rows for CSV export."""
    return [(x, u, float(v)) for (x, u), v in zip(mu.model.pairs, mu.values)]
