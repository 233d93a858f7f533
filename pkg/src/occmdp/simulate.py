"""Seeded path simulation and exact mean empirical occupation measures.

Randomness comes from SplitMix64: the 64-bit state advances by
``0x9E3779B97F4A7C15`` per draw and each output is the state passed through

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

(all arithmetic mod 2**64).  A uniform on ``[0, 1)`` is ``(z >> 11) * 2**-53``.
Each simulated step consumes exactly two uniforms, first for the action and
then for the next state, both by inverse CDF; a random initial state
consumes one uniform before the first step.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .chain import analyze_chain
from .measures import OccupationMeasure, StationaryPolicy
from .model import FiniteMdp
from .policy import policy_cost, policy_kernel

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def u64_block(self, n: int) -> np.ndarray:
        """Next ``n`` outputs at once; equal to ``n`` calls of :meth:`next_u64`."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + n * GOLDEN) & MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _inverse_cdf(cdf: list[float], w: float) -> int:
    return min(bisect_right(cdf, w), len(cdf) - 1)


@dataclass(eq=False)
class SimulationRun:
    seed: int
    horizon: int
    initial: object
    policy: StationaryPolicy
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    occupation: np.ndarray  # pathwise v_T over model.pairs
    average_cost: float

    @property
    def prefix_averages(self) -> np.ndarray:
        return np.cumsum(self.costs) / np.arange(1, self.horizon + 1)


def simulate_path(m: FiniteMdp, gamma: StationaryPolicy, x0, T: int, seed: int) -> SimulationRun:
    """Simulate ``T`` steps from ``x0`` (a state index or a state law)."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    rng = SplitMix64(seed)
    if np.ndim(x0) == 0:
        x = int(x0)
        if not 0 <= x < m.n_states:
            raise ValueError("initial state out of range")
    else:
        law = np.cumsum(np.asarray(x0, dtype=float)).tolist()
        x = _inverse_cdf(law, rng.random())
    w = rng.uniform_block(2 * T).tolist()
    act_cdf = [np.cumsum(r).tolist() for r in gamma.rows]
    ker_cdf = [[np.cumsum(row).tolist() for row in k] for k in m.kernel]
    costs = [c.tolist() for c in m.cost]
    xs = np.empty(T, dtype=int)
    us = np.empty(T, dtype=int)
    cs = np.empty(T)
    for t in range(T):
        j = _inverse_cdf(act_cdf[x], w[2 * t])
        xs[t] = x
        us[t] = m.admissible[x][j]
        cs[t] = costs[x][j]
        x = _inverse_cdf(ker_cdf[x][j], w[2 * t + 1])
    idx = np.array([m.pair_index[(int(a), int(b))] for a, b in zip(xs, us)])
    occ = np.bincount(idx, minlength=m.n_pairs) / T
    return SimulationRun(seed, T, x0, gamma, xs, us, cs, occ, float(cs.mean()))


def mean_empirical_occupation(m: FiniteMdp, gamma: StationaryPolicy, nu0, T: int) -> OccupationMeasure:
    """Exact ``(1/T) sum_{t<T} E[1{(X_t, U_t) = (x, u)}]`` by forward recursion."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    P = policy_kernel(m, gamma)
    nu = np.asarray(nu0, dtype=float).copy()
    acc = np.zeros(m.n_states)
    for _ in range(T):
        acc += nu
        nu = nu @ P
    acc /= T
    return OccupationMeasure(m, acc[m.pair_state] * gamma.pair_probs)


@dataclass(eq=False)
class CostLimits:
    averages: np.ndarray  # a_T for T = 1..T_max
    residuals: np.ndarray  # invariance defect of mu_T for T = 1..T_max
    limsup_proxy: float
    liminf_proxy: float
    alpha: float
    unichain: bool
    stationary_cost: float | None
    mixing_bound: np.ndarray | None  # bound on |a_T - stationary_cost|, alpha < 1 only


def cost_limits(m: FiniteMdp, gamma: StationaryPolicy, nu0, T_max: int) -> CostLimits:
    """Expected prefix averages of the running cost, with tail sup/inf.

    The proxies are the sup and inf of ``a_T`` over ``T`` in the last half
    of the horizon.  On a unichain kernel with Dobrushin coefficient
    ``alpha < 1`` the gap to the stationary cost is bounded by
    ``osc(c) * TV(nu0, pi) * (1 - alpha**T) / ((1 - alpha) T)``.
    """
    if T_max < 1:
        raise ValueError("T_max must be at least 1")
    P = policy_kernel(m, gamma)
    cbar = policy_cost(m, gamma)
    nu = np.asarray(nu0, dtype=float).copy()
    start = nu.copy()
    run_cost = 0.0
    avgs = np.empty(T_max)
    res = np.empty(T_max)
    marg = np.zeros(m.n_states)
    for t in range(T_max):
        run_cost += float(nu @ cbar)
        marg += nu
        nu = nu @ P
        avgs[t] = run_cost / (t + 1)
        res[t] = 0.5 * float(np.abs(marg - marg @ P).sum()) / (t + 1)
    tail = avgs[T_max // 2:]
    report = analyze_chain(P)
    alpha = report.alpha
    stat_cost, bound = None, None
    if report.unichain:
        pi = report.stationary[0]
        stat_cost = float(pi @ cbar)
        if alpha < 1:
            Ts = np.arange(1, T_max + 1)
            osc = float(cbar.max() - cbar.min())
            tv0 = 0.5 * float(np.abs(start - pi).sum())
            bound = osc * tv0 * (1 - alpha**Ts) / ((1 - alpha) * Ts)
    return CostLimits(avgs, res, float(tail.max()), float(tail.min()), alpha, report.unichain, stat_cost, bound)


def asymptotic_std_error(m: FiniteMdp, gamma: StationaryPolicy, T: int) -> float:
    """Standard error of a length-``T`` pathwise average cost (unichain only).

    Uses the Poisson equation of the state-action chain:
    ``sigma^2 = 2 <rho, c~ g> - <rho, c~^2>`` with ``(I - Q + 1 rho) g = c~``.
    """
    P = policy_kernel(m, gamma)
    report = analyze_chain(P)
    if not report.unichain:
        raise ValueError("asymptotic variance needs a unichain kernel")
    pi = report.stationary[0]
    probs = gamma.pair_probs
    rho = pi[m.pair_state] * probs
    Q = m.pair_kernel[:, m.pair_state] * probs[None, :]
    ct = m.pair_cost - rho @ m.pair_cost
    g = np.linalg.solve(np.eye(m.n_pairs) - Q + np.outer(np.ones(m.n_pairs), rho), ct)
    var = 2.0 * float(rho @ (ct * g)) - float(rho @ ct**2)
    return float(np.sqrt(max(var, 0.0) / T))


__all__ = [
    "CostLimits",
    "SimulationRun",
    "SplitMix64",
    "asymptotic_std_error",
    "cost_limits",
    "mean_empirical_occupation",
    "simulate_path",
]
