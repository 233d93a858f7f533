"""Small sets, the split chain, and return-time decomposition of randomized policies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainError, analyze_chain, check_stochastic, return_time_stats
from .measures import OccupationMeasure, StationaryPolicy
from .model import FiniteMdp
from .occupation import occupation_of_policy
from .policy import policy_kernel

FULL_MASS_TOL = 1e-12


def find_minorization(P, C) -> tuple[np.ndarray, float]:
    """Largest ``nu`` with ``P(.|x) >= nu`` for all ``x`` in ``C``; ``C`` is 1-small iff the mass is positive."""
    P = np.asarray(P, dtype=float)
    C = sorted(set(int(x) for x in C))
    if not C:
        raise ValueError("small-set candidate is empty")
    nu = P[C].min(axis=0)
    return nu, float(nu.sum())


@dataclass(eq=False)
class SplitChain:
    """Chain on ``X x {0, 1}``; split state ``(x, level)`` has index ``level * n + x``.

    Level-1 copies of the small set form the pseudo-atom.
    """

    base: np.ndarray
    small_set: list[int]
    nu: np.ndarray
    delta: float
    kernel: np.ndarray

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def index(self, x: int, level: int) -> int:
        return level * self.n + x

    @property
    def atom(self) -> list[int]:
        return [self.index(x, 1) for x in self.small_set]

    @property
    def split_weights(self) -> np.ndarray:
        """``(n, 2)`` probability that base state ``x`` sits at each level."""
        w = np.zeros((self.n, 2))
        w[:, 0] = 1.0
        w[self.small_set, 1] = self.delta
        w[self.small_set, 0] = 1.0 - self.delta
        return w

    def project(self) -> np.ndarray:
        """Base kernel recovered by marginalizing the level bit."""
        n = self.n
        folded = self.kernel[:, :n] + self.kernel[:, n:]
        w = self.split_weights
        return w[:, :1] * folded[:n] + w[:, 1:] * folded[n:]

    def project_measure(self, pi_split) -> np.ndarray:
        pi_split = np.asarray(pi_split)
        return pi_split[: self.n] + pi_split[self.n:]

    def lift_measure(self, pi) -> np.ndarray:
        """Split a base law by the level weights."""
        w = self.split_weights
        pi = np.asarray(pi, dtype=float)
        return np.concatenate([pi * w[:, 0], pi * w[:, 1]])

    def atom_rows_spread(self) -> float:
        """Largest entrywise difference between rows of the atom (0 for a true atom)."""
        rows = self.kernel[self.atom]
        return float(np.abs(rows - rows[0]).max())

    def to_dict(self) -> dict:
        labels = [f"({x},{lv})" for lv in (0, 1) for x in range(self.n)]
        return {
            "states": labels,
            "small_set": self.small_set,
            "nu": self.nu.tolist(),
            "delta": self.delta,
            "atom": [labels[i] for i in self.atom],
            "kernel": self.kernel.tolist(),
        }


def build_split_chain(P, C, nu, delta: float | None = None) -> SplitChain:
    """Nummelin split of ``P`` over the 1-small set ``C`` with minorization ``nu``.

    ``delta`` defaults to ``nu.sum()``.  From ``(x, 0)``, ``x`` in ``C``,
    the chain moves by the residual kernel ``(P(.|x) - delta nu_hat) /
    (1 - delta)``; from the atom it moves by ``nu_hat = nu / nu.sum()``.
    Every landing state in ``C`` is then sent to level 1 with probability
    ``delta``.
    """
    P = check_stochastic(P)
    n = P.shape[0]
    C = sorted(set(int(x) for x in C))
    nu = np.asarray(nu, dtype=float)
    mass = float(nu.sum())
    if not C or mass <= 0:
        raise ValueError("minorization measure must have positive mass on a nonempty set")
    if np.any(P[C] < nu[None, :] - 1e-15):
        raise ValueError("nu does not minorize the rows of C")
    delta = mass if delta is None else float(delta)
    if not 0 < delta <= mass + 1e-15:
        raise ValueError("delta must lie in (0, nu.sum()]")
    if delta >= 1.0 - FULL_MASS_TOL:
        delta = 1.0  # otherwise the residual kernel divides by rounding noise
    nu_hat = nu / mass
    in_c = np.zeros(n)
    in_c[C] = 1.0
    up = delta * in_c

    def land(row):
        return np.concatenate([row * (1.0 - up), row * up])

    S = np.zeros((2 * n, 2 * n))
    for x in range(n):
        S[x] = land(P[x])
        S[n + x] = land(P[x])
    if delta >= 1.0:
        if np.abs(P[C] - nu_hat).max() > FULL_MASS_TOL:
            raise ValueError("delta = 1 needs every row of C equal to nu_hat")
        residual = np.tile(nu_hat, (len(C), 1))
    else:
        residual = (P[C] - delta * nu_hat) / (1.0 - delta)
        residual = np.clip(residual, 0.0, None)
    for i, x in enumerate(C):
        S[x] = land(residual[i])
        S[n + x] = land(nu_hat)
    return SplitChain(P, C, nu, delta, S)


def split_stationary(sc: SplitChain) -> np.ndarray:
    """Invariant law of the split chain (unichain base kernel)."""
    rep = analyze_chain(sc.kernel)
    if not rep.unichain:
        raise ChainError("split chain has several recurrent classes")
    return rep.stationary[0]


def lump_atom(sc: SplitChain) -> tuple[np.ndarray, int, list[int]]:
    """Collapse the atom into one state.

    Exact because all atom rows coincide.  Returns the lumped kernel, the
    index of the atom in it, and the split indices of the remaining states.
    """
    atom = sc.atom
    others = [i for i in range(2 * sc.n) if i not in atom]
    S = sc.kernel
    rows = np.vstack([S[others], S[atom[0]]])
    L = np.hstack([rows[:, others], rows[:, atom].sum(axis=1, keepdims=True)])
    return L, len(others), others


@dataclass(eq=False)
class AtomKac:
    expected_return: float
    atom_mass: float  # invariant mass of the atom
    kac_error: float  # max |visits / E[tau] - invariant law| on the lumped chain
    projection_error: float  # max |projected split invariant law - base invariant law|


def atom_kac(sc: SplitChain) -> AtomKac:
    L, ia, _ = lump_atom(sc)
    stats = return_time_stats(L, ia)
    pi_split = split_stationary(sc)
    base = analyze_chain(sc.base)
    if not base.unichain:
        raise ChainError("base kernel is not unichain")
    proj_err = float(np.abs(sc.project_measure(pi_split) - base.stationary[0]).max())
    return AtomKac(stats.expected_return, float(pi_split[sc.atom].sum()), stats.kac_error, proj_err)


@dataclass(eq=False)
class Decomposition:
    kappa: float
    theta: float
    expected_return: tuple[float, float]
    mu: OccupationMeasure
    mu1: OccupationMeasure
    mu2: OccupationMeasure
    phi1: StationaryPolicy
    phi2: StationaryPolicy
    defect: float
    distinct: bool  # mu1 != mu2
    identical_chains: bool  # phi1 and phi2 induce the same state kernel


def _replace_row(phi: StationaryPolicy, a: int, row) -> StationaryPolicy:
    rows = list(phi.rows)
    rows[a] = np.asarray(row, dtype=float)
    return StationaryPolicy(phi.model, rows)


def _class_law(P, a) -> tuple[np.ndarray, float]:
    stats = return_time_stats(P, a)
    return stats.visits / stats.expected_return, stats.expected_return


def decompose_randomized_policy(m: FiniteMdp, phi: StationaryPolicy, a: int, theta: float | None = None,
                                gamma1=None, gamma2=None) -> Decomposition:
    """Write ``mu_phi`` as ``kappa mu_1 + (1 - kappa) mu_2`` via returns to ``a``.

    ``phi(.|a) = theta gamma1 + (1 - theta) gamma2``.  Without explicit
    ``gamma1``/``gamma2``, ``gamma1`` is the Dirac at the lowest-index
    action charged by ``phi(.|a)`` (``theta`` defaults to its probability)
    and ``gamma2`` is the normalized remainder.  ``phi^i`` uses ``gamma_i``
    at ``a`` and follows ``phi`` elsewhere; ``kappa = theta E1 / (theta E1 +
    (1 - theta) E2)`` with ``Ei`` the mean return time to ``a`` under
    ``phi^i``.
    """
    if phi.is_dirac(a):
        raise ValueError(f"policy is Dirac at state {a}; nothing to decompose")
    row = phi.rows[a]
    if gamma1 is None and gamma2 is None:
        j1 = int(np.flatnonzero(row > 0)[0])
        if theta is None:
            theta = float(row[j1])
        if not theta <= row[j1] + 1e-12:
            raise ValueError(f"theta={theta} exceeds the probability {row[j1]} of the first charged action")
        gamma1 = np.zeros_like(row)
        gamma1[j1] = 1.0
        gamma2 = np.clip(row - theta * gamma1, 0.0, None) / (1.0 - theta)
    elif gamma1 is None or gamma2 is None or theta is None:
        raise ValueError("give theta together with both gamma1 and gamma2")
    gamma1 = np.asarray(gamma1, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    if not 0 < theta < 1:
        raise ValueError("theta must lie strictly between 0 and 1")
    if np.abs(theta * gamma1 + (1 - theta) * gamma2 - row).max() > 1e-9:
        raise ValueError("theta gamma1 + (1 - theta) gamma2 does not reproduce phi(.|a)")

    phi1 = _replace_row(phi, a, gamma1 / gamma1.sum())
    phi2 = _replace_row(phi, a, gamma2 / gamma2.sum())
    P, P1, P2 = (policy_kernel(m, g) for g in (phi, phi1, phi2))
    pi, _ = _class_law(P, a)
    pi1, e1 = _class_law(P1, a)
    pi2, e2 = _class_law(P2, a)
    kappa = theta * e1 / (theta * e1 + (1 - theta) * e2)
    mu = occupation_of_policy(m, phi, pi)
    mu1 = occupation_of_policy(m, phi1, pi1)
    mu2 = occupation_of_policy(m, phi2, pi2)
    defect = float(np.abs(mu.values - kappa * mu1.values - (1 - kappa) * mu2.values).sum())
    return Decomposition(
        kappa=kappa,
        theta=float(theta),
        expected_return=(e1, e2),
        mu=mu,
        mu1=mu1,
        mu2=mu2,
        phi1=phi1,
        phi2=phi2,
        defect=defect,
        distinct=mu1.l1(mu2) > 1e-12,
        identical_chains=bool(np.abs(P1 - P2).max() <= 1e-15),
    )


def equalize_masses(nu1, nu2) -> tuple[np.ndarray, np.ndarray]:
    """Scale the heavier of two minorizing measures down to the lighter mass."""
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    s1, s2 = nu1.sum(), nu2.sum()
    if s1 > s2:
        nu1 = nu1 * (s2 / s1)
    elif s2 > s1:
        nu2 = nu2 * (s1 / s2)
    return nu1, nu2


def shrunk_small_set(C, kappa, K: float) -> list[int]:
    """States of ``C`` whose mixing weight ``kappa[x]`` lies in ``[K, 1 - K]``."""
    if not 0 < K < 0.5:
        raise ValueError("K must lie in (0, 1/2)")
    kappa = np.asarray(kappa, dtype=float)
    return [x for x in sorted(C) if K <= kappa[x] <= 1 - K]


def realization_targets(m: FiniteMdp, phi1: StationaryPolicy, phi2: StationaryPolicy, kappa, C,
                        nu1, nu2, K: float) -> tuple[np.ndarray, np.ndarray]:
    """Target aggregate kernels on ``C`` for the two perturbed policies.

    Rows are ``kappa(x) P1(.|x) + (1 - kappa(x)) P2(.|x) +/- K (nu1 - nu2)``.
    """
    C = sorted(C)
    kappa = np.asarray(kappa, dtype=float)[C][:, None]
    P1, P2 = policy_kernel(m, phi1), policy_kernel(m, phi2)
    base = kappa * P1[C] + (1 - kappa) * P2[C]
    shift = K * (np.asarray(nu1, dtype=float) - np.asarray(nu2, dtype=float))
    return base + shift, base - shift


def check_realization(m: FiniteMdp, psi1: StationaryPolicy, psi2: StationaryPolicy, C, targets,
                      tol: float = 1e-9) -> tuple[bool, float]:
    """Whether ``psi1``/``psi2`` produce the target kernels on ``C``; returns the worst gap too.

    This only verifies candidate policies; it does not search for them.
    """
    C = sorted(C)
    t1, t2 = targets
    err = max(
        float(np.abs(policy_kernel(m, psi1)[C] - t1).max()),
        float(np.abs(policy_kernel(m, psi2)[C] - t2).max()),
    )
    return err <= tol, err
