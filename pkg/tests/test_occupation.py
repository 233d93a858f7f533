import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occmdp.lp import solve_lp
from occmdp.measures import OccupationMeasure, StationaryPolicy
from occmdp.model import FiniteMdp, random_mdp
from occmdp.occupation import (
    build_occupation_lp,
    expected_cost,
    invariance_residual,
    mix_occupations,
    occupation_of_policy,
    solve_occupation_lp,
)
from occmdp.policy import disintegrate, policy_kernel

from conftest import two_state_invariant


def enumerate_m2(M2):
    """Average cost of each deterministic policy on M2 by the 2x2 closed form."""
    out = {}
    for f in itertools.product([0, 1], repeat=2):
        P = np.array([M2.transition(x, f[x]) for x in range(2)])
        pi = two_state_invariant(P)
        out[f] = (pi, sum(pi[x] * M2.c(x, f[x]) for x in range(2)))
    return out


def test_m2_oracle_values(M2):
    table = enumerate_m2(M2)
    assert table[(0, 1)][1] == pytest.approx(1.2)
    assert min(v for _, v in table.values()) == pytest.approx(1.2)


def test_m2_lp_optimum(M2):
    oracle = min(v for _, v in enumerate_m2(M2).values())
    mu, sol = solve_occupation_lp(M2)
    assert expected_cost(mu) == pytest.approx(oracle, abs=1e-12)
    assert mu[(0, 0)] == pytest.approx(0.9) and mu[(1, 1)] == pytest.approx(0.1)
    assert mu[(0, 1)] == 0 and mu[(1, 0)] == 0
    assert invariance_residual(mu) <= 1e-9
    assert sol.redundant_rows  # one balance row is always redundant


def test_one_state_lp(one_state):
    p = build_occupation_lp(one_state)
    assert p.A.shape == (2, 1)
    assert np.all(p.A[0] == 0)
    assert solve_lp(p).objective == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(10))
def test_balance_rows_sum_to_zero(seed):
    p = build_occupation_lp(random_mdp(seed))
    assert np.abs(p.A[:-1].sum(axis=0)).max() <= 1e-12


def test_occupation_of_deterministic_policy(M2):
    f = StationaryPolicy.deterministic(M2, [0, 1])
    pi = two_state_invariant(policy_kernel(M2, f))
    mu = occupation_of_policy(M2, f, pi)
    assert np.allclose(mu.values, [0.9, 0, 0, 0.1])
    assert invariance_residual(mu) <= 1e-10


def test_occupation_rejects_non_invariant(M2):
    with pytest.raises(ValueError):
        occupation_of_policy(M2, StationaryPolicy.deterministic(M2, [0, 1]), [0.5, 0.5])


def test_one_state_occupation_is_policy_row():
    m = FiniteMdp.from_arrays([[[1.0], [1.0], [1.0]]], [[1.0, 2.0, 3.0]])
    g = StationaryPolicy(m, [[0.2, 0.3, 0.5]])
    assert np.allclose(occupation_of_policy(m, g, [1.0]).values, [0.2, 0.3, 0.5])


def test_uniform_policy_matches_power_iteration(M2):
    g = StationaryPolicy.uniform(M2)
    P = policy_kernel(M2, g)
    nu = np.array([1.0, 0.0])
    while True:
        nxt = nu @ P
        if np.abs(nxt - nu).max() < 1e-12:
            break
        nu = nxt
    mu = occupation_of_policy(M2, g, nu)
    oracle = np.array([nu[x] * g.prob(x, u) for x, u in M2.pairs])
    assert np.abs(mu.values - oracle).max() <= 1e-8


def test_point_mass_residual(M2):
    assert invariance_residual(OccupationMeasure.point_mass(M2, 0, 1)) == pytest.approx(0.9)


def test_point_mass_cost(M2):
    for x, u in M2.pairs:
        assert expected_cost(OccupationMeasure.point_mass(M2, x, u)) == M2.c(x, u)


def test_mix_of_invariant_measures_is_invariant(M2):
    mus = []
    for f in ([0, 1], [0, 0]):
        g = StationaryPolicy.deterministic(M2, f)
        mus.append(occupation_of_policy(M2, g, two_state_invariant(policy_kernel(M2, g))))
    mixed = mix_occupations(mus[0], mus[1], 0.5)
    assert invariance_residual(mixed) <= 1e-10
    assert expected_cost(mixed) == pytest.approx(0.5 * expected_cost(mus[0]) + 0.5 * expected_cost(mus[1]))


def test_mix_idempotent(M2):
    mu, _ = solve_occupation_lp(M2)
    assert np.allclose(mix_occupations(mu, mu, 0.3).values, mu.values)


@pytest.mark.parametrize("kappa", [0.0, 1.0, -0.1, 1.5])
def test_mix_rejects_endpoints(M2, kappa):
    mu, _ = solve_occupation_lp(M2)
    with pytest.raises(ValueError):
        mix_occupations(mu, mu, kappa)


def random_measure(m, rng):
    v = rng.random(m.n_pairs)
    return OccupationMeasure(m, v / v.sum())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.99))
def test_residual_sublinear_under_mixing(seed, kappa):
    m = random_mdp(seed)
    rng = np.random.default_rng(seed)
    a, b = random_measure(m, rng), random_measure(m, rng)
    lhs = invariance_residual(mix_occupations(a, b, kappa))
    assert lhs <= kappa * invariance_residual(a) + (1 - kappa) * invariance_residual(b) + 1e-15


@pytest.mark.parametrize("seed", range(200))
def test_lp_equals_best_deterministic_policy(seed):
    m = random_mdp(seed)
    best = np.inf
    for acts in itertools.product(*m.admissible):
        g = StationaryPolicy.deterministic(m, acts)
        P = policy_kernel(m, g)
        # strictly positive kernel: dense linear solve of pi (I - P) = 0, sum pi = 1
        A = (np.eye(m.n_states) - P).T
        A[-1] = 1.0
        rhs = np.zeros(m.n_states)
        rhs[-1] = 1.0
        pi = np.linalg.solve(A, rhs)
        best = min(best, sum(pi[x] * m.c(x, acts[x]) for x in range(m.n_states)))
    mu, _ = solve_occupation_lp(m)
    assert expected_cost(mu) == pytest.approx(best, abs=1e-6)


@pytest.mark.parametrize("seed", range(30))
def test_disintegrate_roundtrip(seed):
    m = random_mdp(seed)
    rng = np.random.default_rng(seed)
    rows = [rng.dirichlet(np.ones(len(a))) for a in m.admissible]
    g = StationaryPolicy(m, rows)
    P = policy_kernel(m, g)
    A = (np.eye(m.n_states) - P).T
    A[-1] = 1.0
    rhs = np.zeros(m.n_states)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi2, g2, _ = disintegrate(occupation_of_policy(m, g, pi))
    assert np.abs(pi2 - pi).max() <= 1e-15
    for x in range(m.n_states):
        assert np.abs(g2.rows[x] - g.rows[x]).max() <= 1e-12
