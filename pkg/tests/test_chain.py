import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occmdp.chain import (
    ChainError,
    analyze_chain,
    dobrushin,
    ergodic_decomposition,
    return_time_stats,
    tv,
)
from occmdp.measures import OccupationMeasure, StationaryPolicy
from occmdp.model import random_mdp
from occmdp.occupation import expected_cost, invariance_residual, occupation_of_policy
from occmdp.policy import policy_kernel


def random_stochastic(rng, n, zero_frac=0.0):
    P = rng.random((n, n)) * (rng.random((n, n)) >= zero_frac)
    P[np.arange(n), rng.integers(0, n, n)] += 0.05  # no empty rows
    return P / P.sum(axis=1, keepdims=True)


def test_two_cycle():
    rep = analyze_chain([[0, 1], [1, 0]])
    assert rep.recurrent_classes == [[0, 1]]
    assert np.allclose(rep.stationary[0], [0.5, 0.5])
    assert rep.alpha == 1.0 and rep.periods == [2]


def test_identical_rows():
    p = np.array([0.0, 0.3, 0.7])
    rep = analyze_chain(np.tile(p, (3, 1)))
    assert rep.recurrent_classes == [[1, 2]] and rep.transient == [0]
    assert rep.alpha == 0.0


def test_m2_under_f01(M2):
    rep = analyze_chain(policy_kernel(M2, StationaryPolicy.deterministic(M2, [0, 1])))
    assert rep.unichain and rep.alpha == 0.0
    assert np.allclose(rep.stationary[0], [0.9, 0.1])


def test_rejects_non_stochastic():
    with pytest.raises(ChainError):
        analyze_chain([[0.5, 0.4], [0, 1]])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 8), st.sampled_from([0.0, 0.5, 0.8]))
def test_report_invariants(seed, n, zero_frac):
    rng = np.random.default_rng(seed)
    P = random_stochastic(rng, n, zero_frac)
    rep = analyze_chain(P)
    seen = [x for c in rep.recurrent_classes for x in c] + rep.transient
    assert sorted(seen) == list(range(n))
    for cls, pi in zip(rep.recurrent_classes, rep.stationary):
        assert set(np.flatnonzero(pi > 0)) == set(cls)
        assert np.abs(pi @ P - pi).max() <= 1e-10
    assert 0.0 <= rep.alpha <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 8), st.sampled_from([0.0, 0.5]))
def test_dobrushin_contraction(seed, n, zero_frac):
    rng = np.random.default_rng(seed)
    P = random_stochastic(rng, n, zero_frac)
    a = dobrushin(P)
    for _ in range(100):
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        assert tv(p @ P, q @ P) <= a * tv(p, q) + 1e-12


def test_return_times_one_state():
    s = return_time_stats([[1.0]], 0)
    assert s.expected_return == 1.0 and s.visits[0] == 1.0


def test_return_times_m2(M2):
    P = policy_kernel(M2, StationaryPolicy.deterministic(M2, [0, 1]))
    s = return_time_stats(P, 0)
    # E_0[tau_0] = 1 + P(0,1) * h(1), h(1) = 1 / P(1,0)
    assert s.expected_return == pytest.approx(1 + 0.1 / 0.9, abs=1e-14)
    assert s.expected_return == pytest.approx(10 / 9, abs=1e-14)
    assert np.allclose(s.visits, [1, 1 / 9])
    assert np.allclose(s.visits / s.expected_return, [0.9, 0.1])


def test_return_times_two_cycle():
    s = return_time_stats([[0, 1], [1, 0]], 0)
    assert s.expected_return == 2.0
    assert s.visits[0] / s.expected_return == 0.5


def test_return_time_rejects_transient():
    with pytest.raises(ChainError):
        return_time_stats([[0.5, 0.5], [0.0, 1.0]], 0)


@pytest.mark.parametrize("seed", range(40))
def test_kac_every_recurrent_state(seed):
    rng = np.random.default_rng(seed)
    P = random_stochastic(rng, int(rng.integers(1, 7)), 0.6)
    rep = analyze_chain(P)
    for cls in rep.recurrent_classes:
        for a in cls:
            assert return_time_stats(P, a).kac_error <= 1e-8


def test_ergodic_decomposition_single_class(M2):
    g = StationaryPolicy.deterministic(M2, [0, 1])
    mu = occupation_of_policy(M2, g, [0.9, 0.1])
    (w, part), = ergodic_decomposition(mu)
    assert w == pytest.approx(1.0) and part.l1(mu) <= 1e-12


def test_ergodic_decomposition_blocks(block_model):
    mu = OccupationMeasure(block_model, [0.15, 0.15, 0.35, 0.35])
    parts = ergodic_decomposition(mu)
    assert [w for w, _ in parts] == pytest.approx([0.3, 0.7], abs=1e-12)
    assert np.allclose(parts[0][1].values, [0.5, 0.5, 0, 0])
    recon = sum(w * p.values for w, p in parts)
    assert np.abs(recon - mu.values).sum() <= 1e-10
    assert all(invariance_residual(p) <= 1e-12 for _, p in parts)
    assert min(expected_cost(p) for _, p in parts) <= expected_cost(mu)


def test_ergodic_decomposition_rejects_non_invariant(M2):
    with pytest.raises(ValueError):
        ergodic_decomposition(OccupationMeasure.point_mass(M2, 0, 1))


@pytest.mark.parametrize("seed", range(20))
def test_ergodic_decomposition_random_multiclass(seed):
    # two random closed blocks plus a transient state feeding both
    rng = np.random.default_rng(seed)
    K = np.zeros((5, 2, 5))
    for u in range(2):
        K[0:2, u, 0:2] = rng.dirichlet(np.ones(2), size=2)
        K[2:4, u, 2:4] = rng.dirichlet(np.ones(2), size=2)
        K[4, u] = rng.dirichlet(np.ones(5))
    from occmdp.model import FiniteMdp

    m = FiniteMdp.from_arrays(K, rng.random((5, 2)))
    g = StationaryPolicy(m, [rng.dirichlet(np.ones(2)) for _ in range(5)])
    rep = analyze_chain(policy_kernel(m, g))
    pi = 0.25 * rep.stationary[0] + 0.75 * rep.stationary[1]
    mu = occupation_of_policy(m, g, pi)
    parts = ergodic_decomposition(mu)
    assert sum(w for w, _ in parts) == pytest.approx(1.0, abs=1e-12)
    recon = sum(w * p.values for w, p in parts)
    assert np.abs(recon - mu.values).sum() <= 1e-10
