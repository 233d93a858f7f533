"""Independent oracles: policy enumeration, relative value iteration, ACOI
residuals, and finite-horizon strategic-measure polytopes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .chain import absorption_probabilities, analyze_chain
from .lp import LpProblem, solve_lp
from .measures import StationaryPolicy
from .model import FiniteMdp, random_mdp
from .occupation import solve_occupation_lp, expected_cost
from .policy import policy_cost, policy_kernel

ENUMERATION_LIMIT = 10**6
TRAJECTORY_LIMIT = 10**5


class EnumerationError(ValueError):
    """Raised when an enumeration would exceed its size guard."""


@dataclass(eq=False)
class BruteForceResult:
    value: float
    actions: list[int]
    policy: StationaryPolicy
    n_policies: int


def policy_average_cost(m: FiniteMdp, gamma: StationaryPolicy, nu0=None) -> float:
    """Long-run average cost of ``gamma``.

    With ``nu0=None`` this is the cheapest recurrent class (the best value
    an invariant measure of ``gamma`` can reach); otherwise classes are
    weighted by their absorption probabilities from ``nu0``.
    """
    P = policy_kernel(m, gamma)
    cbar = policy_cost(m, gamma)
    rep = analyze_chain(P)
    class_costs = np.array([pi @ cbar for pi in rep.stationary])
    if nu0 is None:
        return float(class_costs.min())
    absorb = absorption_probabilities(P, rep)
    return float(np.asarray(nu0, dtype=float) @ absorb @ class_costs)


def brute_force_optimum(m: FiniteMdp, nu0=None) -> BruteForceResult:
    """Enumerate deterministic stationary policies and keep the cheapest."""
    count = int(np.prod([len(a) for a in m.admissible], dtype=float))
    if count > ENUMERATION_LIMIT:
        raise EnumerationError(f"{count} deterministic policies exceed the limit {ENUMERATION_LIMIT}")
    best = None
    for actions in itertools.product(*m.admissible):
        gamma = StationaryPolicy.deterministic(m, actions)
        v = policy_average_cost(m, gamma, nu0)
        if best is None or v < best[0] - 1e-12:
            best = (v, list(actions), gamma)
    return BruteForceResult(best[0], best[1], best[2], count)


@dataclass(eq=False)
class RviResult:
    g: float
    h: np.ndarray
    iterations: int
    converged: bool
    policy: StationaryPolicy | None
    message: str = ""


def _bellman(m: FiniteMdp, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = m.pair_cost + m.pair_kernel @ h
    return np.minimum.reduceat(q, m.state_offsets[:-1]), q


def greedy_policy(m: FiniteMdp, h: np.ndarray) -> StationaryPolicy:
    """Deterministic minimizer of ``c + T h``; ties go to the first admissible action."""
    _, q = _bellman(m, h)
    off = m.state_offsets
    actions = []
    for x in range(m.n_states):
        seg = q[off[x]:off[x + 1]]
        j = int(np.flatnonzero(seg <= seg.min() + 1e-12)[0])
        actions.append(m.admissible[x][j])
    return StationaryPolicy.deterministic(m, actions)


def relative_value_iteration(m: FiniteMdp, tol: float = 1e-12, max_iter: int = 100_000,
                             ref_state: int = 0) -> RviResult:
    """Span-seminorm relative value iteration normalized at ``ref_state``.

    Non-convergence (periodic or multichain structure) is reported through
    ``converged=False`` rather than raised.
    """
    h = np.zeros(m.n_states)
    for it in range(1, max_iter + 1):
        th, _ = _bellman(m, h)
        offset = th[ref_state]
        h_new = th - offset
        diff = h_new - h
        h = h_new
        if diff.max() - diff.min() <= tol:
            gamma = greedy_policy(m, h)
            rep = analyze_chain(policy_kernel(m, gamma))
            if not (rep.unichain and rep.aperiodic):
                return RviResult(float(offset), h, it, False, gamma,
                                 "greedy policy is not unichain and aperiodic")
            return RviResult(float(offset), h, it, True, gamma)
    return RviResult(float(offset), h, max_iter, False, None,
                     f"span did not drop below {tol:g} within {max_iter} iterations "
                     "(periodic or multichain structure suspected)")


@dataclass(eq=False)
class AcoiReport:
    residual: np.ndarray
    certified: np.ndarray
    certified_mass: float


def acoi_residual(m: FiniteMdp, gamma: StationaryPolicy, g: float, h, tol: float = 1e-8) -> AcoiReport:
    """``cbar(x) + sum_y P(y|x) h(y) - g - h(x)`` per state.

    A state is certified when the residual is at most ``tol``.  The
    certified mass is taken under the invariant law of ``gamma`` (an equal
    mixture over recurrent classes when there are several).
    """
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ValueError("h must be finite")
    P = policy_kernel(m, gamma)
    res = policy_cost(m, gamma) + P @ h - g - h
    ok = res <= tol
    rep = analyze_chain(P)
    pi = np.mean(rep.stationary, axis=0)
    return AcoiReport(res, ok, float(pi[ok].sum()))


# -- finite-horizon strategic measures ------------------------------------


def trajectories(m: FiniteMdp, T: int) -> list[tuple]:
    """All admissible ``(x0, u0, ..., x_{T-1}, u_{T-1})``."""
    if m.n_pairs**T > TRAJECTORY_LIMIT:
        raise EnumerationError(f"{m.n_pairs}^{T} trajectories exceed the limit {TRAJECTORY_LIMIT}")
    return [tuple(v for p in seq for v in p) for seq in itertools.product(m.pairs, repeat=T)]


def strategic_measure(m: FiniteMdp, policy, nu0, T: int, trajs=None) -> np.ndarray:
    """Trajectory law of a policy over horizon ``T``.

    ``policy`` is a :class:`StationaryPolicy` or a callable mapping a
    history ``(x0, u0, ..., x_t)`` to a probability vector over
    ``admissible[x_t]``.
    """
    trajs = trajs if trajs is not None else trajectories(m, T)
    nu0 = np.asarray(nu0, dtype=float)
    if isinstance(policy, StationaryPolicy):
        rows = policy.rows

        def act(hist):
            return rows[hist[-1]]
    else:
        act = policy
    out = np.empty(len(trajs))
    for i, tr in enumerate(trajs):
        p = nu0[tr[0]]
        for t in range(T):
            if p == 0.0:
                break
            x, u = tr[2 * t], tr[2 * t + 1]
            p *= act(tr[: 2 * t + 1])[m.admissible[x].index(u)]
            if t + 1 < T:
                p *= m.transition(x, u)[tr[2 * t + 2]]
        out[i] = p
    return out


def _deterministic_policies(m: FiniteMdp, nu0, T: int):
    """Yield ``(choices, measure)`` for every deterministic history-dependent policy.

    Only reachable histories get a choice; ``measure`` maps full
    trajectories to probabilities.
    """

    def rec(t, frontier, choices):
        options = [m.admissible[hist[-1]] for hist, _ in frontier]
        for pick in itertools.product(*options):
            ch = dict(choices)
            nxt, done = [], {}
            for (hist, p), u in zip(frontier, pick):
                ch[hist] = u
                if t == T - 1:
                    done[hist + (u,)] = p
                    continue
                row = m.transition(hist[-1], u)
                for y in np.flatnonzero(row > 0):
                    nxt.append((hist + (u, int(y)), p * row[y]))
            if t == T - 1:
                yield ch, done
            else:
                yield from rec(t + 1, nxt, ch)

    start = [((int(x),), float(nu0[x])) for x in np.flatnonzero(np.asarray(nu0) > 0)]
    yield from rec(0, start, {})


@dataclass(eq=False)
class VertexCertificate:
    trials: int
    matched: int
    max_distance: float  # worst L-inf distance from an LP vertex to the nearest policy measure

    @property
    def ok(self) -> bool:
        return self.matched == self.trials


@dataclass(eq=False)
class StrategicPolytope:
    """Deterministic-policy trajectory measures for one model, law and horizon."""

    model: FiniteMdp
    horizon: int
    initial: np.ndarray
    trajectories: list[tuple]
    vertices: np.ndarray  # (n_vertices, n_trajectories)
    policies: list[dict] = field(repr=False)

    def measure(self, policy) -> np.ndarray:
        return strategic_measure(self.model, policy, self.initial, self.horizon, self.trajectories)

    def represent(self, target) -> tuple[np.ndarray, float]:
        """Mixing weights over vertices reproducing ``target``, and the L1 error."""
        target = np.asarray(target, dtype=float)
        V = self.vertices
        A = np.vstack([V.T, np.ones(len(V))])
        b = np.concatenate([target, [1.0]])
        sol = solve_lp(LpProblem(np.zeros(len(V)), A, b))
        if not sol.optimal:
            raise ValueError("target measure is not in the convex hull")
        w = sol.x
        return w, float(np.abs(w @ V - target).sum())

    def realization_lp(self, objective) -> LpProblem:
        """LP over all trajectory laws consistent with the kernel and initial law.

        Its feasible set is the set of strategic measures of all (possibly
        randomized, history-dependent) policies; it is built from the model
        alone, without reference to the deterministic vertices.
        """
        m, T, trajs = self.model, self.horizon, self.trajectories
        rows, rhs = [], []
        n = len(trajs)
        for x0 in range(m.n_states):
            rows.append(np.array([tr[0] == x0 for tr in trajs], dtype=float))
            rhs.append(self.initial[x0])
        for t in range(1, T):
            prefixes = sorted({tr[: 2 * t] for tr in trajs})
            for pre in prefixes:
                ext = np.array([tr[: 2 * t] == pre for tr in trajs], dtype=float)
                xprev, uprev = pre[-2], pre[-1]
                kern = m.transition(xprev, uprev)
                for y in range(m.n_states):
                    row = np.array([tr[: 2 * t + 1] == pre + (y,) for tr in trajs], dtype=float)
                    rows.append(row - kern[y] * ext)
                    rhs.append(0.0)
        return LpProblem(np.asarray(objective, dtype=float).reshape(n), np.array(rows), np.array(rhs))

    def certify_vertices(self, trials: int = 100, seed: int = 0, tol: float = 1e-9) -> VertexCertificate:
        """Optimize random objectives over :meth:`realization_lp` and match each optimum to a vertex."""
        rng = np.random.default_rng(seed)
        matched, worst = 0, 0.0
        for _ in range(trials):
            sol = solve_lp(self.realization_lp(rng.standard_normal(len(self.trajectories))))
            dist = float(np.abs(self.vertices - sol.x[None, :]).max(axis=1).min())
            worst = max(worst, dist)
            matched += dist <= tol
        return VertexCertificate(trials, matched, worst)


def strategic_polytope(m: FiniteMdp, nu0, T: int) -> StrategicPolytope:
    trajs = trajectories(m, T)
    index = {tr: i for i, tr in enumerate(trajs)}
    nu0 = np.asarray(nu0, dtype=float)
    seen, vertices, policies = set(), [], []
    for choices, measure in _deterministic_policies(m, nu0, T):
        vec = np.zeros(len(trajs))
        for tr, p in measure.items():
            vec[index[tr]] = p
        key = tuple(np.round(vec, 12))
        if key in seen:
            continue
        seen.add(key)
        vertices.append(vec)
        policies.append(choices)
    return StrategicPolytope(m, T, nu0, trajs, np.array(vertices), policies)


# -- oracle triangle --------------------------------------------------------


@dataclass(frozen=True)
class OracleRow:
    seed: int
    lp_value: float
    brute_value: float
    rvi_value: float

    @property
    def max_gap(self) -> float:
        return max(abs(self.lp_value - self.brute_value), abs(self.lp_value - self.rvi_value))


def oracle_row(seed: int) -> OracleRow:
    m = random_mdp(seed)
    mu, _ = solve_occupation_lp(m)
    return OracleRow(seed, expected_cost(mu), brute_force_optimum(m).value, relative_value_iteration(m).g)


def oracle_sweep(seeds) -> list[OracleRow]:
    """LP, enumeration and RVI optimal values on :func:`random_mdp` instances, in seed order."""
    return [oracle_row(s) for s in seeds]
