"""Stationary policies and occupation measures on the admissible pairs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FiniteMdp

PROB_TOL = 1e-9


def _state_sum(m: FiniteMdp, pair_values: np.ndarray) -> np.ndarray:
    out = np.zeros(m.n_states)
    np.add.at(out, m.pair_state, pair_values)
    return out


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Stochastic kernel from states to admissible actions.

    ``rows[x][j]`` is the probability of action ``model.admissible[x][j]``.
    """

    model: FiniteMdp
    rows: list

    def __post_init__(self):
        m = self.model
        if len(self.rows) != m.n_states:
            raise ValueError("one policy row per state is required")
        rows = []
        for x, r in enumerate(self.rows):
            r = np.asarray(r, dtype=float).reshape(-1)
            if r.size != len(m.admissible[x]):
                raise ValueError(f"policy row at x={x} has {r.size} entries, expected {len(m.admissible[x])}")
            if np.any(r < -PROB_TOL) or abs(r.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"policy row at x={x} is not a probability vector")
            r.flags.writeable = False
            rows.append(r)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def deterministic(cls, m: FiniteMdp, actions) -> "StationaryPolicy":
        """Dirac policy choosing action index ``actions[x]`` at each state."""
        rows = []
        for x, u in enumerate(actions):
            if u not in m.admissible[x]:
                raise ValueError(f"action {u} not admissible at x={x}")
            r = np.zeros(len(m.admissible[x]))
            r[m.admissible[x].index(u)] = 1.0
            rows.append(r)
        return cls(m, rows)

    @classmethod
    def uniform(cls, m: FiniteMdp) -> "StationaryPolicy":
        return cls(m, [np.full(len(a), 1.0 / len(a)) for a in m.admissible])

    @classmethod
    def from_pair_probs(cls, m: FiniteMdp, probs) -> "StationaryPolicy":
        probs = np.asarray(probs, dtype=float)
        off = m.state_offsets
        return cls(m, [probs[off[x]:off[x + 1]] for x in range(m.n_states)])

    @property
    def pair_probs(self) -> np.ndarray:
        """Flat vector ``gamma(u|x)`` over ``model.pairs``."""
        return np.concatenate(self.rows)

    def prob(self, x: int, u: int) -> float:
        acts = self.model.admissible[x]
        return float(self.rows[x][acts.index(u)]) if u in acts else 0.0

    def is_dirac(self, x: int) -> bool:
        return bool(self.rows[x].max() >= 1.0 - PROB_TOL)

    @property
    def is_deterministic(self) -> bool:
        return all(self.is_dirac(x) for x in range(self.model.n_states))

    def actions(self) -> list[int]:
        """Most likely action at each state (the action of a Dirac row)."""
        return [self.model.admissible[x][int(np.argmax(r))] for x, r in enumerate(self.rows)]

    def dense(self) -> np.ndarray:
        """``(n_states, n_actions)`` array with zeros at inadmissible actions."""
        out = np.zeros((self.model.n_states, self.model.n_actions))
        for x, r in enumerate(self.rows):
            out[x, self.model.admissible[x]] = r
        return out


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """Probability vector on the admissible pairs of ``model``."""

    model: FiniteMdp
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.model.n_pairs:
            raise ValueError(f"expected {self.model.n_pairs} values, got {v.size}")
        if np.any(v < -PROB_TOL) or abs(v.sum() - 1.0) > PROB_TOL:
            raise ValueError("occupation measure must be a probability vector")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def point_mass(cls, m: FiniteMdp, x: int, u: int) -> "OccupationMeasure":
        v = np.zeros(m.n_pairs)
        v[m.pair_index[(x, u)]] = 1.0
        return cls(m, v)

    def state_marginal(self) -> np.ndarray:
        return _state_sum(self.model, self.values)

    def image(self) -> np.ndarray:
        """One-step state law ``sum mu(x,u) T(.|x,u)``."""
        return self.values @ self.model.pair_kernel

    def __getitem__(self, xu: tuple[int, int]) -> float:
        i = self.model.pair_index.get(tuple(xu))
        return 0.0 if i is None else float(self.values[i])

    def l1(self, other: "OccupationMeasure") -> float:
        return float(np.abs(self.values - other.values).sum())
