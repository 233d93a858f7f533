"""Finite controlled Markov chains and grid discretization of scalar models.

A :class:`FiniteMdp` stores, for every state ``x``, the list of admissible
action indices ``U(x)`` together with one kernel row ``T(.|x,u)`` and one
running cost ``c(x,u)`` per admissible action.  The admissible pairs
``K = {(x,u) : u in U(x)}`` are enumerated state-major; most other modules
work with vectors indexed by that enumeration (see :attr:`FiniteMdp.pairs`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import ndtr

ROW_SUM_TOL = 1e-9

FAMILIES = ("linear-gaussian", "linear-uniform")


class ModelError(ValueError):
    """Raised for malformed model input."""


@dataclass(frozen=True, eq=False)
class GridInfo:
    """Provenance of a model built by :func:`discretize`."""

    source: "ContinuousModel1D"
    edges: np.ndarray
    midpoints: np.ndarray


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """Finite controlled Markov chain ``(X, U, U(x), T, c)``.

    Parameters
    ----------
    n_states, n_actions : int
    admissible : list of list of int
        ``admissible[x]`` holds the allowed action indices at ``x``.
    kernel : list of ndarray
        ``kernel[x]`` has shape ``(len(admissible[x]), n_states)``.
    cost : list of ndarray
        ``cost[x]`` has shape ``(len(admissible[x]),)``.

    The constructor only normalizes shapes; use :func:`validate_model` to
    check the stochastic and sign invariants.
    """

    n_states: int
    n_actions: int
    admissible: list
    kernel: list
    cost: list
    grid: GridInfo | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ModelError("n_states and n_actions must be positive")
        if not (len(self.admissible) == len(self.kernel) == len(self.cost) == self.n_states):
            raise ModelError("admissible/kernel/cost must have one entry per state")
        adm = [[int(u) for u in acts] for acts in self.admissible]
        ker, cst = [], []
        for x, acts in enumerate(adm):
            rows = np.asarray(self.kernel[x], dtype=float).reshape(len(acts), -1) if acts else np.zeros((0, self.n_states))
            if rows.shape != (len(acts), self.n_states):
                raise ModelError(f"kernel at state {x} has shape {rows.shape}, expected {(len(acts), self.n_states)}")
            c = np.asarray(self.cost[x], dtype=float).reshape(-1)
            if c.shape != (len(acts),):
                raise ModelError(f"cost at state {x} has {c.size} entries, expected {len(acts)}")
            for u in acts:
                if not 0 <= u < self.n_actions:
                    raise ModelError(f"action index {u} at state {x} out of range")
            if len(set(acts)) != len(acts):
                raise ModelError(f"duplicate admissible action at state {x}")
            rows.flags.writeable = False
            c.flags.writeable = False
            ker.append(rows)
            cst.append(c)
        object.__setattr__(self, "admissible", adm)
        object.__setattr__(self, "kernel", ker)
        object.__setattr__(self, "cost", cst)

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        """Admissible pairs ``(x, u)`` in state-major order."""
        return [(x, u) for x, acts in enumerate(self.admissible) for u in acts]

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @cached_property
    def pair_index(self) -> dict[tuple[int, int], int]:
        return {p: i for i, p in enumerate(self.pairs)}

    @cached_property
    def pair_state(self) -> np.ndarray:
        return np.array([x for x, _ in self.pairs], dtype=int)

    @cached_property
    def pair_kernel(self) -> np.ndarray:
        """``(n_pairs, n_states)`` matrix of kernel rows."""
        out = np.vstack(self.kernel)
        out.flags.writeable = False
        return out

    @cached_property
    def pair_cost(self) -> np.ndarray:
        out = np.concatenate(self.cost)
        out.flags.writeable = False
        return out

    @cached_property
    def state_offsets(self) -> np.ndarray:
        """``pairs[state_offsets[x]:state_offsets[x+1]]`` are the pairs of ``x``."""
        return np.concatenate([[0], np.cumsum([len(a) for a in self.admissible])])

    def transition(self, x: int, u: int) -> np.ndarray:
        return self.kernel[x][self.admissible[x].index(u)]

    def c(self, x: int, u: int) -> float:
        return float(self.cost[x][self.admissible[x].index(u)])

    @classmethod
    def from_arrays(cls, kernel, cost, admissible=None) -> "FiniteMdp":
        """Build from dense ``kernel[x, u, y]`` and ``cost[x, u]`` arrays.

        With ``admissible=None`` every action is admissible everywhere.
        """
        kernel = np.asarray(kernel, dtype=float)
        cost = np.asarray(cost, dtype=float)
        n, a, _ = kernel.shape
        if admissible is None:
            admissible = [list(range(a)) for _ in range(n)]
        return cls(
            n_states=n,
            n_actions=a,
            admissible=admissible,
            kernel=[kernel[x, acts] for x, acts in enumerate(admissible)],
            cost=[cost[x, acts] for x, acts in enumerate(admissible)],
        )

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "admissible": [list(a) for a in self.admissible],
            "kernel": [k.tolist() for k in self.kernel],
            "cost": [c.tolist() for c in self.cost],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteMdp":
        try:
            return cls(
                n_states=int(d["n_states"]),
                n_actions=int(d["n_actions"]),
                admissible=d["admissible"],
                kernel=d["kernel"],
                cost=d["cost"],
            )
        except KeyError as exc:
            raise ModelError(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(str(exc)) from None


@dataclass(frozen=True)
class ContinuousModel1D:
    """Scalar model ``X' = a X + b U + W`` on ``[x_lo, x_hi]``.

    ``family`` selects the noise law: ``"linear-gaussian"`` draws
    ``W ~ N(0, sigma^2)``, ``"linear-uniform"`` draws ``W ~ U(-sigma, sigma)``.
    The running cost is ``cost_x * x**2 + cost_u * u**2``.
    """

    family: str
    a: float
    b: float
    sigma: float
    x_lo: float
    x_hi: float
    actions: tuple
    grid: int
    cost_x: float = 1.0
    cost_u: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(float(u) for u in self.actions))
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        if not self.x_lo < self.x_hi:
            raise ModelError("x_lo must be below x_hi")
        if int(self.grid) < 2:
            raise ModelError("grid must be at least 2")
        if not self.actions:
            raise ModelError("action list is empty")

    def noise_cdf(self, z: np.ndarray) -> np.ndarray:
        if self.family == "linear-gaussian":
            return ndtr(z / self.sigma)
        return np.clip((z + self.sigma) / (2.0 * self.sigma), 0.0, 1.0)

    def noise_pdf(self, z: np.ndarray) -> np.ndarray:
        if self.family == "linear-gaussian":
            return np.exp(-0.5 * (z / self.sigma) ** 2) / (self.sigma * np.sqrt(2 * np.pi))
        return np.where(np.abs(z) <= self.sigma, 0.5 / self.sigma, 0.0)

    def with_grid(self, grid: int) -> "ContinuousModel1D":
        d = self.to_dict()
        d["grid"] = int(grid)
        return ContinuousModel1D.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "a": self.a,
            "b": self.b,
            "sigma": self.sigma,
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
            "grid": int(self.grid),
            "actions": list(self.actions),
            "cost_x": self.cost_x,
            "cost_u": self.cost_u,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuousModel1D":
        try:
            return cls(
                family=d["family"],
                a=float(d["a"]),
                b=float(d["b"]),
                sigma=float(d["sigma"]),
                x_lo=float(d["x_lo"]),
                x_hi=float(d["x_hi"]),
                actions=tuple(d["actions"]),
                grid=int(d["grid"]),
                cost_x=float(d.get("cost_x", 1.0)),
                cost_u=float(d.get("cost_u", 1.0)),
            )
        except KeyError as exc:
            raise ModelError(f"missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(str(exc)) from None


def validate_model(m: FiniteMdp) -> list[str]:
    """Return a list of invariant violations; empty means the model is valid."""
    problems = []
    for x, acts in enumerate(m.admissible):
        if not acts:
            problems.append(f"empty admissible set at x={x}")
        for j, u in enumerate(acts):
            row = m.kernel[x][j]
            if not np.all(np.isfinite(row)):
                problems.append(f"non-finite kernel entry at (x={x},u={u})")
                continue
            if np.any(row < 0):
                problems.append(f"negative kernel entry {row.min():g} at (x={x},u={u})")
            s = row.sum()
            if abs(s - 1.0) > ROW_SUM_TOL:
                problems.append(f"row sum {s:g} at (x={x},u={u})")
            c = m.cost[x][j]
            if not np.isfinite(c):
                problems.append(f"non-finite cost at (x={x},u={u})")
            elif c < 0:
                problems.append(f"negative cost {c:g} at (x={x},u={u})")
    return problems


def discretize(cm: ContinuousModel1D) -> FiniteMdp:
    """Grid approximation of a scalar model on the ``cm.grid`` cell midpoints.

    The row for ``(x_i, u)`` gives cell ``j`` the noise mass of that cell
    around ``a x_i + b u``.  Mass falling outside ``[x_lo, x_hi]`` goes to
    the nearest boundary cell.
    """
    if not cm.sigma > 0:
        raise ModelError("sigma must be positive")
    n = int(cm.grid)
    edges = np.linspace(cm.x_lo, cm.x_hi, n + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    cuts = np.concatenate([[-np.inf], edges[1:-1], [np.inf]])
    acts = np.array(cm.actions)
    means = cm.a * mids[:, None] + cm.b * acts[None, :]
    cdf = cm.noise_cdf(cuts[None, None, :] - means[:, :, None])
    kernel = np.diff(cdf, axis=-1)
    cost = cm.cost_x * mids[:, None] ** 2 + cm.cost_u * acts[None, :] ** 2
    admissible = [list(range(len(acts))) for _ in range(n)]
    return FiniteMdp(
        n_states=n,
        n_actions=len(acts),
        admissible=admissible,
        kernel=list(kernel),
        cost=list(cost),
        grid=GridInfo(source=cm, edges=edges, midpoints=mids),
    )


def majorization_bound(m: FiniteMdp) -> tuple[np.ndarray, float]:
    """Smallest measure dominating every kernel row, and its total mass."""
    nu = m.pair_kernel.max(axis=0)
    return nu, float(nu.sum())


def load_model(path) -> FiniteMdp | ContinuousModel1D:
    """Read a model JSON file; continuous models are recognized by ``family``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ModelError("model file must hold a JSON object")
    if "family" in data:
        return ContinuousModel1D.from_dict(data)
    return FiniteMdp.from_dict(data)


def random_mdp(seed: int, max_states: int = 4, max_actions: int = 3,
               min_entry: float = 0.01, cost_scale: float = 10.0) -> FiniteMdp:
    """Seeded random model with kernel entries ``>= min_entry``.

    Uses ``numpy.random.default_rng(seed)``; draws, in order, the state and
    action counts, the admissible sets, then kernel rows and costs.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_states + 1))
    a = int(rng.integers(1, max_actions + 1))
    admissible = []
    for _ in range(n):
        mask = rng.random(a) < 0.7
        if not mask.any():
            mask[rng.integers(a)] = True
        admissible.append([int(u) for u in np.flatnonzero(mask)])
    kernel, cost = [], []
    for acts in admissible:
        raw = rng.random((len(acts), n)) + 1e-3
        raw /= raw.sum(axis=1, keepdims=True)
        kernel.append(min_entry + (1.0 - min_entry * n) * raw)
        cost.append(cost_scale * rng.random(len(acts)))
    return FiniteMdp(n_states=n, n_actions=a, admissible=admissible, kernel=kernel, cost=cost)


def m2() -> FiniteMdp:
    """Two-state, two-action reference model used throughout the tests."""
    kernel = [[[0.9, 0.1], [0.1, 0.9]], [[0.1, 0.9], [0.9, 0.1]]]
    return FiniteMdp.from_arrays(kernel, [[1.0, 2.0], [4.0, 3.0]])
