"""Approximating a randomized grid policy by quantized deterministic ones."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import analyze_chain, dobrushin, tv
from .measures import StationaryPolicy
from .model import ContinuousModel1D, ModelError, discretize, validate_model
from .policy import lift_policy, policy_cost, policy_kernel, quantize_policy

BOUND_SLACK = 1e-9


class HypothesisError(RuntimeError):
    """A structural hypothesis (contraction, unichain, ...) does not hold."""


@dataclass(frozen=True)
class RefinementRecord:
    k: int
    alpha: float
    tv_gap: float  # TV(pi_f, pi_gamma)
    image_gap: float  # TV(pi_gamma P^f, pi_gamma P^gamma)
    cost_gap: float

    @property
    def bound_rhs(self) -> float:
        return self.image_gap / (1.0 - self.alpha)

    @property
    def bound_holds(self) -> bool:
        return self.tv_gap <= self.bound_rhs + BOUND_SLACK


@dataclass(eq=False)
class DensenessSweep:
    model: ContinuousModel1D
    policy_rows: list  # coarse randomized policy, one row per cell
    refinements: list
    records: list = field(default_factory=list)

    def __post_init__(self):
        ks = list(self.refinements)
        if not ks or any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("refinement factors must be positive and strictly increasing")

    @property
    def cost_gaps(self) -> list[float]:
        return [r.cost_gap for r in self.records]


def _unichain_law(P, what):
    rep = analyze_chain(P)
    if not rep.unichain:
        raise HypothesisError(f"{what} kernel is not unichain")
    return rep.stationary[0]


def run_denseness_sweep(s: DensenessSweep) -> DensenessSweep:
    """Fill ``s.records`` with one :class:`RefinementRecord` per refinement.

    The record's ``alpha`` is the larger Dobrushin coefficient of the two
    induced kernels, so the one-step contraction argument applies to the
    quantized kernel with room to spare.
    """
    coarse = discretize(s.model)
    gamma = StationaryPolicy(coarse, s.policy_rows)
    records = []
    for k in s.refinements:
        lifted = lift_policy(gamma, k)
        fine = lifted.model
        problems = validate_model(fine)
        if problems:
            raise ModelError("; ".join(problems))
        f = quantize_policy(gamma, k)
        Pg = policy_kernel(fine, lifted)
        Pf = policy_kernel(fine, f)
        alpha = max(dobrushin(Pg), dobrushin(Pf))
        if alpha >= 1.0:
            raise HypothesisError(
                f"Dobrushin coefficient {alpha:.6g} >= 1 at refinement {k}: "
                "the contraction hypothesis for deterministic denseness fails")
        pig = _unichain_law(Pg, "randomized-policy")
        pif = _unichain_law(Pf, "quantized-policy")
        cost_g = float(pig @ policy_cost(fine, lifted))
        cost_f = float(pif @ policy_cost(fine, f))
        records.append(RefinementRecord(
            k=k,
            alpha=alpha,
            tv_gap=tv(pif, pig),
            image_gap=tv(pig @ Pf, pig @ Pg),
            cost_gap=abs(cost_f - cost_g),
        ))
    s.records = records
    return s


def uniform_rows(cm: ContinuousModel1D) -> list[np.ndarray]:
    n_act = len(cm.actions)
    return [np.full(n_act, 1.0 / n_act) for _ in range(cm.grid)]
