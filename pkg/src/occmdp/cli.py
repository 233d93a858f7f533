"""Command-line entry point.

Exit codes: 0 success, 1 bad input, 2 a structural hypothesis failed
(contraction coefficient >= 1, RVI non-convergence, set not small, ...).
Output files are staged in a temporary directory and moved into place only
when the command succeeds.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .chain import ChainError, analyze_chain
from .denseness import DensenessSweep, HypothesisError, run_denseness_sweep, uniform_rows
from .measures import StationaryPolicy
from .model import ContinuousModel1D, FiniteMdp, ModelError, discretize, load_model, validate_model
from .occupation import expected_cost, solve_occupation_lp
from .policy import disintegrate, policy_kernel
from .simulate import cost_limits, simulate_path
from .split import atom_kac, build_split_chain, find_minorization
from .verify import acoi_residual, oracle_sweep, relative_value_iteration, strategic_polytope

log = logging.getLogger("occmdp")

COMMANDS = ("solve", "analyze", "simulate", "split", "strategic", "rvi", "dense", "oracle-sweep")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    seed: int = 0
    horizon: int | None = None
    tol: float = 1e-9
    output: str = "."
    trace: bool = False
    refinements: list = field(default_factory=lambda: [1, 2, 4, 8])
    small_set: list | None = None
    policy: str | None = None
    actions: list | None = None
    initial_state: int = 0
    seeds: int = 100
    delta: float | None = None
    max_iter: int = 100_000


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="occmdp", description="Average-cost MDPs via occupation-measure linear programs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with defaults; command-line flags take precedence")
    p.add_argument("--model", help="model JSON file (finite or continuous)")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--output", help="directory for output files (default: current directory)")
    p.add_argument("--trace", action="store_true", default=None, help="simulate: also write the path")
    p.add_argument("--refinements", type=_int_list, help="dense: refinement factors, e.g. 1,2,4,8")
    p.add_argument("--small-set", type=_int_list, dest="small_set", help="split: states of the small set")
    p.add_argument("--policy", help="policy CSV (x,u,prob or x,action)")
    p.add_argument("--actions", type=_int_list, help="deterministic policy inline, e.g. 0,1")
    p.add_argument("--initial-state", type=int, dest="initial_state")
    p.add_argument("--seeds", type=int, help="oracle-sweep: number of instances")
    p.add_argument("--delta", type=float, help="split: minorization constant (default: full mass)")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv) -> RunConfig:
    """Build a validated :class:`RunConfig` from ``argv`` and an optional JSON config."""
    ns = _parser().parse_args(argv)
    if ns.verbose:
        logging.basicConfig(level=logging.DEBUG)
    values = {}
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)} - {"command"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(data)
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if f.name != "command" and v is not None:
            values[f.name] = v
    try:
        for key in ("refinements", "small_set", "actions"):
            if values.get(key) is not None:
                values[key] = _int_list(values[key])
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(command=ns.command, **values)

    if cfg.command != "oracle-sweep" and not cfg.model:
        raise ConfigError(f"{cfg.command} needs --model")
    if cfg.policy and cfg.actions:
        raise ConfigError("--policy and --actions are mutually exclusive")
    if cfg.trace and cfg.command != "simulate":
        raise ConfigError("--trace only applies to simulate")
    if cfg.horizon is not None and cfg.horizon < 1:
        raise ConfigError("--horizon must be positive")
    if cfg.tol <= 0 or cfg.seeds < 1 or cfg.max_iter < 1:
        raise ConfigError("--tol, --seeds and --max-iter must be positive")
    if not cfg.refinements or any(k < 1 for k in cfg.refinements):
        raise ConfigError("--refinements must be positive integers")
    return cfg


# -- command implementations; each writes into ``out`` and returns stdout text


def _finite(cfg: RunConfig) -> FiniteMdp:
    m = load_model(cfg.model)
    if isinstance(m, ContinuousModel1D):
        m = discretize(m)
    problems = validate_model(m)
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems))
    return m


def _policy(cfg: RunConfig, m: FiniteMdp, default: str = "optimal") -> StationaryPolicy:
    if cfg.policy:
        return io.read_policy(cfg.policy, m)
    if cfg.actions is not None:
        if len(cfg.actions) != m.n_states:
            raise ConfigError(f"--actions needs {m.n_states} entries")
        try:
            return StationaryPolicy.deterministic(m, cfg.actions)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if default == "uniform":
        return StationaryPolicy.uniform(m)
    mu, _ = solve_occupation_lp(m)
    return disintegrate(mu)[1]


def _dirac(n, x):
    if not 0 <= x < n:
        raise ConfigError("--initial-state out of range")
    v = np.zeros(n)
    v[x] = 1.0
    return v


def cmd_solve(cfg, out):
    m = _finite(cfg)
    mu, sol = solve_occupation_lp(m)
    pi, gamma, frac = disintegrate(mu)
    delta = expected_cost(mu)
    io.occupation_csv(out / "occupation.csv", mu)
    io.policy_csv(out / "policy.csv", gamma)
    if gamma.is_deterministic:
        io.actions_csv(out / "policy_actions.csv", gamma)
    io.write_json(out / "solve.json", {
        "delta_star": delta,
        "deterministic_fraction": frac,
        "state_marginal": pi,
        "actions": gamma.actions(),
        "lp_iterations": sol.iterations,
        "redundant_rows": sol.redundant_rows,
    })
    return f"delta_star={round(delta, 12)!r} deterministic_fraction={round(frac, 12)!r}"


def cmd_analyze(cfg, out):
    m = _finite(cfg)
    gamma = _policy(cfg, m)
    rep = analyze_chain(policy_kernel(m, gamma))
    io.write_json(out / "analyze.json", rep.to_dict())
    return io.dumps(rep.to_dict()).strip()


def cmd_simulate(cfg, out):
    m = _finite(cfg)
    gamma = _policy(cfg, m)
    T = cfg.horizon or 1000
    x0 = cfg.initial_state
    nu0 = _dirac(m.n_states, x0)
    lim = cost_limits(m, gamma, nu0, T)
    io.write_csv(out / "prefix.csv", ["T", "expected_avg_cost", "residual"],
                 [(t + 1, a, r) for t, (a, r) in enumerate(zip(lim.averages, lim.residuals))])
    run = simulate_path(m, gamma, x0, T, cfg.seed)
    if cfg.trace:
        io.write_csv(out / "trace.csv", ["t", "x", "u", "c"],
                     [(t, x, u, c) for t, (x, u, c) in enumerate(zip(run.states, run.actions, run.costs))])
    io.write_json(out / "simulate.json", {
        "seed": cfg.seed,
        "horizon": T,
        "pathwise_average_cost": run.average_cost,
        "expected_average_cost": float(lim.averages[-1]),
        "limsup_proxy": lim.limsup_proxy,
        "liminf_proxy": lim.liminf_proxy,
        "alpha": lim.alpha,
    })
    return f"pathwise_average_cost={run.average_cost!r} expected_average_cost={float(lim.averages[-1])!r}"


def cmd_split(cfg, out):
    m = _finite(cfg)
    gamma = _policy(cfg, m, default="uniform")
    P = policy_kernel(m, gamma)
    C = cfg.small_set if cfg.small_set is not None else list(range(m.n_states))
    if any(not 0 <= x < m.n_states for x in C):
        raise ConfigError("--small-set state out of range")
    nu, mass = find_minorization(P, C)
    if mass <= 0:
        raise HypothesisError(f"set {C} is not 1-small under this policy (minorization mass 0)")
    sc = build_split_chain(P, C, nu, cfg.delta)
    kac = atom_kac(sc)
    report = {
        "split_chain": sc.to_dict(),
        "minorization_mass": mass,
        "projection_error": float(np.abs(sc.project() - P).max()),
        "atom_rows_spread": sc.atom_rows_spread(),
        "atom_expected_return": kac.expected_return,
        "atom_invariant_mass": kac.atom_mass,
        "kac_error": kac.kac_error,
        "invariant_projection_error": kac.projection_error,
    }
    io.write_json(out / "split.json", report)
    return f"minorization_mass={mass!r} atom_expected_return={kac.expected_return!r} kac_error={kac.kac_error!r}"


def cmd_strategic(cfg, out):
    m = _finite(cfg)
    T = cfg.horizon or 2
    nu0 = _dirac(m.n_states, cfg.initial_state)
    poly = strategic_polytope(m, nu0, T)
    cert = poly.certify_vertices(trials=100, seed=cfg.seed)
    gamma = _policy(cfg, m, default="uniform")
    w, err = poly.represent(poly.measure(gamma))
    io.write_json(out / "strategic.json", {
        "horizon": T,
        "n_trajectories": len(poly.trajectories),
        "n_vertices": len(poly.vertices),
        "vertex_trials": cert.trials,
        "vertex_matched": cert.matched,
        "vertex_max_distance": cert.max_distance,
        "mixture_weights": w,
        "mixture_l1_error": err,
    })
    if not cert.ok:
        raise HypothesisError(f"{cert.trials - cert.matched} LP vertices are not deterministic-policy measures")
    return f"n_vertices={len(poly.vertices)} vertex_matched={cert.matched}/{cert.trials} mixture_l1_error={err!r}"


def cmd_rvi(cfg, out):
    m = _finite(cfg)
    res = relative_value_iteration(m, max_iter=cfg.max_iter)
    if not res.converged:
        raise HypothesisError(f"relative value iteration failed: {res.message}")
    acoi = acoi_residual(m, res.policy, res.g, res.h, tol=cfg.tol)
    io.write_json(out / "rvi.json", {
        "g": res.g,
        "h": res.h,
        "iterations": res.iterations,
        "actions": res.policy.actions(),
        "acoi_residual": acoi.residual,
        "acoi_certified_mass": acoi.certified_mass,
    })
    return f"g={round(res.g, 12)!r} iterations={res.iterations}"


def cmd_dense(cfg, out):
    cm = load_model(cfg.model)
    if not isinstance(cm, ContinuousModel1D):
        raise ConfigError("dense needs a continuous model file")
    sweep = run_denseness_sweep(DensenessSweep(cm, uniform_rows(cm), cfg.refinements))
    io.write_csv(out / "dense.csv", ["k", "alpha", "tv_gap", "cost_gap", "bound_rhs"],
                 [(r.k, r.alpha, r.tv_gap, r.cost_gap, r.bound_rhs) for r in sweep.records])
    bad = [r.k for r in sweep.records if not r.bound_holds]
    if bad:
        raise HypothesisError(f"TV bound violated at refinements {bad}")
    return "\n".join(f"k={r.k} cost_gap={r.cost_gap!r} tv_gap={r.tv_gap!r}" for r in sweep.records)


def cmd_oracle_sweep(cfg, out):
    rows = oracle_sweep(range(cfg.seed, cfg.seed + cfg.seeds))
    io.write_csv(out / "oracle.csv", ["instance_seed", "lp_value", "brute_value", "rvi_value", "max_gap"],
                 [(r.seed, r.lp_value, r.brute_value, r.rvi_value, r.max_gap) for r in rows])
    return f"instances={len(rows)} max_gap={max(r.max_gap for r in rows)!r}"


HANDLERS = {
    "solve": cmd_solve,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "split": cmd_split,
    "strategic": cmd_strategic,
    "rvi": cmd_rvi,
    "dense": cmd_dense,
    "oracle-sweep": cmd_oracle_sweep,
}


def dispatch(cfg: RunConfig) -> int:
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".occmdp-", dir=outdir))
    try:
        try:
            text = HANDLERS[cfg.command](cfg, stage)
        except HypothesisError as exc:
            print(f"hypothesis failure: {exc}", file=sys.stderr)
            return 2
        except (ModelError, ConfigError, ChainError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for f in sorted(stage.iterdir()):
            os.replace(f, outdir / f.name)
        if text:
            print(text)
        return 0
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
