"""CSV/JSON serialization shared by the command-line tool."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .measures import OccupationMeasure, StationaryPolicy
from .model import FiniteMdp, ModelError


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":")) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def occupation_csv(path, mu: OccupationMeasure) -> None:
    write_csv(path, ["x", "u", "mass"], [(x, u, v) for (x, u), v in zip(mu.model.pairs, mu.values)])


def policy_csv(path, gamma: StationaryPolicy) -> None:
    m = gamma.model
    write_csv(path, ["x", "u", "prob"], [(x, u, p) for (x, u), p in zip(m.pairs, gamma.pair_probs)])


def actions_csv(path, gamma: StationaryPolicy) -> None:
    write_csv(path, ["x", "action"], list(enumerate(gamma.actions())))


def read_policy(path, m: FiniteMdp) -> StationaryPolicy:
    """Read ``x,u,prob`` or ``x,action`` CSV into a policy on ``m``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if rows and "action" in rows[0]:
            acts = {int(r["x"]): int(r["action"]) for r in rows}
            return StationaryPolicy.deterministic(m, [acts[x] for x in range(m.n_states)])
        probs = np.zeros(m.n_pairs)
        for r in rows:
            probs[m.pair_index[(int(r["x"]), int(r["u"]))]] = float(r["prob"])
        return StationaryPolicy.from_pair_probs(m, probs)
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelError(f"malformed policy file {path}: {exc}") from None
