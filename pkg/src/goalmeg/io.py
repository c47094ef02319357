"""File formats: MDP and policy JSON, trajectory CSV, utility checkpoints, results.

Every reader raises InputError with the offending path (and line, for CSV)
so the CLI can report it and exit with status 1.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .mdp import MdpError, Policy, TabularMdp, TrajectorySet, validate, validate_policy
from .utility_models import ParametricUtility


class InputError(ValueError):
    pass


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc


def _field(data, key, path):
    if not isinstance(data, dict) or key not in data:
        raise InputError(f"{path}: missing field {key!r}")
    return data[key]


def _array(value, key, path, ndim):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: field {key!r} is not a numeric array") from exc
    if arr.ndim != ndim:
        raise InputError(f"{path}: field {key!r} should have {ndim} dimensions, got {arr.ndim}")
    return arr


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


# -- MDPs ---------------------------------------------------------------------

def mdp_to_json(mdp: TabularMdp) -> dict:
    data = {
        "horizon": mdp.horizon,
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "initial_dist": mdp.initial_dist.tolist(),
        "transition": mdp.transition.tolist(),
        "state_utility": mdp.state_utility.tolist(),
    }
    if mdp.step_utility is not None:
        data["step_utility"] = np.asarray(mdp.step_utility).tolist()
    return data


def mdp_from_json(data: dict, path="<mdp>") -> TabularMdp:
    horizon = _field(data, "horizon", path)
    if not isinstance(horizon, int) or isinstance(horizon, bool):
        raise InputError(f"{path}: horizon must be an integer")
    init = _array(_field(data, "initial_dist", path), "initial_dist", path, 1)
    T = _array(_field(data, "transition", path), "transition", path, 3)
    u = _array(_field(data, "state_utility", path), "state_utility", path, 1)
    for key, expected in (("n_states", T.shape[0]), ("n_actions", T.shape[1])):
        if key in data and data[key] != expected:
            raise InputError(f"{path}: {key}={data[key]} disagrees with transition shape {T.shape}")
    step = None
    if data.get("step_utility") is not None:
        step = _array(data["step_utility"], "step_utility", path, 2)
    mdp = TabularMdp(horizon, init, T, u, step)
    try:
        validate(mdp)
    except MdpError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return mdp


def load_mdp(path) -> TabularMdp:
    return mdp_from_json(_load_json(path), path)


def save_mdp(path, mdp: TabularMdp):
    write_json(path, mdp_to_json(mdp))


# -- policies -----------------------------------------------------------------

def policy_to_json(policy: Policy) -> dict:
    return {"policy": policy.probs.tolist()}


def load_policy(path, mdp: TabularMdp | None = None) -> Policy:
    data = _load_json(path)
    probs = _array(_field(data, "policy", path), "policy", path, 3)
    policy = Policy(probs)
    if mdp is not None:
        try:
            validate_policy(mdp, policy)
        except MdpError as exc:
            raise InputError(f"{path}: {exc}") from exc
    return policy


def save_policy(path, policy: Policy):
    write_json(path, policy_to_json(policy))


# -- trajectories -------------------------------------------------------------

TRAJECTORY_HEADER = ("episode", "t", "state", "action")


def load_trajectories(path, mdp: TabularMdp) -> TrajectorySet:
    """Reads ``episode,t,state,action`` rows; every episode must cover t = 0..n-1."""
    path = Path(path)
    n = mdp.horizon
    episodes: dict[int, dict[int, tuple[int, int]]] = {}
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise InputError(f"{path}:1: expected header {','.join(TRAJECTORY_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ep, t, s, a = (int(x) for x in row)
            except ValueError as exc:
                raise InputError(f"{path}:{line_no}: expected four integers, got {row}") from exc
            if not 0 <= t < n:
                raise InputError(f"{path}:{line_no}: timestep {t} outside 0..{n - 1}")
            if not 0 <= s < mdp.n_states or not 0 <= a < mdp.n_actions:
                raise InputError(f"{path}:{line_no}: state {s} or action {a} out of range")
            steps = episodes.setdefault(ep, {})
            if t in steps:
                raise InputError(f"{path}:{line_no}: duplicate timestep {t} in episode {ep}")
            steps[t] = (s, a)
    if not episodes:
        raise InputError(f"{path}: no trajectories")
    keys = sorted(episodes)
    states = np.zeros((len(keys), n), dtype=int)
    actions = np.zeros((len(keys), n), dtype=int)
    for i, ep in enumerate(keys):
        steps = episodes[ep]
        if len(steps) != n:
            raise InputError(f"{path}: episode {ep} has {len(steps)} steps, horizon is {n}")
        for t, (s, a) in steps.items():
            states[i, t], actions[i, t] = s, a
    return TrajectorySet(states, actions)


def save_trajectories(path, traj: TrajectorySet):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for ep in range(traj.states.shape[0]):
            for t in range(traj.states.shape[1]):
                writer.writerow([ep, t, int(traj.states[ep, t]), int(traj.actions[ep, t])])


# -- utility checkpoints ------------------------------------------------------

def load_utility(path, mdp: TabularMdp | None = None):
    """Either a bare ``{"state_utility": [...]}`` array or a model checkpoint.

    Returns a state-utility array of shape (S,).
    """
    data = _load_json(path)
    if isinstance(data, dict) and "state_utility" in data:
        u = _array(data["state_utility"], "state_utility", path, 1)
    elif isinstance(data, dict) and "kind" in data:
        try:
            u = ParametricUtility.from_json(data).evaluate_all()
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{path}: bad utility checkpoint ({exc})") from exc
    else:
        raise InputError(f"{path}: expected a state_utility array or a model checkpoint")
    if mdp is not None and u.shape != (mdp.n_states,):
        raise InputError(f"{path}: utility covers {u.shape[0]} states, MDP has {mdp.n_states}")
    if not np.all(np.isfinite(u)):
        raise InputError(f"{path}: utility contains non-finite values")
    return u


def save_checkpoint(path, model: ParametricUtility):
    write_json(path, model.to_json())


# -- results ------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def result_to_json(result, algorithm: str, options) -> dict:
    data = result.to_dict()
    data["algorithm"] = algorithm
    data["options"] = dict(vars(options))
    return _jsonable(data)
