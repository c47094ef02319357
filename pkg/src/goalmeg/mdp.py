"""Finite-horizon tabular MDPs, policies and exact policy evaluation.

Time convention: states are S_1..S_{n+1} and decisions D_1..D_n. The
utility of step t is attached to the state the decision leads into,
U_t = u_t(S_{t+1}), so the total utility is a sum of n terms and the last
decision can still influence it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-12


class MdpError(ValueError):
    """An MDP, policy or trajectory set violates its invariants."""


class DimensionError(MdpError):
    """Arrays that must agree in shape do not."""


@dataclass(frozen=True)
class TabularMdp:
    horizon: int
    initial_dist: np.ndarray  # (S,)
    transition: np.ndarray  # (S, A, S)
    state_utility: np.ndarray  # (S,)
    step_utility: np.ndarray | None = None  # optional (n, S) override

    def __post_init__(self):
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=float))
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "state_utility", np.asarray(self.state_utility, dtype=float))
        if self.step_utility is not None:
            object.__setattr__(self, "step_utility", np.asarray(self.step_utility, dtype=float))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_utility(self, utility) -> "TabularMdp":
        utility = np.asarray(utility, dtype=float)
        if utility.ndim == 2:
            return TabularMdp(self.horizon, self.initial_dist, self.transition,
                              utility[0].copy(), utility)
        return TabularMdp(self.horizon, self.initial_dist, self.transition, utility)


@dataclass(frozen=True)
class Policy:
    """Per-timestep action distributions, probs[t, s, a] for t = 0..n-1."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def stationary(cls, matrix, horizon: int) -> "Policy":
        matrix = np.asarray(matrix, dtype=float)
        return cls(np.repeat(matrix[None], horizon, axis=0))

    @classmethod
    def uniform(cls, horizon: int, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((horizon, n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(n_actions)[actions])

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))

    def greedy_actions(self) -> np.ndarray:
        return np.argmax(self.probs, axis=-1)


@dataclass(frozen=True)
class TrajectorySet:
    """Sampled episodes; states[i, t] and actions[i, t] for t = 0..n-1."""

    states: np.ndarray
    actions: np.ndarray
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=int))
        object.__setattr__(self, "actions", np.asarray(self.actions, dtype=int))
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def __len__(self) -> int:
        return self.states.shape[0]

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weights / self.weights.sum()


@dataclass(frozen=True)
class UtilityRange:
    u_min: float
    u_max: float

    def __post_init__(self):
        if self.u_min > self.u_max:
            raise ValueError(f"u_min {self.u_min} exceeds u_max {self.u_max}")

    def contains(self, u: float, tol: float = 1e-9) -> bool:
        return self.u_min - tol <= u <= self.u_max + tol


def validate(mdp: TabularMdp) -> None:
    """Raise MdpError naming the first violated invariant."""
    if int(mdp.horizon) != mdp.horizon or mdp.horizon < 1:
        raise MdpError(f"horizon must be a positive integer, got {mdp.horizon}")
    T = mdp.transition
    if T.ndim != 3 or T.shape[0] != T.shape[2] or T.shape[0] < 1 or T.shape[1] < 1:
        raise DimensionError(f"transition must have shape (S, A, S), got {T.shape}")
    S = T.shape[0]
    if mdp.initial_dist.shape != (S,):
        raise DimensionError(f"initial_dist has shape {mdp.initial_dist.shape}, expected ({S},)")
    if mdp.state_utility.shape != (S,):
        raise DimensionError(f"state_utility has shape {mdp.state_utility.shape}, expected ({S},)")
    if mdp.step_utility is not None and mdp.step_utility.shape != (mdp.horizon, S):
        raise DimensionError(
            f"step_utility has shape {mdp.step_utility.shape}, expected ({mdp.horizon}, {S})")
    neg = np.argwhere(mdp.initial_dist < 0)
    if len(neg):
        s = int(neg[0][0])
        raise MdpError(f"initial_dist[{s}] = {mdp.initial_dist[s]} is negative")
    if abs(mdp.initial_dist.sum() - 1.0) > ROW_TOL:
        raise MdpError(f"initial_dist sums to {mdp.initial_dist.sum()!r}, not 1")
    neg = np.argwhere(T < 0)
    if len(neg):
        s, a, s2 = (int(i) for i in neg[0])
        raise MdpError(f"transition[{s}][{a}][{s2}] = {T[s, a, s2]} is negative")
    sums = T.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if len(bad):
        s, a = (int(i) for i in bad[0])
        raise MdpError(f"transition row (s={s}, a={a}) sums to {sums[s, a]!r}, not 1")
    for name, arr in (("state_utility", mdp.state_utility), ("step_utility", mdp.step_utility)):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise MdpError(f"{name} contains non-finite values")


def validate_policy(mdp: TabularMdp, policy: Policy) -> None:
    expected = (mdp.horizon, mdp.n_states, mdp.n_actions)
    if policy.probs.shape != expected:
        raise DimensionError(
            f"policy has shape {policy.probs.shape}, expected (horizon, states, actions) = {expected}")
    neg = np.argwhere(policy.probs < 0)
    if len(neg):
        t, s, a = (int(i) for i in neg[0])
        raise MdpError(f"policy[{t}][{s}][{a}] is negative")
    sums = policy.probs.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if len(bad):
        t, s = (int(i) for i in bad[0])
        raise MdpError(f"policy row (t={t}, s={s}) sums to {sums[t, s]!r}, not 1")


def validate_trajectories(mdp: TabularMdp, traj: TrajectorySet) -> None:
    if len(traj) == 0:
        raise MdpError("trajectory set is empty")
    if traj.states.shape != traj.actions.shape or traj.states.ndim != 2:
        raise DimensionError("states and actions must both have shape (episodes, horizon)")
    if traj.states.shape[1] != mdp.horizon:
        raise DimensionError(
            f"episodes have {traj.states.shape[1]} steps, the MDP horizon is {mdp.horizon}")
    if traj.states.min() < 0 or traj.states.max() >= mdp.n_states:
        raise MdpError("trajectory state index out of range")
    if traj.actions.min() < 0 or traj.actions.max() >= mdp.n_actions:
        raise MdpError("trajectory action index out of range")
    if traj.weights is not None:
        if traj.weights.shape != (len(traj),) or np.any(traj.weights < 0) or traj.weights.sum() <= 0:
            raise MdpError("episode weights must be nonnegative with positive total")


def step_utility(mdp: TabularMdp, utility=None) -> np.ndarray:
    """Utility as an (n, S) array: row t is applied to the state after decision t."""
    if utility is None:
        if mdp.step_utility is not None:
            return mdp.step_utility
        utility = mdp.state_utility
    utility = np.asarray(utility, dtype=float)
    if utility.shape == (mdp.n_states,):
        return np.broadcast_to(utility, (mdp.horizon, mdp.n_states))
    if utility.shape == (mdp.horizon, mdp.n_states):
        return utility
    raise DimensionError(
        f"utility has shape {utility.shape}, expected ({mdp.n_states},) or ({mdp.horizon}, {mdp.n_states})")


def forward_occupancy(mdp: TabularMdp, probs: np.ndarray):
    """Occupancies from raw per-step action probabilities, no validation."""
    n, S = mdp.horizon, mdp.n_states
    state_occ = np.empty((n + 1, S))
    sa_occ = np.empty((n, S, mdp.n_actions))
    state_occ[0] = mdp.initial_dist
    for t in range(n):
        sa_occ[t] = state_occ[t][:, None] * probs[t]
        state_occ[t + 1] = np.einsum("sa,sap->p", sa_occ[t], mdp.transition)
    return state_occ, sa_occ


def occupancy(mdp: TabularMdp, policy: Policy):
    """State occupancies rho_t(s) for t = 1..n+1 and state-action occupancies for t = 1..n.

    Returns ``(state_occ, sa_occ)`` with shapes (n+1, S) and (n, S, A).
    """
    validate_policy(mdp, policy)
    return forward_occupancy(mdp, policy.probs)


def next_state_occupancy(mdp: TabularMdp, sa_occ: np.ndarray) -> np.ndarray:
    """Distribution of S_{t+1} implied by state-action occupancies, shape (n, S)."""
    return np.einsum("tsa,sap->tp", sa_occ, mdp.transition)


def expected_utility(mdp: TabularMdp, policy: Policy, utility=None) -> float:
    u = step_utility(mdp, utility)
    state_occ, _ = occupancy(mdp, policy)
    return float(np.sum(state_occ[1:] * u))


def xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x * log(y) with 0 * log(0) := 0."""
    out = np.zeros(np.broadcast(x, y).shape)
    mask = np.broadcast_to(x != 0, out.shape)
    xb = np.broadcast_to(x, out.shape)
    yb = np.broadcast_to(y, out.shape)
    with np.errstate(divide="ignore"):
        out[mask] = xb[mask] * np.log(yb[mask])
    return out


def causal_entropy(mdp: TabularMdp, policy: Policy) -> float:
    _, sa_occ = occupancy(mdp, policy)
    return float(-np.sum(xlogy(sa_occ, np.broadcast_to(policy.probs, sa_occ.shape))))


def hard_backup(mdp: TabularMdp, utility=None, sign: float = 1.0):
    """Finite-horizon value iteration for sign * utility.

    Returns Q of shape (n, S, A) and V of shape (n+1, S), both for the signed
    utility (V[n] = 0).
    """
    u = sign * step_utility(mdp, utility)
    n, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    q = np.empty((n, S, A))
    v = np.zeros((n + 1, S))
    for t in range(n - 1, -1, -1):
        q[t] = mdp.transition @ (u[t] + v[t + 1])
        v[t] = q[t].max(axis=1)
    return q, v


def tie_mask(q: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Boolean mask of actions within numerical tolerance of the row maximum."""
    top = q.max(axis=-1, keepdims=True)
    return q >= top - rtol * (1.0 + np.abs(top))


def value_iteration(mdp: TabularMdp, utility=None):
    """Deterministic optimal policy (lowest-index tie-break) and hard Q arrays."""
    q, _ = hard_backup(mdp, utility)
    greedy = np.argmax(tie_mask(q), axis=-1)
    return Policy.deterministic(greedy, mdp.n_actions), q


def attainable_range(mdp: TabularMdp, utility=None) -> UtilityRange:
    _, v_max = hard_backup(mdp, utility, 1.0)
    _, v_min = hard_backup(mdp, utility, -1.0)
    hi = float(mdp.initial_dist @ v_max[0])
    lo = -float(mdp.initial_dist @ v_min[0])
    return UtilityRange(min(lo, hi), max(lo, hi))


def epsilon_greedy(optimal: Policy, epsilon: float) -> Policy:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not optimal.is_deterministic():
        raise ValueError("epsilon_greedy needs a deterministic policy")
    A = optimal.probs.shape[-1]
    return Policy((1.0 - epsilon) * optimal.probs + epsilon / A)


def sample_trajectories(mdp: TabularMdp, policy: Policy, count: int, seed: int) -> TrajectorySet:
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    validate_policy(mdp, policy)
    rng = np.random.default_rng(seed)
    n = mdp.horizon
    states = np.empty((count, n), dtype=int)
    actions = np.empty((count, n), dtype=int)
    s = _draw(rng, np.broadcast_to(mdp.initial_dist, (count, mdp.n_states)))
    for t in range(n):
        a = _draw(rng, policy.probs[t][s])
        states[:, t] = s
        actions[:, t] = a
        s = _draw(rng, mdp.transition[s, a])
    return TrajectorySet(states, actions)


def _draw(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    r = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = (r[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def empirical_occupancy(mdp: TabularMdp, traj: TrajectorySet) -> np.ndarray:
    """Weighted empirical state-action frequencies, shape (n, S, A)."""
    validate_trajectories(mdp, traj)
    w = traj.normalized_weights()
    n = mdp.horizon
    sa = np.zeros((n, mdp.n_states, mdp.n_actions))
    for t in range(n):
        np.add.at(sa[t], (traj.states[:, t], traj.actions[:, t]), w)
    return sa
