"""Soft value iteration and Boltzmann (soft-optimal) policies.

beta is an extended real: finite nonzero values go through the soft
recursion, 0 gives the uniform policy, and +inf / -inf give the policies
that randomise uniformly over the maximal / minimal value actions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mdp import Policy, TabularMdp, forward_occupancy, hard_backup, step_utility, tie_mask


@dataclass(frozen=True)
class SoftQ:
    beta: float
    q: np.ndarray  # (n, S, A), utility units
    v: np.ndarray  # (n+1, S), v[t] = (1/beta) logsumexp(beta q[t]); v[n] = 0

    def log_policy(self) -> np.ndarray:
        if math.isinf(self.beta):
            mask = tie_mask(self.q if self.beta > 0 else -self.q)
            with np.errstate(divide="ignore"):
                return np.where(mask, -np.log(mask.sum(axis=-1, keepdims=True)), -np.inf)
        # beta * (q - v) = beta * q - logsumexp(beta * q)
        return self.beta * (self.q - self.v[:-1, :, None])

    def to_json(self) -> dict:
        """Policy-file layout plus the rationality parameter and raw Q values."""
        return {"policy": np.exp(self.log_policy()).tolist(),
                "beta": format_beta(self.beta), "q": self.q.tolist()}


def format_beta(beta: float):
    if math.isinf(beta):
        return "inf" if beta > 0 else "-inf"
    return float(beta)


def soft_max(x: np.ndarray, beta: float) -> np.ndarray:
    """(1/beta) * logsumexp(beta * x) over the last axis."""
    return logsumexp(beta * x, axis=-1) / beta


def soft_value_iteration(mdp: TabularMdp, utility=None, beta: float = 1.0) -> SoftQ:
    beta = float(beta)
    if beta == 0.0 or not math.isfinite(beta):
        raise ValueError(f"soft value iteration needs a finite nonzero beta, got {beta}")
    u = step_utility(mdp, utility)
    n, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    q = np.empty((n, S, A))
    v = np.zeros((n + 1, S))
    for t in range(n - 1, -1, -1):
        q[t] = mdp.transition @ (u[t] + v[t + 1])
        v[t] = soft_max(q[t], beta)
    return SoftQ(beta, q, v)


def limit_q(mdp: TabularMdp, utility, beta: float) -> SoftQ:
    """The beta = +/-inf limit: hard max (or min) backups, stored in utility units."""
    sign = 1.0 if beta > 0 else -1.0
    q, v = hard_backup(mdp, utility, sign)
    return SoftQ(beta, sign * q, sign * v)


def log_soft_policy(mdp: TabularMdp, utility=None, beta: float = 1.0) -> np.ndarray:
    """log pi_t(a|s) of the soft-optimal policy, shape (n, S, A)."""
    beta = float(beta)
    n, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    if beta == 0.0:
        return np.full((n, S, A), -math.log(A))
    if math.isinf(beta):
        return limit_q(mdp, utility, beta).log_policy()
    return soft_value_iteration(mdp, utility, beta).log_policy()


def soft_policy(mdp: TabularMdp, utility=None, beta: float = 1.0) -> Policy:
    return Policy(np.exp(log_soft_policy(mdp, utility, beta)))


def soft_expected_utility(mdp: TabularMdp, utility, beta: float) -> float:
    u = step_utility(mdp, utility)
    state_occ, _ = forward_occupancy(mdp, soft_policy(mdp, u, beta).probs)
    return float(np.sum(state_occ[1:] * u))


def beta_for_utility(mdp: TabularMdp, utility, target: float, tol: float = 1e-12,
                     bracket: float = 1e3) -> float:
    """Rationality parameter whose soft policy attains expected utility ``target``.

    Expected utility of the soft policy is nondecreasing in beta, so bisection
    on [-bracket, bracket] suffices for interior targets.
    """
    lo, hi = -bracket, bracket
    if soft_expected_utility(mdp, utility, 0.0) == target:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if soft_expected_utility(mdp, utility, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
