"""Maximum entropy goal-directedness solvers.

The model class for a utility u is the family of soft-optimal policies
indexed by beta in [-inf, inf]. Predictive accuracy is concave in beta and
its beta-derivative is E_pi[U] - E_soft[U], so the known-utility problem is a
one-dimensional ascent. The unknown-utility problem ascends jointly in
(theta, beta).

Behaviour is represented by its state-action occupancy. For an exact policy
this is rho^pi; for a trajectory set it is the weighted empirical frequency,
which turns every E_pi[.] into a trajectory average.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import utility_models
from .mdp import (
    DimensionError,
    attainable_range,
    Policy,
    TabularMdp,
    TrajectorySet,
    empirical_occupancy,
    forward_occupancy,
    next_state_occupancy,
    occupancy,
    step_utility,
    validate,
)
from .soft_q import format_beta, log_soft_policy, soft_value_iteration
from .utility_models import ParametricUtility

BETA_STARTS = (1.0, -1.0, 0.1, -0.1)
STEP_GROWTH = 1.5
MIN_STEP = 1e-14


@dataclass
class MegOptions:
    learning_rate: float = 0.1
    max_iterations: int = 5000
    beta_tolerance: float = 1e-6
    theta_tolerance: float = 1e-5
    beta_cap: float = 1e3
    restarts: int = 5
    seed: int = 0
    use_exact_theta_gradient: bool = True

    def __post_init__(self):
        for name in ("learning_rate", "max_iterations", "beta_tolerance", "theta_tolerance",
                     "beta_cap", "restarts"):
            if not getattr(self, name) > 0:
                raise ValueError(f"option {name} must be positive")


@dataclass
class MegResult:
    meg: float
    beta_star: float
    predictive_accuracy: float
    expected_utility_policy: float
    expected_utility_soft: float
    log_likelihood: float  # E_pi[sum_t log model(D_t | S_t)]
    uniform_log_likelihood: float  # sum_t log(1/|A|)
    theta_star: np.ndarray | None = None
    signed_meg: float | None = None
    iterations: int = 0
    converged: bool = False
    capped: bool = False
    restarts_used: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_star"] = format_beta(self.beta_star)
        d["theta_star"] = None if self.theta_star is None else np.asarray(self.theta_star).tolist()
        for key in ("meg", "predictive_accuracy", "log_likelihood"):
            if math.isinf(d[key]):
                d[key] = format_beta(d[key])
        return d


class _Behaviour:
    """Occupancy-based view of the observed behaviour."""

    def __init__(self, mdp: TabularMdp, sa_occ: np.ndarray):
        self.sa_occ = sa_occ
        self.next_occ = next_state_occupancy(mdp, sa_occ)

    def log_likelihood(self, logp: np.ndarray) -> float:
        occupied = self.sa_occ > 0
        if np.any(np.isneginf(logp) & occupied):
            return -math.inf
        return float(np.sum(self.sa_occ[occupied] * logp[occupied]))


def _policy_behaviour(mdp, pi):
    validate(mdp)
    _, sa = occupancy(mdp, pi)
    return _Behaviour(mdp, sa)


def _trajectory_behaviour(mdp, traj):
    validate(mdp)
    return _Behaviour(mdp, empirical_occupancy(mdp, traj))


def _uniform_ll(mdp):
    return -mdp.horizon * math.log(mdp.n_actions)


def _soft_terms(mdp, beh, u, beta):
    """Surrogate objective, beta-gradient and soft next-state occupancy at finite beta.

    The surrogate beta * (E_beh[U] - E_init[V_1]) - sum_t log(1/|A|) equals the
    predictive accuracy whenever the behaviour occupancy is consistent with the
    dynamics (always for an exact policy) and its gradient is the moment gap.
    """
    if beta == 0.0:
        probs = np.full((mdp.horizon, mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
        objective = 0.0
    else:
        sq = soft_value_iteration(mdp, u, beta)
        probs = np.exp(sq.log_policy())
    state_occ, _ = forward_occupancy(mdp, probs)
    soft_next = state_occ[1:]
    eu_beh = float(np.sum(beh.next_occ * u))
    eu_soft = float(np.sum(soft_next * u))
    if beta != 0.0:
        objective = beta * (eu_beh - float(mdp.initial_dist @ sq.v[0])) - _uniform_ll(mdp)
    return objective, eu_beh - eu_soft, soft_next


def _ascend(evaluate, beta, theta, opts: MegOptions):
    """Gradient ascent with step halving on failure and mild growth on success.

    ``evaluate(beta, theta)`` returns (objective, g_beta, g_theta); g_theta is
    None in the one-dimensional case.
    """
    cap = opts.beta_cap
    lr = opts.learning_rate
    f, gb, gt = evaluate(beta, theta)
    converged = False
    iterations = 0
    while iterations < opts.max_iterations:
        pinned = abs(beta) >= cap and gb * beta > 0
        beta_done = abs(gb) < opts.beta_tolerance or pinned
        theta_done = gt is None or np.max(np.abs(gt), initial=0.0) < opts.theta_tolerance
        if beta_done and theta_done:
            converged = not pinned or abs(gb) < opts.beta_tolerance
            break
        iterations += 1
        nb = float(np.clip(beta + lr * gb, -cap, cap))
        nt = None if gt is None else theta + lr * gt
        nf, ngb, ngt = evaluate(nb, nt)
        if nf >= f:
            beta, theta, f, gb, gt = nb, nt, nf, ngb, ngt
            lr *= STEP_GROWTH
        else:
            lr *= 0.5
            if lr < MIN_STEP:
                break
    capped = abs(beta) >= cap
    return beta, theta, iterations, converged, capped


def _finalize(mdp, beh, u, beta, opts):
    """Direct predictive accuracy at the ascent end point, at beta = +/-inf and at 0."""
    eu_beh = float(np.sum(beh.next_occ * u))
    candidates = [beta, math.inf, -math.inf, 0.0]
    # soft expected utility increases strictly towards u_max, so behaviour that
    # attains an end of the attainable range is best explained in the limit
    rng = attainable_range(mdp, u)
    slack = 1e-9 * (1.0 + abs(rng.u_max) + abs(rng.u_min))
    if rng.u_max - rng.u_min > slack:
        if eu_beh >= rng.u_max - slack:
            candidates.insert(0, math.inf)
        elif eu_beh <= rng.u_min + slack:
            candidates.insert(0, -math.inf)
    best = None
    for candidate in candidates:
        logp = log_soft_policy(mdp, u, candidate)
        ll = beh.log_likelihood(logp)
        if best is None or ll > best[1]:
            best = (candidate, ll, logp)
    cand, ll, logp = best
    state_occ, _ = forward_occupancy(mdp, np.exp(logp))
    eu_soft = float(np.sum(state_occ[1:] * u))
    pa = ll - _uniform_ll(mdp)
    return cand, ll, pa, eu_beh, eu_soft


def _polish_root(grad, beta, cap):
    """Refine the ascent end point to the root of the (nonincreasing) beta-gradient.

    The gradient tolerance alone pins beta only loosely where the objective is
    flat; a bracketed root find makes beta* reproducible to near machine precision.
    """
    g0 = grad(beta)
    if g0 == 0.0:
        return beta
    direction = 1.0 if g0 > 0 else -1.0
    width = max(1e-3, 1e-3 * abs(beta))
    other = beta
    while True:
        other = float(np.clip(beta + direction * width, -cap, cap))
        g1 = grad(other)
        if g1 == 0.0:
            return other
        if (g1 > 0) != (g0 > 0):
            break
        if abs(other) >= cap:
            return beta
        width *= 2.0
    lo, hi = sorted((beta, other))
    return float(brentq(grad, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200))


def _solve_known(mdp, beh, utility, opts):
    u = np.array(step_utility(mdp, utility), dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("utility contains non-finite values")

    def evaluate(beta, _theta):
        f, gb, _ = _soft_terms(mdp, beh, u, beta)
        return f, gb, None

    beta, _, iterations, converged, capped = _ascend(evaluate, 0.0, None, opts)
    if converged and not capped:
        beta = _polish_root(lambda b: _soft_terms(mdp, beh, u, b)[1], beta, opts.beta_cap)
    beta_star, ll, pa, eu_beh, eu_soft = _finalize(mdp, beh, u, beta, opts)
    return MegResult(
        meg=pa,
        beta_star=beta_star,
        predictive_accuracy=pa,
        expected_utility_policy=eu_beh,
        expected_utility_soft=eu_soft,
        log_likelihood=ll,
        uniform_log_likelihood=_uniform_ll(mdp),
        iterations=iterations,
        converged=converged,
        capped=capped,
        restarts_used=1,
        extras={"beta_ascent_end": beta},
    )


def predictive_accuracy(mdp: TabularMdp, pi: Policy, model: Policy) -> float:
    """E_pi[sum_t log model_t(A|S) - log(1/|A|)], exact via the occupancy of pi.

    Returns -inf if the model gives zero probability to an action pi takes.
    """
    if model.probs.shape != pi.probs.shape:
        raise DimensionError(f"model shape {model.probs.shape} does not match policy {pi.probs.shape}")
    beh = _policy_behaviour(mdp, pi)
    with np.errstate(divide="ignore"):
        logp = np.log(model.probs)
    return beh.log_likelihood(logp) - _uniform_ll(mdp)


def predictive_accuracy_at(mdp: TabularMdp, pi: Policy, utility, beta: float) -> float:
    """Predictive accuracy of the soft-optimal model with rationality beta."""
    beh = _policy_behaviour(mdp, pi)
    logp = log_soft_policy(mdp, step_utility(mdp, utility), beta)
    return beh.log_likelihood(logp) - _uniform_ll(mdp)


def beta_gradient(mdp: TabularMdp, pi: Policy, utility, beta: float) -> float:
    """d/dbeta of predictive accuracy: E_pi[U] - E_soft_beta[U]."""
    beh = _policy_behaviour(mdp, pi)
    _, gb, _ = _soft_terms(mdp, beh, np.array(step_utility(mdp, utility)), float(beta))
    return gb


def meg_known(mdp: TabularMdp, pi: Policy, utility=None, opts: MegOptions | None = None) -> MegResult:
    opts = opts or MegOptions()
    beh = _policy_behaviour(mdp, pi)
    return _solve_known(mdp, beh, utility, opts)


def meg_known_from_trajectories(mdp: TabularMdp, trajectories: TrajectorySet, utility=None,
                                opts: MegOptions | None = None) -> MegResult:
    """Known-utility MEG with every E_pi[.] replaced by a trajectory average.

    The utility of step t is averaged as E[u_t(S_{t+1}) | s_t, a_t] under the
    known dynamics, so episodes need not record their final state.
    """
    opts = opts or MegOptions()
    beh = _trajectory_behaviour(mdp, trajectories)
    result = _solve_known(mdp, beh, utility, opts)
    result.extras["per_episode_log_likelihood_std"] = _episode_ll_std(
        mdp, trajectories, step_utility(mdp, utility), result.beta_star)
    return result


def _episode_ll_std(mdp, traj, u, beta):
    logp = log_soft_policy(mdp, u, beta)
    t_idx = np.arange(mdp.horizon)
    per_episode = logp[t_idx[None, :], traj.states, traj.actions].sum(axis=1)
    if not np.all(np.isfinite(per_episode)):
        return math.inf
    w = traj.normalized_weights()
    mean = float(w @ per_episode)
    return float(math.sqrt(max(w @ (per_episode - mean) ** 2, 0.0)))


# -- unknown utility ---------------------------------------------------------

class _StationaryClass:
    """A ParametricUtility applied to the state after every decision."""

    def __init__(self, model: ParametricUtility, horizon: int):
        self.model = model
        self.horizon = horizon

    def initial_theta(self, seed):
        return utility_models.reinit(self.model, seed).theta

    def step_utility(self, theta):
        u = self.model.evaluate_all(theta)
        return np.broadcast_to(u, (self.horizon, u.shape[0]))

    def vjp(self, theta, weights):
        return self.model.vjp(weights.sum(axis=0), theta)


class _TargetClass:
    """All utility functions of the states at chosen timesteps (tabular, zero elsewhere)."""

    def __init__(self, rows, horizon, n_states):
        self.rows = list(rows)
        self.horizon = horizon
        self.n_states = n_states

    def initial_theta(self, seed):
        return np.zeros(len(self.rows) * self.n_states)

    def step_utility(self, theta):
        u = np.zeros((self.horizon, self.n_states))
        if self.rows:
            u[self.rows] = theta.reshape(len(self.rows), self.n_states)
        return u

    def vjp(self, theta, weights):
        return weights[self.rows].ravel()


def _solve_unknown(mdp, beh, hclass, opts):
    def evaluate(beta, theta):
        u = hclass.step_utility(theta)
        f, gb, soft_next = _soft_terms(mdp, beh, u, beta)
        gap = beh.next_occ - soft_next
        gt = hclass.vjp(theta, beta * gap if opts.use_exact_theta_gradient else gap)
        return f, gb, gt

    best = None
    for i in range(opts.restarts):
        beta0 = BETA_STARTS[i % len(BETA_STARTS)]
        theta0 = hclass.initial_theta(opts.seed + i)
        beta, theta, iterations, converged, capped = _ascend(evaluate, beta0, theta0, opts)
        u = np.array(hclass.step_utility(theta))
        beta_star, ll, pa, eu_beh, eu_soft = _finalize(mdp, beh, u, beta, opts)
        if best is None or pa > best.predictive_accuracy:
            best = MegResult(
                meg=pa,
                beta_star=beta_star,
                predictive_accuracy=pa,
                expected_utility_policy=eu_beh,
                expected_utility_soft=eu_soft,
                log_likelihood=ll,
                uniform_log_likelihood=_uniform_ll(mdp),
                theta_star=np.array(theta),
                iterations=iterations,
                converged=converged,
                capped=capped,
                extras={"best_restart": i},
            )
    best.restarts_used = opts.restarts
    return best


def meg_unknown(mdp: TabularMdp, pi: Policy, model: ParametricUtility,
                opts: MegOptions | None = None) -> MegResult:
    """Unknown-utility MEG over a parametric class; a lower bound for nonconvex classes."""
    opts = opts or MegOptions()
    if model.n_states != mdp.n_states:
        raise DimensionError(f"utility model covers {model.n_states} states, MDP has {mdp.n_states}")
    beh = _policy_behaviour(mdp, pi)
    return _solve_unknown(mdp, beh, _StationaryClass(model, mdp.horizon), opts)


def meg_unknown_from_trajectories(mdp: TabularMdp, trajectories: TrajectorySet,
                                  model: ParametricUtility, opts: MegOptions | None = None) -> MegResult:
    opts = opts or MegOptions()
    if model.n_states != mdp.n_states:
        raise DimensionError(f"utility model covers {model.n_states} states, MDP has {mdp.n_states}")
    beh = _trajectory_behaviour(mdp, trajectories)
    return _solve_unknown(mdp, beh, _StationaryClass(model, mdp.horizon), opts)


def meg_target_state(mdp: TabularMdp, pi: Policy, target_times, opts: MegOptions | None = None) -> MegResult:
    """MEG with respect to all utility functions of the states at ``target_times``.

    Timesteps index states: 1 is the initial state S_1 and n+1 the state after
    the last decision. S_1 cannot be influenced by any decision, so it adds
    nothing beyond a constant to the class.
    """
    opts = opts or MegOptions()
    times = sorted(set(int(t) for t in target_times))
    if not times:
        raise ValueError("target set is empty")
    n = mdp.horizon
    if times[0] < 1 or times[-1] > n + 1:
        raise ValueError(f"target timesteps must lie in 1..{n + 1}, got {times}")
    beh = _policy_behaviour(mdp, pi)
    rows = [t - 2 for t in times if t >= 2]
    result = _solve_unknown(mdp, beh, _TargetClass(rows, n, mdp.n_states), opts)
    result.extras["target_times"] = times
    return result


def signed_meg(result: MegResult, mdp: TabularMdp, pi: Policy, utility=None) -> float:
    """MEG multiplied by the sign of E_pi[U] - E_unif[U]; sign(0) = 0."""
    u = np.array(step_utility(mdp, utility))
    state_pi, _ = occupancy(mdp, pi)
    state_unif, _ = forward_occupancy(mdp, Policy.uniform(mdp.horizon, mdp.n_states, mdp.n_actions).probs)
    diff = float(np.sum((state_pi[1:] - state_unif[1:]) * u))
    scale = 1e-12 * (1.0 + float(np.sum(np.abs(u))))
    sign = 0.0 if abs(diff) <= scale else math.copysign(1.0, diff)
    return result.meg * sign
