"""Property and oracle battery.

Each check builds its own seeded instances, compares the solvers against an
independent oracle or an invariant, and returns one Check row. The CLI
``verify`` subcommand and the acceptance tests both call these functions.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import envs, meg, oracles, soft_q
from . import mdp as mdp_core
from . import utility_models
from .mdp import Policy

# property instances: |S| <= 5, |A| <= 4, n <= 4
MAX_STATES, MAX_ACTIONS, MAX_HORIZON = 5, 4, 4
BETA_GRID = np.linspace(-50.0, 50.0, 2001)


@dataclass
class Check:
    name: str
    passed: bool
    observed: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} observed={self.observed:.3e}  "
                f"tol={self.tolerance:.1e}  {self.seconds:6.2f}s  {self.detail}").rstrip()


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        check = fn(*args, **kwargs)
        check.seconds = time.perf_counter() - start
        return check
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_instance(seed: int, utility_scale: float = 1.0, max_states=MAX_STATES,
                    max_actions=MAX_ACTIONS, max_horizon=MAX_HORIZON):
    """(mdp, utility, policy) with sizes drawn from the seed."""
    rng = np.random.default_rng(10_000 + seed)
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(2, max_actions + 1))
    n = int(rng.integers(1, max_horizon + 1))
    mdp, u = envs.random_mdp(seed, S, A, n, utility_scale)
    return mdp, u, envs.random_policy(seed, mdp)


def min_gap(q: np.ndarray) -> float:
    """Smallest gap between the best and second best action value over all (t, s)."""
    top2 = np.sort(q, axis=-1)[..., -2:]
    return float(np.min(top2[..., 1] - top2[..., 0]))


def gapped_instance(seed: int, gap: float = 0.1, sign: float = 1.0, tries: int = 2000):
    """Random instance whose max (sign=1) or min (sign=-1) backup has every gap >= ``gap``."""
    for k in range(tries):
        mdp, u, _ = random_instance(seed * tries + k, utility_scale=5.0)
        q, _ = mdp_core.hard_backup(mdp, u, sign)
        if min_gap(q) >= gap:
            return mdp, u, Policy(mdp_core.tie_mask(q).astype(float))
    raise RuntimeError(f"no gapped instance found for seed {seed}")


# -- checks ---------------------------------------------------------------------

@_timed
def check_occupancy(count=100, seed=0) -> Check:
    worst = 0.0
    for i in range(count):
        mdp, _, pi = random_instance(seed + i)
        state_occ, sa = mdp_core.occupancy(mdp, pi)
        worst = max(worst, np.abs(state_occ.sum(axis=1) - 1).max(), np.abs(sa.sum(axis=(1, 2)) - 1).max())
    return Check("occupancy normalisation", worst <= 1e-9, worst, 1e-9, f"{count} MDPs")


def enumerate_best(mdp, utility):
    """Best expected utility over all deterministic Markov policies (brute force)."""
    n, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    best = -math.inf
    for choice in itertools.product(range(A), repeat=n * S):
        pol = Policy.deterministic(np.array(choice).reshape(n, S), A)
        best = max(best, mdp_core.expected_utility(mdp, pol, utility))
    return best


@_timed
def check_value_iteration(count=20, seed=0) -> Check:
    worst = 0.0
    done = 0
    i = 0
    while done < count:
        mdp, u, _ = random_instance(seed + i, max_states=3, max_actions=2, max_horizon=2)
        i += 1
        if mdp.n_actions ** (mdp.n_states * mdp.horizon) > 64:
            continue
        opt, _ = mdp_core.value_iteration(mdp, u)
        worst = max(worst, abs(mdp_core.expected_utility(mdp, opt, u) - enumerate_best(mdp, u)))
        done += 1
    return Check("value iteration vs enumeration", worst <= 1e-9, worst, 1e-9, f"{count} MDPs")


@_timed
def check_scale_invariance(count=100, seed=0) -> Check:
    rng = np.random.default_rng(seed + 1)
    worst_meg = worst_beta = 0.0
    for i in range(count):
        mdp, u, pi = random_instance(seed + i)
        a, b = rng.uniform(0.1, 10.0), rng.uniform(-5.0, 5.0)
        r1 = meg.meg_known(mdp, pi, u)
        r2 = meg.meg_known(mdp, pi, a * u + b)
        worst_meg = max(worst_meg, abs(r1.meg - r2.meg))
        if math.isfinite(r1.beta_star) and abs(r1.beta_star) > 1e-6:
            worst_beta = max(worst_beta, abs(r2.beta_star * a - r1.beta_star) / abs(r1.beta_star))
    passed = worst_meg <= 1e-3 and worst_beta <= 1e-3
    return Check("scale invariance", passed, max(worst_meg, worst_beta), 1e-3,
                 f"meg {worst_meg:.1e}, beta* rel {worst_beta:.1e}")


@_timed
def check_bounds(count=100, seed=0) -> Check:
    worst_uniform = 0.0
    worst_upper = 0.0
    shortfall = 0.0
    for i in range(count):
        mdp, u, pi = random_instance(seed + i)
        uni = Policy.uniform(mdp.horizon, mdp.n_states, mdp.n_actions)
        worst_uniform = max(worst_uniform, meg.meg_known(mdp, uni, u).meg)
        top = mdp.horizon * math.log(mdp.n_actions)
        worst_upper = max(worst_upper, meg.meg_known(mdp, pi, u).meg - top)
    for i in range(count):
        for sign in (1.0, -1.0):
            mdp, u, pol = gapped_instance(seed + i, 0.1, sign)
            top = mdp.horizon * math.log(mdp.n_actions)
            shortfall = max(shortfall, top - meg.meg_known(mdp, pol, u).meg)
    passed = worst_uniform <= 1e-6 and shortfall <= 1e-2 and worst_upper <= 1e-9
    return Check("bounds", passed, max(worst_uniform, shortfall), 1e-2,
                 f"uniform {worst_uniform:.1e} (tol 1e-6), optimal shortfall {shortfall:.1e}, "
                 f"upper excess {worst_upper:.1e}")


@_timed
def check_no_influence(count=100, seed=0) -> Check:
    worst_const = 0.0
    worst_target = 0.0
    rng = np.random.default_rng(seed + 2)
    for i in range(count):
        mdp, _, pi = random_instance(seed + i)
        const = np.full(mdp.n_states, rng.uniform(-5, 5))
        worst_const = max(worst_const, meg.meg_known(mdp, pi, const).meg)
        if i < 20:
            opts = meg.MegOptions(restarts=1, max_iterations=200)
            worst_target = max(worst_target, meg.meg_target_state(mdp, pi, [1], opts).meg)
    passed = worst_const <= 1e-9 and worst_target <= 1e-6
    return Check("no influence", passed, worst_const, 1e-9,
                 f"constant utility {worst_const:.1e}, initial-state target {worst_target:.1e}")


@_timed
def check_soft_policy_scaling(count=100, seed=0) -> Check:
    """pi_soft(beta, a U + b) == pi_soft(a beta, U)."""
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    for i in range(count):
        mdp, u, _ = random_instance(seed + i)
        a, b, beta = rng.uniform(0.1, 10.0), rng.uniform(-5, 5), rng.uniform(-5, 5)
        lhs = soft_q.soft_policy(mdp, a * u + b, beta).probs
        rhs = soft_q.soft_policy(mdp, u, a * beta).probs
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return Check("soft policy scaling", worst <= 1e-9, worst, 1e-9, f"{count} MDPs")


@_timed
def check_beta_gradient(points=50, seed=0) -> Check:
    """Analytic d/dbeta of predictive accuracy against central differences."""
    rng = np.random.default_rng(seed + 4)
    worst = 0.0
    for i in range(points):
        mdp, u, pi = random_instance(seed + i)
        beta = float(rng.uniform(-3.0, 3.0))
        err = oracles.grad_check(
            lambda b: meg.predictive_accuracy_at(mdp, pi, u, b),
            lambda b: meg.beta_gradient(mdp, pi, u, b),
            beta, h=1e-4, floor=1e-6)
        worst = max(worst, err)
    return Check("beta gradient", worst <= 1e-3, worst, 1e-3, f"{points} points")


@_timed
def check_concavity(count=100, seed=0) -> Check:
    grid = np.linspace(-10.0, 10.0, 41)
    worst = 0.0
    for i in range(count):
        mdp, u, pi = random_instance(seed + i)
        g = np.array([meg.beta_gradient(mdp, pi, u, b) for b in grid])
        worst = max(worst, float(np.max(np.diff(g), initial=0.0)))
    return Check("concavity in beta", worst <= 1e-9, worst, 1e-9, "g_beta nonincreasing on grid")


@_timed
def check_grid_oracle(count=100, seed=0, utility_scale=0.5) -> Check:
    worst = 0.0
    for i in range(count):
        mdp, u, pi = random_instance(seed + i, utility_scale=utility_scale)
        _, grid_pa = oracles.beta_grid_oracle(mdp, pi, u, BETA_GRID)
        worst = max(worst, abs(meg.meg_known(mdp, pi, u).meg - max(grid_pa, 0.0)))
    return Check("beta grid oracle", worst <= 1e-4, worst, 1e-4, f"{len(BETA_GRID)}-point grid")


def maxent_instance(seed: int):
    rng = np.random.default_rng(20_000 + seed)
    while True:
        S, A, n = int(rng.integers(1, 4)), int(rng.integers(2, 4)), int(rng.integers(1, 3))
        if S * A * n <= 32:
            break
    mdp, u = envs.random_mdp(seed, S, A, n)
    rng_u = mdp_core.attainable_range(mdp, u)
    target = rng_u.u_min + (rng_u.u_max - rng_u.u_min) * rng.uniform(0.1, 0.9)
    return mdp, u, target


@_timed
def check_maxent(count=20, seed=0) -> Check:
    worst_tv = worst_h = 0.0
    for i in range(count):
        mdp, u, target = maxent_instance(seed + i)
        beta = soft_q.beta_for_utility(mdp, u, target)
        soft = soft_q.soft_policy(mdp, u, beta)
        brute, details = oracles.oracle_maxent_policy(mdp, u, target, return_details=True)
        tv = 0.5 * np.abs(soft.probs - brute.probs).sum(axis=-1)
        # only rows the policy can reach matter
        state_occ, _ = mdp_core.occupancy(mdp, soft)
        reached = state_occ[:-1] > 1e-12
        worst_tv = max(worst_tv, float(tv[reached].max(initial=0.0)))
        worst_h = max(worst_h, abs(details["entropy"] - mdp_core.causal_entropy(mdp, soft)))
    return Check("maxent characterisation", worst_tv <= 1e-3 and worst_h <= 1e-3, worst_tv, 1e-3,
                 f"{count} instances, entropy gap {worst_h:.1e}")


@_timed
def check_pseudo_terminal(count=50, seed=0) -> Check:
    worst = -math.inf
    failures = 0
    for i in range(count):
        meg_t, meg_s, holds = oracles.pseudo_terminal_check(oracles.random_chain(seed + i))
        worst = max(worst, meg_t - meg_s)
        failures += not holds
    return Check("pseudo-terminal goals", failures == 0, worst, 1e-3,
                 f"{count} chains, max MEG_T - MEG_S")


@_timed
def check_single_decision(count=20, seed=0) -> Check:
    worst_known = worst_target = 0.0
    for i in range(count):
        cid = oracles.random_cid(seed + i)
        mdp, pi = oracles.cid_to_mdp(cid)
        n_ctx = cid.context_dist.shape[0]
        u_t = np.random.default_rng(seed + i).uniform(-1, 1, cid.outcome_kernel.shape[2])
        u = np.concatenate([np.zeros(n_ctx), u_t])
        exact = oracles.exact_meg_known_single(cid, u_t).meg
        worst_known = max(worst_known, abs(meg.meg_known(mdp, pi, u).meg - exact))
        exact_t = oracles.exact_meg_targets_single(cid).meg
        got = meg.meg_target_state(mdp, pi, [2]).meg
        worst_target = max(worst_target, abs(got - exact_t))
    passed = worst_known <= 1e-6 and worst_target <= 1e-3
    return Check("single decision oracles", passed, worst_target, 1e-3,
                 f"known {worst_known:.1e} (tol 1e-6)")


@_timed
def check_mlp_gradient(seed=0) -> Check:
    model = utility_models.init("mlp", 6, seed=seed, hidden=8, scale=0.5)
    weights = np.random.default_rng(seed).normal(size=6)
    err = oracles.grad_check(lambda th: float(weights @ model.evaluate_all(th)),
                             lambda th: model.vjp(weights, th), model.theta, h=1e-5, floor=1e-6)
    return Check("mlp gradient", err <= 1e-4, err, 1e-4, f"{model.n_params} parameters")


@_timed
def check_trajectory_estimator(count=10, episodes=10_000, seed=0) -> Check:
    worst = 0.0
    for i in range(count):
        mdp, u, pi = random_instance(seed + i)
        exact = meg.meg_known(mdp, pi, u).meg
        traj = mdp_core.sample_trajectories(mdp, pi, episodes, seed=seed + i)
        est = meg.meg_known_from_trajectories(mdp, traj, u)
        se = est.extras["per_episode_log_likelihood_std"] / math.sqrt(episodes)
        worst = max(worst, abs(est.meg - exact) / max(se, 1e-12))
    return Check("trajectory estimator", worst <= 3.0, worst, 3.0,
                 f"{count} MDPs x {episodes} episodes, in standard errors")


BATTERY = (
    check_occupancy,
    check_value_iteration,
    check_scale_invariance,
    check_bounds,
    check_no_influence,
    check_soft_policy_scaling,
    check_beta_gradient,
    check_concavity,
    check_grid_oracle,
    check_maxent,
    check_pseudo_terminal,
    check_single_decision,
    check_mlp_gradient,
    check_trajectory_estimator,
)


def run_battery(seed: int = 0, report=print) -> list[Check]:
    checks = []
    for fn in BATTERY:
        check = fn(seed=seed)
        if report is not None:
            report(check.line())
        checks.append(check)
    return checks
