"""Brute-force and closed-form verifiers.

Nothing here shares maximisation code with the solvers in ``meg``: single
decision problems are solved in closed form with golden-section search or
L-BFGS, and maximum entropy policies are found by projected gradient ascent
directly over the policy simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .mdp import (
    MdpError,
    Policy,
    TabularMdp,
    attainable_range,
    occupancy,
    step_utility,
)
from .meg import MegResult
from .soft_q import log_soft_policy

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SingleDecisionCid:
    """Context S ~ P(s), decision D ~ pi(d|s), target T ~ P(t|s, d)."""

    context_dist: np.ndarray  # (S,)
    outcome_kernel: np.ndarray  # (S, m, |T|)
    policy: np.ndarray  # (S, m)

    def __post_init__(self):
        for name in ("context_dist", "outcome_kernel", "policy"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        S, m, _ = self.outcome_kernel.shape
        if self.context_dist.shape != (S,) or self.policy.shape != (S, m):
            raise MdpError("context, kernel and policy dimensions disagree")
        for name, arr in (("context_dist", self.context_dist),
                          ("outcome_kernel", self.outcome_kernel), ("policy", self.policy)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > 1e-12):
                raise MdpError(f"{name} is not normalised")

    @property
    def n_decisions(self) -> int:
        return self.outcome_kernel.shape[1]


def _log_softmax_rows(z):
    top = z.max(axis=-1, keepdims=True)
    return z - top - np.log(np.exp(z - top).sum(axis=-1, keepdims=True))


def _single_pa(cid: SingleDecisionCid, scores: np.ndarray) -> float:
    """Predictive accuracy of the model softmax_d(scores[s, d])."""
    logp = _log_softmax_rows(scores)
    weights = cid.context_dist[:, None] * cid.policy
    return float(np.sum(weights * logp)) + math.log(cid.n_decisions)


def golden_section_max(f, lo: float, hi: float, iterations: int = 200):
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def exact_meg_known_single(cid: SingleDecisionCid, utility, bracket: float = 1e3) -> MegResult:
    """Known-utility MEG of a single decision: Boltzmann over E[U | d, s], 1-D concave search."""
    utility = np.asarray(utility, dtype=float)
    eu = cid.outcome_kernel @ utility  # (S, m)
    beta, pa = golden_section_max(lambda b: _single_pa(cid, b * eu), -bracket, bracket)
    # the zero model is also a member of the class and scores exactly 0
    if pa < 0.0:
        beta, pa = 0.0, 0.0
    model = np.exp(_log_softmax_rows(beta * eu))
    return MegResult(
        meg=pa, beta_star=beta, predictive_accuracy=pa,
        expected_utility_policy=float(cid.context_dist @ np.sum(cid.policy * eu, axis=1)),
        expected_utility_soft=float(cid.context_dist @ np.sum(model * eu, axis=1)),
        log_likelihood=pa - math.log(cid.n_decisions),
        uniform_log_likelihood=-math.log(cid.n_decisions),
        converged=True,
    )


def exact_meg_targets_single(cid: SingleDecisionCid) -> MegResult:
    """MEG over every utility function of the target, as a concave program in w.

    The model is softmax_d(sum_t P(t|s, d) w_t); the rationality scale is
    absorbed into w.
    """
    K = cid.outcome_kernel
    weights = cid.context_dist[:, None] * cid.policy

    def negative(w):
        scores = K @ w
        logp = _log_softmax_rows(scores)
        value = -float(np.sum(weights * logp))
        model = np.exp(logp)
        resid = weights - cid.context_dist[:, None] * model
        grad = -np.einsum("sd,sdt->t", resid, K)
        return value, grad

    w0 = np.zeros(K.shape[2])
    res = minimize(negative, w0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 20000, "gtol": 1e-12, "ftol": 1e-15})
    pa = -res.fun + math.log(cid.n_decisions)
    return MegResult(
        meg=max(pa, 0.0), beta_star=1.0, predictive_accuracy=max(pa, 0.0),
        expected_utility_policy=math.nan, expected_utility_soft=math.nan,
        log_likelihood=-res.fun, uniform_log_likelihood=-math.log(cid.n_decisions),
        theta_star=res.x, iterations=int(res.nit), converged=bool(res.success),
    )


def cid_to_mdp(cid: SingleDecisionCid):
    """Horizon-1 MDP with context states followed by absorbing target states.

    Returns ``(mdp, policy)``; state utilities index the target states at
    offsets ``n_contexts .. n_contexts + |T| - 1``.
    """
    S, m, nT = cid.outcome_kernel.shape
    N = S + nT
    T = np.zeros((N, m, N))
    T[:S, :, S:] = cid.outcome_kernel
    T[np.arange(S, N), :, np.arange(S, N)] = 1.0
    init = np.concatenate([cid.context_dist, np.zeros(nT)])
    probs = np.full((1, N, m), 1.0 / m)
    probs[0, :S] = cid.policy
    return TabularMdp(1, init, T, np.zeros(N)), Policy(probs)


# -- mediated chains ---------------------------------------------------------

@dataclass(frozen=True)
class MediatedChain:
    """S -> D -> M -> T with T depending on (S, D) only through M."""

    context_dist: np.ndarray  # (S,)
    mediator_kernel: np.ndarray  # (S, m, |M|)
    target_kernel: np.ndarray  # (|M|, |T|) or (S, m, |M|, |T|)
    policy: np.ndarray  # (S, m)


def pseudo_terminal_check(chain: MediatedChain, tol: float = 1e-3):
    """Returns (meg_target, meg_mediator, meg_target <= meg_mediator + tol)."""
    med = np.asarray(chain.mediator_kernel, dtype=float)
    tk = np.asarray(chain.target_kernel, dtype=float)
    if tk.ndim == 4:
        if not np.allclose(tk, tk[:1, :1], atol=1e-12):
            raise MdpError("target depends on context or decision beyond the mediator")
        tk = tk[0, 0]
    if tk.ndim != 2 or tk.shape[0] != med.shape[2]:
        raise MdpError("target kernel must be indexed by mediator values")
    target_cid = SingleDecisionCid(chain.context_dist, med @ tk, chain.policy)
    mediator_cid = SingleDecisionCid(chain.context_dist, med, chain.policy)
    meg_t = exact_meg_targets_single(target_cid).meg
    meg_s = exact_meg_targets_single(mediator_cid).meg
    return meg_t, meg_s, meg_t <= meg_s + tol


def random_chain(seed: int, n_contexts=3, n_decisions=3, n_mediators=3, n_targets=3,
                 policy_concentration=1.0) -> MediatedChain:
    rng = np.random.default_rng(seed)
    return MediatedChain(
        rng.dirichlet(np.ones(n_contexts)),
        rng.dirichlet(np.ones(n_mediators), size=(n_contexts, n_decisions)),
        rng.dirichlet(np.ones(n_targets), size=n_mediators),
        rng.dirichlet(np.full(n_decisions, policy_concentration), size=n_contexts),
    )


def random_cid(seed: int, n_contexts=3, n_decisions=3, n_targets=3) -> SingleDecisionCid:
    rng = np.random.default_rng(seed)
    return SingleDecisionCid(
        rng.dirichlet(np.ones(n_contexts)),
        rng.dirichlet(np.ones(n_targets), size=(n_contexts, n_decisions)),
        rng.dirichlet(np.ones(n_decisions), size=n_contexts),
    )


# -- grids and finite differences -------------------------------------------

def beta_grid_oracle(mdp: TabularMdp, pi: Policy, utility, betas) -> tuple[float, float]:
    """Best (beta, predictive accuracy) over an explicit grid, each point exact."""
    u = step_utility(mdp, utility)
    _, sa = occupancy(mdp, pi)
    occupied = sa > 0
    uniform = mdp.horizon * math.log(mdp.n_actions)
    best = (math.nan, -math.inf)
    for beta in betas:
        logp = log_soft_policy(mdp, u, float(beta))
        pa = float(np.sum(sa[occupied] * logp[occupied])) + uniform
        if pa > best[1]:
            best = (float(beta), pa)
    return best


def grad_check(f, grad, x, h: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between ``grad(x)`` and central differences of ``f``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = np.atleast_1d(np.asarray(grad(x if x.size > 1 else x[0]), dtype=float))
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        xp, xm = x + e, x - e
        fd = (f(xp if x.size > 1 else xp[0]) - f(xm if x.size > 1 else xm[0])) / (2 * h)
        worst = max(worst, abs(g[i] - fd) / max(floor, abs(g[i])))
    return worst


# -- maximum entropy policies by projected gradient --------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of every last-axis row onto the probability simplex."""
    shape = v.shape
    rows = v.reshape(-1, shape[-1])
    srt = np.sort(rows, axis=1)[:, ::-1]
    css = np.cumsum(srt, axis=1) - 1.0
    idx = np.arange(1, shape[-1] + 1)
    cond = srt - css / idx > 0
    rho = np.count_nonzero(cond, axis=1)
    tau = css[np.arange(len(rows)), rho - 1] / rho
    return np.maximum(rows - tau[:, None], 0.0).reshape(shape)


def _batched_terms(mdp, u, P):
    """Expected utility, causal entropy and their per-row (occupancy-free) gradients.

    P has shape (R, n, S, A). Gradients are divided by the state occupancy,
    which rescales each row's step without changing ascent directions.
    """
    R = P.shape[0]
    n, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    T = mdp.transition
    rho = np.empty((R, n + 1, S))
    rho[:, 0] = mdp.initial_dist
    for t in range(n):
        rho[:, t + 1] = np.einsum("rs,rsa,sap->rp", rho[:, t], P[:, t], T)
    neglog = -np.log(np.maximum(P, 1e-300))
    qu = np.empty_like(P)
    qh = np.empty_like(P)
    vu = np.zeros((R, S))
    vh = np.zeros((R, S))
    for t in range(n - 1, -1, -1):
        qu[:, t] = np.einsum("sap,rp->rsa", T, u[t] + vu)
        qh[:, t] = neglog[:, t] + np.einsum("sap,rp->rsa", T, vh)
        vu = np.sum(P[:, t] * qu[:, t], axis=2)
        vh = np.sum(P[:, t] * qh[:, t], axis=2)
    eu = vu @ mdp.initial_dist
    ent = vh @ mdp.initial_dist
    return eu, ent, qu, qh, rho


def oracle_maxent_policy(mdp: TabularMdp, utility, u: float, restarts: int = 50, seed: int = 0,
                         iterations: int = 6000, step: float = 0.05, penalty: float = 5.0,
                         tol: float = 1e-6, return_details: bool = False):
    """Highest causal entropy policy with expected utility u, by projected gradient ascent.

    Augmented Lagrangian on the utility constraint; all restarts run as one
    batch and the best feasible one is returned.
    """
    if mdp.n_states * mdp.n_actions * mdp.horizon > 32:
        raise ValueError("oracle_maxent_policy is limited to n_states * n_actions * horizon <= 32")
    uu = np.asarray(step_utility(mdp, utility), dtype=float)
    rng_ = attainable_range(mdp, uu)
    if not rng_.contains(u):
        raise ValueError(f"u = {u} is outside the attainable range [{rng_.u_min}, {rng_.u_max}]")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(mdp.n_actions), size=(restarts, mdp.horizon, mdp.n_states))
    width = rng_.u_max - rng_.u_min
    if width <= 0.0:
        policy = Policy.uniform(mdp.horizon, mdp.n_states, mdp.n_actions)
        return (policy, {"entropy": mdp.horizon * math.log(mdp.n_actions), "violation": 0.0,
                         "feasible_restarts": restarts}) if return_details else policy
    # unit utility range keeps the penalty curvature independent of scale
    uu = uu / width
    u = u / width
    tol = tol / width
    lam = np.zeros(restarts)
    steps = np.full(restarts, step)

    def lagrangian(eu, ent):
        c = eu - u
        return ent - lam * c - 0.5 * penalty * c * c

    eu, ent, qu, qh, _ = _batched_terms(mdp, uu, P)
    for it in range(iterations):
        coef = lam + penalty * (eu - u)
        grad = qh - coef[:, None, None, None] * qu
        trial = project_simplex(P + steps[:, None, None, None] * grad)
        t_eu, t_ent, t_qu, t_qh, _ = _batched_terms(mdp, uu, trial)
        # per-restart backtracking: entropy curvature blows up near the simplex faces
        ok = lagrangian(t_eu, t_ent) >= lagrangian(eu, ent)
        P = np.where(ok[:, None, None, None], trial, P)
        eu, ent = np.where(ok, t_eu, eu), np.where(ok, t_ent, ent)
        qu = np.where(ok[:, None, None, None], t_qu, qu)
        qh = np.where(ok[:, None, None, None], t_qh, qh)
        steps = np.where(ok, np.minimum(steps * 1.2, 1.0), steps * 0.5)
        if it % 25 == 24:
            lam = lam + penalty * (eu - u)
    eu, ent, _, _, _ = _batched_terms(mdp, uu, P)
    viol = np.abs(eu - u)
    feasible = viol <= tol
    viol = viol * width
    if feasible.any():
        best = int(np.argmax(np.where(feasible, ent, -np.inf)))
    else:
        best = int(np.argmin(viol))
    policy = Policy(P[best])
    if return_details:
        return policy, {"entropy": float(ent[best]), "violation": float(viol[best]),
                        "feasible_restarts": int(feasible.sum())}
    return policy
