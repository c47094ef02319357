"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 the ascent stopped at the beta cap
(or beta* is infinite), 3 a verification check failed.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import envs, io, meg, report, utility_models, verify
from .mdp import MdpError, epsilon_greedy, validate_policy, value_iteration

EXIT_OK, EXIT_INPUT, EXIT_CAPPED, EXIT_VERIFY = 0, 1, 2, 3
EPSILONS = tuple(round(0.1 * i, 1) for i in range(1, 10))
GOAL_LENGTHS = (1, 2, 3, 4)


def _options(args) -> meg.MegOptions:
    return meg.MegOptions(learning_rate=args.lr, max_iterations=args.max_iters,
                          beta_cap=args.beta_cap, restarts=args.restarts, seed=args.seed)


def _add_solver_flags(p, restarts=True):
    p.add_argument("--lr", type=float, default=0.1, help="learning rate")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--beta-cap", type=float, default=1e3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    if restarts:
        p.add_argument("--restarts", type=int, default=5)
    else:
        p.set_defaults(restarts=5)


def _add_model_flags(p):
    p.add_argument("--model", choices=utility_models.KINDS, default="tabular")
    p.add_argument("--hidden", type=int, default=256, help="MLP hidden width")


def _add_input_flags(p):
    p.add_argument("--mdp", type=Path, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--policy", type=Path)
    group.add_argument("--trajectories", type=Path)


def _load_behaviour(args, mdp):
    if args.policy is not None:
        policy = io.load_policy(args.policy)
        try:
            validate_policy(mdp, policy)
        except MdpError as exc:
            raise io.InputError(f"{args.policy}: {exc}") from exc
        return policy, None
    return None, io.load_trajectories(args.trajectories, mdp)


def _finish(result, algorithm, opts, out: Path, extra=None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    data = io.result_to_json(result, algorithm, opts)
    data.update(extra or {})
    io.write_json(out / "result.json", data)
    print(f"{algorithm} MEG = {result.meg:.6f} nats, beta* = {meg.format_beta(result.beta_star)}, "
          f"iterations = {result.iterations}")
    print(f"wrote {out / 'result.json'}")
    if result.capped or math.isinf(result.beta_star):
        return EXIT_CAPPED
    return EXIT_OK


def cmd_known(args) -> int:
    mdp = io.load_mdp(args.mdp)
    utility = io.load_utility(args.utility, mdp) if args.utility else None
    policy, traj = _load_behaviour(args, mdp)
    opts = _options(args)
    if policy is not None:
        result = meg.meg_known(mdp, policy, utility, opts)
        result.signed_meg = meg.signed_meg(result, mdp, policy, utility)
    else:
        result = meg.meg_known_from_trajectories(mdp, traj, utility, opts)
    return _finish(result, "known", opts, args.out)


def cmd_unknown(args) -> int:
    mdp = io.load_mdp(args.mdp)
    policy, traj = _load_behaviour(args, mdp)
    opts = _options(args)
    model = utility_models.init(args.model, mdp.n_states, seed=args.seed, hidden=args.hidden)
    if policy is not None:
        result = meg.meg_unknown(mdp, policy, model, opts)
    else:
        result = meg.meg_unknown_from_trajectories(mdp, traj, model, opts)
    args.out.mkdir(parents=True, exist_ok=True)
    io.save_checkpoint(args.out / "theta_star.json", model.with_theta(result.theta_star))
    return _finish(result, "unknown", opts, args.out,
                   {"theta_star_checkpoint": "theta_star.json"})


def cmd_targets(args) -> int:
    mdp = io.load_mdp(args.mdp)
    policy = io.load_policy(args.policy, mdp)
    opts = _options(args)
    result = meg.meg_target_state(mdp, policy, args.times, opts)
    return _finish(result, "targets", opts, args.out)


def _cliffworld(args, k):
    spec = envs.CliffWorldSpec(goal_length=k, horizon=args.horizon, include_stay=args.stay)
    return envs.cliffworld(spec), spec


def _unknown_runs(mdp, policy, args):
    """Unknown-utility MEG over ``--runs`` seeds; returns (mean, standard error)."""
    values = []
    for run in range(args.runs):
        seed = args.seed + 1000 * run
        model = utility_models.init(args.model, mdp.n_states, seed=seed, hidden=args.hidden)
        opts = meg.MegOptions(learning_rate=args.lr, max_iterations=args.max_iters,
                              beta_cap=args.beta_cap, restarts=args.restarts, seed=seed)
        values.append(meg.meg_unknown(mdp, policy, model, opts).meg)
    values = np.array(values)
    stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return float(values.mean()), stderr


def cmd_experiment_epsilon(args) -> int:
    mdp, _ = _cliffworld(args, args.k)
    optimal, _ = value_iteration(mdp)
    rows = []
    for eps in EPSILONS:
        policy = epsilon_greedy(optimal, eps)
        known = meg.meg_known(mdp, policy).meg
        mean, stderr = _unknown_runs(mdp, policy, args)
        rows.append((eps, known, mean, stderr))
        print(f"epsilon={eps:.1f}  known={known:.4f}  unknown={mean:.4f} +/- {stderr:.4f}")
    args.out.mkdir(parents=True, exist_ok=True)
    header = ("epsilon", "meg_known", "meg_unknown_mean", "meg_unknown_stderr")
    report.write_csv(args.out / "epsilon.csv", header, rows)
    cols = list(zip(*rows))
    svg = report.line_plot_svg(list(cols[0]), {"known utility": list(cols[1]),
                                               "unknown utility": list(cols[2])},
                               "MEG of epsilon-greedy policies", "epsilon", "MEG (nats)",
                               errors={"unknown utility": list(cols[3])})
    (args.out / "epsilon.svg").write_text(svg)
    print(f"wrote {args.out / 'epsilon.csv'} and {args.out / 'epsilon.svg'}")
    return EXIT_OK


def cmd_experiment_goal_length(args) -> int:
    rows = []
    for k in GOAL_LENGTHS:
        mdp, _ = _cliffworld(args, k)
        optimal, _ = value_iteration(mdp)
        known = meg.meg_known(mdp, optimal).meg
        mean, stderr = _unknown_runs(mdp, optimal, args)
        rows.append((k, known, mean, stderr))
        print(f"k={k}  known={known:.4f}  unknown={mean:.4f} +/- {stderr:.4f}")
    args.out.mkdir(parents=True, exist_ok=True)
    header = ("k", "meg_known", "meg_unknown_mean", "meg_unknown_stderr")
    report.write_csv(args.out / "goal_length.csv", header, rows)
    cols = list(zip(*rows))
    svg = report.line_plot_svg([float(k) for k in cols[0]],
                               {"known utility": list(cols[1]), "unknown utility": list(cols[2])},
                               "MEG of optimal policies by goal length", "goal length k",
                               "MEG (nats)", errors={"unknown utility": list(cols[3])})
    (args.out / "goal_length.svg").write_text(svg)
    print(f"wrote {args.out / 'goal_length.csv'} and {args.out / 'goal_length.svg'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify.run_battery(seed=args.seed)
    failed = [c.name for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_env_export(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    if args.env == "mouse":
        mdp, _ = envs.mouse_onestep()
        if args.toward is not None:
            io.save_policy(args.out / "policy.json", envs.mouse_policy(args.toward))
    else:
        mdp, _ = _cliffworld(args, args.k)
        optimal, _ = value_iteration(mdp)
        io.save_policy(args.out / "policy.json", optimal)
    io.save_mdp(args.out / "mdp.json", mdp)
    print(f"wrote {args.out / 'mdp.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goalmeg", description=(
        "Maximum entropy goal-directedness of policies in finite-horizon tabular MDPs."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("known", help="MEG with respect to a known utility function")
    _add_input_flags(p)
    p.add_argument("--utility", type=Path, help="utility JSON; defaults to the MDP's state_utility")
    _add_solver_flags(p, restarts=False)
    p.set_defaults(func=cmd_known)

    p = sub.add_parser("unknown", help="MEG over a parametric class of utility functions")
    _add_input_flags(p)
    _add_model_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_unknown)

    p = sub.add_parser("targets", help="MEG over all utility functions of the states at given times")
    p.add_argument("--mdp", type=Path, required=True)
    p.add_argument("--policy", type=Path, required=True)
    p.add_argument("--times", type=int, nargs="+", required=True,
                   help="state timesteps, 1 (initial state) .. horizon+1")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_targets)

    for name, func, help_text in (
            ("experiment-epsilon", cmd_experiment_epsilon, "CliffWorld epsilon-greedy sweep"),
            ("experiment-goal-length", cmd_experiment_goal_length, "CliffWorld goal-length sweep")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--k", type=int, choices=GOAL_LENGTHS, default=1, help="goal length")
        p.add_argument("--horizon", type=int, default=20)
        p.add_argument("--stay", action="store_true", help="add a stay action")
        p.add_argument("--runs", type=int, default=3, help="seeds per unknown-utility value")
        _add_model_flags(p)
        _add_solver_flags(p)
        p.set_defaults(func=func, model="mlp")

    p = sub.add_parser("verify", help="run the property and oracle battery")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("env", help="built-in environments")
    env_sub = p.add_subparsers(dest="env_command", required=True)
    e = env_sub.add_parser("export", help="write an environment as MDP JSON")
    e.add_argument("env", choices=envs.ENVIRONMENTS)
    e.add_argument("--k", type=int, choices=GOAL_LENGTHS, default=1)
    e.add_argument("--horizon", type=int, default=20)
    e.add_argument("--stay", action="store_true")
    e.add_argument("--toward", type=float, help="mouse only: also write a policy file")
    e.add_argument("--out", type=Path, default=Path("out"))
    e.set_defaults(func=cmd_env_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (io.InputError, MdpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
