import csv
import json

import numpy as np
import pytest

from goalmeg import cli, envs, io, meg, verify
from goalmeg.mdp import sample_trajectories


@pytest.fixture
def mouse_dir(tmp_path):
    assert cli.main(["env", "export", "mouse", "--toward", "0.8", "--out", str(tmp_path)]) == 0
    return tmp_path


def run(args, out):
    code = cli.main(args + ["--out", str(out)])
    data = json.loads((out / "result.json").read_text()) if (out / "result.json").exists() else None
    return code, data


def test_known_on_mouse(mouse_dir):
    code, data = run(["known", "--mdp", str(mouse_dir / "mdp.json"),
                      "--policy", str(mouse_dir / "policy.json")], mouse_dir / "r")
    assert code == 0
    assert data["meg"] == pytest.approx(0.19, abs=0.01)
    assert data["algorithm"] == "known" and "options" in data
    assert data["signed_meg"] == pytest.approx(data["meg"])


def test_known_on_uniform_policy(tmp_path):
    cli.main(["env", "export", "mouse", "--toward", "0.5", "--out", str(tmp_path)])
    code, data = run(["known", "--mdp", str(tmp_path / "mdp.json"),
                      "--policy", str(tmp_path / "policy.json")], tmp_path / "r")
    assert code == 0 and data["meg"] <= 1e-9


def test_optimal_policy_exits_with_infinite_beta(tmp_path):
    cli.main(["env", "export", "mouse", "--toward", "1.0", "--out", str(tmp_path)])
    code, data = run(["known", "--mdp", str(tmp_path / "mdp.json"),
                      "--policy", str(tmp_path / "policy.json")], tmp_path / "r")
    assert code == 2
    assert data["beta_star"] == "inf" and data["meg"] == pytest.approx(np.log(2))


def test_wrong_action_count_is_input_error(mouse_dir, capsys):
    (mouse_dir / "bad.json").write_text(json.dumps({"policy": np.full((1, 4, 3), 1 / 3).tolist()}))
    code = cli.main(["known", "--mdp", str(mouse_dir / "mdp.json"), "--policy",
                     str(mouse_dir / "bad.json"), "--out", str(mouse_dir / "r")])
    assert code == 1
    assert "bad.json" in capsys.readouterr().err


def test_missing_file_is_input_error(tmp_path):
    assert cli.main(["known", "--mdp", str(tmp_path / "nope.json"), "--policy", "x.json"]) == 1


def test_known_from_trajectories(mouse_dir):
    mdp = io.load_mdp(mouse_dir / "mdp.json")
    traj = sample_trajectories(mdp, envs.mouse_policy(0.8), 4000, seed=0)
    io.save_trajectories(mouse_dir / "t.csv", traj)
    code, data = run(["known", "--mdp", str(mouse_dir / "mdp.json"),
                      "--trajectories", str(mouse_dir / "t.csv")], mouse_dir / "r")
    assert code == 0 and data["meg"] == pytest.approx(0.19, abs=0.03)


def test_unknown_dominates_known(mouse_dir):
    out = mouse_dir / "u"
    code, data = run(["unknown", "--mdp", str(mouse_dir / "mdp.json"),
                      "--policy", str(mouse_dir / "policy.json")], out)
    assert code in (0, 2)
    assert data["meg"] >= 0.19 - 1e-3
    assert data["theta_star_checkpoint"] == "theta_star.json"
    model = io.load_utility(out / "theta_star.json", io.load_mdp(mouse_dir / "mdp.json"))
    assert model.shape == (4,)


def test_unknown_on_uniform(tmp_path):
    cli.main(["env", "export", "mouse", "--toward", "0.5", "--out", str(tmp_path)])
    code, data = run(["unknown", "--mdp", str(tmp_path / "mdp.json"),
                      "--policy", str(tmp_path / "policy.json"), "--restarts", "2"], tmp_path / "r")
    assert data["meg"] <= 1e-4


def test_targets_subcommand(mouse_dir):
    code, data = run(["targets", "--mdp", str(mouse_dir / "mdp.json"),
                      "--policy", str(mouse_dir / "policy.json"), "--times", "2"], mouse_dir / "r")
    assert data["meg"] == pytest.approx(0.1927, abs=1e-3)


@pytest.mark.parametrize("command", [
    ["known"], ["unknown", "--model", "mlp", "--hidden", "8", "--restarts", "2", "--max-iters", "200"]])
def test_outputs_are_byte_identical(mouse_dir, command):
    args = command + ["--mdp", str(mouse_dir / "mdp.json"), "--policy",
                      str(mouse_dir / "policy.json"), "--seed", "3"]
    cli.main(args + ["--out", str(mouse_dir / "a")])
    cli.main(args + ["--out", str(mouse_dir / "b")])
    for name in sorted(p.name for p in (mouse_dir / "a").iterdir()):
        assert (mouse_dir / "a" / name).read_bytes() == (mouse_dir / "b" / name).read_bytes()


def test_experiment_epsilon_small(tmp_path):
    args = ["experiment-epsilon", "--horizon", "6", "--hidden", "8", "--max-iters", "50",
            "--restarts", "1", "--runs", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    with open(tmp_path / "epsilon.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    assert [float(r["epsilon"]) for r in rows] == pytest.approx([0.1 * i for i in range(1, 10)])
    assert (tmp_path / "epsilon.svg").read_text().startswith("<svg")


def test_experiment_goal_length_small(tmp_path):
    args = ["experiment-goal-length", "--horizon", "6", "--model", "tabular", "--max-iters", "50",
            "--restarts", "1", "--runs", "2", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    header, rows = _read(tmp_path / "goal_length.csv")
    assert header[0] == "k" and len(rows) == 4
    assert all(float(r[1]) >= 0 for r in rows)


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_cliffworld_export(tmp_path):
    assert cli.main(["env", "export", "cliffworld", "--k", "2", "--out", str(tmp_path)]) == 0
    mdp = io.load_mdp(tmp_path / "mdp.json")
    assert mdp.n_states == 40
    io.load_policy(tmp_path / "policy.json", mdp)


def test_verify_canary_detects_sign_flip(monkeypatch):
    original = meg.beta_gradient
    monkeypatch.setattr(meg, "beta_gradient", lambda *a, **k: -original(*a, **k))
    assert not verify.check_beta_gradient(points=5).passed
    monkeypatch.setattr(verify, "BATTERY", (lambda seed: verify.check_beta_gradient(points=5, seed=seed),))
    assert cli.main(["verify"]) == 3


def test_verify_exit_zero_on_passing_battery(monkeypatch):
    monkeypatch.setattr(verify, "BATTERY", (lambda seed: verify.check_mlp_gradient(seed=seed),))
    assert cli.main(["verify"]) == 0
