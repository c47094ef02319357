import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goalmeg import utility_models as um
from goalmeg.oracles import grad_check


def forward_by_hand(model, state):
    """Scalar-loop MLP forward pass, independent of the vectorised one."""
    F = model.features.shape[1]
    h = model.hidden
    th = model.theta
    x = model.features[state]
    out = th[-1]
    for j in range(h):
        pre = th[h * F + j] + sum(th[j * F + i] * x[i] for i in range(F))
        out += th[h * F + h + j] * max(pre, 0.0)
    return out


def test_tabular_evaluate():
    model = um.init("tabular", 2).with_theta(np.array([1.0, -1.0]))
    assert model.evaluate(0) == 1.0


def test_linear_zero_init_is_zero():
    model = um.init("linear", 5)
    assert all(model.evaluate(s) == 0.0 for s in range(5))


def test_mlp_matches_hand_forward_pass():
    model = um.init("mlp", 5, seed=7, hidden=4, scale=1.0)
    assert model.evaluate(2) == pytest.approx(forward_by_hand(model, 2), abs=1e-14)
    for s in range(5):
        assert model.evaluate_all()[s] == pytest.approx(forward_by_hand(model, s), abs=1e-14)


def test_grid_features_mlp_forward():
    model = um.init("mlp", 6, seed=3, hidden=5, scale=1.0, feature_map="grid", grid_shape=(2, 3))
    assert model.features.shape == (6, 8)
    assert model.evaluate(4) == pytest.approx(forward_by_hand(model, 4), abs=1e-14)


def test_out_of_range_state():
    model = um.init("tabular", 3)
    with pytest.raises(IndexError):
        model.evaluate(3)
    with pytest.raises(IndexError):
        model.grad_params(-1)


def test_tabular_gradient_is_unit_vector():
    model = um.init("tabular", 5)
    assert np.array_equal(model.grad_params(3), np.eye(5)[3])


def test_linear_gradient_is_feature_vector():
    model = um.init("linear", 6, feature_map="grid", grid_shape=(2, 3))
    assert np.array_equal(model.grad_params(4), model.features[4])


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(um.KINDS), st.integers(0, 10_000), st.integers(0, 5))
def test_gradients_match_finite_differences(kind, seed, state):
    model = um.init(kind, 6, seed=seed, hidden=6, scale=1.0)
    # random parameters for every kind, not just the MLP's init
    model = model.with_theta(np.random.default_rng(seed).normal(size=model.n_params))
    err = grad_check(lambda th: model.evaluate_all(th)[state],
                     lambda th: model.vjp(np.eye(6)[state], th), model.theta, h=1e-5, floor=1e-6)
    assert err <= 1e-4


def test_vjp_is_weighted_sum_of_gradients():
    model = um.init("mlp", 4, seed=1, hidden=3, scale=1.0)
    w = np.array([0.5, -2.0, 1.0, 0.25])
    expected = sum(w[s] * model.grad_params(s) for s in range(4))
    assert np.allclose(model.vjp(w), expected)


def test_init_is_deterministic():
    assert np.array_equal(um.init("mlp", 4, seed=3).theta, um.init("mlp", 4, seed=3).theta)
    assert not np.array_equal(um.init("mlp", 4, seed=0).theta, um.init("mlp", 4, seed=1).theta)
    assert np.all(um.init("tabular", 4).theta == 0)


def test_mlp_init_range():
    theta = um.init("mlp", 10, seed=2, scale=0.1, hidden=16).theta
    assert np.all(np.abs(theta) <= 0.1)
    assert theta.size == 16 * 10 + 2 * 16 + 1


def test_checkpoint_round_trip():
    model = um.init("mlp", 6, seed=5, hidden=3, feature_map="grid", grid_shape=(2, 3))
    back = um.ParametricUtility.from_json(model.to_json())
    assert back.kind == "mlp" and back.seed == 5 and back.grid_shape == (2, 3)
    assert np.array_equal(back.evaluate_all(), model.evaluate_all())


def test_bad_kind_and_theta_length():
    with pytest.raises(ValueError):
        um.init("cubic", 3)
    with pytest.raises(ValueError):
        um.init("tabular", 3).with_theta(np.zeros(4))


def test_reinit_keeps_architecture():
    model = um.init("mlp", 4, seed=0, hidden=5)
    fresh = um.reinit(model, 9)
    assert fresh.n_params == model.n_params and fresh.seed == 9
    assert not np.array_equal(fresh.theta, model.theta)
