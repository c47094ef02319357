"""Differentiable parametric utility functions over states.

All parameters live in one flat array so optimisers stay model-agnostic.
MLP layout: [W1 (hidden x features), b1 (hidden), w2 (hidden), b2].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("tabular", "linear", "mlp")


def onehot_features(n_states: int) -> np.ndarray:
    return np.eye(n_states)


def grid_features(height: int, width: int) -> np.ndarray:
    """Normalised (row, col) coordinates followed by a one-hot cell code."""
    rows, cols = np.divmod(np.arange(height * width), width)
    coords = np.stack([rows / max(height - 1, 1), cols / max(width - 1, 1)], axis=1)
    return np.hstack([coords, np.eye(height * width)])


@dataclass
class ParametricUtility:
    kind: str
    theta: np.ndarray
    features: np.ndarray  # (S, F)
    hidden: int = 0
    seed: int = 0
    feature_map: str = "onehot"
    grid_shape: tuple[int, int] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}; expected one of {KINDS}")
        self.theta = np.asarray(self.theta, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        if self.theta.shape != (self.n_params,):
            raise ValueError(f"{self.kind} utility expects {self.n_params} parameters, got {self.theta.shape}")

    @property
    def n_states(self) -> int:
        return self.features.shape[0]

    @property
    def n_params(self) -> int:
        F = self.features.shape[1]
        if self.kind == "tabular":
            return self.n_states
        if self.kind == "linear":
            return F
        return self.hidden * F + 2 * self.hidden + 1

    def with_theta(self, theta) -> "ParametricUtility":
        return ParametricUtility(self.kind, theta, self.features, self.hidden, self.seed,
                                 self.feature_map, self.grid_shape)

    def _unpack(self, theta):
        h, F = self.hidden, self.features.shape[1]
        W1 = theta[: h * F].reshape(h, F)
        b1 = theta[h * F: h * F + h]
        w2 = theta[h * F + h: h * F + 2 * h]
        return W1, b1, w2, theta[-1]

    def evaluate_all(self, theta=None) -> np.ndarray:
        """Utility of every state, shape (S,)."""
        theta = self.theta if theta is None else theta
        if self.kind == "tabular":
            return theta.copy()
        if self.kind == "linear":
            return self.features @ theta
        W1, b1, w2, b2 = self._unpack(theta)
        hidden = np.maximum(self.features @ W1.T + b1, 0.0)
        return hidden @ w2 + b2

    def evaluate(self, state: int) -> float:
        self._check_state(state)
        return float(self.evaluate_all()[state])

    def vjp(self, weights, theta=None) -> np.ndarray:
        """sum_s weights[s] * grad_theta U(s)."""
        theta = self.theta if theta is None else theta
        weights = np.asarray(weights, dtype=float)
        if self.kind == "tabular":
            return weights.copy()
        if self.kind == "linear":
            return self.features.T @ weights
        W1, b1, w2, _ = self._unpack(theta)
        pre = self.features @ W1.T + b1
        hidden = np.maximum(pre, 0.0)
        # ReLU subgradient is 0 at the kink
        delta = (weights[:, None] * w2[None, :]) * (pre > 0)
        return np.concatenate([
            (delta.T @ self.features).ravel(),
            delta.sum(axis=0),
            hidden.T @ weights,
            [weights.sum()],
        ])

    def grad_params(self, state: int) -> np.ndarray:
        self._check_state(state)
        weights = np.zeros(self.n_states)
        weights[state] = 1.0
        return self.vjp(weights)

    def _check_state(self, state):
        if not 0 <= state < self.n_states:
            raise IndexError(f"state {state} out of range for {self.n_states} states")

    def to_json(self) -> dict:
        dims = {"n_states": self.n_states, "n_features": int(self.features.shape[1]),
                "hidden": self.hidden, "feature_map": self.feature_map}
        if self.grid_shape is not None:
            dims["grid_shape"] = list(self.grid_shape)
        return {"kind": self.kind, "dims": dims, "theta": self.theta.tolist(), "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> "ParametricUtility":
        dims = data["dims"]
        features = _features_for(dims.get("feature_map", "onehot"), dims["n_states"],
                                 dims.get("grid_shape"))
        return cls(data["kind"], np.asarray(data["theta"], dtype=float), features,
                   int(dims.get("hidden", 0)), int(data.get("seed", 0)),
                   dims.get("feature_map", "onehot"),
                   tuple(dims["grid_shape"]) if dims.get("grid_shape") else None)


def _features_for(feature_map, n_states, grid_shape=None):
    if feature_map == "onehot":
        return onehot_features(n_states)
    if feature_map == "grid":
        if grid_shape is None:
            raise ValueError("grid features need a grid_shape")
        height, width = grid_shape
        if height * width != n_states:
            raise ValueError(f"grid {height}x{width} does not cover {n_states} states")
        return grid_features(height, width)
    raise ValueError(f"unknown feature map {feature_map!r}")


def init(kind: str, n_states: int, seed: int = 0, scale: float = 0.1, hidden: int = 256,
         feature_map: str = "onehot", grid_shape=None) -> ParametricUtility:
    """Fresh utility model; MLP weights i.i.d. uniform in [-scale, scale], others zero."""
    features = _features_for(feature_map, n_states, grid_shape)
    hidden = hidden if kind == "mlp" else 0
    model = ParametricUtility(kind, np.zeros(_count(kind, n_states, features.shape[1], hidden)),
                              features, hidden, seed, feature_map,
                              tuple(grid_shape) if grid_shape is not None else None)
    if kind == "mlp":
        rng = np.random.default_rng(seed)
        model.theta = rng.uniform(-scale, scale, size=model.n_params)
    return model


def reinit(model: ParametricUtility, seed: int, scale: float = 0.1) -> ParametricUtility:
    """Same architecture and features, fresh parameters drawn with ``seed``."""
    fresh = model.with_theta(np.zeros(model.n_params))
    fresh.seed = seed
    if model.kind == "mlp":
        fresh.theta = np.random.default_rng(seed).uniform(-scale, scale, size=model.n_params)
    return fresh


def _count(kind, n_states, n_features, hidden):
    if kind == "tabular":
        return n_states
    if kind == "linear":
        return n_features
    return hidden * n_features + 2 * hidden + 1
