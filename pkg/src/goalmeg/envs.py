"""Built-in environments: the one-step mouse, CliffWorld and random MDPs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import Policy, TabularMdp, validate

# mouse state layout
CHEESE_LEFT, CHEESE_RIGHT, GOT_CHEESE, NO_CHEESE = range(4)
LEFT, RIGHT = 0, 1


def mouse_onestep():
    """The cheese example: observe the side, step toward or away, obtain or miss.

    Returns ``(mdp, utility)`` with utility +1 on the cheese outcome and -1 on
    the miss outcome.
    """
    T = np.zeros((4, 2, 4))
    T[CHEESE_LEFT, LEFT, GOT_CHEESE] = 1.0
    T[CHEESE_LEFT, RIGHT, NO_CHEESE] = 1.0
    T[CHEESE_RIGHT, RIGHT, GOT_CHEESE] = 1.0
    T[CHEESE_RIGHT, LEFT, NO_CHEESE] = 1.0
    # outcome states are absorbing; they are never acted in at horizon 1
    T[GOT_CHEESE, :, GOT_CHEESE] = 1.0
    T[NO_CHEESE, :, NO_CHEESE] = 1.0
    utility = np.array([0.0, 0.0, 1.0, -1.0])
    mdp = TabularMdp(1, np.array([0.5, 0.5, 0.0, 0.0]), T, utility)
    return mdp, utility


def mouse_policy(p_toward: float) -> Policy:
    """Moves toward the cheese with probability ``p_toward`` in both contexts."""
    m = np.full((4, 2), 0.5)
    m[CHEESE_LEFT] = [p_toward, 1.0 - p_toward]
    m[CHEESE_RIGHT] = [1.0 - p_toward, p_toward]
    return Policy.stationary(m, 1)


ACTION_NAMES = ("up", "down", "left", "right", "stay")
MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1), "stay": (0, 0)}


@dataclass(frozen=True)
class CliffWorldSpec:
    height: int = 4
    width: int = 10
    goal_length: int = 1
    wind: float = 0.3
    horizon: int = 20
    include_stay: bool = False
    goal_reward: float = 10.0
    cliff_reward: float = -10.0
    default_reward: float = -1.0

    def validate(self):
        if self.height < 2 or self.width < 2:
            raise ValueError("CliffWorld needs at least a 2x2 grid")
        if not 1 <= self.goal_length <= min(4, self.height + self.width - 1):
            raise ValueError(f"goal_length must be in 1..4, got {self.goal_length}")
        if not 0.0 <= self.wind <= 1.0:
            raise ValueError(f"wind must lie in [0, 1], got {self.wind}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def actions(self):
        return ACTION_NAMES if self.include_stay else ACTION_NAMES[:4]

    def cell(self, row: int, col: int) -> int:
        return row * self.width + col

    def start_cell(self) -> int:
        return self.cell(0, 0)

    def goal_cells(self) -> list[int]:
        """Goal region grown from the top-right corner, alternating down the back
        column and left along the top row."""
        W = self.width
        order = [(0, W - 1), (1, W - 1), (0, W - 2), (2, W - 1), (0, W - 3), (3, W - 1)]
        return [self.cell(r, c) for r, c in order[: self.goal_length]]

    def cliff_cells(self) -> list[int]:
        goals = set(self.goal_cells())
        return [self.cell(0, c) for c in range(1, self.width) if self.cell(0, c) not in goals]

    def rewards(self) -> np.ndarray:
        r = np.full(self.height * self.width, self.default_reward)
        r[self.cliff_cells()] = self.cliff_reward
        r[self.goal_cells()] = self.goal_reward
        return r


def cliffworld(spec: CliffWorldSpec | None = None) -> TabularMdp:
    """Windy CliffWorld; the reward of each step is the reward of the cell entered.

    Moves are clipped at the walls; afterwards, with probability ``wind``, the
    agent is pushed one more cell up (also clipped). Cliff cells neither
    terminate nor reset the episode.
    """
    spec = spec or CliffWorldSpec()
    spec.validate()
    H, W = spec.height, spec.width
    S = H * W
    T = np.zeros((S, len(spec.actions), S))
    for row in range(H):
        for col in range(W):
            s = spec.cell(row, col)
            for a, name in enumerate(spec.actions):
                dr, dc = MOVES[name]
                r2 = min(max(row + dr, 0), H - 1)
                c2 = min(max(col + dc, 0), W - 1)
                T[s, a, spec.cell(r2, c2)] += 1.0 - spec.wind
                T[s, a, spec.cell(max(r2 - 1, 0), c2)] += spec.wind
    init = np.zeros(S)
    init[spec.start_cell()] = 1.0
    mdp = TabularMdp(spec.horizon, init, T, spec.rewards())
    validate(mdp)
    return mdp


def random_mdp(seed: int, n_states: int, n_actions: int, horizon: int, utility_scale: float = 1.0):
    """Dirichlet(1) transition rows, uniform start, utilities uniform in [-scale, scale]."""
    if min(n_states, n_actions, horizon) < 1:
        raise ValueError("sizes must be at least 1")
    rng = np.random.default_rng(seed)
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    # renormalise so rows sum to 1 within the validation tolerance
    T /= T.sum(axis=2, keepdims=True)
    utility = rng.uniform(-utility_scale, utility_scale, size=n_states)
    mdp = TabularMdp(horizon, np.full(n_states, 1.0 / n_states), T, utility)
    return mdp, utility


def random_policy(seed: int, mdp: TabularMdp, concentration: float = 1.0) -> Policy:
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.full(mdp.n_actions, concentration),
                          size=(mdp.horizon, mdp.n_states))
    probs /= probs.sum(axis=2, keepdims=True)
    return Policy(probs)


ENVIRONMENTS = ("mouse", "cliffworld")
