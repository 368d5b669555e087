"""DuelGame: a repeated two-player zero-sum matrix game for self-play.

Actions are rock, paper, scissors and fold. Rock-paper-scissors payoffs are
perturbed per variant (the task), fold loses one point to everything else.
A game is ``rounds`` simultaneous moves; the return is the row player's
summed payoff, so swapping the players negates it.
"""

from __future__ import annotations

import io
import random
from typing import Callable

import numpy as np

from ..selfplay import LIVE_POLICY
from ..task_space import DiscreteTaskSpace
from .base import TaskEnv

ROCK, PAPER, SCISSORS, FOLD = range(4)
ACTIONS = ("rock", "paper", "scissors", "fold")


def payoff_matrix(variant: int) -> np.ndarray:
    """Antisymmetric 4x4 payoff for the row player."""
    rng = random.Random(variant)
    rp, ps, sr = (0.5 + rng.random() for _ in range(3))
    a = np.zeros((4, 4))
    a[PAPER, ROCK] = rp
    a[SCISSORS, PAPER] = ps
    a[ROCK, SCISSORS] = sr
    a[:3, FOLD] = 1.0
    return a - a.T


class SoftmaxPolicy:
    """State-indexed logits; the snapshot format is ``numpy.save`` bytes."""

    def __init__(self, logits: np.ndarray):
        self.logits = np.asarray(logits, dtype=np.float64)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int = 4) -> "SoftmaxPolicy":
        return cls(np.zeros((n_states, n_actions)))

    def probs(self, state: int) -> np.ndarray:
        z = self.logits[state] - self.logits[state].max()
        e = np.exp(z)
        return e / e.sum()

    def act(self, state: int, rng: np.random.Generator, greedy: bool = False) -> int:
        if greedy:
            return int(np.argmax(self.logits[state]))
        return int(rng.choice(self.logits.shape[1], p=self.probs(state)))

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.save(buf, self.logits, allow_pickle=False)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SoftmaxPolicy":
        return cls(np.load(io.BytesIO(blob), allow_pickle=False))


def duel_play(policy_a, policy_b, seed: int, variant: int = 0, rounds: int = 10, greedy: bool = False) -> float:
    """Play one game and return player A's return (player B gets the negation)."""
    payoff = payoff_matrix(variant)
    rng_a = np.random.default_rng([seed, 0])
    rng_b = np.random.default_rng([seed, 1])
    total = 0.0
    for _ in range(rounds):
        a = policy_a.act(variant, rng_a, greedy)
        b = policy_b.act(variant, rng_b, greedy)
        total += payoff[a, b]
    return total


class DuelGame(TaskEnv):
    """The learner plays the row; the column is an opponent chosen per task.

    Tasks are ``(variant, opponent_id)`` pairs. ``opponent_loader`` turns an
    opponent id into a policy; ``LIVE_POLICY`` means the learner's current
    policy, supplied through ``live_policy``.
    """

    n_actions = 4

    def __init__(
        self,
        num_variants: int = 4,
        rounds: int = 10,
        opponent_loader: Callable[[int], SoftmaxPolicy] | None = None,
        live_policy: Callable[[], SoftmaxPolicy] | None = None,
        seed: int | None = None,
    ):
        super().__init__()
        self.num_variants = num_variants
        self.rounds = rounds
        self.task_space = DiscreteTaskSpace(num_variants)
        self.n_states = num_variants
        self.opponent_loader = opponent_loader
        self.live_policy = live_policy
        self.rng = np.random.default_rng(seed)
        self.variant = 0
        self.opponent_id = LIVE_POLICY
        self.opponent: SoftmaxPolicy | None = None
        self.payoff = payoff_matrix(0)
        self._won = 0.0

    def change_task(self, new_task):
        if isinstance(new_task, tuple):
            variant, opponent_id = new_task
        else:
            variant, opponent_id = new_task, LIVE_POLICY
        if not self.task_space.contains(variant):
            raise ValueError(f"{variant!r} is not a valid variant")
        self.current_task = (variant, opponent_id)
        self.variant = variant
        self.opponent_id = opponent_id
        self.payoff = payoff_matrix(variant)
        self.opponent = None

    def _resolve_opponent(self) -> SoftmaxPolicy:
        if self.opponent_id == LIVE_POLICY:
            if self.live_policy is None:
                raise RuntimeError("no live policy available for self-play")
            return self.live_policy()
        if self.opponent_loader is None:
            raise RuntimeError("no opponent loader configured")
        return self.opponent_loader(self.opponent_id)

    def encode_goal(self):
        return (self.variant,)

    def obs_index(self, obs):
        return obs[0]

    def _reset(self, seed):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.opponent = self._resolve_opponent()
        return self.encode_goal()

    def _step(self, action):
        b = self.opponent.act(self.variant, self.rng)
        reward = float(self.payoff[action, b])
        done = self.step_count + 1 >= self.rounds
        info = {"opponent_action": b}
        if done:
            info["task_complete"] = self.episode_return + reward > 0
        return self.encode_goal(), reward, done, info

    def task_completion(self):
        return 1.0 if self.episode_return > 0 else 0.0
