"""Prioritized Level Replay over arbitrary finite task spaces.

Scores arrive through ``update_on_demand`` under the key ``"value_l1_score"``
as ``[(task, score), ...]``; the learner computes them with
:func:`value_l1_score` from each episode's TD errors. Staleness is measured
with a global episode counter that advances once per episode update.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Curriculum, CurriculumError

EXPLORE = "explore"
REPLAY = "replay"


class EmptyTrajectory(ValueError):
    pass


class NoSeenTasks(CurriculumError):
    pass


def value_l1_score(td_errors: Sequence[float], gamma: float, lam: float) -> float:
    """Mean absolute GAE over a trajectory.

    With ``T`` TD errors ``d_0..d_{T-1}`` this is
    ``(1/T) * sum_t |sum_{k>=t} (gamma*lam)**(k-t) * d_k|``, computed with the
    usual backward recursion ``A_t = d_t + gamma*lam*A_{t+1}``.
    """
    deltas = np.asarray(td_errors, dtype=np.float64)
    if deltas.size == 0:
        raise EmptyTrajectory("need at least one TD error")
    discount = gamma * lam
    total = 0.0
    running = 0.0
    for d in deltas[::-1]:
        running = d + discount * running
        total += abs(running)
    return total / deltas.size


@dataclass(frozen=True)
class PlrConfig:
    buffer_size: int | None = None
    temperature: float = 0.1
    staleness_coef: float = 0.1
    prioritization: str = "rank"
    scoring: str = "value_l1"
    robust: bool = False
    aggregation: str = "latest"

    def __post_init__(self):
        if self.buffer_size is not None and self.buffer_size < 1:
            raise CurriculumError("buffer_size must be >= 1")
        if self.temperature <= 0:
            raise CurriculumError("temperature must be > 0")
        if not 0.0 <= self.staleness_coef <= 1.0:
            raise CurriculumError("staleness_coef must lie in [0, 1]")
        if self.prioritization != "rank" or self.scoring != "value_l1":
            raise CurriculumError("only rank prioritization with value_l1 scoring is supported")
        if self.aggregation not in ("latest", "mean"):
            raise CurriculumError("aggregation must be 'latest' or 'mean'")


def rank_weights(scores: np.ndarray, temperature: float) -> np.ndarray:
    """(1/rank)**(1/temperature), rank 1 = highest score, ties to the lower index."""
    # stable sort on -score keeps lower indices first among equal scores
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return (1.0 / ranks) ** (1.0 / temperature)


def plr_score_distribution(
    scores: np.ndarray,
    seen: np.ndarray,
    last_update: np.ndarray,
    global_count: int,
    temperature: float,
    staleness_coef: float,
) -> np.ndarray:
    """Mix of rank-prioritized scores and staleness, over seen tasks only."""
    scores = np.asarray(scores, dtype=np.float64)
    seen = np.asarray(seen, dtype=bool)
    if not seen.any():
        raise NoSeenTasks("PLR has no scored tasks yet")
    idx = np.flatnonzero(seen)

    p_score = np.zeros(len(scores))
    w = rank_weights(scores[idx], temperature)
    p_score[idx] = w / w.sum()

    p_stale = np.zeros(len(scores))
    staleness = global_count - np.asarray(last_update, dtype=np.float64)[idx]
    if staleness.sum() > 0:
        p_stale[idx] = staleness / staleness.sum()
    else:
        p_stale[idx] = 1.0 / len(idx)

    return (1.0 - staleness_coef) * p_score + staleness_coef * p_stale


class PrioritizedLevelReplay(Curriculum):
    """PLR with an unseen-first exploration rule and optional robust tagging.

    While the buffer has room and unscored tasks remain, each draw picks one
    of them uniformly (tag ``explore``); otherwise it replays from the
    score/staleness mixture (tag ``replay``). Tasks handed out for
    exploration but not yet scored are not handed out again for exploration.
    Once the buffer is full, exploration continues with probability equal to
    the unscored fraction of the space and a newly scored task evicts the
    lowest-scoring entry.

    ``robust`` does not change what is sampled. It tells the learner to skip
    gradient updates on ``explore`` episodes.
    """

    metric_keys = frozenset({"value_l1_score"})

    def __init__(self, task_space, config: PlrConfig | None = None, seed: int | None = None, **overrides):
        super().__init__(task_space, seed)
        if config is None:
            config = PlrConfig(**overrides)
        elif overrides:
            raise TypeError("pass either a config or keyword overrides, not both")
        self.config = config
        n = self.num_tasks
        self.buffer_size = n if config.buffer_size is None else min(config.buffer_size, n)
        self.scores = np.zeros(n)
        self.seen = np.zeros(n, dtype=bool)
        self.last_update = np.zeros(n, dtype=np.int64)
        self.global_count = 0
        self._pending: set[int] = set()

    @property
    def robust(self) -> bool:
        return self.config.robust

    def _unseen_candidates(self) -> np.ndarray:
        mask = ~self.seen
        if self._pending:
            mask[list(self._pending)] = False
        return np.flatnonzero(mask)

    def _explore_probability(self, candidates: np.ndarray) -> float:
        if len(candidates) == 0:
            return 0.0
        if self.seen.sum() < self.buffer_size:
            return 1.0
        return len(candidates) / self.num_tasks

    def _replay_distribution(self) -> np.ndarray:
        return plr_score_distribution(
            self.scores,
            self.seen,
            self.last_update,
            self.global_count,
            self.config.temperature,
            self.config.staleness_coef,
        )

    def sample_distribution(self):
        """Distribution of the next single draw."""
        candidates = self._unseen_candidates()
        p_explore = self._explore_probability(candidates)
        probs = np.zeros(self.num_tasks)
        if p_explore > 0:
            probs[candidates] = p_explore / len(candidates)
        if p_explore < 1:
            if self.seen.any():
                probs += (1 - p_explore) * self._replay_distribution()
            else:
                # every task is out for exploration and none has come back
                probs[:] = 1.0 / self.num_tasks
        return probs

    def sample_tagged(self, k=1):
        if k < 1:
            raise ValueError("k must be >= 1")
        out = []
        for _ in range(k):
            candidates = self._unseen_candidates()
            p_explore = self._explore_probability(candidates)
            if p_explore > 0 and (p_explore >= 1 or self.rng.random() < p_explore):
                i = int(candidates[self.rng.integers(len(candidates))])
                self._pending.add(i)
                out.append((self.task_space.from_flat(i), EXPLORE))
            elif self.seen.any():
                probs = self._replay_distribution()
                i = int(self.rng.choice(len(probs), p=probs))
                out.append((self.task_space.from_flat(i), REPLAY))
            else:
                i = int(self.rng.integers(self.num_tasks))
                out.append((self.task_space.from_flat(i), EXPLORE))
        return out

    def update_on_episode(self, episodic_return, length, task, env_id=None):
        self.global_count += 1

    def _consume_metric(self, name, entries):
        if self.config.aggregation == "mean":
            grouped: dict[int, list[float]] = defaultdict(list)
            for task, value in entries:
                grouped[self.task_space.flat_index(task)].append(float(value))
            items = [(i, float(np.mean(v))) for i, v in grouped.items()]
        else:
            items = [(self.task_space.flat_index(t), float(v)) for t, v in entries]
        for i, score in items:
            self._set_score(i, score)

    def update_score(self, task, score: float) -> None:
        self._set_score(self.task_space.flat_index(task), float(score))

    def _set_score(self, i: int, score: float) -> None:
        if score < 0:
            raise CurriculumError("value loss scores are nonnegative")
        self._pending.discard(i)
        if not self.seen[i] and self.seen.sum() >= self.buffer_size:
            seen_idx = np.flatnonzero(self.seen)
            # lowest score leaves; ties evict the higher index
            victim = seen_idx[np.lexsort((-seen_idx, self.scores[seen_idx]))[0]]
            if score <= self.scores[victim]:
                return
            self.seen[victim] = False
            self.scores[victim] = 0.0
        self.scores[i] = score
        self.seen[i] = True
        self.last_update[i] = self.global_count
