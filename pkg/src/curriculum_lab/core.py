"""The curriculum contract shared by every sampling method."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .task_space import TaskSpace

log = logging.getLogger(__name__)

DIST_TOL = 1e-9


class CurriculumError(RuntimeError):
    pass


class EmptyTaskSpace(CurriculumError):
    pass


@dataclass(frozen=True)
class StepRecord:
    reward: float
    done: bool
    task: Any
    env_id: int | None = None


@dataclass(frozen=True)
class EpisodeRecord:
    episodic_return: float
    length: int
    task: Any
    env_id: int | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"episode length must be >= 1, got {self.length}")


# metric name -> [(encoded task, value), ...]
MetricBatch = Mapping[str, Sequence[tuple[Any, float]]]


def check_distribution(probs: np.ndarray, size: int | None = None) -> np.ndarray:
    """Validate a sampling distribution and return it as float64."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or (size is not None and probs.shape[0] != size):
        raise CurriculumError(f"distribution has shape {probs.shape}, expected ({size},)")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise CurriculumError("distribution has negative or non-finite entries")
    if abs(probs.sum() - 1.0) > DIST_TOL:
        raise CurriculumError(f"distribution sums to {probs.sum()!r}")
    return probs


def normalize(weights: np.ndarray) -> np.ndarray:
    """Scale nonnegative weights to sum to one; uniform if they sum to zero."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        return np.full(weights.shape[0], 1.0 / weights.shape[0])
    return weights / total


def entropy(probs: np.ndarray) -> float:
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


class Curriculum:
    """A stateful sampler over a task space.

    Subclasses over finite spaces only need ``sample_distribution``; the
    default ``sample`` draws i.i.d. from it. Methods that react to training
    feedback override the ``update_*`` hooks they care about and list the
    on-demand metric names they understand in ``metric_keys``.
    """

    metric_keys: frozenset[str] = frozenset()

    def __init__(self, task_space: TaskSpace, seed: int | None = None):
        self.task_space = task_space
        self.rng = np.random.default_rng(seed)
        self.unknown_metric_count = 0

    @property
    def requires_step_updates(self) -> bool:
        return False

    @property
    def num_tasks(self) -> int:
        return self.task_space.num_tasks

    def sample_distribution(self) -> np.ndarray:
        n = self.num_tasks
        if n == 0:
            raise EmptyTaskSpace()
        return np.full(n, 1.0 / n)

    def sample(self, k: int = 1) -> list:
        return [task for task, _ in self.sample_tagged(k)]

    def sample_tagged(self, k: int = 1) -> list[tuple[Any, str | None]]:
        """Sample with a per-task tag. Only PLR attaches meaningful tags."""
        if k < 1:
            raise ValueError("k must be >= 1")
        probs = self.sample_distribution()
        idx = self.rng.choice(len(probs), size=k, p=probs)
        return [(self.task_space.from_flat(int(i)), None) for i in idx]

    def update_on_step(self, reward: float, done: bool, task: Any, env_id: int | None = None) -> None:
        pass

    def update_on_step_batch(self, steps: Iterable[StepRecord]) -> None:
        for s in steps:
            self.update_on_step(s.reward, s.done, s.task, s.env_id)

    def update_on_episode(self, episodic_return: float, length: int, task: Any, env_id: int | None = None) -> None:
        pass

    def update_task_progress(self, task: Any, progress: float) -> None:
        pass

    def update_on_demand(self, metrics: MetricBatch) -> None:
        for name, entries in metrics.items():
            if name in self.metric_keys:
                self._consume_metric(name, entries)
            else:
                self.unknown_metric_count += 1
                log.warning("%s ignores metric %r", type(self).__name__, name)

    def _consume_metric(self, name: str, entries: Sequence[tuple[Any, float]]) -> None:
        raise NotImplementedError

    def distribution_json(self) -> str:
        return json.dumps([float(p) for p in self.sample_distribution()])


class StepCounter(Curriculum):
    """Wraps another curriculum and consumes per-step updates.

    Exists so the sync layer's step path has a real consumer (benchmarks and
    tests); sampling is delegated unchanged.
    """

    def __init__(self, inner: Curriculum):
        super().__init__(inner.task_space)
        self.inner = inner
        self.steps = 0
        self.reward_sum = 0.0

    @property
    def requires_step_updates(self):
        return True

    @property
    def metric_keys(self):
        return self.inner.metric_keys

    def sample_distribution(self):
        return self.inner.sample_distribution()

    def sample_tagged(self, k=1):
        return self.inner.sample_tagged(k)

    def update_on_step(self, reward, done, task, env_id=None):
        self.steps += 1
        self.reward_sum += reward

    def update_on_episode(self, episodic_return, length, task, env_id=None):
        self.inner.update_on_episode(episodic_return, length, task, env_id)

    def update_task_progress(self, task, progress):
        self.inner.update_task_progress(task, progress)

    def update_on_demand(self, metrics):
        self.inner.update_on_demand(metrics)


class DualCurriculumWrapper(Curriculum):
    """Joint sampling of (task, opponent) from a task and an opponent curriculum.

    Episode updates carry a joint task ``(task, opponent_id)``; the task part
    goes to the task curriculum and the return goes to the opponent
    curriculum's win-rate table.
    """

    def __init__(self, task_curriculum: Curriculum, agent_curriculum, seed: int | None = None):
        super().__init__(task_curriculum.task_space, seed)
        self.task_curriculum = task_curriculum
        self.agent_curriculum = agent_curriculum

    @property
    def requires_step_updates(self):
        return self.task_curriculum.requires_step_updates

    @property
    def metric_keys(self):
        return self.task_curriculum.metric_keys

    @property
    def num_tasks(self):
        return self.task_curriculum.num_tasks * len(self.agent_curriculum.sample_distribution())

    def sample_tagged(self, k=1):
        tasks = self.task_curriculum.sample_tagged(k)
        opponents = self.agent_curriculum.sample(k)
        return [((t, o), tag) for (t, tag), o in zip(tasks, opponents)]

    def sample_distribution(self):
        """Joint distribution, flattened row-major as (task, opponent)."""
        return np.outer(
            self.task_curriculum.sample_distribution(), self.agent_curriculum.sample_distribution()
        ).ravel()

    def update_on_step(self, reward, done, task, env_id=None):
        self.task_curriculum.update_on_step(reward, done, task[0], env_id)

    def update_on_episode(self, episodic_return, length, task, env_id=None):
        t, opponent_id = task
        self.task_curriculum.update_on_episode(episodic_return, length, t, env_id)
        self.agent_curriculum.update_winrate(opponent_id, episodic_return)

    def update_task_progress(self, task, progress):
        self.task_curriculum.update_task_progress(task[0], progress)

    def update_on_demand(self, metrics):
        self.task_curriculum.update_on_demand(metrics)

    # opponent store passthrough
    def get_opponent(self, opponent_id):
        return self.agent_curriculum.get_opponent(opponent_id)

    def update_agent(self, snapshot, step: int = 0):
        return self.agent_curriculum.update_agent(snapshot, step)

    def update_winrate(self, opponent_id, learner_return):
        self.agent_curriculum.update_winrate(opponent_id, learner_return)
