"""Non-adaptive and schedule-driven curricula."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..core import Curriculum, CurriculumError
from ..task_space import BoxTaskSpace, TaskSpace, uniform_in_box
from .stopping import Condition, evaluate, metrics_used, parse_condition


class DomainRandomization(Curriculum):
    """Uniform sampling over the whole space, or over a subset of it.

    Works for continuous spaces too, in which case ``sample_distribution``
    is unavailable and samples come straight from the space.
    """

    def __init__(self, task_space: TaskSpace, tasks: Sequence[Any] | None = None, seed: int | None = None):
        super().__init__(task_space, seed)
        self.subset = None
        if tasks is not None:
            if not tasks:
                raise CurriculumError("task subset is empty")
            self.subset = sorted({task_space.flat_index(t) for t in tasks})

    def sample_distribution(self):
        if self.subset is None:
            return super().sample_distribution()
        probs = np.zeros(self.num_tasks)
        probs[self.subset] = 1.0 / len(self.subset)
        return probs

    def sample_tagged(self, k=1):
        if not self.task_space.enumerable:
            return [(self.task_space._sample(self.rng), None) for _ in range(k)]
        return super().sample_tagged(k)


class Constant(Curriculum):
    """Always returns the same encoded task."""

    def __init__(self, task_space: TaskSpace, task: Any, seed: int | None = None):
        super().__init__(task_space, seed)
        if not task_space.contains(task):
            raise CurriculumError(f"{task!r} is not in the task space")
        self.task = task

    def sample_distribution(self):
        probs = np.zeros(self.num_tasks)
        probs[self.task_space.flat_index(self.task)] = 1.0
        return probs

    def sample_tagged(self, k=1):
        if k < 1:
            raise ValueError("k must be >= 1")
        return [(self.task, None)] * k


class _RunningMetrics:
    """Counters judged by a stage's stopping condition."""

    def __init__(self, window: int):
        self.window = window
        self.steps = 0
        self.episodes = 0
        self.tasks = 0
        self.returns: deque[float] = deque(maxlen=window)

    def snapshot(self) -> dict:
        full = len(self.returns) == self.window
        return {
            "steps": self.steps,
            "episodes": self.episodes,
            "tasks": self.tasks,
            "return": sum(self.returns) / self.window if full else None,
        }


class Sequential(Curriculum):
    """Runs a list of stages, advancing when the active stage's condition holds.

    Stages may be curricula, single encoded tasks (wrapped in ``Constant``),
    lists of encoded tasks (wrapped in ``DomainRandomization``), or a
    ``TaskSpace`` (DR over the whole space). ``conditions[i]`` ends stage ``i``;
    the last stage never ends, so ``len(conditions) == len(stages) - 1``.

    Metrics reset on every transition. ``return`` is the mean over the last
    ``return_window`` episodes and stays undefined until that many episodes
    have been seen in the stage. ``tasks`` counts completed tasks (progress
    updates with progress >= 1).
    """

    def __init__(
        self,
        stages: Sequence[Any],
        conditions: Sequence[str | Condition],
        task_space: TaskSpace,
        return_window: int = 1000,
        seed: int | None = None,
    ):
        super().__init__(task_space, seed)
        if not stages:
            raise CurriculumError("need at least one stage")
        if len(conditions) != len(stages) - 1:
            raise CurriculumError(f"{len(stages)} stages need {len(stages) - 1} conditions")
        if return_window < 1:
            raise CurriculumError("return_window must be >= 1")
        self.stages = [self._wrap_stage(s, i, seed) for i, s in enumerate(stages)]
        self.conditions = [parse_condition(c) if isinstance(c, str) else c for c in conditions]
        self.return_window = return_window
        self.stage_index = 0
        self.metrics = _RunningMetrics(return_window)
        # step counting only needs step traffic when some condition reads it
        self._count_steps = any("steps" in metrics_used(c) for c in self.conditions)

    def _wrap_stage(self, stage, i, seed):
        child_seed = None if seed is None else seed + 1 + i
        if isinstance(stage, Curriculum):
            return stage
        if isinstance(stage, TaskSpace):
            return DomainRandomization(stage, seed=child_seed)
        if isinstance(stage, list):
            return DomainRandomization(self.task_space, tasks=stage, seed=child_seed)
        return Constant(self.task_space, stage, seed=child_seed)

    @property
    def current(self) -> Curriculum:
        return self.stages[self.stage_index]

    @property
    def requires_step_updates(self):
        return self._count_steps or self.current.requires_step_updates

    @property
    def metric_keys(self):
        return frozenset().union(*(s.metric_keys for s in self.stages))

    def _maybe_advance(self) -> None:
        if self.stage_index >= len(self.conditions):
            return
        if evaluate(self.conditions[self.stage_index], self.metrics.snapshot()):
            self.stage_index += 1
            self.metrics = _RunningMetrics(self.return_window)

    def sample_distribution(self):
        return self.current.sample_distribution()

    def sample_tagged(self, k=1):
        return self.current.sample_tagged(k)

    def update_on_step(self, reward, done, task, env_id=None):
        self.current.update_on_step(reward, done, task, env_id)
        if self._count_steps:
            self.metrics.steps += 1
            self._maybe_advance()

    def update_on_episode(self, episodic_return, length, task, env_id=None):
        self.current.update_on_episode(episodic_return, length, task, env_id)
        self.metrics.episodes += 1
        self.metrics.returns.append(float(episodic_return))
        self._maybe_advance()

    def update_task_progress(self, task, progress):
        self.current.update_task_progress(task, progress)
        if progress >= 1.0:
            self.metrics.tasks += 1
            self._maybe_advance()

    def update_on_demand(self, metrics):
        self.current.update_on_demand(metrics)


@dataclass(frozen=True)
class AnnealingSchedule:
    start_low: tuple
    start_high: tuple
    end_low: tuple
    end_high: tuple
    horizon: int

    def __post_init__(self):
        n = len(self.start_low)
        if not all(len(v) == n for v in (self.start_high, self.end_low, self.end_high)):
            raise CurriculumError("schedule bounds must share one dimension")
        if self.horizon < 1:
            raise CurriculumError("horizon must be >= 1")
        for sl, sh, el, eh in zip(self.start_low, self.start_high, self.end_low, self.end_high):
            if not (el <= sl <= sh <= eh):
                raise CurriculumError("start range must lie inside the end range")


def annealed_bounds(sched: AnnealingSchedule, t: int) -> tuple[tuple, tuple]:
    frac = min(max(t, 0) / sched.horizon, 1.0)
    low = tuple(s + frac * (e - s) for s, e in zip(sched.start_low, sched.end_low))
    high = tuple(s + frac * (e - s) for s, e in zip(sched.start_high, sched.end_high))
    return low, high


def annealing_sample(sched: AnnealingSchedule, t: int, rng: np.random.Generator) -> tuple:
    low, high = annealed_bounds(sched, t)
    return uniform_in_box(rng, low, high)


class ExpandingBox(Curriculum):
    """Uniform sampling from a box that grows linearly toward the full space.

    Time is measured in environment steps, accumulated from episode lengths
    so the curriculum does not need per-step traffic.
    """

    def __init__(
        self,
        task_space: BoxTaskSpace,
        start_low: Sequence[float],
        start_high: Sequence[float],
        horizon: int,
        seed: int | None = None,
    ):
        super().__init__(task_space, seed)
        self.schedule = AnnealingSchedule(
            tuple(map(float, start_low)),
            tuple(map(float, start_high)),
            task_space.low,
            task_space.high,
            int(horizon),
        )
        self.steps = 0

    def sample_distribution(self):
        raise CurriculumError("a box curriculum has no finite distribution")

    def bounds(self) -> tuple[tuple, tuple]:
        return annealed_bounds(self.schedule, self.steps)

    def sample_tagged(self, k=1):
        return [(annealing_sample(self.schedule, self.steps, self.rng), None) for _ in range(k)]

    def update_on_episode(self, episodic_return, length, task, env_id=None):
        self.steps += int(length)
