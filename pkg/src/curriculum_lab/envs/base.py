"""The task interface every multitask environment implements."""

from __future__ import annotations

from typing import Any

from ..task_space import TaskSpace


class TaskEnv:
    """Gym-style environment whose task can be swapped on reset or mid-episode.

    Tasks arrive as encodings of ``task_space``. Observations are small
    integer tuples that include the encoded goal; ``obs_index`` flattens one
    into a row of a tabular learner.
    """

    task_space: TaskSpace
    n_actions: int
    n_states: int

    def __init__(self):
        self.current_task: Any = None
        self.step_count = 0
        self.episode_return = 0.0

    def reset(self, new_task: Any = None, seed: int | None = None):
        if new_task is not None:
            self.change_task(new_task)
        if self.current_task is None:
            raise RuntimeError("reset called before any task was assigned")
        self.step_count = 0
        self.episode_return = 0.0
        return self._reset(seed)

    def change_task(self, new_task: Any) -> None:
        if not self.task_space.contains(new_task):
            raise ValueError(f"{new_task!r} is not in {self.task_space!r}")
        self.current_task = new_task
        self._apply_task(new_task)

    def step(self, action: int):
        obs, reward, done, info = self._step(action)
        self.step_count += 1
        self.episode_return += reward
        return obs, reward, done, info

    def task_completion(self) -> float:
        raise NotImplementedError

    def encode_goal(self) -> tuple:
        raise NotImplementedError

    def obs_index(self, obs) -> int:
        raise NotImplementedError

    def render(self) -> str:
        return f"task={self.current_task!r} step={self.step_count}"

    # subclass hooks
    def _apply_task(self, task: Any) -> None:
        raise NotImplementedError

    def _reset(self, seed: int | None):
        raise NotImplementedError

    def _step(self, action: int):
        raise NotImplementedError
