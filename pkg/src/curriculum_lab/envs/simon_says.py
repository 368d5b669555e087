"""SimonSaysCraft: a crafting-chain skill game played as Simon Says.

Skills form a chain ``0 -> 1 -> ... -> F-1``. Skill ``j`` only works right
after skill ``j-1`` (or after another ``j``); any out-of-order skill breaks
the chain. A task ``family:tier`` asks for skill ``family`` to be performed
``tier`` times while the chain is intact. Impossible tasks ask for a skill
that does not exist.

Each episode lasts ``episode_steps`` steps. A task ends when it is completed
(+1) or after ``task_steps`` steps without completion (-1); a per-step hazard
can also end it early with -1. Either way ``info["needs_task"]`` is set and
the caller may swap in a new task with ``change_task`` without resetting.
"""

from __future__ import annotations

import numpy as np

from ..task_space import DiscreteTaskSpace
from .base import TaskEnv


def default_task_labels(num_skills: int = 5, tiers=(1, 2, 4), num_impossible: int = 90) -> list[str]:
    possible = [f"skill{f}:{t}" for f in range(num_skills) for t in tiers]
    impossible = [f"void{k}:1" for k in range(num_impossible)]
    return possible + impossible


class SimonSaysCraft(TaskEnv):
    def __init__(
        self,
        num_skills: int = 5,
        tiers=(1, 2, 4),
        num_impossible: int = 90,
        num_idle_actions: int = 3,
        episode_steps: int = 1500,
        task_steps: int = 300,
        hazard: float = 0.01,
        seed: int | None = None,
    ):
        super().__init__()
        self.num_skills = num_skills
        self.tiers = tuple(tiers)
        self.num_impossible = num_impossible
        self.episode_steps = episode_steps
        self.task_steps = task_steps
        self.hazard = hazard
        self.labels = default_task_labels(num_skills, self.tiers, num_impossible)
        self.task_space = DiscreteTaskSpace(len(self.labels), self.labels)
        self.n_actions = num_skills + num_idle_actions
        self.max_tier = max(self.tiers)
        # observation = (family, remaining, chain); family == num_skills marks impossible
        self.n_states = (num_skills + 1) * (self.max_tier + 1) * (num_skills + 1)
        self.rng = np.random.default_rng(seed)
        self.family = 0
        self.tier = 1
        self.progress = 0
        self.chain = 0
        self.task_timer = 0
        self._task_over = False

    # task bookkeeping ----------------------------------------------------
    def task_spec(self, task: int) -> tuple[int, int, bool]:
        """(family, tier, possible) for an encoded task."""
        label = self.labels[task]
        name, _, tier = label.partition(":")
        if name.startswith("skill"):
            return int(name[5:]), int(tier), True
        return self.num_skills, int(tier), False

    @property
    def possible(self) -> bool:
        return self.family < self.num_skills

    def possible_tasks(self) -> list[int]:
        return [i for i in range(len(self.labels)) if self.task_spec(i)[2]]

    def _apply_task(self, task):
        self.family, self.tier, _ = self.task_spec(task)
        self.progress = 0
        self.task_timer = 0
        self._task_over = False

    def encode_goal(self):
        return (self.family, self.tier - self.progress)

    def _obs(self):
        return self.encode_goal() + (self.chain,)

    def obs_index(self, obs):
        family, remaining, chain = obs
        return (family * (self.max_tier + 1) + remaining) * (self.num_skills + 1) + chain

    def task_completion(self):
        if not self.possible:
            return 0.0
        return self.progress / self.tier

    # dynamics ------------------------------------------------------------
    def seed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def _reset(self, seed):
        if seed is not None:
            self.seed(seed)
        self.chain = 0
        self.progress = 0
        self.task_timer = 0
        self._task_over = False
        return self._obs()

    def _skill(self, j: int) -> None:
        c = self.chain
        if j == c or j == c - 1:
            if j == c:
                self.chain = c + 1
            if j == self.family:
                self.progress += 1
        else:
            self.chain = 1 if j == 0 else 0

    def _step(self, action):
        if self._task_over:
            # nobody swapped the task: start a fresh attempt at the same one
            self.progress = 0
            self.task_timer = 0
            self._task_over = False
        if action < self.num_skills:
            self._skill(action)
        self.task_timer += 1

        reward = 0.0
        info = {"task_complete": False, "needs_task": False}
        if self.possible and self.progress >= self.tier:
            reward = 1.0
            info["task_complete"] = True
        elif self.task_timer >= self.task_steps or (self.hazard > 0 and self.rng.random() < self.hazard):
            reward = -1.0
        if reward != 0.0:
            self._task_over = True
            info["needs_task"] = True
            info["task_progress"] = self.task_completion()
            info["task"] = self.current_task
        done = self.step_count + 1 >= self.episode_steps
        info["truncated"] = done
        return self._obs(), reward, done, info

    def oracle_action(self) -> int:
        """Scripted policy that completes any possible task as fast as it can."""
        f, c = self.family, self.chain
        if f >= self.num_skills:
            return self.num_skills  # idle; nothing helps
        if c == f + 1:
            return f
        if c <= f:
            return c
        return 0

    def render(self):
        return (
            f"task={self.labels[self.current_task]} progress={self.progress}/{self.tier} "
            f"chain={self.chain} timer={self.task_timer} step={self.step_count}"
        )
