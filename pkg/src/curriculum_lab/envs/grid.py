"""SeededGrid: a gridworld whose layout is a pure function of an integer seed.

Seeds are grouped into four difficulty buckets of 50 (for the default 200
seeds). Higher buckets put the goal further from the start and add more
walls, so the shortest path grows with the bucket.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from ..task_space import DiscreteTaskSpace
from .base import TaskEnv

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left

# (min goal distance, max goal distance, wall density) per bucket
BUCKETS = ((2, 4, 0.08), (5, 7, 0.14), (8, 10, 0.2), (11, 14, 0.26))


@dataclass(frozen=True)
class Layout:
    size: int
    start: tuple[int, int]
    goal: tuple[int, int]
    walls: frozenset

    def shortest_path(self) -> int | None:
        return bfs_distance(self.size, self.walls, self.start, self.goal)


def bfs_distance(size: int, walls, start, goal) -> int | None:
    frontier = deque([(start, 0)])
    seen = {start}
    while frontier:
        (r, c), d = frontier.popleft()
        if (r, c) == goal:
            return d
        for dr, dc in MOVES:
            nxt = (r + dr, c + dc)
            if 0 <= nxt[0] < size and 0 <= nxt[1] < size and nxt not in walls and nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, d + 1))
    return None


def difficulty_bucket(seed: int, num_seeds: int = 200) -> int:
    return min(seed * len(BUCKETS) // num_seeds, len(BUCKETS) - 1)


def generate_layout(seed: int, size: int = 9, num_seeds: int = 200) -> Layout:
    """Deterministic layout for ``seed``; always has a start-to-goal path."""
    rng = random.Random(seed)
    lo, hi, density = BUCKETS[difficulty_bucket(seed, num_seeds)]
    hi = min(hi, 2 * (size - 1))
    lo = min(lo, hi)
    cells = [(r, c) for r in range(size) for c in range(size)]
    while True:
        start = rng.choice(cells)
        goals = [g for g in cells if lo <= abs(g[0] - start[0]) + abs(g[1] - start[1]) <= hi]
        if not goals:
            continue
        goal = rng.choice(goals)
        walls = frozenset(
            cell for cell in cells if cell not in (start, goal) and rng.random() < density
        )
        if bfs_distance(size, walls, start, goal) is not None:
            return Layout(size, start, goal, walls)


class SeededGrid(TaskEnv):
    """Reach the goal cell; reward 1 on arrival, episode capped at ``max_steps``.

    Observations are ``(seed, row, col, goal_row, goal_col, wall_bits)`` where
    bit ``k`` of ``wall_bits`` says move ``k`` is blocked. ``obs_index`` maps
    them to table rows in one of two ways. ``"egocentric"`` (default) uses
    the goal offset and the wall bits, so what is learned on one seed
    carries over to others. ``"per_seed"`` gives every (seed, cell) its own
    row and nothing transfers.
    """

    n_actions = 4

    def __init__(self, num_seeds: int = 200, size: int = 9, max_steps: int = 64, features: str = "egocentric"):
        super().__init__()
        if features not in ("egocentric", "per_seed"):
            raise ValueError(f"unknown feature mode {features!r}")
        self.num_seeds = num_seeds
        self.size = size
        self.max_steps = max_steps
        self.features = features
        self.task_space = DiscreteTaskSpace(num_seeds)
        if features == "per_seed":
            self.n_states = num_seeds * size * size
        else:
            self.n_states = (2 * size - 1) ** 2 * 16
        self.layout: Layout | None = None
        self.pos = (0, 0)
        self._cache: dict[int, Layout] = {}

    def _apply_task(self, task):
        layout = self._cache.get(task)
        if layout is None:
            layout = self._cache[task] = generate_layout(task, self.size, self.num_seeds)
        self.layout = layout
        self.pos = layout.start

    def _wall_bits(self) -> int:
        r, c = self.pos
        bits = 0
        for k, (dr, dc) in enumerate(MOVES):
            rr, cc = r + dr, c + dc
            if not (0 <= rr < self.size and 0 <= cc < self.size) or (rr, cc) in self.layout.walls:
                bits |= 1 << k
        return bits

    def _obs(self):
        return (self.current_task, self.pos[0], self.pos[1]) + self.encode_goal() + (self._wall_bits(),)

    def encode_goal(self):
        return self.layout.goal

    def obs_index(self, obs):
        task, r, c, gr, gc, bits = obs
        if self.features == "per_seed":
            return (task * self.size + r) * self.size + c
        span = 2 * self.size - 1
        return ((gr - r + self.size - 1) * span + (gc - c + self.size - 1)) * 16 + bits

    def _reset(self, seed):
        self.pos = self.layout.start
        return self._obs()

    def _step(self, action):
        dr, dc = MOVES[action]
        r, c = self.pos[0] + dr, self.pos[1] + dc
        if 0 <= r < self.size and 0 <= c < self.size and (r, c) not in self.layout.walls:
            self.pos = (r, c)
        reached = self.pos == self.layout.goal
        truncated = self.step_count + 1 >= self.max_steps
        info = {"task_complete": reached, "truncated": truncated and not reached}
        return self._obs(), 1.0 if reached else 0.0, reached or truncated, info

    def task_completion(self):
        return 1.0 if self.layout is not None and self.pos == self.layout.goal else 0.0

    def render(self):
        rows = []
        for r in range(self.size):
            row = ""
            for c in range(self.size):
                cell = (r, c)
                if cell == self.pos:
                    row += "A"
                elif cell == self.layout.goal:
                    row += "G"
                elif cell in self.layout.walls:
                    row += "#"
                else:
                    row += "."
            rows.append(row)
        return f"seed={self.current_task} step={self.step_count}\n" + "\n".join(rows)
