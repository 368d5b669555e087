"""A tabular softmax actor-critic with GAE, plus the full-task-space evaluator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import EpisodeRecord
from .envs.metrics import clipped_success
from .task_space import TaskSpace

EXPLORE_TAG = "explore"


@dataclass
class Segment:
    """A stretch of steps spent on one task inside an episode."""

    task: Any
    start: int
    end: int
    tag: str | None = None


@dataclass
class Trajectory:
    rewards: list[float]
    values: list[float]  # V(s_0..s_{T-1}) plus the bootstrap V(s_T)
    dones: list[bool]
    task: Any
    gamma: float = 0.99
    lam: float = 0.95
    states: list[int] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.rewards) + 1 or len(self.dones) != len(self.rewards):
            raise ValueError("need len(values) == len(rewards) + 1 == len(dones) + 1")

    def __len__(self):
        return len(self.rewards)


def td_errors(traj: Trajectory) -> np.ndarray:
    r = np.asarray(traj.rewards, dtype=np.float64)
    v = np.asarray(traj.values, dtype=np.float64)
    notdone = 1.0 - np.asarray(traj.dones, dtype=np.float64)
    return r + traj.gamma * v[1:] * notdone - v[:-1]


def gae_advantages(deltas: Sequence[float], dones: Sequence[bool], gamma: float, lam: float) -> np.ndarray:
    """Backward recursion A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}."""
    out = np.empty(len(deltas))
    acc = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        acc = deltas[t] + gamma * lam * (0.0 if dones[t] else 1.0) * acc
        out[t] = acc
    return out


class TabularPolicy:
    def __init__(self, n_states: int, n_actions: int, lr_actor: float = 0.1, lr_critic: float = 0.1):
        self.n_states = n_states
        self.n_actions = n_actions
        self.lr_actor = lr_actor
        self.lr_critic = lr_critic
        self.logits = np.zeros((n_states, n_actions))
        self.values = np.zeros(n_states)

    def probs(self, state: int) -> np.ndarray:
        row = self.logits[state]
        e = np.exp(row - row.max())
        return e / e.sum()

    def act(self, state: int, rng: np.random.Generator, greedy: bool = False) -> int:
        row = self.logits[state]
        if greedy:
            return int(np.argmax(row))
        c = np.exp(row - row.max()).cumsum()
        return min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), self.n_actions - 1)

    def update(self, traj: Trajectory, advantages: np.ndarray, mask: np.ndarray | None = None) -> None:
        """One actor-critic pass over the trajectory; ``mask`` selects updated steps."""
        returns = advantages + np.asarray(traj.values[:-1])
        for t, (s, a) in enumerate(zip(traj.states, traj.actions)):
            if mask is not None and not mask[t]:
                continue
            p = self.probs(s)
            grad = -p
            grad[a] += 1.0
            self.logits[s] += self.lr_actor * advantages[t] * grad
            self.values[s] += self.lr_critic * (returns[t] - self.values[s])

    def snapshot(self) -> bytes:
        from .envs.duel import SoftmaxPolicy

        return SoftmaxPolicy(self.logits).to_bytes()

    def copy(self) -> "TabularPolicy":
        other = TabularPolicy(self.n_states, self.n_actions, self.lr_actor, self.lr_critic)
        other.logits = self.logits.copy()
        other.values = self.values.copy()
        return other


def rollout(
    policy: TabularPolicy,
    env,
    rng: np.random.Generator,
    gamma: float = 0.99,
    lam: float = 0.95,
    greedy: bool = False,
    task_tag: str | None = None,
    first_obs=None,
    on_task_switch: Callable[[], tuple[Any, str | None]] | None = None,
) -> tuple[Trajectory, EpisodeRecord]:
    """Play one episode from an already-reset env (pass its first observation).

    ``env`` may be a plain ``TaskEnv`` or a sync wrapper; only ``step`` and
    ``obs_index`` are used. When a step reports ``needs_task`` and the
    episode continues, ``on_task_switch`` (if given) reports the task now in
    force, so the trajectory can be split into per-task segments.
    """
    inner = getattr(env, "env", env)
    obs = first_obs
    states, actions, rewards, dones, values = [], [], [], [], []
    start_task = inner.current_task
    segments = [Segment(start_task, 0, 0, task_tag)]
    done = False
    while not done:
        s = inner.obs_index(obs)
        a = policy.act(s, rng, greedy)
        obs, r, done, info = env.step(a)
        states.append(s)
        actions.append(a)
        rewards.append(r)
        values.append(policy.values[s])
        # step caps and task boundaries are not terminal: the value keeps bootstrapping
        dones.append(bool(done and not info.get("truncated", False)))
        if info.get("needs_task") and not done:
            segments[-1].end = len(rewards)
            task, tag = on_task_switch() if on_task_switch else (inner.current_task, None)
            segments.append(Segment(task, len(rewards), len(rewards), tag))
    segments[-1].end = len(rewards)
    values.append(0.0 if dones[-1] else policy.values[inner.obs_index(obs)])
    traj = Trajectory(rewards, values, dones, start_task, gamma, lam, states, actions, segments)
    record = EpisodeRecord(float(sum(rewards)), len(rewards), start_task, None)
    return traj, record


def segment_scores(traj: Trajectory, deltas: np.ndarray | None = None) -> list[tuple[Any, float]]:
    """Per-task mean absolute GAE over each segment, the PLR value-loss score."""
    from .curricula.plr import value_l1_score

    if deltas is None:
        deltas = td_errors(traj)
    out = []
    for seg in traj.segments:
        if seg.end > seg.start:
            out.append((seg.task, value_l1_score(deltas[seg.start : seg.end], traj.gamma, traj.lam)))
    return out


def train_on(policy: TabularPolicy, traj: Trajectory, robust_skip: bool = False) -> np.ndarray:
    """Apply the actor-critic update for a finished trajectory; returns the TD errors.

    With ``robust_skip`` set, segments tagged ``explore`` get no update at all.
    """
    deltas = td_errors(traj)
    adv = gae_advantages(deltas, traj.dones, traj.gamma, traj.lam)
    mask = None
    if robust_skip:
        mask = np.ones(len(traj), dtype=bool)
        for seg in traj.segments:
            if seg.tag == EXPLORE_TAG:
                mask[seg.start : seg.end] = False
        if not mask.any():
            return deltas
    policy.update(traj, adv, mask)
    return deltas


def train_episode(
    policy: TabularPolicy,
    env,
    rng: np.random.Generator,
    task: Any = None,
    robust_skip: bool = False,
    tag: str | None = None,
    gamma: float = 0.99,
    lam: float = 0.95,
) -> tuple[Trajectory, EpisodeRecord]:
    """Reset ``env`` (onto ``task`` if given), play one episode and learn from it."""
    obs = env.reset(new_task=task)
    traj, record = rollout(policy, env, rng, gamma, lam, task_tag=tag, first_obs=obs)
    train_on(policy, traj, robust_skip)
    return traj, record


def evaluate(
    policy: TabularPolicy,
    env,
    task_space: TaskSpace | None = None,
    episodes_per_task: int = 4,
    greedy: bool = True,
    skip_impossible: bool = True,
    seed: int | Sequence[int] = 0,
    success_scale: float | None = None,
) -> np.ndarray:
    """Success rate for every task of the space, in flat-index order.

    An evaluation episode is one attempt at one task: it ends when the env
    reports ``needs_task`` or ``done``. Binary tasks succeed on completion;
    with ``success_scale`` set, the clipped scaled return is used instead.
    """
    space = task_space or env.task_space
    possible = None
    if skip_impossible and hasattr(env, "possible_tasks"):
        possible = set(env.possible_tasks())
    base = [int(x) for x in np.atleast_1d(seed)]
    rates = np.zeros(space.num_tasks)
    for i in range(space.num_tasks):
        if possible is not None and i not in possible:
            continue
        task = space.from_flat(i)
        total = 0.0
        for k in range(episodes_per_task):
            rng = np.random.default_rng([*base, i, k])
            obs = env.reset(new_task=task, seed=int(rng.integers(2**31)))
            ret = 0.0
            complete = False
            while True:
                a = policy.act(env.obs_index(obs), rng, greedy)
                obs, r, done, info = env.step(a)
                ret += r
                complete = complete or bool(info.get("task_complete", False))
                if done or info.get("needs_task"):
                    break
            if success_scale is not None:
                total += clipped_success(ret, success_scale)
            else:
                total += 1.0 if complete else 0.0
        rates[i] = total / episodes_per_task
    return rates
