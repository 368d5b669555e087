"""Connecting many environment workers to one curriculum.

Tasks flow from the curriculum service to the workers through one FIFO queue
per worker. Feedback flows back through a single shared update channel.
Workers batch their messages and send each batch as one channel item. The
curriculum object is only touched by whoever runs the service: its thread
in threaded mode, or the caller in direct mode. Direct mode runs with no
threads at all and is fully deterministic.

Each worker queue is kept at ``prefetch + delay`` assignments. Raising
``delay`` makes every task older by that many of the worker's episodes
when it is used.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence, Union

import numpy as np

from .core import Curriculum, EpisodeRecord, StepRecord, entropy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyncConfig:
    step_batch_size: int = 64
    prefetch: int = 1
    delay: int = 0

    def __post_init__(self):
        if self.prefetch < 1:
            raise ValueError("prefetch must be >= 1")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if self.step_batch_size < 1:
            raise ValueError("step_batch_size must be >= 1")

    @property
    def queue_depth(self) -> int:
        return self.prefetch + self.delay


@dataclass(frozen=True)
class TaskAssignment:
    task: Any
    sequence_number: int
    sampled_at: int
    tag: str | None = None


@dataclass(frozen=True)
class StepBatch:
    env_id: int
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a step batch cannot be empty")


@dataclass(frozen=True)
class EpisodeUpdate:
    record: EpisodeRecord


@dataclass(frozen=True)
class ProgressUpdate:
    task: Any
    progress: float


@dataclass(frozen=True)
class DemandUpdate:
    metrics: dict


UpdateMessage = Union[StepBatch, EpisodeUpdate, ProgressUpdate, DemandUpdate]


@dataclass(frozen=True)
class _Refill:
    worker_id: int
    messages: tuple = ()


_STOP = object()


@dataclass
class ConservationReport:
    sampled: int
    delivered: int
    undelivered: int
    updates_sent: int
    updates_applied: int
    steps_dropped: int = 0

    @property
    def ok(self) -> bool:
        return self.sampled == self.delivered + self.undelivered and self.updates_sent == self.updates_applied

    def as_dict(self) -> dict:
        return {
            "sampled": self.sampled,
            "delivered": self.delivered,
            "undelivered": self.undelivered,
            "updates_sent": self.updates_sent,
            "updates_applied": self.updates_applied,
            "steps_dropped": self.steps_dropped,
            "ok": self.ok,
        }


class CurriculumService:
    """Owns a curriculum and serves tasks to ``num_workers`` queues.

    In direct mode (``threaded=False``) updates are applied as soon as they
    are sent and queues are refilled as soon as they are popped. In threaded
    mode a background thread does both; call ``start`` and ``stop``.
    """

    def __init__(self, curriculum: Curriculum, num_workers: int, config: SyncConfig | None = None, threaded: bool = False):
        if num_workers < 1:
            raise ValueError("need at least one worker")
        self.curriculum = curriculum
        self.config = config or SyncConfig()
        self.threaded = threaded
        self.num_workers = num_workers
        self.requires_step_updates = curriculum.requires_step_updates
        self.task_queues: list[queue.SimpleQueue] = [queue.SimpleQueue() for _ in range(num_workers)]
        self.updates: queue.SimpleQueue = queue.SimpleQueue()
        self._seq = [itertools.count() for _ in range(num_workers)]
        self.sampled = 0
        self.updates_applied = 0
        self.steps_dropped = 0
        self.episodes_applied = 0
        self.endpoints = [WorkerEndpoint(self, i) for i in range(num_workers)]
        self.learner = WorkerEndpoint(self, -1)
        self._thread: threading.Thread | None = None
        self._error: BaseException | None = None
        self._cached_dist: np.ndarray | None = None
        self._dist_lock = threading.Lock()
        if not threaded:
            self.refill()

    # curriculum side -------------------------------------------------------
    def _apply(self, msg: UpdateMessage) -> None:
        c = self.curriculum
        if isinstance(msg, StepBatch):
            if self.requires_step_updates:
                c.update_on_step_batch(msg.steps)
            else:
                self.steps_dropped += len(msg.steps)
        elif isinstance(msg, EpisodeUpdate):
            r = msg.record
            c.update_on_episode(r.episodic_return, r.length, r.task, r.env_id)
            self.episodes_applied += 1
        elif isinstance(msg, ProgressUpdate):
            c.update_task_progress(msg.task, msg.progress)
        elif isinstance(msg, DemandUpdate):
            c.update_on_demand(msg.metrics)
        else:
            raise TypeError(f"unknown update message {msg!r}")
        self.updates_applied += 1

    def _handle(self, item) -> bool:
        """Process one channel item; returns False on the stop sentinel."""
        if item is _STOP:
            return False
        if isinstance(item, _Refill):
            for msg in item.messages:
                self._apply(msg)
            self._refill_worker(item.worker_id)
            return True
        for msg in item:
            self._apply(msg)
        return True

    def drain(self) -> None:
        while True:
            try:
                item = self.updates.get_nowait()
            except queue.Empty:
                return
            if not self._handle(item):
                return

    def _refill_worker(self, worker_id: int) -> None:
        q = self.task_queues[worker_id]
        need = self.config.queue_depth - q.qsize()
        if need <= 0:
            return
        for task, tag in self.curriculum.sample_tagged(need):
            q.put(TaskAssignment(task, next(self._seq[worker_id]), self.episodes_applied, tag))
            self.sampled += 1

    def refill(self) -> None:
        for w in range(self.num_workers):
            self._refill_worker(w)

    def pump(self) -> None:
        self.drain()
        self.refill()
        self._cached_dist = None

    # threaded mode ---------------------------------------------------------
    def start(self) -> "CurriculumService":
        if not self.threaded:
            raise RuntimeError("direct-mode services have no thread")
        self.refill()
        self._thread = threading.Thread(target=self._run, name="curriculum-service", daemon=True)
        self._thread.start()
        return self

    def _run(self) -> None:
        try:
            while True:
                item = self.updates.get()
                if not self._handle(item):
                    break
                # apply whatever else is already waiting before refilling
                while True:
                    try:
                        item = self.updates.get_nowait()
                    except queue.Empty:
                        break
                    if not self._handle(item):
                        self._refresh_cache()
                        return
                self._refresh_cache()
        except BaseException as exc:  # surfaced by stop()
            self._error = exc
            log.exception("curriculum service crashed")

    def _refresh_cache(self) -> None:
        try:
            dist = self.curriculum.sample_distribution()
        except Exception:
            dist = None
        with self._dist_lock:
            self._cached_dist = dist

    def stop(self, timeout: float = 30.0) -> None:
        """Quiescent shutdown: everything already sent is applied before return."""
        if self.threaded and self._thread is not None:
            self.updates.put(_STOP)
            self._thread.join(timeout)
            if self._thread.is_alive():
                raise RuntimeError("curriculum service did not stop")
            self._thread = None
        # anything sent after the sentinel, or in direct mode, is applied here
        while True:
            try:
                item = self.updates.get_nowait()
            except queue.Empty:
                break
            if item is _STOP:
                continue
            for msg in item.messages if isinstance(item, _Refill) else item:
                self._apply(msg)
        if self._error is not None:
            raise RuntimeError("curriculum service failed") from self._error

    def __enter__(self):
        if self.threaded:
            self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    # inspection ------------------------------------------------------------
    def distribution(self) -> np.ndarray | None:
        """Current distribution; a cached copy when another thread owns the curriculum."""
        if not self.threaded or self._thread is None:
            try:
                return self.curriculum.sample_distribution()
            except Exception:
                return None
        with self._dist_lock:
            return None if self._cached_dist is None else self._cached_dist.copy()

    def distribution_entropy(self) -> float:
        dist = self.distribution()
        return float("nan") if dist is None else entropy(dist)

    def conservation_report(self) -> ConservationReport:
        endpoints = self.endpoints + [self.learner]
        return ConservationReport(
            sampled=self.sampled,
            delivered=sum(e.delivered for e in endpoints),
            undelivered=sum(q.qsize() for q in self.task_queues),
            updates_sent=sum(e.updates_sent for e in endpoints),
            updates_applied=self.updates_applied,
            steps_dropped=self.steps_dropped,
        )


class WorkerEndpoint:
    """A worker's view of the service: its task queue plus the update channel."""

    def __init__(self, service: CurriculumService, worker_id: int):
        self.service = service
        self.worker_id = worker_id
        self.delivered = 0
        self.updates_sent = 0

    def get_task(self, timeout: float | None = None, messages: Sequence[UpdateMessage] = ()) -> TaskAssignment:
        """Pop the next assignment, sending ``messages`` first.

        In threaded mode the messages ride along with the refill request, so
        the service wakes once per episode rather than twice.
        """
        svc = self.service
        if not svc.threaded:
            self.send(messages)
        q = svc.task_queues[self.worker_id]
        if not svc.threaded and q.empty():
            svc.pump()
        assignment = q.get(timeout=timeout)
        self.delivered += 1
        if svc.threaded:
            self.updates_sent += len(messages)
            svc.updates.put(_Refill(self.worker_id, tuple(messages)))
            # hand the GIL to the service so the refill lands before the next pop
            time.sleep(0)
        else:
            svc.pump()
        return assignment

    def send(self, messages: Sequence[UpdateMessage]) -> None:
        if not messages:
            return
        self.updates_sent += len(messages)
        self.service.updates.put(list(messages))
        if not self.service.threaded:
            self.service.drain()


class EnvSyncWrapper:
    """Environment wrapper that pulls tasks from and reports to a curriculum service.

    ``reset`` pops the next assignment, and ``step`` batches step records and
    queues episode and progress updates when the episode ends. Direct mode
    sends them at once; threaded mode sends them with the next task request
    (or on ``close``). When the
    environment reports ``needs_task`` mid-episode, the wrapper pops a new
    assignment and calls ``change_task`` without resetting.
    """

    def __init__(self, env, endpoint: WorkerEndpoint, step_batch_size: int | None = None, send_steps: bool | None = None):
        self.env = env
        self.endpoint = endpoint
        svc = endpoint.service
        self.step_batch_size = step_batch_size or svc.config.step_batch_size
        self.send_steps = svc.requires_step_updates if send_steps is None else send_steps
        self.assignment: TaskAssignment | None = None
        self.assignments: list[TaskAssignment] = []
        self._steps: list[StepRecord] = []
        self._pending: list[UpdateMessage] = []
        self._length = 0
        self._return = 0.0
        self._episode_task = None

    @property
    def env_id(self) -> int:
        return self.endpoint.worker_id

    @property
    def task(self):
        return None if self.assignment is None else self.assignment.task

    def _flush(self) -> None:
        if self._steps:
            self._pending.append(StepBatch(self.env_id, tuple(self._steps)))
            self._steps = []
        if self._pending:
            self.endpoint.send(self._pending)
            self._pending = []

    def _next_assignment(self) -> TaskAssignment:
        if self._steps:
            self._pending.append(StepBatch(self.env_id, tuple(self._steps)))
            self._steps = []
        self.assignment = self.endpoint.get_task(messages=self._pending)
        self._pending = []
        self.assignments.append(self.assignment)
        return self.assignment

    def reset(self, seed: int | None = None):
        self.assignments = []
        a = self._next_assignment()
        self._length = 0
        self._return = 0.0
        self._episode_task = a.task
        return self.env.reset(new_task=a.task, seed=seed)

    def step(self, action):
        obs, reward, done, info = self.env.step(action)
        self._length += 1
        self._return += reward
        if self.send_steps:
            self._record_step(reward, done)
        if done or info.get("needs_task"):
            self._boundary(done, info)
        return obs, reward, done, info

    def _record_step(self, reward, done) -> None:
        self._steps.append(StepRecord(reward, done, self.assignment.task, self.env_id))
        if len(self._steps) >= self.step_batch_size:
            self._flush()

    def _boundary(self, done: bool, info: dict) -> None:
        task = self.assignment.task
        if info.get("needs_task"):
            self._pending.append(ProgressUpdate(task, float(info.get("task_progress", 0.0))))
            if not done:
                self.env.change_task(self._next_assignment().task)
                return
        else:
            self._pending.append(ProgressUpdate(task, float(self.env.task_completion())))
        self._pending.append(EpisodeUpdate(EpisodeRecord(self._return, self._length, self._episode_task, self.env_id)))
        if not self.endpoint.service.threaded:
            self._flush()

    def close(self) -> None:
        self._flush()


# benchmarking -----------------------------------------------------------------


def _random_rollout(env, rng: np.random.Generator, step: Callable) -> int:
    done = False
    steps = 0
    while not done:
        _, _, done, _ = step(int(rng.integers(env.n_actions)))
        steps += 1
    return steps


def _run_threads(fns: list[Callable[[], None]]) -> float:
    threads = [threading.Thread(target=f) for f in fns]
    t0 = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return time.perf_counter() - t0


def bench_overhead(
    env_factory: Callable[[], Any],
    curriculum_factory: Callable[[], Curriculum],
    workers: int,
    episodes: int,
    repeats: int = 1,
    seed: int = 0,
) -> dict:
    """Wall time of a raw env loop vs. the same loop through the sync layer.

    Workers are threads stepping their own environment with random actions.
    The baseline draws tasks from a private copy of the curriculum. Each
    configuration runs ``repeats`` times and the fastest run is reported.
    """
    from .core import StepCounter

    def baseline() -> float:
        def worker(i):
            env = env_factory()
            local = curriculum_factory()
            rng = np.random.default_rng([seed, i])
            for _ in range(episodes):
                env.reset(new_task=local.sample(1)[0])
                _random_rollout(env, rng, env.step)

        return _run_threads([lambda i=i: worker(i) for i in range(workers)])

    def synced(step_updates: bool) -> tuple[float, ConservationReport]:
        curriculum = curriculum_factory()
        if step_updates:
            curriculum = StepCounter(curriculum)
        service = CurriculumService(curriculum, workers, threaded=True).start()

        def worker(i):
            env = EnvSyncWrapper(env_factory(), service.endpoints[i])
            rng = np.random.default_rng([seed, i])
            for _ in range(episodes):
                env.reset()
                _random_rollout(env.env, rng, env.step)
            env.close()

        elapsed = _run_threads([lambda i=i: worker(i) for i in range(workers)])
        service.stop()
        return elapsed, service.conservation_report()

    # interleave the configurations so slow drift on the machine hits all three
    base_times, episodic_runs, step_runs = [], [], []
    for _ in range(repeats):
        base_times.append(baseline())
        episodic_runs.append(synced(False))
        step_runs.append(synced(True))
    base = min(base_times)
    episodic = min(t for t, _ in episodic_runs)
    step = min(t for t, _ in step_runs)
    return {
        "workers": workers,
        "episodes": episodes,
        "baseline_s": base,
        "episodic_s": episodic,
        "step_s": step,
        "episodic_overhead": episodic / base - 1.0,
        "step_overhead": step / base - 1.0,
        "conservation_ok": all(r.ok for _, r in episodic_runs + step_runs),
    }
