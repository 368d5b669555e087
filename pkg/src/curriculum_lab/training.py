"""The training loop: curriculum service, workers, learner and evaluator wired together."""

from __future__ import annotations

import csv
import io
import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import ExperimentConfig, make_curriculum, make_env, update_period
from .core import DualCurriculumWrapper
from .envs.duel import SoftmaxPolicy
from .learner import TabularPolicy, evaluate, rollout, segment_scores, train_on
from .selfplay import LIVE_POLICY
from .sync import CurriculumService, DemandUpdate, EnvSyncWrapper

log = logging.getLogger(__name__)

METRIC_FIELDS = ("step", "episode", "task", "return", "length", "curriculum_entropy")


@dataclass
class TrainingResult:
    rows: list[dict] = field(default_factory=list)
    evaluations: list[dict] = field(default_factory=list)
    conservation: dict = field(default_factory=dict)
    policy: TabularPolicy | None = None
    curriculum: Any = None

    @property
    def final_success_rate(self) -> float:
        if not self.evaluations:
            return float("nan")
        return float(np.mean(self.evaluations[-1]["success_rates"]))

    @property
    def final_mean_return(self) -> float:
        tail = self.rows[-max(1, len(self.rows) // 10) :]
        return float(np.mean([float(r["return"]) for r in tail])) if tail else float("nan")

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=METRIC_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()

    def summary(self, curriculum_type: str) -> dict:
        return {
            "final_mean_return": self.final_mean_return,
            "final_success_rate": self.final_success_rate,
            "curriculum": curriculum_type,
            "conservation": self.conservation,
        }


def _task_label(task) -> str:
    return json.dumps(task) if isinstance(task, (list, tuple)) else str(task)


class _Run:
    """State for one seed of one experiment."""

    def __init__(self, cfg: ExperimentConfig, seed: int, output_dir: Path | None):
        self.cfg = cfg
        self.seed = seed
        # independent streams for everything random in the run
        children = np.random.SeedSequence(seed).spawn(4 + 2 * cfg.workers)
        self._seeds = [int(c.generate_state(1)[0]) for c in children]
        lc = cfg.learner
        self.selfplay = cfg.env["type"] == "duel"
        self.policy: TabularPolicy | None = None
        store_root = None
        if self.selfplay and output_dir is not None:
            store_root = str(output_dir / "opponents")
        probe = self._env(self._seeds[0])
        self.task_space = probe.task_space
        self.curriculum = make_curriculum(cfg.curriculum, self.task_space, self._seeds[1], store_root)
        self.policy = TabularPolicy(probe.n_states, probe.n_actions, lc.lr_actor, lc.lr_critic)
        self.eval_period = lc.eval_period or update_period(cfg.curriculum)
        if self.selfplay:
            # FSP and PFSP need one stored opponent before the first draw
            self.curriculum.update_agent(self.policy.snapshot(), 0)
        self.robust = bool(getattr(getattr(self.curriculum, "config", None), "robust", False))
        self.wants_scores = "value_l1_score" in self.curriculum.metric_keys
        self.wants_rates = "success_rates" in self.curriculum.metric_keys
        self.service = CurriculumService(
            self.curriculum, cfg.workers, cfg.sync.to_sync_config(), threaded=cfg.sync.mode == "threaded"
        )
        self.eval_env = self._env(self._seeds[2], evaluation=True)
        self.result = TrainingResult(policy=self.policy, curriculum=self.curriculum)
        self.steps = 0
        self.updates = 0

    def _worker_seed(self, worker: int, which: int) -> int:
        return self._seeds[4 + 2 * worker + which]

    def _env(self, seed: int, evaluation: bool = False):
        if self.cfg.env["type"] != "duel":
            return make_env(self.cfg.env, seed)
        if evaluation:
            # the fixed reference opponent: uniform random play
            n = self.cfg.env.get("num_variants", 4)
            rand = SoftmaxPolicy.uniform(n)
            return make_env(self.cfg.env, seed, live_policy=lambda: rand)
        return make_env(
            self.cfg.env,
            seed,
            opponent_loader=lambda oid: SoftmaxPolicy.from_bytes(self.curriculum.get_opponent(oid)),
            live_policy=lambda: SoftmaxPolicy(self.policy.logits),
        )

    # learner side ----------------------------------------------------------
    def learn(self, traj, record, worker_id: int) -> None:
        deltas = train_on(self.policy, traj, robust_skip=self.robust)
        self.updates += 1
        self.steps += record.length
        if self.wants_scores:
            self.service.learner.send([DemandUpdate({"value_l1_score": segment_scores(traj, deltas)})])
        self.result.rows.append(
            {
                "step": self.steps,
                "episode": self.updates,
                "task": _task_label(record.task),
                "return": repr(float(record.episodic_return)),
                "length": record.length,
                "curriculum_entropy": repr(self.service.distribution_entropy()),
            }
        )
        if self.updates % self.eval_period == 0 or self.updates == self.cfg.total_episodes:
            self.run_evaluation()
        if self.selfplay and self.updates % self.cfg.learner.checkpoint_interval == 0:
            self.curriculum.update_agent(self.policy.snapshot(), self.updates)

    def run_evaluation(self) -> None:
        lc = self.cfg.learner
        rates = evaluate(
            self.policy,
            self.eval_env,
            episodes_per_task=lc.eval_episodes_per_task,
            greedy=lc.eval_greedy,
            seed=[self._seeds[3], self.updates],
        )
        if self.wants_rates:
            entries = list(zip(self.task_space.encodings(), (float(r) for r in rates)))
            self.service.learner.send([DemandUpdate({"success_rates": entries})])
        dist = self.service.distribution()
        self.result.evaluations.append(
            {
                "step": self.steps,
                "episode": self.updates,
                "success_rates": [float(r) for r in rates],
                "distribution": None if dist is None else [float(p) for p in dist],
            }
        )

    # worker side -----------------------------------------------------------
    def play(self, wrapper: EnvSyncWrapper, rng: np.random.Generator):
        obs = wrapper.reset()
        lc = self.cfg.learner
        return rollout(
            self.policy,
            wrapper,
            rng,
            lc.gamma,
            lc.lam,
            task_tag=wrapper.assignment.tag,
            first_obs=obs,
            on_task_switch=lambda: (wrapper.task, wrapper.assignment.tag),
        )

    def run_direct(self) -> None:
        wrappers = [
            EnvSyncWrapper(self._env(self._worker_seed(w, 0)), self.service.endpoints[w])
            for w in range(self.cfg.workers)
        ]
        rngs = [np.random.default_rng(self._worker_seed(w, 1)) for w in range(self.cfg.workers)]
        for e in range(self.cfg.total_episodes):
            w = e % self.cfg.workers
            traj, record = self.play(wrappers[w], rngs[w])
            self.learn(traj, record, w)
        for wrapper in wrappers:
            wrapper.close()
        self.service.stop()

    def run_threaded(self) -> None:
        results: queue.Queue = queue.Queue(maxsize=2 * self.cfg.workers)
        stop = threading.Event()
        counts = [self.cfg.total_episodes // self.cfg.workers] * self.cfg.workers
        for w in range(self.cfg.total_episodes % self.cfg.workers):
            counts[w] += 1

        def worker(w: int) -> None:
            wrapper = EnvSyncWrapper(self._env(self._worker_seed(w, 0)), self.service.endpoints[w])
            rng = np.random.default_rng(self._worker_seed(w, 1))
            try:
                for _ in range(counts[w]):
                    if stop.is_set():
                        break
                    results.put((w, *self.play(wrapper, rng)))
            except BaseException as exc:
                results.put((w, exc, None))
            finally:
                wrapper.close()

        self.service.start()
        threads = [threading.Thread(target=worker, args=(w,), daemon=True) for w in range(self.cfg.workers)]
        for t in threads:
            t.start()
        try:
            for _ in range(self.cfg.total_episodes):
                w, traj, record = results.get()
                if isinstance(traj, BaseException):
                    raise RuntimeError(f"worker {w} failed") from traj
                self.learn(traj, record, w)
        finally:
            stop.set()
            while any(t.is_alive() for t in threads):
                try:
                    results.get(timeout=0.05)
                except queue.Empty:
                    pass
            self.service.stop()

    def run(self) -> TrainingResult:
        if self.cfg.sync.mode == "threaded":
            self.run_threaded()
        else:
            self.run_direct()
        self.result.conservation = self.service.conservation_report().as_dict()
        return self.result


def run_training(cfg: ExperimentConfig, seed: int | None = None, output_dir: str | Path | None = None) -> TrainingResult:
    """Train one seed. Writes metrics.csv, evaluations.json and summary.json if ``output_dir`` is set."""
    seed = cfg.seeds[0] if seed is None else seed
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = _Run(cfg, seed, out).run()
    if out is not None:
        write_outputs(result, cfg, out)
    return result


def write_outputs(result: TrainingResult, cfg: ExperimentConfig, out: Path) -> None:
    (out / "metrics.csv").write_text(result.metrics_csv())
    (out / "evaluations.json").write_text(json.dumps(result.evaluations))
    (out / "summary.json").write_text(json.dumps(result.summary(cfg.curriculum["type"]), indent=2))
    np.save(out / "policy_logits.npy", result.policy.logits)
    np.save(out / "policy_values.npy", result.policy.values)
