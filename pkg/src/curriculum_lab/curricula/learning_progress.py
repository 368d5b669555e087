"""Success-rate driven curricula: Learning Progress and Sampling for Learnability.

Both consume periodic evaluation results through ``update_on_demand`` under
the key ``"success_rates"`` as ``[(task, rate), ...]``. Tasks missing from a
batch keep their previous rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Curriculum, CurriculumError, normalize


def reweight(p: np.ndarray, theta: float) -> np.ndarray:
    """Hyperbolic map that fixes 0 and 1 and stretches low success rates."""
    p = np.asarray(p, dtype=np.float64)
    return p * (1.0 - theta) / (p + theta * (1.0 - 2.0 * p))


@dataclass
class SuccessRateTable:
    p: np.ndarray
    p_fast: np.ndarray
    p_slow: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SuccessRateTable":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class LpConfig:
    ema_alpha: float = 0.1
    reweight_theta: float = 0.1
    update_period: int = 25

    def __post_init__(self):
        if not 0.0 < self.ema_alpha <= 1.0:
            raise CurriculumError("ema_alpha must lie in (0, 1]")
        if not 0.0 < self.reweight_theta < 1.0:
            raise CurriculumError("reweight_theta must lie in (0, 1)")
        if self.update_period < 1:
            raise CurriculumError("update_period must be >= 1")


def _check_rates(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise CurriculumError("success rates must lie in [0, 1]")
    return p


def learning_progress(table: SuccessRateTable, theta: float) -> np.ndarray:
    return np.abs(reweight(table.p_fast, theta) - reweight(table.p_slow, theta))


def lp_distribution(raw_lp: np.ndarray) -> np.ndarray:
    peak = raw_lp.max()
    if peak <= 0:
        return np.full(len(raw_lp), 1.0 / len(raw_lp))
    return normalize(raw_lp / peak)


def lp_update(table: SuccessRateTable, evaluated_p: np.ndarray, cfg: LpConfig) -> np.ndarray:
    """Fold one evaluation into the EMAs (in place) and return the new distribution.

    The slow EMA tracks the fast EMA with the same alpha.
    """
    p = _check_rates(evaluated_p)
    a = cfg.ema_alpha
    table.p = p.copy()
    table.p_fast = a * p + (1 - a) * table.p_fast
    table.p_slow = a * table.p_fast + (1 - a) * table.p_slow
    return lp_distribution(learning_progress(table, cfg.reweight_theta))


class _SuccessRateCurriculum(Curriculum):
    metric_keys = frozenset({"success_rates"})

    def __init__(self, task_space, seed=None):
        super().__init__(task_space, seed)
        self.latest = np.zeros(self.num_tasks)
        self.evaluations = 0

    def _consume_metric(self, name, entries):
        p = self.latest.copy()
        for task, value in entries:
            p[self.task_space.flat_index(task)] = value
        self.latest = _check_rates(p)
        self.evaluations += 1
        self._on_success_rates(self.latest)

    def _on_success_rates(self, p: np.ndarray) -> None:
        raise NotImplementedError

    def update_success_rates(self, p) -> None:
        """Direct-call equivalent of an on-demand ``success_rates`` batch."""
        p = _check_rates(p)
        if p.shape != (self.num_tasks,):
            raise CurriculumError(f"expected {self.num_tasks} success rates")
        self.update_on_demand({"success_rates": list(zip(self.task_space.encodings(), p))})


class LearningProgress(_SuccessRateCurriculum):
    """Prioritizes tasks whose success rate is changing.

    Uniform until the first evaluation arrives, and whenever every task's
    learning progress is exactly zero.
    """

    def __init__(self, task_space, config: LpConfig | None = None, seed=None, **overrides):
        super().__init__(task_space, seed)
        self.config = config if config is not None else LpConfig(**overrides)
        self.table = SuccessRateTable.zeros(self.num_tasks)
        self._dist = np.full(self.num_tasks, 1.0 / self.num_tasks)

    def _on_success_rates(self, p):
        self._dist = lp_update(self.table, p, self.config)

    def sample_distribution(self):
        return self._dist.copy()


@dataclass(frozen=True)
class SflConfig:
    mode: str = "full_distribution"
    k: int = 10
    mix_rho: float = 1.0
    update_period: int = 25

    def __post_init__(self):
        if self.mode not in ("full_distribution", "top_k"):
            raise CurriculumError("mode must be 'full_distribution' or 'top_k'")
        if self.k < 1:
            raise CurriculumError("k must be >= 1")
        if not 0.0 <= self.mix_rho <= 1.0:
            raise CurriculumError("mix_rho must lie in [0, 1]")


def learnability(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return p * (1.0 - p)


def sfl_distribution(p: np.ndarray, cfg: SflConfig) -> np.ndarray:
    p = _check_rates(p)
    n = len(p)
    ell = learnability(p)
    if cfg.mode == "full_distribution":
        return normalize(ell)
    if cfg.k > n:
        raise CurriculumError(f"k={cfg.k} exceeds the task count {n}")
    top = np.argsort(-ell, kind="stable")[: cfg.k]
    probs = np.full(n, (1.0 - cfg.mix_rho) / n)
    probs[top] += cfg.mix_rho / cfg.k
    return probs


class SamplingForLearnability(_SuccessRateCurriculum):
    """Samples by learnability ``p(1-p)``, either directly or via a top-k mixture."""

    def __init__(self, task_space, config: SflConfig | None = None, seed=None, **overrides):
        super().__init__(task_space, seed)
        self.config = config if config is not None else SflConfig(**overrides)
        if self.config.mode == "top_k" and self.config.k > self.num_tasks:
            raise CurriculumError(f"k={self.config.k} exceeds the task count {self.num_tasks}")
        self._dist = np.full(self.num_tasks, 1.0 / self.num_tasks)

    def _on_success_rates(self, p):
        self._dist = sfl_distribution(p, self.config)

    def sample_distribution(self):
        return self._dist.copy()
