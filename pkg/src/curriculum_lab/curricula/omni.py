"""Interestingness filtering on top of a success-rate curriculum.

An oracle maps ``(task labels, success rates)`` to a boolean mask where
``True`` means interesting. The filtered distribution zeroes out the
uninteresting tasks of the base curriculum's distribution.
"""

from __future__ import annotations

import json
import subprocess
import threading
from typing import Callable, Sequence

import numpy as np

from ..core import Curriculum, CurriculumError
from .learning_progress import SflConfig, _SuccessRateCurriculum, sfl_distribution

MASTERED = 0.95

Oracle = Callable[[Sequence, np.ndarray], np.ndarray]


def omni_filter(base: np.ndarray, mask: np.ndarray) -> np.ndarray:
    base = np.asarray(base, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != base.shape:
        raise CurriculumError("mask length must equal the task count")
    if not mask.any():
        return np.full(len(base), 1.0 / len(base))
    filtered = np.where(mask, base, 0.0)
    if filtered.sum() <= 0:
        return mask / mask.sum()
    return filtered / filtered.sum()


def _family_tier(label) -> tuple[str, float] | None:
    if not isinstance(label, str) or ":" not in label:
        return None
    family, _, tier = label.rpartition(":")
    try:
        return family, float(tier)
    except ValueError:
        return None


def default_oracle(labels: Sequence, p: np.ndarray) -> np.ndarray:
    """Rule-based stand-in for a language-model judge.

    A task is uninteresting if it is mastered (``p >= 0.95``) or if another
    task in the same ``family:tier`` family with an equal or higher tier has a
    strictly higher success rate.
    """
    p = np.asarray(p, dtype=np.float64)
    if len(labels) != len(p):
        raise CurriculumError("labels and success rates differ in length")
    parsed = [_family_tier(label) for label in labels]
    mask = p < MASTERED
    by_family: dict[str, list[int]] = {}
    for i, ft in enumerate(parsed):
        if ft is not None:
            by_family.setdefault(ft[0], []).append(i)
    for members in by_family.values():
        for i in members:
            tier_i = parsed[i][1]
            if any(p[j] > p[i] and parsed[j][1] >= tier_i for j in members if j != i):
                mask[i] = False
    return mask


class SubprocessOracle:
    """Oracle served by an external process over line-delimited JSON.

    Each request is one line ``{"tasks": [...], "success_rates": [...]}`` and
    the process answers with one line ``{"mask": [...]}``.
    """

    def __init__(self, command: Sequence[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def __call__(self, labels, p):
        request = {"tasks": list(labels), "success_rates": [float(x) for x in p]}
        with self._lock:
            proc = self._ensure()
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        if not line:
            raise CurriculumError("oracle process closed its output")
        mask = np.asarray(json.loads(line)["mask"], dtype=bool)
        if mask.shape != (len(labels),):
            raise CurriculumError("oracle returned a mask of the wrong length")
        return mask

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=self.timeout)
            self._proc = None


def sfl_with_omni(p: np.ndarray, cfg: SflConfig, labels: Sequence, oracle: Oracle = default_oracle) -> np.ndarray:
    return omni_filter(sfl_distribution(p, cfg), oracle(labels, p))


class OMNI(Curriculum):
    """Masks a success-rate curriculum (LP by default) with an oracle.

    The oracle is consulted each time new success rates arrive; the mask is
    all-true before the first evaluation.
    """

    metric_keys = frozenset({"success_rates"})

    def __init__(self, base: _SuccessRateCurriculum, oracle: Oracle = default_oracle, seed=None):
        super().__init__(base.task_space, seed)
        if not isinstance(base, _SuccessRateCurriculum):
            raise CurriculumError("OMNI filters a success-rate curriculum (LP or SFL)")
        self.base = base
        self.oracle = oracle
        self.mask = np.ones(self.num_tasks, dtype=bool)

    def _consume_metric(self, name, entries):
        self.base.update_on_demand({name: entries})
        self.mask = np.asarray(self.oracle(self.task_space.tasks, self.base.latest), dtype=bool)

    def update_success_rates(self, p) -> None:
        self.update_on_demand({"success_rates": list(zip(self.task_space.encodings(), p))})

    def sample_distribution(self):
        return omni_filter(self.base.sample_distribution(), self.mask)
