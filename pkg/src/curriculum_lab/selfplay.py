"""Opponent curricula over stored policy snapshots.

Snapshots are opaque byte strings. A store keeps them either in memory or
in a directory laid out as::

    opponents/manifest.json     {"opponents": [{"id", "file", "created_step"}, ...]}
    opponents/<sha256>.bin      one file per snapshot, named by content hash

Files are written to a temporary name and renamed into place, and the
manifest is replaced atomically after the snapshot file exists, so a reader
never sees a manifest entry whose file is incomplete.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CurriculumError, entropy

LIVE_POLICY = -1

WIN, DRAW, LOSS = 1.0, 0.5, 0.0


class UnknownOpponent(KeyError):
    pass


class EmptyStore(CurriculumError):
    pass


def outcome_from_return(learner_return: float) -> float:
    if learner_return > 0:
        return WIN
    if learner_return < 0:
        return LOSS
    return DRAW


@dataclass
class OpponentRecord:
    opponent_id: int
    file: str | None
    created_step: int
    outcomes: deque = field(default_factory=deque)

    @property
    def games(self) -> int:
        return len(self.outcomes)

    @property
    def wins(self) -> float:
        return float(sum(self.outcomes))


@dataclass(frozen=True)
class PfspConfig:
    hard_exponent: float = 2.0
    smoothing: float = 0.01
    memory: int = 128
    # "opponent": favour opponents that beat the learner; "learner": the reverse
    perspective: str = "opponent"
    hard: bool = False

    def __post_init__(self):
        if self.hard_exponent < 0:
            raise CurriculumError("hard_exponent must be >= 0")
        if self.smoothing <= 0:
            raise CurriculumError("smoothing must be > 0")
        if self.memory < 1:
            raise CurriculumError("memory must be >= 1")
        if self.perspective not in ("opponent", "learner"):
            raise CurriculumError("perspective must be 'opponent' or 'learner'")


class OpponentStore:
    """Snapshot store with one writer and any number of readers."""

    def __init__(self, root: str | os.PathLike | None = None, memory: int = 128):
        self.memory = memory
        self.records: list[OpponentRecord] = []
        self._blobs: dict[int, bytes] = {}
        self._lock = threading.Lock()
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            manifest = self.root / "manifest.json"
            if manifest.exists():
                for entry in json.loads(manifest.read_text())["opponents"]:
                    self.records.append(
                        OpponentRecord(entry["id"], entry["file"], entry["created_step"], deque(maxlen=memory))
                    )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[int]:
        return [r.opponent_id for r in self.records]

    def add(self, snapshot: bytes, step: int = 0) -> int:
        snapshot = bytes(snapshot)
        with self._lock:
            opponent_id = len(self.records)
            name = None
            if self.root is not None:
                name = hashlib.sha256(snapshot).hexdigest() + ".bin"
                path = self.root / name
                if not path.exists():
                    _atomic_write(path, snapshot)
            else:
                self._blobs[opponent_id] = snapshot
            self.records.append(OpponentRecord(opponent_id, name, step, deque(maxlen=self.memory)))
            if self.root is not None:
                self._write_manifest()
        return opponent_id

    def _write_manifest(self) -> None:
        doc = {
            "opponents": [
                {"id": r.opponent_id, "file": r.file, "created_step": r.created_step} for r in self.records
            ]
        }
        _atomic_write(self.root / "manifest.json", json.dumps(doc, indent=1).encode())

    def get(self, opponent_id: int) -> bytes:
        if not 0 <= opponent_id < len(self.records):
            raise UnknownOpponent(opponent_id)
        if self.root is None:
            return self._blobs[opponent_id]
        return (self.root / self.records[opponent_id].file).read_bytes()

    def record(self, opponent_id: int) -> OpponentRecord:
        if not 0 <= opponent_id < len(self.records):
            raise UnknownOpponent(opponent_id)
        return self.records[opponent_id]

    def push_outcome(self, opponent_id: int, outcome: float) -> None:
        self.record(opponent_id).outcomes.append(outcome)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def smoothed_winrates(store: OpponentStore, smoothing: float) -> np.ndarray:
    """Learner's win-rate against each stored opponent; 0.5 with no games."""
    wins = np.array([r.wins for r in store.records], dtype=np.float64)
    games = np.array([r.games for r in store.records], dtype=np.float64)
    return (wins + smoothing) / (games + 2 * smoothing)


def pfsp_weights(winrates: np.ndarray, cfg: PfspConfig) -> np.ndarray:
    w = np.asarray(winrates, dtype=np.float64)
    base = 1.0 - w if cfg.perspective == "opponent" else w
    if cfg.hard:
        weights = (base == base.max()).astype(np.float64)
    else:
        weights = base**cfg.hard_exponent
    if weights.sum() <= 0:
        return np.full(len(w), 1.0 / len(w))
    return weights / weights.sum()


def opponent_distribution(strategy: str, store: OpponentStore, cfg: PfspConfig | None = None) -> np.ndarray:
    """Probabilities over stored ids (over the live policy alone for SP)."""
    if strategy == "SP":
        return np.ones(1)
    if len(store) == 0:
        raise EmptyStore(f"{strategy} needs at least one stored opponent")
    if strategy == "FSP":
        return np.full(len(store), 1.0 / len(store))
    if strategy == "PFSP":
        cfg = cfg or PfspConfig()
        return pfsp_weights(smoothed_winrates(store, cfg.smoothing), cfg)
    raise ValueError(f"unknown strategy {strategy!r}")


def sample_opponent(strategy: str, store: OpponentStore, cfg: PfspConfig | None, rng: np.random.Generator) -> int:
    if strategy == "SP":
        return LIVE_POLICY
    probs = opponent_distribution(strategy, store, cfg)
    return int(store.ids[rng.choice(len(probs), p=probs)])


class OpponentCurriculum:
    """Self-play (SP), fictitious self-play (FSP) or prioritized FSP (PFSP)."""

    strategy = "SP"

    def __init__(self, store: OpponentStore | None = None, config: PfspConfig | None = None, seed=None):
        self.config = config or PfspConfig()
        self.store = store if store is not None else OpponentStore(memory=self.config.memory)
        self.rng = np.random.default_rng(seed)

    def update_agent(self, snapshot: bytes, step: int = 0) -> int:
        return self.store.add(snapshot, step)

    def get_opponent(self, opponent_id: int) -> bytes:
        return self.store.get(opponent_id)

    def update_winrate(self, opponent_id: int, learner_return: float) -> None:
        if opponent_id == LIVE_POLICY:
            return
        self.store.push_outcome(opponent_id, outcome_from_return(learner_return))

    def sample_distribution(self) -> np.ndarray:
        return opponent_distribution(self.strategy, self.store, self.config)

    def entropy(self) -> float:
        return entropy(self.sample_distribution())

    def sample(self, k: int = 1) -> list[int]:
        return [sample_opponent(self.strategy, self.store, self.config, self.rng) for _ in range(k)]


class SelfPlay(OpponentCurriculum):
    strategy = "SP"


class FictitiousSelfPlay(OpponentCurriculum):
    strategy = "FSP"


class PrioritizedFictitiousSelfPlay(OpponentCurriculum):
    strategy = "PFSP"
