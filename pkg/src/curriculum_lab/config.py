"""Experiment configuration: a JSON document, validated, with documented defaults.

A config names an environment and a curriculum by ``type`` and passes any
other keys through as constructor parameters::

    {
      "env": {"type": "grid", "num_seeds": 200},
      "curriculum": {"type": "plr", "temperature": 0.1, "staleness_coef": 0.1},
      "learner": {"gamma": 0.99, "lam": 0.95},
      "workers": 1,
      "total_episodes": 4000,
      "seeds": [0],
      "output_dir": "runs/plr",
      "sync": {"step_batch_size": 64, "prefetch": 1, "delay": 0, "mode": "direct"}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import jsonschema

from .core import Curriculum, CurriculumError
from .curricula import (
    OMNI,
    Constant,
    DomainRandomization,
    LearningProgress,
    LpConfig,
    PlrConfig,
    PrioritizedLevelReplay,
    SamplingForLearnability,
    Sequential,
    SflConfig,
)
from .core import DualCurriculumWrapper
from .selfplay import (
    FictitiousSelfPlay,
    OpponentStore,
    PfspConfig,
    PrioritizedFictitiousSelfPlay,
    SelfPlay,
)
from .sync import SyncConfig


class ConfigError(ValueError):
    pass


ENV_TYPES = ("grid", "simon_says", "duel")
CURRICULUM_TYPES = ("dr", "constant", "sequential", "plr", "lp", "sfl", "omni", "sp", "fsp", "pfsp")
SELFPLAY_TYPES = {"sp": SelfPlay, "fsp": FictitiousSelfPlay, "pfsp": PrioritizedFictitiousSelfPlay}

_typed = {"type": "object", "required": ["type"]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["env", "curriculum"],
    "properties": {
        "env": {**_typed, "properties": {"type": {"enum": list(ENV_TYPES)}}},
        "curriculum": {**_typed, "properties": {"type": {"enum": list(CURRICULUM_TYPES)}}},
        "learner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "lam": {"type": "number", "minimum": 0, "maximum": 1},
                "lr_actor": {"type": "number", "exclusiveMinimum": 0},
                "lr_critic": {"type": "number", "exclusiveMinimum": 0},
                "eval_period": {"type": ["integer", "null"], "minimum": 1},
                "eval_episodes_per_task": {"type": "integer", "minimum": 1},
                "eval_greedy": {"type": "boolean"},
                "checkpoint_interval": {"type": "integer", "minimum": 1},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
        "total_episodes": {"type": "integer", "minimum": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "output_dir": {"type": ["string", "null"]},
        "sync": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "step_batch_size": {"type": "integer", "minimum": 1},
                "prefetch": {"type": "integer", "minimum": 1},
                "delay": {"type": "integer", "minimum": 0},
                "mode": {"enum": ["direct", "threaded"]},
            },
        },
    },
}


@dataclass
class LearnerConfig:
    gamma: float = 0.99
    lam: float = 0.95
    lr_actor: float = 0.1
    lr_critic: float = 0.1
    eval_period: int | None = None  # None: the curriculum's update period, else 25
    eval_episodes_per_task: int = 4
    eval_greedy: bool = True
    checkpoint_interval: int = 800


@dataclass
class SyncOptions:
    step_batch_size: int = 64
    prefetch: int = 1
    delay: int = 0
    mode: str = "direct"

    def to_sync_config(self) -> SyncConfig:
        return SyncConfig(self.step_batch_size, self.prefetch, self.delay)


@dataclass
class ExperimentConfig:
    env: dict
    curriculum: dict
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    workers: int = 1
    total_episodes: int = 1000
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str | None = None
    sync: SyncOptions = field(default_factory=SyncOptions)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(doc, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: {exc.message}") from None
        doc = dict(doc)
        doc["learner"] = LearnerConfig(**doc.get("learner", {}))
        doc["sync"] = SyncOptions(**doc.get("sync", {}))
        doc["env"] = dict(doc["env"])
        doc["curriculum"] = dict(doc["curriculum"])
        if "seeds" in doc:
            doc["seeds"] = list(doc["seeds"])
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        return cls.parse(text)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``sync_*``/``learner_*`` keys reach nested ones."""
        doc = self.to_dict()
        for key, value in changes.items():
            if value is None:
                continue
            for prefix in ("sync_", "learner_"):
                if key.startswith(prefix):
                    doc[prefix[:-1]][key[len(prefix) :]] = value
                    break
            else:
                doc[key] = value
        return ExperimentConfig.from_dict(doc)


def _params(entry: dict) -> dict:
    return {k: v for k, v in entry.items() if k != "type"}


def make_env(entry: dict, seed: int | None = None, **extra):
    from .envs import DuelGame, SeededGrid, SimonSaysCraft

    kind = entry["type"]
    params = _params(entry)
    try:
        if kind == "grid":
            return SeededGrid(**params)
        if kind == "simon_says":
            return SimonSaysCraft(seed=seed, **params)
        if kind == "duel":
            return DuelGame(seed=seed, **params, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"env {kind}: {exc}") from None
    raise ConfigError(f"unknown env type {kind!r}")


def make_curriculum(entry: dict, task_space, seed: int | None = None, store_root: str | None = None) -> Curriculum:
    """Build a curriculum from its config section.

    Self-play types return a ``DualCurriculumWrapper`` pairing domain
    randomization over the env's tasks with the opponent curriculum.
    """
    kind = entry["type"]
    params = _params(entry)
    try:
        if kind == "dr":
            return DomainRandomization(task_space, tasks=params.get("tasks"), seed=seed)
        if kind == "constant":
            return Constant(task_space, params["task"], seed=seed)
        if kind == "sequential":
            stages = [
                make_curriculum(s, task_space, None if seed is None else seed + 1 + i) if isinstance(s, dict) else s
                for i, s in enumerate(params["stages"])
            ]
            return Sequential(
                stages, params["conditions"], task_space, params.get("return_window", 1000), seed=seed
            )
        if kind == "plr":
            return PrioritizedLevelReplay(task_space, PlrConfig(**params), seed=seed)
        if kind == "lp":
            return LearningProgress(task_space, LpConfig(**params), seed=seed)
        if kind == "sfl":
            return SamplingForLearnability(task_space, SflConfig(**params), seed=seed)
        if kind == "omni":
            base_spec = params.pop("base", {"type": "lp"})
            base = make_curriculum(base_spec, task_space, seed)
            return OMNI(base, seed=seed)
        if kind in SELFPLAY_TYPES:
            pfsp = PfspConfig(**{k: v for k, v in params.items() if k != "tasks"})
            store = OpponentStore(store_root, memory=pfsp.memory)
            agent = SELFPLAY_TYPES[kind](store, pfsp, seed=seed)
            tasks = DomainRandomization(task_space, seed=None if seed is None else seed + 1)
            return DualCurriculumWrapper(tasks, agent, seed=seed)
    except (TypeError, KeyError, ValueError, CurriculumError) as exc:
        raise ConfigError(f"curriculum {kind}: {exc}") from None
    raise ConfigError(f"unknown curriculum type {kind!r}")


def update_period(entry: dict) -> int:
    """Evaluation cadence implied by a curriculum section (episodes)."""
    if entry["type"] in ("lp", "sfl"):
        return int(entry.get("update_period", 25))
    if entry["type"] == "omni":
        return update_period(entry.get("base", {"type": "lp"}))
    return 25
