"""Curriculum learning toolkit: task spaces, curricula, sync layer, envs and a tabular learner."""

from .core import (
    Curriculum,
    CurriculumError,
    DualCurriculumWrapper,
    EmptyTaskSpace,
    EpisodeRecord,
    StepCounter,
    StepRecord,
)
from .task_space import BoxTaskSpace, DiscreteTaskSpace, TaskSpace, TupleTaskSpace

__version__ = "0.1.0"

__all__ = [
    "BoxTaskSpace",
    "Curriculum",
    "CurriculumError",
    "DiscreteTaskSpace",
    "DualCurriculumWrapper",
    "EmptyTaskSpace",
    "EpisodeRecord",
    "StepCounter",
    "StepRecord",
    "TaskSpace",
    "TupleTaskSpace",
]
