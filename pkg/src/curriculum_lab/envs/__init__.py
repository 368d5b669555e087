from .base import TaskEnv
from .duel import DuelGame, SoftmaxPolicy, duel_play, payoff_matrix
from .grid import SeededGrid, generate_layout
from .metrics import SuccessMetric, clipped_success, normalized_return
from .simon_says import SimonSaysCraft, default_task_labels

__all__ = [
    "DuelGame",
    "SeededGrid",
    "SimonSaysCraft",
    "SoftmaxPolicy",
    "SuccessMetric",
    "TaskEnv",
    "clipped_success",
    "default_task_labels",
    "duel_play",
    "generate_layout",
    "normalized_return",
    "payoff_matrix",
]
