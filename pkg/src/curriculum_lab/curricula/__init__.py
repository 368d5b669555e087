from .learning_progress import (
    LearningProgress,
    LpConfig,
    SamplingForLearnability,
    SflConfig,
    SuccessRateTable,
    learnability,
    lp_update,
    reweight,
    sfl_distribution,
)
from .manual import AnnealingSchedule, Constant, DomainRandomization, ExpandingBox, Sequential, annealed_bounds, annealing_sample
from .omni import OMNI, SubprocessOracle, default_oracle, omni_filter, sfl_with_omni
from .plr import EXPLORE, REPLAY, PlrConfig, PrioritizedLevelReplay, plr_score_distribution, value_l1_score
from .stopping import And, Atom, Or, ParseError, evaluate, parse_condition, render

__all__ = [
    "OMNI",
    "And",
    "AnnealingSchedule",
    "Atom",
    "Constant",
    "DomainRandomization",
    "EXPLORE",
    "ExpandingBox",
    "LearningProgress",
    "LpConfig",
    "Or",
    "ParseError",
    "PlrConfig",
    "PrioritizedLevelReplay",
    "REPLAY",
    "SamplingForLearnability",
    "Sequential",
    "SflConfig",
    "SubprocessOracle",
    "SuccessRateTable",
    "annealed_bounds",
    "annealing_sample",
    "default_oracle",
    "evaluate",
    "learnability",
    "lp_update",
    "omni_filter",
    "parse_condition",
    "plr_score_distribution",
    "render",
    "reweight",
    "sfl_distribution",
    "sfl_with_omni",
    "value_l1_score",
]
