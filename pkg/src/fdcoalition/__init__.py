"""Coalition-formation sub-channel allocation for full-duplex D2D mmWave small cells."""

from .baselines import SchemeId, exhaustive_optimal, hd_coalition_formation, random_allocation
from .game import (GameConfig, GameResult, Partition, SwitchRecord, is_nash_stable,
                   run_coalition_formation, total_utility)
from .metrics import TrialResult, aggregate, jain_fairness, system_throughput
from .scenario import Link, Node, RadioParams, Scenario, generate_scenario, validate_scenario

__all__ = [
    "GameConfig", "GameResult", "Link", "Node", "Partition", "RadioParams", "Scenario",
    "SchemeId", "SwitchRecord", "TrialResult", "aggregate", "exhaustive_optimal",
    "generate_scenario", "hd_coalition_formation", "is_nash_stable", "jain_fairness",
    "random_allocation", "run_coalition_formation", "system_throughput", "total_utility",
    "validate_scenario",
]
