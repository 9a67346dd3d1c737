"""Joint power allocation for a radar assisted by an active RIS."""

from .design import (
    Design,
    DesignReport,
    alternating_maximization,
    baseline_no_ris,
    baseline_passive,
    evaluate_design,
    mismatched_design,
)
from .detection import (
    pd_single_channel,
    pd_two_channel,
    pfa_from_threshold,
    threshold_from_pfa,
)
from .errors import ConfigError, DomainError, InfeasibleDesignError, RisRadarError
from .scenario import ScenarioConfig, config_from_dict, load_config, parse_config
from .simkit import McEstimate, estimate_detection_mc

__version__ = "0.1.0"

__all__ = [
    "Design", "DesignReport", "alternating_maximization", "baseline_no_ris",
    "baseline_passive", "evaluate_design", "mismatched_design", "pd_single_channel",
    "pd_two_channel", "pfa_from_threshold", "threshold_from_pfa", "ConfigError",
    "DomainError", "InfeasibleDesignError", "RisRadarError", "ScenarioConfig",
    "config_from_dict", "load_config", "parse_config", "McEstimate", "estimate_detection_mc",
]
