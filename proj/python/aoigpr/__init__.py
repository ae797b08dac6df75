"""AoI-aware V2V power allocation with online Gaussian process agents."""

from ._core import (
    ConfigParseError,
    KernelHyperparams,
    OnlineGpr,
    ScenarioConfig,
    SingularKernelError,
    ValidationError,
    acquisition,
    count_feasible_actions,
    dbm_to_watt,
    derive_arrival,
    load_config,
    matern,
    parse_config,
    run_simulation,
    violation_probability,
    watt_to_dbm,
)

__all__ = [
    "ConfigParseError",
    "KernelHyperparams",
    "OnlineGpr",
    "ScenarioConfig",
    "SingularKernelError",
    "ValidationError",
    "acquisition",
    "count_feasible_actions",
    "dbm_to_watt",
    "derive_arrival",
    "load_config",
    "matern",
    "parse_config",
    "run_simulation",
    "violation_probability",
    "watt_to_dbm",
]
