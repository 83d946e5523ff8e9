"""Software-defined fog orchestration and fluid-flow network simulation."""

from ._sdfog import (
    Controller,
    Error,
    NoPath,
    OrchestrationError,
    ParseError,
    ScenarioConfig,
    ScenarioFailure,
    StaleReservation,
    Topology,
    ValidationError,
    compute_link_rates,
    default_hsh_topology,
    load_topology,
    run_emergency,
    run_normal,
    run_sweep,
)

__all__ = [
    "Controller",
    "Error",
    "NoPath",
    "OrchestrationError",
    "ParseError",
    "ScenarioConfig",
    "ScenarioFailure",
    "StaleReservation",
    "Topology",
    "ValidationError",
    "compute_link_rates",
    "default_hsh_topology",
    "load_topology",
    "run_emergency",
    "run_normal",
    "run_sweep",
]
