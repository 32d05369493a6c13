from .metrics import MetricsBundle, emit_csv
from .runner import Emulation, run, run_batch
from .scenario import (
    FlowSpec,
    NodeSpec,
    ParseError,
    Scenario,
    ValidationError,
    builtin_scenarios,
    load_scenario,
    with_traffic,
)
from .taxonomy import TechnologyProfile, taxonomy_report

__all__ = [
    "MetricsBundle",
    "emit_csv",
    "Emulation",
    "run",
    "run_batch",
    "FlowSpec",
    "NodeSpec",
    "ParseError",
    "Scenario",
    "ValidationError",
    "builtin_scenarios",
    "load_scenario",
    "with_traffic",
    "TechnologyProfile",
    "taxonomy_report",
]
