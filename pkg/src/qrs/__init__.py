"""QoS failure recovery for reserved multimedia paths, with a simulator to compare it against plain reservation."""

from .core import FlowSpec, Kind, Link, Path, Priority, Station, Topology
from .metrics import MetricsReport, Trace, finalize
from .netsim import Simulator, run, run_with_trace
from .scenario import Scenario, ScenarioInvalid, bundled, load_scenario, parse_scenario

__all__ = [
    "FlowSpec", "Kind", "Link", "MetricsReport", "Path", "Priority", "Scenario",
    "ScenarioInvalid", "Simulator", "Station", "Topology", "Trace", "bundled", "finalize",
    "load_scenario", "parse_scenario", "run", "run_with_trace",
]
