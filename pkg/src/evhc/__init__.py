"""EV hosting-capacity toolkit for radial LV feeders.

Simulates a day of EV charging on a radial low-voltage feeder in two
regimes — uncontrolled, and curtailed by voltage-derived dynamic operating
envelopes — then searches for the hosting capacity of each regime and the
quality-of-service cost of the control.
"""

__version__ = "0.1.0"

from .doe import DoeParams, EnvelopeBound, clamp_to_envelope, envelope_bound, floor_power
from .ev import (
    DEFAULT_SCENARIOS,
    ChargingTrajectory,
    EnergyScenario,
    EvSession,
    baseline_trajectory,
    generate_fleet,
)
from .feeder import (
    BaselineLoadProfile,
    Branch,
    FeederError,
    FeederModel,
    Household,
    Node,
    bundled_baseline_profiles,
    bundled_feeder,
    load_baseline_profiles,
    load_feeder,
    path_to_slack,
)
from .hc import (
    HcReport,
    HcSearchConfig,
    network_aware_hc,
    passive_hc,
    sensitivity_sweep,
    threshold_sweep,
)
from .incidents import Incident, IncidentLimits, detect
from .powerflow import InjectionSet, PowerFlowOptions, PowerFlowSolution, solve, solve_horizon
from .qos import QosReport, qos_aggregated, qos_individual
from .trace import SimulationTrace, TraceSummary, summarize

__all__ = [
    "__version__",
    "BaselineLoadProfile",
    "Branch",
    "ChargingTrajectory",
    "DEFAULT_SCENARIOS",
    "DoeParams",
    "EnergyScenario",
    "EnvelopeBound",
    "EvSession",
    "FeederError",
    "FeederModel",
    "HcReport",
    "HcSearchConfig",
    "Household",
    "Incident",
    "IncidentLimits",
    "InjectionSet",
    "Node",
    "PowerFlowOptions",
    "PowerFlowSolution",
    "QosReport",
    "SimulationTrace",
    "TraceSummary",
    "baseline_trajectory",
    "bundled_baseline_profiles",
    "bundled_feeder",
    "clamp_to_envelope",
    "detect",
    "envelope_bound",
    "floor_power",
    "generate_fleet",
    "load_baseline_profiles",
    "load_feeder",
    "network_aware_hc",
    "passive_hc",
    "path_to_slack",
    "qos_aggregated",
    "qos_individual",
    "sensitivity_sweep",
    "solve",
    "solve_horizon",
    "summarize",
    "threshold_sweep",
]
