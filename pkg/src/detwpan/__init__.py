"""Discrete-event simulator for beacon-enabled low-power WPAN stars.

Two MAC flavours share one engine: the contention-based baseline and a
deterministic variant with coordinator-driven GTS polling, spread beacons and
beacon-piggybacked peer grants.
"""

from .engine import Engine, Trace, TraceRecord, format_record, parse_record, read_trace
from .frames import Frame, FrameKind, GtsDescriptor, SuperframeConfig, airtime, encode_beacon
from .medium import KERNEL, Medium, Position, RadioParams, audible, path_loss, received_power, resolve
from .mac_coordinator import (
    Coordinator,
    SaturationError,
    ScenarioDesignError,
    allocate_gts,
    evaluate_reuse,
    next_poll_targets,
    plan_beacon_slots,
)
from .mac_node import Node, QosNeed, select_coordinator
from .metrics import Metrics, metrics_finalize
from .scenario import Scenario, ScenarioError, emit_scenario, parse_scenario, validate_geometry
from .sim import build, run_scenario
from .verify import TraceVerifier, VerificationReport, verify

__version__ = "0.1.0"

__all__ = [
    "Coordinator", "Engine", "Frame", "FrameKind", "GtsDescriptor", "KERNEL", "Medium", "Metrics", "Node",
    "Position", "QosNeed", "RadioParams", "SaturationError", "Scenario", "ScenarioDesignError", "ScenarioError",
    "SuperframeConfig", "Trace", "TraceRecord", "TraceVerifier", "VerificationReport", "airtime",
    "allocate_gts", "audible", "build", "emit_scenario", "encode_beacon", "evaluate_reuse", "format_record",
    "metrics_finalize", "next_poll_targets", "parse_record", "parse_scenario", "path_loss", "plan_beacon_slots",
    "read_trace", "received_power", "resolve", "run_scenario", "select_coordinator", "validate_geometry",
    "verify",
]
