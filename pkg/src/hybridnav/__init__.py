"""Hybrid feedback navigation of a spherical robot among convex obstacles in 3D."""
from .controller import ControllerParams, HybridState, choose_axis, control, in_flow_set, in_jump_set, jump_update
from .geometry import ConvexPolytope, HalfspaceBox, Segment, Sphere, distance, project, segment_distance
from .scenarios import Scenario, corpus_path, load
from .sensor import SensorConfig, scan
from .simulator import AuditReport, HybridTrajectory, SimConfig, audit, run
from .world import World, nearest_obstacle, validate

__all__ = [
    "AuditReport", "ControllerParams", "ConvexPolytope", "HalfspaceBox", "HybridState", "HybridTrajectory",
    "Scenario", "Segment", "SensorConfig", "SimConfig", "Sphere", "World", "audit", "choose_axis", "control",
    "corpus_path", "distance", "in_flow_set", "in_jump_set", "jump_update", "load", "nearest_obstacle",
    "project", "run", "scan", "segment_distance", "validate",
]
__version__ = "0.1.0"
