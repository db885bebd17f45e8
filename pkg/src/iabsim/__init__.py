"""System-level simulator for integrated access and backhaul (IAB) cellular networks."""

from .engine import SimOutput, Simulation, run
from .errors import ConfigError, IabSimError, ParseError, RoutingError, TopologyError
from .model import (
    AntennaConfig,
    IabNode,
    Link,
    Packet,
    Position,
    SimConfig,
    Topology,
    Ue,
    validate_topology,
)

__version__ = "0.1.0"

__all__ = [
    "AntennaConfig",
    "ConfigError",
    "IabNode",
    "IabSimError",
    "Link",
    "Packet",
    "ParseError",
    "Position",
    "RoutingError",
    "SimConfig",
    "SimOutput",
    "Simulation",
    "Topology",
    "TopologyError",
    "Ue",
    "run",
    "validate_topology",
]
