"""Signal control synthesis for traffic networks via monotone finite-state abstraction."""
from .abstraction import TransitionSystem, augment, build_transition_system
from .network import (
    DisturbanceBox,
    Intersection,
    Link,
    NetworkError,
    SignalInput,
    TrafficNetwork,
    enumerate_signals,
    load_network,
    outflow,
    step,
    validate_network,
)
from .partition import (
    GeneralPartition,
    GriddedPartition,
    PartitionError,
    box_intersects,
    build_gridded,
    coarsest_grid_refinement,
    successors_generic,
    successors_gridded,
)
from .reach import Box, SignatureMatrix, corner_points, over_post, traffic_signature

__all__ = [
    "Box", "DisturbanceBox", "GeneralPartition", "GriddedPartition", "Intersection", "Link",
    "NetworkError", "PartitionError", "SignalInput", "SignatureMatrix", "TrafficNetwork",
    "TransitionSystem", "augment", "box_intersects", "build_gridded", "build_transition_system",
    "coarsest_grid_refinement", "corner_points", "enumerate_signals", "load_network", "outflow",
    "over_post", "step", "successors_generic", "successors_gridded", "traffic_signature",
    "validate_network",
]
