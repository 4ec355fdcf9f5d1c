"""Invasion percolation on Z^2 and tranche-resampling experiments for annulus crossing counts."""

__version__ = "0.1.0"

from .errors import DomainError
from .lattice import AnnulusSpec, EdgeId, Orientation, Site, box_sites, dual_edge, graph_boundary, region_edges
from .weights import (
    Configuration,
    WeightField,
    load_field,
    dump_field,
    resample_region,
    sample_box,
    sample_weights,
    threshold_config,
)
from .invasion import InvasionResult, StopReason, StopRule, invade, invaded_weight_tail, invasion_configuration
from .crossings import (
    CrossingCount,
    DefectCircuit,
    brute_force_crossings,
    circuit_through_edge,
    count_disjoint_crossings,
    min_defect_circuit,
)
