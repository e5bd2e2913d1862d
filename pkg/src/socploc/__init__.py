"""Per-node SOCP localization under mixed LOS/NLOS ranging.

Pipeline: :mod:`network` (deployments) -> :mod:`measurement` (ranges) ->
:mod:`conic` (per-node cone program) -> :mod:`solver` (interior point) ->
:mod:`harness` (Monte Carlo experiments); :mod:`crlb` gives the bounds.
"""

from .conic import ConicProgram, Method, build_node_problem, extract_position, validate_assembly
from .crlb import CrlbGrid, LinkParams, crlb_at, crlb_surface, fim
from .measurement import Measurement, MeasurementSet, estimator_weights, measure, sample_los, sample_nlos
from .network import Edge, LinkKind, NetworkConfig, Topology, deploy_uniform, neighbor_anchors
from .oracle import oracle_localize
from .solver import ConicSolution, SolverSettings, Status, residuals, solve

__all__ = [
    "ConicProgram", "ConicSolution", "CrlbGrid", "Edge", "LinkKind", "LinkParams", "Measurement",
    "MeasurementSet", "Method", "NetworkConfig", "SolverSettings", "Status", "Topology",
    "build_node_problem", "crlb_at", "crlb_surface", "deploy_uniform", "estimator_weights",
    "extract_position", "fim", "measure", "neighbor_anchors", "oracle_localize", "residuals",
    "sample_los", "sample_nlos", "solve", "validate_assembly",
]
