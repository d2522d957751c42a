"""Thin-wire PEEC modelling and load optimization for RIS-aided wireless links."""
from .geometry import Dipole, Scenario, WireMesh, mesh_scenario, reference_scenario
from .elements import PartialElements, assemble_partial_elements
from .mna import PortNetwork, assemble_mna, direct_link_gain, extract_zsys, solve_mna
from .optimize import OptParams, OptResult, achievable_rate, optimize
from .farfield import PatternCut, far_field, pattern_cut
from .pipeline import Model

__all__ = [
    "Dipole", "Scenario", "WireMesh", "mesh_scenario", "reference_scenario",
    "PartialElements", "assemble_partial_elements",
    "PortNetwork", "assemble_mna", "direct_link_gain", "extract_zsys", "solve_mna",
    "OptParams", "OptResult", "achievable_rate", "optimize",
    "PatternCut", "far_field", "pattern_cut", "Model",
]
