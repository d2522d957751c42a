"""End-to-end stages shared by the CLI and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional
import time

import numpy as np

from .elements import PartialElements, assemble_partial_elements
from .farfield import PatternCut, pattern_cut
from .geometry import Scenario, WireMesh, mesh_scenario, rx_direction
from .mna import MnaSolution, PortNetwork, assemble_mna, extract_zsys, solve_mna
from .optimize import OptParams, OptResult, optimize


@dataclass
class Model:
    scenario: Scenario
    mesh: WireMesh
    pe: PartialElements
    timings: Dict[str, float] = field(default_factory=dict)
    _net: Optional[PortNetwork] = None

    @classmethod
    def build(cls, scenario: Scenario, material="pec") -> "Model":
        t0 = time.perf_counter()
        mesh = mesh_scenario(scenario)
        t1 = time.perf_counter()
        pe = assemble_partial_elements(mesh, scenario.frequency, material)
        t2 = time.perf_counter()
        return cls(scenario, mesh, pe, {"mesh": t1 - t0, "elements": t2 - t1})

    @property
    def network(self) -> PortNetwork:
        if self._net is None:
            t0 = time.perf_counter()
            self._net = extract_zsys(self.pe, self.mesh)
            self.timings["zsys"] = time.perf_counter() - t0
        return self._net

    @property
    def num_ris(self) -> int:
        return len(self.mesh.port_branches.get("RIS", []))

    def port_loads(self, ris_loads=None, Zg=50.0, Zr=50.0) -> Dict[int, complex]:
        """Series loads per port: Zg at Tx, Zr at Rx, RIS loads (default short)."""
        roles = self.mesh.port_roles
        ris = iter(np.zeros(self.num_ris) if ris_loads is None else ris_loads)
        out = {}
        for p, role in enumerate(roles):
            out[p] = Zg if role == "Tx" else Zr if role == "Rx" else complex(next(ris))
        return out

    def simulate(self, ris_loads=None, Zg=50.0, Zr=50.0, emf=1.0) -> MnaSolution:
        """Tx driven by ``emf`` behind Zg, Rx terminated in Zr, RIS in its loads."""
        if ris_loads is not None and len(ris_loads) != self.num_ris:
            raise ValueError(f"expected {self.num_ris} RIS loads, got {len(ris_loads)}")
        t0 = time.perf_counter()
        sys = assemble_mna(self.pe, self.mesh, self.port_loads(ris_loads, Zg, Zr))
        Vs = np.zeros(sys.nb, dtype=complex)
        Vs[self.mesh.port_branches["Tx"][0]] = emf
        sol = solve_mna(sys, Vs)
        self.timings["simulate"] = time.perf_counter() - t0
        return sol

    def link_gain(self, sol: MnaSolution, Zr=50.0, emf=1.0) -> complex:
        """Receiver load voltage per unit emf from a solved circuit."""
        return complex(-Zr * sol.I[self.mesh.port_branches["Rx"][0]] / emf)

    def optimize(self, params: OptParams) -> OptResult:
        net = self.network
        t0 = time.perf_counter()
        res = optimize(net, params)
        self.timings["optimize"] = time.perf_counter() - t0
        return res

    def pattern(self, sol: MnaSolution, plane: str, fixed_angle=None, n_points=361) -> PatternCut:
        """Normalized RIS-scattered pattern; the fixed angle defaults to the Rx direction."""
        if fixed_angle is None:
            phi, theta = rx_direction(self.scenario)
            fixed_angle = theta if plane == "phi" else phi
        return pattern_cut(sol.I, self.mesh, self.pe.k, plane, fixed_angle, n_points)
