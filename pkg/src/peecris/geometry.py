"""Thin-wire dipole scenarios and their PEEC meshes.

A dipole of length L is cut into ``n`` equal segments (the current-carrying
volume cells). The ``n + 1`` nodes sit at segment junctions and wire ends and
carry charge on the half-segments adjacent to them. The center segment of
every dipole is its port branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.constants import speed_of_light

ROLES = ("Tx", "Rx", "RIS")

Vec3 = Tuple[float, float, float]


class GeometryError(ValueError):
    """Invalid dipole, scenario or mesh structure."""


def _vec3(v, name: str) -> Vec3:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} must be a finite 3-vector, got {v!r}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class Dipole:
    center: Vec3
    axis: Vec3
    length: float
    role: str
    port_index: int

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "axis", _vec3(self.axis, "axis"))
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-12:
            raise GeometryError(f"axis must be a unit vector, got {self.axis!r}")
        if not self.length > 0:
            raise GeometryError(f"dipole length must be positive, got {self.length!r}")
        if self.role not in ROLES:
            raise GeometryError(f"role must be one of {ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class Scenario:
    frequency: float
    wire_radius: float
    segments_per_dipole: int
    dipoles: Tuple[Dipole, ...]

    def __post_init__(self):
        object.__setattr__(self, "dipoles", tuple(self.dipoles))
        if not self.frequency > 0:
            raise GeometryError("frequency must be positive")
        n = self.segments_per_dipole
        if n < 3 or n % 2 == 0:
            raise GeometryError("segments_per_dipole must be odd and >= 3")
        if not self.dipoles:
            raise GeometryError("scenario has no dipoles")
        ids = [d.port_index for d in self.dipoles]
        if len(set(ids)) != len(ids):
            raise GeometryError("port_index values must be unique")
        shortest = min(d.length for d in self.dipoles)
        if not 0 < self.wire_radius < shortest / (2 * n):
            raise GeometryError(
                "wire_radius must be positive and below "
                f"shortest length / (2 * segments_per_dipole) = {shortest / (2 * n):.3e} m"
            )

    @property
    def wavelength(self) -> float:
        return speed_of_light / self.frequency

    def by_role(self, role: str) -> List[Dipole]:
        return [d for d in self.dipoles if d.role == role]

    def port_order(self) -> List[int]:
        """Dipole indices in port order: Tx first, then Rx, then RIS."""
        return [i for r in ROLES for i, d in enumerate(self.dipoles) if d.role == r]

    def ris_center(self) -> np.ndarray:
        ris = self.by_role("RIS")
        if not ris:
            raise GeometryError("scenario has no RIS dipoles")
        return np.mean([d.center for d in ris], axis=0)


@dataclass
class WireMesh:
    """Segments, nodes and connectivity of a set of straight wires.

    ``seg_nodes[m] = (i, j)`` means branch ``m`` leaves node ``i`` and enters
    node ``j``. Node ``i`` carries charge on the straight piece
    ``node_support[i]`` made of its adjacent half-segments.
    """

    seg_start: np.ndarray
    seg_end: np.ndarray
    seg_radius: np.ndarray
    seg_dipole: np.ndarray
    seg_nodes: np.ndarray
    node_pos: np.ndarray
    node_half_lengths: np.ndarray
    node_dipole: np.ndarray
    port_branches: Dict[str, List[int]] = field(default_factory=dict)
    # (role, dipole index, branch) in port order
    ports: List[Tuple[str, int, int]] = field(default_factory=list)
    incidence: np.ndarray | None = None

    @property
    def num_segments(self) -> int:
        return len(self.seg_start)

    @property
    def num_nodes(self) -> int:
        return len(self.node_pos)

    @property
    def seg_length(self) -> np.ndarray:
        return np.linalg.norm(self.seg_end - self.seg_start, axis=1)

    @property
    def seg_dir(self) -> np.ndarray:
        d = self.seg_end - self.seg_start
        return d / np.linalg.norm(d, axis=1)[:, None]

    @property
    def seg_mid(self) -> np.ndarray:
        return 0.5 * (self.seg_start + self.seg_end)

    @property
    def node_support(self) -> Tuple[np.ndarray, np.ndarray]:
        """Start and end points of each node's charge support."""
        # all supports lie along the owning dipole's axis
        seg_of_node = np.zeros(self.num_nodes, dtype=int)
        seg_of_node[self.seg_nodes[:, 0]] = np.arange(self.num_segments)
        seg_of_node[self.seg_nodes[:, 1]] = np.arange(self.num_segments)
        t = self.seg_dir[seg_of_node]
        lo = self.node_pos - self.node_half_lengths[:, :1] * t
        hi = self.node_pos + self.node_half_lengths[:, 1:] * t
        return lo, hi

    @property
    def port_branch_list(self) -> np.ndarray:
        return np.array([b for _, _, b in self.ports], dtype=int)

    @property
    def port_roles(self) -> List[str]:
        return [r for r, _, _ in self.ports]


def mesh_dipole(dipole: Dipole, n_seg: int, radius: float) -> WireMesh:
    """Mesh one dipole into ``n_seg`` equal collinear segments."""
    if n_seg < 3 or n_seg % 2 == 0:
        raise GeometryError("segments_per_dipole must be odd")
    if not dipole.length > 0:
        raise GeometryError("dipole length must be positive")
    if not radius > 0:
        raise GeometryError("wire radius must be positive")
    axis = np.asarray(dipole.axis)
    c = np.asarray(dipole.center)
    h = dipole.length / n_seg
    offsets = (np.arange(n_seg + 1) - n_seg / 2) * h
    nodes = c + offsets[:, None] * axis
    half = np.full((n_seg + 1, 2), 0.5 * h)
    half[0, 0] = 0.0
    half[-1, 1] = 0.0
    center = n_seg // 2
    return WireMesh(
        seg_start=nodes[:-1].copy(),
        seg_end=nodes[1:].copy(),
        seg_radius=np.full(n_seg, float(radius)),
        seg_dipole=np.zeros(n_seg, dtype=int),
        seg_nodes=np.column_stack([np.arange(n_seg), np.arange(1, n_seg + 1)]),
        node_pos=nodes,
        node_half_lengths=half,
        node_dipole=np.zeros(n_seg + 1, dtype=int),
        port_branches={dipole.role: [center]},
        ports=[(dipole.role, 0, center)],
    )


def build_incidence(mesh: WireMesh) -> np.ndarray:
    """Node-branch incidence matrix: +1 where a branch leaves, -1 where it enters."""
    nn, nb = mesh.num_nodes, mesh.num_segments
    sn = np.asarray(mesh.seg_nodes)
    if sn.shape != (nb, 2):
        raise GeometryError("seg_nodes must have one (from, to) pair per segment")
    bad = np.flatnonzero((sn < 0).any(axis=1) | (sn >= nn).any(axis=1))
    if bad.size:
        raise GeometryError(f"segment {bad[0]} references an unknown node")
    if np.any(sn[:, 0] == sn[:, 1]):
        raise GeometryError("segment connects a node to itself")
    A = np.zeros((nn, nb), dtype=np.int8)
    cols = np.arange(nb)
    A[sn[:, 0], cols] = 1
    A[sn[:, 1], cols] = -1
    return A


def mesh_scenario(scenario: Scenario) -> WireMesh:
    """Mesh every dipole and stitch the pieces into one mesh with ports."""
    n = scenario.segments_per_dipole
    parts = [mesh_dipole(d, n, scenario.wire_radius) for d in scenario.dipoles]
    seg_off = np.arange(len(parts)) * n
    node_off = np.arange(len(parts)) * (n + 1)
    mesh = WireMesh(
        seg_start=np.concatenate([p.seg_start for p in parts]),
        seg_end=np.concatenate([p.seg_end for p in parts]),
        seg_radius=np.concatenate([p.seg_radius for p in parts]),
        seg_dipole=np.repeat(np.arange(len(parts)), n),
        seg_nodes=np.concatenate([p.seg_nodes + node_off[i] for i, p in enumerate(parts)]),
        node_pos=np.concatenate([p.node_pos for p in parts]),
        node_half_lengths=np.concatenate([p.node_half_lengths for p in parts]),
        node_dipole=np.repeat(np.arange(len(parts)), n + 1),
    )
    branches = {r: [] for r in ROLES}
    for i in scenario.port_order():
        role = scenario.dipoles[i].role
        b = int(seg_off[i] + n // 2)
        branches[role].append(b)
        mesh.ports.append((role, i, b))
    mesh.port_branches = {r: b for r, b in branches.items() if b}
    mesh.incidence = build_incidence(mesh)
    return mesh


def ris_array(
    center: Sequence[float],
    rows: int,
    cols: int,
    dy: float,
    dz: float,
    element_length: float,
    first_port: int = 0,
) -> List[Dipole]:
    """z-directed RIS dipoles on a yz-plane grid, row-major (z-row outer, y-column inner)."""
    if rows < 1 or cols < 1:
        raise GeometryError("ris_array needs at least one row and one column")
    c = np.asarray(center, dtype=float)
    out = []
    for r in range(rows):
        z = c[2] + (r - (rows - 1) / 2) * dz
        for q in range(cols):
            y = c[1] + (q - (cols - 1) / 2) * dy
            out.append(
                Dipole((c[0], y, z), (0.0, 0.0, 1.0), element_length, "RIS", first_port + len(out))
            )
    return out


def default_wire_radius(frequency: float) -> float:
    return speed_of_light / frequency / 200


REF_FREQUENCY = 28e9
REF_TX = (4.0, 0.0, 3.0)
REF_RX = (2.0, 3.46, 1.0)
REF_RIS = (0.0, 0.0, 2.0)


def reference_scenario(segments_per_dipole: int = 11, wire_radius: float | None = None) -> Scenario:
    """Tx, Rx and a 2 x 32 RIS of half-wave z-dipoles at 28 GHz."""
    lam = speed_of_light / REF_FREQUENCY
    half = 0.5 * lam
    z = (0.0, 0.0, 1.0)
    dipoles = [
        Dipole(REF_TX, z, half, "Tx", 0),
        Dipole(REF_RX, z, half, "Rx", 1),
    ]
    dipoles += ris_array(REF_RIS, 2, 32, 0.125 * lam, 0.75 * lam, half, first_port=2)
    if wire_radius is None:
        wire_radius = default_wire_radius(REF_FREQUENCY)
    return Scenario(REF_FREQUENCY, wire_radius, segments_per_dipole, tuple(dipoles))


def direction_angles(vec) -> Tuple[float, float]:
    """(azimuth, elevation) in degrees; theta from +z, phi from +x toward +y."""
    v = np.asarray(vec, dtype=float)
    r = np.linalg.norm(v)
    theta = np.degrees(np.arccos(v[2] / r))
    phi = np.degrees(np.arctan2(v[1], v[0])) % 360.0
    return float(phi), float(theta)


def rx_direction(scenario: Scenario) -> Tuple[float, float]:
    """(phi, theta) in degrees of the Rx dipole seen from the RIS center."""
    rx = scenario.by_role("Rx")
    if len(rx) != 1:
        raise GeometryError("scenario must have exactly one Rx dipole")
    return direction_angles(np.asarray(rx[0].center) - scenario.ris_center())
