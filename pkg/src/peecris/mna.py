"""Frequency-domain MNA system of the PEEC circuit and port-network extraction.

Unknowns are the branch currents I (one per segment) and the node potentials
Phi. The system matrix has the block layout::

    [ Zvol + sLp   -A^T          ] [ I   ]   [ Vs ]
    [ A             sP^-1 + Yle  ] [ Phi ] = [ Is ]

Ports are delta gaps on the center segment of each dipole: a source emf goes
into Vs at the port branch and a load impedance is added in series to the
branch diagonal of the (1,1) block.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional
import csv

import numpy as np
import scipy.linalg as sla

from .elements import PartialElements
from .geometry import WireMesh, build_incidence

RESIDUAL_TOL = 1e-10
RECIPROCITY_TOL = 1e-8


class NumericalError(RuntimeError):
    """Singular or inaccurate linear solve."""


@dataclass
class MnaSystem:
    matrix: np.ndarray
    nb: int
    nn: int

    @cached_property
    def lu(self):
        with np.errstate(all="raise"):
            try:
                return sla.lu_factor(self.matrix, check_finite=True)
            except (sla.LinAlgError, FloatingPointError, ValueError) as exc:
                raise NumericalError(
                    f"MNA factorization failed ({exc}); cond ~ {_cond(self.matrix):.3e}"
                ) from exc

    def block(self, r: int, c: int) -> np.ndarray:
        rows = slice(0, self.nb) if r == 0 else slice(self.nb, None)
        cols = slice(0, self.nb) if c == 0 else slice(self.nb, None)
        return self.matrix[rows, cols]


@dataclass
class MnaSolution:
    I: np.ndarray
    Phi: np.ndarray
    residual: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class PortNetwork:
    Z: np.ndarray
    roles: List[str]
    # ||Z - Z^T||_inf / ||Z||_inf before symmetrization
    asymmetry: float = 0.0

    @property
    def num_ports(self) -> int:
        return len(self.roles)

    def indices(self, role: str) -> List[int]:
        return [i for i, r in enumerate(self.roles) if r == role]


def _cond(M):
    try:
        return float(np.linalg.cond(M))
    except np.linalg.LinAlgError:
        return float("inf")


def assemble_mna(
    pe: PartialElements,
    mesh: WireMesh,
    port_loads: Optional[Dict[int, complex]] = None,
    s: Optional[complex] = None,
    Yle: Optional[np.ndarray] = None,
) -> MnaSystem:
    """Place the PEEC blocks; ``port_loads`` maps port number -> series ohms."""
    nb, nn = mesh.num_segments, mesh.num_nodes
    if pe.Lp.shape != (nb, nb) or pe.P.shape != (nn, nn) or pe.Zvol.shape != (nb,):
        raise ValueError(
            f"partial elements {pe.Lp.shape}/{pe.P.shape} do not match mesh ({nb} branches, {nn} nodes)"
        )
    if s is None:
        s = pe.s
    elif not np.isclose(s, pe.s, rtol=1e-12, atol=0):
        raise ValueError("s does not match the frequency of the partial elements")
    A = mesh.incidence if mesh.incidence is not None else build_incidence(mesh)
    z = pe.Zvol.astype(complex)
    branches = mesh.port_branch_list
    for p, zl in (port_loads or {}).items():
        if not 0 <= p < len(branches):
            raise ValueError(f"port {p} does not exist")
        z[branches[p]] += zl
    lu = sla.lu_factor(pe.P)
    Pinv = sla.lu_solve(lu, np.eye(nn, dtype=complex))
    M = np.empty((nb + nn, nb + nn), dtype=complex)
    M[:nb, :nb] = s * pe.Lp
    M[:nb, :nb][np.diag_indices(nb)] += z
    M[:nb, nb:] = -A.T
    M[nb:, :nb] = A
    M[nb:, nb:] = s * Pinv
    if Yle is not None:
        if Yle.shape != (nn, nn):
            raise ValueError("Yle must be num_nodes x num_nodes")
        M[nb:, nb:] += Yle
    return MnaSystem(M, nb, nn)


def solve_mna(sys: MnaSystem, Vs, Is=None) -> MnaSolution:
    """Solve for branch currents and node potentials; columns of Vs are separate RHS."""
    Vs = np.asarray(Vs, dtype=complex)
    single = Vs.ndim == 1
    Vs2 = Vs[:, None] if single else Vs
    if Is is None:
        Is2 = np.zeros((sys.nn, Vs2.shape[1]), dtype=complex)
    else:
        Is2 = np.asarray(Is, dtype=complex)
        Is2 = Is2[:, None] if Is2.ndim == 1 else Is2
    rhs = np.vstack([Vs2, Is2])
    if rhs.shape[0] != sys.nb + sys.nn:
        raise ValueError("source vectors do not match system size")
    x = sla.lu_solve(sys.lu, rhs)
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite MNA solution; cond ~ {_cond(sys.matrix):.3e}")
    rn = np.linalg.norm(rhs, axis=0)
    res = np.linalg.norm(sys.matrix @ x - rhs, axis=0) / np.where(rn > 0, rn, 1.0)
    if np.any(res > RESIDUAL_TOL):
        raise NumericalError(
            f"MNA residual {res.max():.2e} exceeds {RESIDUAL_TOL:g}; cond ~ {_cond(sys.matrix):.3e}"
        )
    I, Phi = x[: sys.nb], x[sys.nb :]
    if single:
        I, Phi = I[:, 0], Phi[:, 0]
    return MnaSolution(I, Phi, res)


def port_admittance(pe: PartialElements, mesh: WireMesh):
    """Short-circuit Y matrix of all ports, plus the solve residuals."""
    branches = mesh.port_branch_list
    if len(set(mesh.seg_dipole[branches])) != len(branches):
        raise ValueError("every dipole must have exactly one port branch")
    sys = assemble_mna(pe, mesh)
    Vs = np.zeros((sys.nb, len(branches)), dtype=complex)
    Vs[branches, np.arange(len(branches))] = 1.0
    sol = solve_mna(sys, Vs)
    return sol.I[branches, :], sol.residual


def extract_zsys(pe: PartialElements, mesh: WireMesh) -> PortNetwork:
    Y, _ = port_admittance(pe, mesh)
    if _cond(Y) > 1e14:
        raise NumericalError("port admittance matrix is numerically singular")
    Z = np.linalg.inv(Y)
    asym = float(np.linalg.norm(Z - Z.T, np.inf) / np.linalg.norm(Z, np.inf))
    if asym > RECIPROCITY_TOL:
        raise NumericalError(f"Zsys reciprocity violated: {asym:.2e}")
    return PortNetwork(0.5 * (Z + Z.T), mesh.port_roles, asym)


def direct_link_gain(Z2, Zg: complex = 50.0, Zr: complex = 50.0) -> complex:
    """Receiver load voltage per unit source emf for a Tx/Rx 2-port.

    ``Z2`` is either a 2x2 matrix ordered (Tx, Rx) or a PortNetwork holding
    exactly one Tx and one Rx port.
    """
    if isinstance(Z2, PortNetwork):
        t, r = Z2.indices("Tx"), Z2.indices("Rx")
        if len(t) != 1 or len(r) != 1 or Z2.num_ports != 2:
            raise ValueError("direct_link_gain needs exactly one Tx and one Rx port")
        Z2 = Z2.Z[np.ix_(t + r, t + r)]
    Z2 = np.asarray(Z2)
    ztt, ztr, zrt, zrr = Z2[0, 0], Z2[0, 1], Z2[1, 0], Z2[1, 1]
    den = (ztt + Zg) * (zrr + Zr) - zrt * ztr
    if den == 0:
        raise NumericalError("zero denominator in link gain (resonance degeneracy)")
    return complex(Zr * zrt / den)


def write_zmatrix_csv(net: PortNetwork, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["port_i", "port_j", "re_ohm", "im_ohm"])
        for (i, j), v in np.ndenumerate(net.Z):
            w.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])


def read_zmatrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = max(int(r["port_i"]) for r in rows) + 1
    Z = np.zeros((n, n), dtype=complex)
    for r in rows:
        Z[int(r["port_i"]), int(r["port_j"])] = float(r["re_ohm"]) + 1j * float(r["im_ohm"])
    return Z
