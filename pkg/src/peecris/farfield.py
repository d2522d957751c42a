"""Far-field radiation of solved segment currents and normalized pattern cuts.

Each segment radiates as a point moment ``I_m * l_m`` at its midpoint. The
common factor ``-j w mu0 exp(-jkr) / (4 pi r)`` is dropped, so fields are
only meaningful after normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
import csv

import numpy as np

from .geometry import WireMesh


def unit_vector(phi_deg, theta_deg) -> np.ndarray:
    """Spherical direction(s): theta from +z, phi from +x toward +y."""
    ph, th = np.radians(phi_deg), np.radians(theta_deg)
    return np.stack(
        np.broadcast_arrays(np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)), axis=-1
    )


def ris_segments(mesh: WireMesh) -> np.ndarray:
    ris = {d for role, d, _ in mesh.ports if role == "RIS"}
    return np.isin(mesh.seg_dipole, sorted(ris))


def far_field(currents, mesh: WireMesh, direction, k: float, subset=None) -> np.ndarray:
    """Transverse far field for one or more unit directions (shape (..., 3))."""
    rhat = np.asarray(direction, dtype=float)
    if np.any(np.abs(np.linalg.norm(rhat, axis=-1) - 1) > 1e-9):
        raise ValueError("direction must be a unit vector")
    if subset is None:
        subset = ris_segments(mesh)
    subset = np.asarray(subset)
    I = np.asarray(currents)[subset]
    t = mesh.seg_dir[subset]
    moment = (I * mesh.seg_length[subset])[:, None] * t
    r = mesh.seg_mid[subset]
    flat = rhat.reshape(-1, 3)
    phase = np.exp(1j * k * flat @ r.T)
    # sum of moments weighted by the array phase, then remove the radial part
    J = phase @ moment
    E = J - np.sum(J * flat, axis=1)[:, None] * flat
    return E.reshape(rhat.shape[:-1] + (3,))


@dataclass
class PatternCut:
    plane: str
    fixed_angle: float
    angles: np.ndarray
    E: np.ndarray
    gain_db: np.ndarray
    normalization: float

    def peak_angles(self, tol_db: float = 1e-9) -> np.ndarray:
        """All sample angles within ``tol_db`` of the maximum."""
        return self.angles[self.gain_db >= -tol_db]

    @property
    def peak(self) -> float:
        return float(self.angles[int(np.argmax(self.gain_db))])


def cut_angles(plane: str, n_points: int) -> np.ndarray:
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if plane == "phi":
        # the 360 deg endpoint duplicates 0 deg and is dropped
        return np.linspace(0.0, 360.0, n_points)[:-1]
    if plane == "theta":
        return np.linspace(0.0, 180.0, n_points)
    raise ValueError(f"plane must be 'phi' or 'theta', got {plane!r}")


def pattern_cut(currents, mesh: WireMesh, k: float, plane: str, fixed_angle: float,
                n_points: int = 361, subset=None) -> PatternCut:
    """Normalized cut: phi sweep at fixed theta, or theta sweep at fixed phi."""
    angles = cut_angles(plane, n_points)
    if plane == "phi":
        dirs = unit_vector(angles, fixed_angle)
    else:
        dirs = unit_vector(fixed_angle, angles)
    E = far_field(currents, mesh, dirs, k, subset)
    p = np.sum(np.abs(E) ** 2, axis=1)
    peak = float(p.max())
    if peak == 0:
        raise ValueError("pattern is identically zero")
    with np.errstate(divide="ignore"):
        gain = 10 * np.log10(p / peak)
    return PatternCut(plane, float(fixed_angle), angles, E, gain, peak)


def write_pattern_csv(cut: PatternCut, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["angle_deg", "gain_db"])
        for a, g in zip(cut.angles, cut.gain_db):
            w.writerow([f"{a:.6g}", f"{g:.10g}"])
