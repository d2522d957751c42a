"""Retarded thin-wire partial elements: Lp, P and the volume-cell impedances.

Every entry reduces to the double line integral

    I = ∫∫ exp(-jkR) / R  dl dl',   R = sqrt(|r - r'|^2 + a^2)

between two straight pieces (segment axes for Lp, node charge supports for
P). Time convention is exp(+jωt).

Quadrature strategy:

* far pairs (center distance >= 2 * (l1 + l2)): tensor Gauss-Legendre;
* near parallel pairs: the 1/R and R terms of the kernel expansion are
  integrated in closed form, the smooth remainder by Gauss-Legendre;
* near skew pairs: composite Gauss-Legendre.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import csv

import numpy as np
from scipy.constants import epsilon_0, mu_0, pi

from .geometry import WireMesh

DEFAULT_ORDER = 6
NEAR_FACTOR = 2.0
SKEW_SUBDIVISIONS = 8
_CHUNK = 8192


class KernelError(ValueError):
    pass


def wavenumber(freq: float) -> float:
    return 2 * pi * freq * np.sqrt(mu_0 * epsilon_0)


def _asinh_antiderivative(u, rho):
    # second antiderivative of 1/sqrt(u^2 + rho^2)
    return u * np.arcsinh(u / rho) - np.sqrt(u * u + rho * rho)


def _sqrt_antiderivative(u, rho):
    # second antiderivative of sqrt(u^2 + rho^2)
    r2 = u * u + rho * rho
    return r2 * np.sqrt(r2) / 6 + 0.5 * rho * rho * _asinh_antiderivative(u, rho)


def _four_corner(H, a1, a2, b1, b2, rho):
    return H(a2 - b1, rho) - H(a1 - b1, rho) - H(a2 - b2, rho) + H(a1 - b2, rho)


def _gauss_double(ca, ta, la, cb, tb, lb, a, k, order, kernel="full"):
    """Tensor Gauss-Legendre double integral for arrays of piece pairs."""
    x, w = np.polynomial.legendre.leggauss(order)
    pa = ca[:, None, :] + (0.5 * la)[:, None, None] * x[None, :, None] * ta[:, None, :]
    pb = cb[:, None, :] + (0.5 * lb)[:, None, None] * x[None, :, None] * tb[:, None, :]
    d = pa[:, :, None, :] - pb[:, None, :, :]
    R = np.sqrt(np.einsum("pijc,pijc->pij", d, d) + (a * a)[:, None, None])
    f = np.exp(-1j * k * R) / R
    if kernel == "remainder":
        f = f - 1.0 / R + 0.5 * k * k * R
    s = np.einsum("i,j,pij->p", w, w, f)
    return s * 0.25 * la * lb


def _near_parallel(ca, ta, la, cb, tb, lb, a, k, order):
    dc = cb - ca
    p = np.einsum("pc,pc->p", dc, ta)
    perp2 = np.maximum(np.einsum("pc,pc->p", dc, dc) - p * p, 0.0)
    rho = np.sqrt(perp2 + a * a)
    a1, a2 = -0.5 * la, 0.5 * la
    b1, b2 = p - 0.5 * lb, p + 0.5 * lb
    static = _four_corner(_asinh_antiderivative, a1, a2, b1, b2, rho)
    linear = _four_corner(_sqrt_antiderivative, a1, a2, b1, b2, rho)
    # integrate the remainder on a common axis so both pieces share orientation
    rem = _gauss_double(ca, ta, la, cb, ta, lb, a, k, order, kernel="remainder")
    return static - 0.5 * k * k * linear + rem


def _near_skew(ca, ta, la, cb, tb, lb, a, k, order):
    n = SKEW_SUBDIVISIONS
    out = np.zeros(len(ca), dtype=complex)
    offs = (np.arange(n) + 0.5) / n - 0.5
    for i in offs:
        for j in offs:
            out += _gauss_double(
                ca + (i * la)[:, None] * ta, ta, la / n,
                cb + (j * lb)[:, None] * tb, tb, lb / n,
                a, k, order,
            )
    return out


def line_pair_integrals(start_a, end_a, start_b, end_b, radius, k, order=DEFAULT_ORDER):
    """∫∫ exp(-jkR)/R dl dl' for each pair of straight pieces (vectorized)."""
    start_a, end_a = np.atleast_2d(start_a), np.atleast_2d(end_a)
    start_b, end_b = np.atleast_2d(start_b), np.atleast_2d(end_b)
    a = np.broadcast_to(np.asarray(radius, dtype=float), (len(start_a),)).copy()
    va, vb = end_a - start_a, end_b - start_b
    la, lb = np.linalg.norm(va, axis=1), np.linalg.norm(vb, axis=1)
    if np.any(la <= 0) or np.any(lb <= 0):
        raise KernelError("zero-length piece in partial element integral")
    ta, tb = va / la[:, None], vb / lb[:, None]
    ca, cb = 0.5 * (start_a + end_a), 0.5 * (start_b + end_b)
    dist = np.linalg.norm(cb - ca, axis=1)
    parallel = np.linalg.norm(np.cross(ta, tb), axis=1) < 1e-9
    near = dist < NEAR_FACTOR * (la + lb)
    if np.any(near & (a <= 0) & (dist < 0.5 * (la + lb))):
        raise KernelError("coincident filaments with zero radius: singular kernel")
    out = np.empty(len(ca), dtype=complex)
    for mask, fn in (
        (~near, _gauss_double),
        (near & parallel, _near_parallel),
        (near & ~parallel, _near_skew),
    ):
        if mask.any():
            out[mask] = fn(ca[mask], ta[mask], la[mask], cb[mask], tb[mask], lb[mask],
                           a[mask], k, order)
    return out


def partial_inductance(start_m, end_m, start_n, end_n, radius, k, order=DEFAULT_ORDER):
    """Lp between two straight current filaments, in henry."""
    tm = np.subtract(end_m, start_m, dtype=float)
    tn = np.subtract(end_n, start_n, dtype=float)
    cos = float(np.dot(tm, tn) / (np.linalg.norm(tm) * np.linalg.norm(tn)))
    if cos == 0.0:
        return 0j
    I = line_pair_integrals(start_m, end_m, start_n, end_n, radius, k, order)[0]
    return mu_0 / (4 * pi) * cos * I


def potential_coefficient(start_i, end_i, start_j, end_j, radius, k, order=DEFAULT_ORDER):
    """P between two line-charge supports, in 1/F."""
    li = np.linalg.norm(np.subtract(end_i, start_i, dtype=float))
    lj = np.linalg.norm(np.subtract(end_j, start_j, dtype=float))
    if li <= 0 or lj <= 0:
        raise KernelError("zero-length charge support")
    I = line_pair_integrals(start_i, end_i, start_j, end_j, radius, k, order)[0]
    return I / (4 * pi * epsilon_0 * li * lj)


def volume_impedance(length, radius, conductivity="pec", omega=None):
    """Series impedance of a wire cell: 0 for PEC, DC resistance otherwise."""
    if omega is not None and not omega > 0:
        raise ValueError("omega must be positive")
    if isinstance(conductivity, str):
        if conductivity.lower() != "pec":
            raise ValueError(f"unknown material {conductivity!r}")
        return np.zeros_like(np.asarray(length, dtype=float)) + 0j
    if not conductivity > 0:
        raise ValueError("conductivity must be positive (or 'pec')")
    return np.asarray(length, dtype=float) / (conductivity * pi * np.asarray(radius) ** 2) + 0j


@dataclass(frozen=True)
class PartialElements:
    Lp: np.ndarray
    P: np.ndarray
    Zvol: np.ndarray
    k: float
    s: complex

    @property
    def frequency(self) -> float:
        return float(self.s.imag / (2 * pi))


def _symmetric_fill(n, start, end, radius, k, order, weight, workers):
    iu, ju = np.triu_indices(n)
    vals = np.empty(len(iu), dtype=complex)

    def work(lo):
        hi = min(lo + _CHUNK, len(iu))
        i, j = iu[lo:hi], ju[lo:hi]
        w = weight(i, j)
        out = np.zeros(hi - lo, dtype=complex)
        nz = w != 0
        if nz.any():
            ra = 0.5 * (radius[i[nz]] + radius[j[nz]])
            out[nz] = w[nz] * line_pair_integrals(
                start[i[nz]], end[i[nz]], start[j[nz]], end[j[nz]], ra, k, order
            )
        vals[lo:hi] = out

    starts = range(0, len(iu), _CHUNK)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(work, starts))
    else:
        for lo in starts:
            work(lo)
    M = np.zeros((n, n), dtype=complex)
    M[iu, ju] = vals
    M[ju, iu] = vals
    return M


def assemble_partial_elements(
    mesh: WireMesh, freq: float, material="pec", order: int = DEFAULT_ORDER, workers: int = 0
) -> PartialElements:
    if not freq > 0:
        raise ValueError("frequency must be positive")
    k = wavenumber(freq)
    omega = 2 * pi * freq
    t = mesh.seg_dir

    def cos_clean(i, j):
        c = np.einsum("pc,pc->p", t[i], t[j])
        return np.where(np.abs(c) < 1e-14, 0.0, c)

    Lp = mu_0 / (4 * pi) * _symmetric_fill(
        mesh.num_segments, mesh.seg_start, mesh.seg_end, mesh.seg_radius, k, order,
        cos_clean, workers,
    )
    lo, hi = mesh.node_support
    sl = np.linalg.norm(hi - lo, axis=1)
    if np.any(sl <= 0):
        raise KernelError(f"node {int(np.argmin(sl))} has zero-length charge support")
    nrad = np.empty(mesh.num_nodes)
    nrad[mesh.seg_nodes[:, 0]] = mesh.seg_radius
    nrad[mesh.seg_nodes[:, 1]] = mesh.seg_radius
    P = _symmetric_fill(
        mesh.num_nodes, lo, hi, nrad, k, order,
        lambda i, j: 1.0 / (sl[i] * sl[j]), workers,
    ) / (4 * pi * epsilon_0)
    Zvol = volume_impedance(mesh.seg_length, mesh.seg_radius, material, omega)
    for arr in (Lp, P, Zvol):
        arr.setflags(write=False)
    return PartialElements(Lp=Lp, P=P, Zvol=Zvol, k=k, s=1j * omega)


def dump_csv(matrix: np.ndarray, path) -> None:
    """Debug dump as (row, col, re, im) lines."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "re", "im"])
        for (i, j), v in np.ndenumerate(matrix):
            w.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])
