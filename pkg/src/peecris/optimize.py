"""Per-load RIS optimization by cyclic coordinate ascent.

With one Tx, one Rx and N RIS ports, the RIS ports are eliminated from the
system impedance matrix through ``Minv = (Z_SS + diag(loads))^-1``. Changing
a single load is a rank-1 change of ``Z_SS + diag(loads)``, so the end-to-end
channel is a linear-fractional function of that load:

    h(x) = (alpha + beta x) / (gamma + delta x),   z = jx

and its modulus has a closed-form maximizer.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .mna import NumericalError, PortNetwork, direct_link_gain

SM_TOL = 1e-14


@dataclass
class OptParams:
    constraint: str = "reactive"
    max_sweeps: int = 20
    tol: float = 1e-6
    Zg: complex = 50.0
    Zr: complex = 50.0
    noise_power_ratio: float = 1.0
    max_reactance: float = 1e5
    # restrict every load to these reactances (ohm) instead of the continuum
    reactance_grid: Optional[Sequence[float]] = None
    init: str = "short"
    seed: int = 0

    def __post_init__(self):
        if self.constraint not in ("reactive", "passive"):
            raise ValueError("constraint must be 'reactive' or 'passive'")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.init not in ("short", "open", "random"):
            raise ValueError("init must be 'short', 'open' or 'random'")


@dataclass
class OptState:
    Z_TT: complex
    Z_TR: complex
    Z_RT: complex
    Z_RR: complex
    Z_TS: np.ndarray
    Z_RS: np.ndarray
    Z_ST: np.ndarray
    Z_SR: np.ndarray
    Z_SS: np.ndarray
    loads: np.ndarray
    Minv: np.ndarray
    Zg: complex = 50.0
    Zr: complex = 50.0
    # 2x2 (Tx, Rx) impedance with the RIS eliminated, without Zg/Zr
    Zeff: np.ndarray = field(default=None)
    h: complex = 0j

    @property
    def N(self) -> int:
        return len(self.loads)

    @property
    def objective(self) -> float:
        return abs(self.h) ** 2


def partition(net: PortNetwork, loads=None, Zg=50.0, Zr=50.0) -> OptState:
    t, r, s = net.indices("Tx"), net.indices("Rx"), net.indices("RIS")
    for name, idx in (("Tx", t), ("Rx", r)):
        if len(idx) != 1:
            raise ValueError(f"network needs exactly one {name} port, found {len(idx)}")
    if not s:
        raise ValueError("network has no RIS ports")
    Z = net.Z
    t, r = t[0], r[0]
    loads = np.zeros(len(s), dtype=complex) if loads is None else np.asarray(loads, dtype=complex)
    state = OptState(
        Z_TT=Z[t, t], Z_TR=Z[t, r], Z_RT=Z[r, t], Z_RR=Z[r, r],
        Z_TS=Z[t, s].copy(), Z_RS=Z[r, s].copy(), Z_ST=Z[s, t].copy(), Z_SR=Z[s, r].copy(),
        Z_SS=Z[np.ix_(s, s)].copy(), loads=loads.copy(), Minv=None, Zg=Zg, Zr=Zr,
    )
    return refactor(state)


def fresh_inverse(state: OptState) -> np.ndarray:
    M = state.Z_SS + np.diag(state.loads)
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Z_SS + Z_L is singular; perturb the RIS loads") from exc
    if not np.all(np.isfinite(Minv)):
        raise NumericalError("Z_SS + Z_L is singular; perturb the RIS loads")
    return Minv


def _eliminate(state: OptState, Minv: np.ndarray) -> np.ndarray:
    Z2 = np.array([[state.Z_TT, state.Z_TR], [state.Z_RT, state.Z_RR]], dtype=complex)
    left = np.vstack([state.Z_TS, state.Z_RS])
    right = np.column_stack([state.Z_ST, state.Z_SR])
    return Z2 - left @ Minv @ right


def refactor(state: OptState) -> OptState:
    """Rebuild Minv, Zeff and h from scratch for the current loads."""
    Minv = fresh_inverse(state)
    Zeff = _eliminate(state, Minv)
    return replace(state, Minv=Minv, Zeff=Zeff, h=direct_link_gain(Zeff, state.Zg, state.Zr))


def effective_channel(state: OptState, Zg=None, Zr=None) -> complex:
    """End-to-end gain with the RIS ports eliminated through the cached Minv."""
    Zg = state.Zg if Zg is None else Zg
    Zr = state.Zr if Zr is None else Zr
    return direct_link_gain(_eliminate(state, state.Minv), Zg, Zr)


def channel_from_scratch(net: PortNetwork, loads, Zg=50.0, Zr=50.0) -> complex:
    """Gain for given RIS loads with a fresh inversion; no cached state."""
    return refactor(partition(net, loads, Zg, Zr)).h


def _couplings(state: OptState, n: int):
    u = state.Minv[:, n]
    v = state.Minv[n, :]
    a = np.array([state.Z_TS @ u, state.Z_RS @ u])
    b = np.array([v @ state.Z_ST, v @ state.Z_SR])
    return u, v, a, b


def rank1_retune(state: OptState, n: int, z_new: complex) -> OptState:
    """Change load ``n`` to ``z_new`` with a Sherman-Morrison update."""
    delta = z_new - state.loads[n]
    if delta == 0:
        return state
    u, v, a, b = _couplings(state, n)
    den = 1 + delta * u[n]
    if abs(den) < SM_TOL:
        raise NumericalError(f"rank-1 denominator {abs(den):.1e} too small; refactor needed")
    t = delta / den
    Minv = state.Minv - t * np.outer(u, v)
    Zeff = state.Zeff + t * np.outer(a, b)
    loads = state.loads.copy()
    loads[n] = z_new
    return replace(state, Minv=Minv, Zeff=Zeff, loads=loads,
                   h=direct_link_gain(Zeff, state.Zg, state.Zr))


def load_response(state: OptState, n: int):
    """Coefficients (alpha, beta, gamma, delta) of h(x) for load n set to jx."""
    u, v, a, b = _couplings(state, n)
    Q = state.Zeff + np.diag([state.Zg, state.Zr])
    Qinv = np.linalg.inv(Q)
    qa = Qinv @ a
    bq = b @ Qinv
    g = qa[1] * bq[0]
    K = u[n] + b @ qa
    z0 = state.loads[n]
    h0 = state.h
    c0 = 1 - K * z0
    return (h0 * c0 - state.Zr * g * z0, 1j * (h0 * K + state.Zr * g), c0, 1j * K)


def _lf_value(coef, x):
    al, be, ga, de = coef
    x = np.asarray(x, dtype=float)
    return np.abs(al + be * x) ** 2 / np.abs(ga + de * x) ** 2


def _stationary_points(coef) -> np.ndarray:
    al, be, ga, de = coef
    A2, A1, A0 = abs(be) ** 2, 2 * (al * np.conj(be)).real, abs(al) ** 2
    B2, B1, B0 = abs(de) ** 2, 2 * (ga * np.conj(de)).real, abs(ga) ** 2
    c2 = A2 * B1 - A1 * B2
    c1 = 2 * (A2 * B0 - A0 * B2)
    c0 = A1 * B0 - A0 * B1
    scale = max(abs(c2), abs(c1), abs(c0))
    if scale == 0:
        return np.zeros(0)
    c2, c1, c0 = c2 / scale, c1 / scale, c0 / scale
    if abs(c2) < 1e-14:
        return np.array([-c0 / c1]) if abs(c1) > 1e-14 else np.zeros(0)
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return np.zeros(0)
    sq = np.sqrt(disc)
    # numerically stable quadratic roots
    q = -0.5 * (c1 + np.copysign(sq, c1))
    roots = [q / c2]
    if q != 0:
        roots.append(c0 / q)
    return np.array(roots)


def best_reactance(coef, max_reactance=1e5, grid=None) -> float:
    """Reactance maximizing |h|^2; ties resolve to the earliest candidate, x=0 first."""
    if grid is not None:
        cands = np.asarray(grid, dtype=float)
    else:
        roots = _stationary_points(coef)
        roots = roots[np.isfinite(roots) & (np.abs(roots) <= max_reactance)]
        cands = np.concatenate([[0.0], roots, [-max_reactance, max_reactance]])
    vals = _lf_value(coef, cands)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    if not np.any(np.isfinite(vals)):
        raise NumericalError("every candidate load is singular")
    best = 0
    for i in range(1, len(cands)):
        if vals[i] > vals[best] * (1 + 1e-12):
            best = i
    return float(cands[best])


def best_load(state: OptState, n: int, constraint="reactive", max_reactance=1e5, grid=None):
    """Optimal load for RIS port n with every other load held fixed.

    For passive loads (Re z >= 0) the map z -> h sends the right half-plane
    onto a disk whose boundary is the image of the imaginary axis, so the
    modulus peaks on a pure reactance and the reactive solution is returned.
    """
    coef = load_response(state, n)
    if constraint == "passive":
        _, _, ga, de = coef
        # pole of h in the z = jx plane
        if de != 0 and (1j * (-ga / de)).real > 0:
            raise NumericalError("channel pole lies in the passive load region")
    elif constraint != "reactive":
        raise ValueError(f"unknown constraint {constraint!r}")
    return 1j * best_reactance(coef, max_reactance, grid)


def achievable_rate(h: complex, noise_power_ratio: float) -> float:
    if noise_power_ratio < 0:
        raise ValueError("noise_power_ratio must be >= 0")
    return float(np.log2(1 + abs(h) ** 2 * noise_power_ratio))


@dataclass
class OptResult:
    loads: np.ndarray
    h: complex
    rate: float
    objective_before: float
    trace: List[dict]
    sweeps: int
    init: str
    max_drift: float

    @property
    def objective(self) -> float:
        return abs(self.h) ** 2


def initial_loads(N: int, params: OptParams) -> np.ndarray:
    if params.init == "short":
        return np.zeros(N, dtype=complex)
    if params.init == "open":
        return np.full(N, 1j * params.max_reactance)
    rng = np.random.default_rng(params.seed)
    return 1j * rng.uniform(-500, 500, N)


def optimize(net: PortNetwork, params: OptParams | None = None, loads0=None) -> OptResult:
    params = params or OptParams()
    state = partition(net, None, params.Zg, params.Zr)
    N = state.N
    loads = initial_loads(N, params) if loads0 is None else np.asarray(loads0, dtype=complex)
    state = refactor(replace(state, loads=loads.copy()))
    before = state.objective
    best = before
    trace = []
    step = 0
    max_drift = 0.0
    sweeps = 0
    for sweep in range(params.max_sweeps):
        sweeps = sweep + 1
        start = best
        for n in range(N):
            z = best_load(state, n, params.constraint, params.max_reactance, params.reactance_grid)
            cand = rank1_retune(state, n, z)
            # accept strict improvements only; otherwise the configuration and its
            # recorded objective stay as they are
            if cand.objective > best:
                state = cand
                best = cand.objective
            trace.append({"step": step, "sweep": sweep, "ris_index": n, "objective": best})
            step += 1
        fresh = refactor(state)
        drift = np.linalg.norm(fresh.Minv - state.Minv) / np.linalg.norm(fresh.Minv)
        max_drift = max(max_drift, float(drift))
        state = fresh
        if best - start <= params.tol * max(start, np.finfo(float).tiny):
            break
    return OptResult(
        loads=state.loads.copy(),
        h=state.h,
        rate=achievable_rate(state.h, params.noise_power_ratio),
        objective_before=before,
        trace=trace,
        sweeps=sweeps,
        init=params.init,
        max_drift=max_drift,
    )
