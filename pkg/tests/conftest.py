import numpy as np
import pytest
from scipy.constants import speed_of_light

from peecris.elements import assemble_partial_elements
from peecris.geometry import Dipole, Scenario, mesh_scenario, reference_scenario
from peecris.mna import PortNetwork, extract_zsys
from peecris.optimize import OptParams
from peecris.pipeline import Model

F0 = 28e9
LAM = speed_of_light / F0

ACCEPTANCE_LINES = []


def single_dipole(n_seg=11, radius=None, freq=F0):
    lam = speed_of_light / freq
    radius = lam / 200 if radius is None else radius
    return Scenario(freq, radius, n_seg, (Dipole((0, 0, 0), (0, 0, 1), lam / 2, "Tx", 0),))


def random_reciprocal_network(rng, n_ports, scale=50.0):
    """Random symmetric Z with positive semidefinite real part (passive, reciprocal)."""
    B = rng.normal(size=(n_ports, n_ports))
    R = B @ B.T / n_ports * scale + np.eye(n_ports) * scale * 0.1
    X = rng.normal(size=(n_ports, n_ports)) * scale
    X = 0.5 * (X + X.T)
    return R + 1j * X


def toy_net(rng, N, scale=50.0):
    return PortNetwork(random_reciprocal_network(rng, N + 2, scale), ["Tx", "Rx"] + ["RIS"] * N)


def brute_force_gain(Z, loads, Zg=50.0, Zr=50.0):
    """Solve the full terminated (N+2)-port with the Tx driven by a 1 V emf.

    ``loads`` may be a batch of shape (K, N); the solves are then batched.
    """
    loads = np.atleast_2d(loads)
    n = Z.shape[0]
    terms = np.concatenate([np.tile([Zg, Zr], (len(loads), 1)), loads], axis=1)
    M = Z[None] + terms[:, :, None] * np.eye(n)[None]
    v = np.zeros((len(loads), n, 1), dtype=complex)
    v[:, 0] = 1.0
    h = -Zr * np.linalg.solve(M, v)[:, 1, 0]
    return h if len(h) > 1 else h[0]


@pytest.fixture(scope="session")
def ref_model():
    return Model.build(reference_scenario())


@pytest.fixture(scope="session")
def ref_optimized(ref_model):
    return ref_model.optimize(OptParams())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_dipole_network(rng, n_ris=3, n_seg=5):
    """Zsys of a randomly placed Tx, Rx and a loose line of RIS dipoles."""
    z = (0, 0, 1)
    dips = [
        Dipole((rng.uniform(2, 4), rng.uniform(-1, 1), rng.uniform(0, 2)), z, LAM / 2, "Tx", 0),
        Dipole((rng.uniform(2, 4), rng.uniform(1, 3), rng.uniform(0, 2)), z, LAM / 2, "Rx", 1),
    ]
    ys = np.sort(rng.uniform(-2, 2, n_ris)) * LAM
    for i, y in enumerate(ys):
        # at least 0.3 lambda between neighbours
        dips.append(Dipole((0, y + 0.3 * LAM * i, 1), z, LAM / 2, "RIS", 2 + i))
    mesh = mesh_scenario(Scenario(F0, LAM / 200, n_seg, tuple(dips)))
    return extract_zsys(assemble_partial_elements(mesh, F0), mesh)
