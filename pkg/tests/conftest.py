import numpy as np
import pytest

from lrspin.model import LatticeSpec, build_davies_thermal, build_xy_damped
from lrspin.pauli import PAULI


def two_qubit_correlation_oracle(state: np.ndarray) -> float:
    """Exact T(X:Y) for a two-qubit state.

    Identity components of f and g drop out because both partial traces of
    Delta vanish, so the optimizers are traceless: f = n.sigma, g = m.sigma
    with unit Bloch vectors. The supremum of |n . C m| over unit vectors is
    the largest singular value of the 3x3 connected correlation matrix C.
    """
    paulis = [PAULI["X"], PAULI["Y"], PAULI["Z"]]
    rho = np.asarray(state)
    t = rho.reshape(2, 2, 2, 2)
    rho_x = np.einsum("xyay->xa", t)
    rho_y = np.einsum("xyxb->yb", t)
    c = np.zeros((3, 3))
    for a, pa in enumerate(paulis):
        ma = float(np.trace(pa @ rho_x).real)
        for b, pb in enumerate(paulis):
            mb = float(np.trace(pb @ rho_y).real)
            joint = float(np.trace(np.kron(pa, pb) @ rho).real)
            c[a, b] = joint - ma * mb
    return float(np.linalg.svd(c, compute_uv=False)[0])


@pytest.fixture
def qubit_pair_oracle():
    return two_qubit_correlation_oracle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def xy3():
    return build_xy_damped(LatticeSpec(3), alpha=3.0, coupling_scale=0.25,
                           damping_rate=0.2)


@pytest.fixture
def davies3():
    return build_davies_thermal(LatticeSpec(3), alpha=3.0, ising_scale=0.4,
                                beta_T=0.8, base_rate=0.1)


@pytest.fixture
def davies2():
    return build_davies_thermal(LatticeSpec(2), alpha=3.0, ising_scale=0.4,
                                beta_T=0.8, base_rate=0.2)
