"""Single-qubit matrices and small tensor utilities.

Conventions used everywhere in the package: |0> is the Z = +1 ground state,
site 0 is the leftmost (most significant) tensor factor, and the lowering
operator maps |1> to |0>.
"""

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SM = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # lowering, |1> -> |0>
SP = SM.conj().T

PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_all(mats):
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_string(num_sites: int, assignment: dict) -> np.ndarray:
    """Dense operator placing single-site Paulis at the given sites.

    assignment maps site index to one of "I", "X", "Y", "Z" (or a 2x2 array).
    Unlisted sites get the identity.
    """
    mats = []
    for i in range(num_sites):
        a = assignment.get(i, "I")
        mats.append(PAULI[a] if isinstance(a, str) else np.asarray(a, dtype=complex))
    return kron_all(mats)


def operator_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def operator_support(matrix: np.ndarray, num_sites: int, tol: float = 1e-12):
    """Sites on which the operator acts nontrivially.

    Site k is trivial when the operator factors as identity on k times a
    remainder. Returns a sorted tuple, possibly empty (multiples of identity).
    """
    d = 1 << num_sites
    if matrix.shape != (d, d):
        raise ValueError("matrix shape does not match num_sites")
    t = matrix.reshape((2,) * num_sites + (2,) * num_sites)
    scale = max(np.max(np.abs(matrix)), 1.0)
    support = []
    for k in range(num_sites):
        blocks = np.moveaxis(t, (k, num_sites + k), (0, 1))
        off = max(np.max(np.abs(blocks[0, 1])), np.max(np.abs(blocks[1, 0])))
        diag = np.max(np.abs(blocks[0, 0] - blocks[1, 1]))
        if off > tol * scale or diag > tol * scale:
            support.append(k)
    return tuple(support)


def haar_product_state(num_sites: int, rng: np.random.Generator) -> np.ndarray:
    """Density matrix of a random product of single-qubit pure states."""
    rho = np.array([[1.0 + 0.0j]])
    for _ in range(num_sites):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        rho = np.kron(rho, np.outer(v, v.conj()))
    return rho


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2.0
