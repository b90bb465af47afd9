"""Applying and materializing Lindblad generators on dense operators.

Forward direction (states):

    L(rho) = -i [H, rho] + sum_k ( L_k rho L_k^dag - (1/2) {L_k^dag L_k, rho} )

Adjoint direction (observables):

    L^dag(O) = +i [H, O] + sum_k ( L_k^dag O L_k - (1/2) {L_k^dag L_k, O} )

Application works term by term through local tensor contractions, so the cost
per term scales with 4^k * 2^(2N) for a k-site term instead of the full
superoperator dimension. Vectorization is column stacking: vec(A X B) =
(B^T kron A) vec(X).
"""

import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import pauli
from .errors import DimensionMismatch, EmptyRegion, SupportViolation, TooLargeForDense
from .model import HAMILTONIAN, JUMP, LindbladModel

MATERIALIZE_CAP = 6  # sites; the dense superoperator is 4^N by 4^N


@dataclass(frozen=True)
class DenseOperator:
    """Dense matrix on the full chain plus an optional support hint.

    The hint is advisory: it may overstate the support but must never
    understate it, and application routines use it only to skip terms that
    cannot couple to the operator.
    """

    matrix: np.ndarray
    num_sites: int
    support_hint: tuple = None

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=complex))
        d = 1 << self.num_sites
        if m.shape != (d, d):
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not match {self.num_sites} sites"
            )
        object.__setattr__(self, "matrix", m)
        if self.support_hint is not None:
            hint = tuple(sorted(set(int(i) for i in self.support_hint)))
            if any(i < 0 or i >= self.num_sites for i in hint):
                raise SupportViolation(f"hint {hint} outside the chain")
            object.__setattr__(self, "support_hint", hint)

    @property
    def dim(self):
        return 1 << self.num_sites

    def dagger(self):
        return replace(self, matrix=self.matrix.conj().T)

    def with_hint(self, hint):
        return replace(self, support_hint=tuple(hint) if hint is not None else None)


def identity_operator(num_sites: int) -> DenseOperator:
    return DenseOperator(np.eye(1 << num_sites, dtype=complex), num_sites, ())


def pauli_observable(num_sites: int, assignment: dict) -> DenseOperator:
    hint = tuple(i for i, p in sorted(assignment.items()) if p != "I")
    return DenseOperator(pauli.pauli_string(num_sites, assignment), num_sites, hint)


def embed(local: np.ndarray, support, num_sites: int) -> np.ndarray:
    """Dense full-chain matrix acting as `local` on the support sites."""
    support = tuple(support)
    k = len(support)
    if np.asarray(local).shape != (1 << k, 1 << k):
        raise DimensionMismatch("local matrix does not fit its support")
    rest = num_sites - k
    big = np.kron(np.asarray(local, dtype=complex), np.eye(1 << rest, dtype=complex))
    # big lives on sites in the order support + others; permute to 0..N-1
    others = [s for s in range(num_sites) if s not in support]
    order = list(support) + others
    pos = {site: axis for axis, site in enumerate(order)}
    perm = [pos[s] for s in range(num_sites)]
    t = big.reshape((2,) * num_sites + (2,) * num_sites)
    t = np.transpose(t, perm + [num_sites + p for p in perm])
    d = 1 << num_sites
    return np.ascontiguousarray(t.reshape(d, d))


def _act_left(local: np.ndarray, support, op: np.ndarray, num_sites: int):
    """(local embedded on support) @ op, via contraction over the row sites."""
    k = len(support)
    d = 1 << num_sites
    a = local.reshape((2,) * k + (2,) * k)
    t = op.reshape((2,) * num_sites + (d,))
    out = np.tensordot(a, t, axes=(list(range(k, 2 * k)), list(support)))
    # axes: k new row axes for the support, then the untouched row axes, col
    order = []
    sup_set = set(support)
    sup_index = {s: i for i, s in enumerate(support)}
    rest = [s for s in range(num_sites) if s not in sup_set]
    rest_index = {s: k + i for i, s in enumerate(rest)}
    for s in range(num_sites):
        order.append(sup_index[s] if s in sup_set else rest_index[s])
    order.append(num_sites)
    return np.ascontiguousarray(np.transpose(out, order).reshape(d, d))


def _act_right(local: np.ndarray, support, op: np.ndarray, num_sites: int):
    """op @ (local embedded on support), via contraction over the col sites."""
    k = len(support)
    d = 1 << num_sites
    a = local.reshape((2,) * k + (2,) * k)
    t = op.reshape((d,) + (2,) * num_sites)
    col_axes = [1 + s for s in support]
    out = np.tensordot(t, a, axes=(col_axes, list(range(k))))
    # axes: row, untouched col axes, then k new col axes for the support
    sup_set = set(support)
    sup_index = {s: 1 + (num_sites - k) + i for i, s in enumerate(support)}
    rest = [s for s in range(num_sites) if s not in sup_set]
    rest_index = {s: 1 + i for i, s in enumerate(rest)}
    order = [0]
    for s in range(num_sites):
        order.append(sup_index[s] if s in sup_set else rest_index[s])
    return np.ascontiguousarray(np.transpose(out, order).reshape(d, d))


def _disjoint(a, b) -> bool:
    return not (set(a) & set(b))


def apply_adjoint(model: LindbladModel, op: DenseOperator, use_hint: bool = True):
    """Heisenberg generator applied once: L^dag(O)."""
    return _apply(model, op, adjoint=True, use_hint=use_hint)


def apply_forward(model: LindbladModel, op: DenseOperator, use_hint: bool = True):
    """Schroedinger generator applied once: L(rho)."""
    return _apply(model, op, adjoint=False, use_hint=use_hint)


def _apply(model: LindbladModel, op: DenseOperator, adjoint: bool, use_hint: bool):
    n = model.lattice.num_sites
    if op.num_sites != n:
        raise DimensionMismatch("operator lives on a different chain")
    hint = op.support_hint if use_hint else None
    m = op.matrix
    out = np.zeros_like(m)
    touched = set(hint) if hint is not None else None
    for t in model.terms:
        if hint is not None and _disjoint(t.support, hint):
            # a term fully outside the support acts as zero on both sides
            continue
        if touched is not None:
            touched.update(t.support)
        loc = t.scaled_matrix()
        if t.kind == HAMILTONIAN:
            hm = _act_left(loc, t.support, m, n) - _act_right(loc, t.support, m, n)
            out += 1j * hm if adjoint else -1j * hm
        else:
            ldag = loc.conj().T
            ll = ldag @ loc
            if adjoint:
                mid = _act_right(loc, t.support, _act_left(ldag, t.support, m, n), n)
            else:
                mid = _act_right(ldag, t.support, _act_left(loc, t.support, m, n), n)
            anti = _act_left(ll, t.support, m, n) + _act_right(ll, t.support, m, n)
            out += mid - 0.5 * anti
    new_hint = tuple(sorted(touched)) if touched is not None else None
    return DenseOperator(out, n, new_hint)


class MatrixApplier:
    """Precompiled dense form of the generator for repeated application.

    Embeds every term once and applies the generator with a handful of
    full-dimension matrix products. Same result as the term-wise contraction
    path (tested against it); much faster inside integrator loops for the
    chain lengths this package targets.
    """

    def __init__(self, model: LindbladModel, adjoint: bool):
        n = model.lattice.num_sites
        d = 1 << n
        self.num_sites = n
        self.adjoint = adjoint
        h = np.zeros((d, d), dtype=complex)
        for t in model.hamiltonian_terms():
            h += embed(t.scaled_matrix(), t.support, n)
        self.h = h
        self.jumps = [
            embed(t.scaled_matrix(), t.support, n) for t in model.jump_terms()
        ]
        s = np.zeros((d, d), dtype=complex)
        for l in self.jumps:
            s += l.conj().T @ l
        self.s = s

    def __call__(self, m: np.ndarray) -> np.ndarray:
        h, s = self.h, self.s
        if self.adjoint:
            out = 1j * (h @ m - m @ h)
            out -= 0.5 * (s @ m + m @ s)
            for l in self.jumps:
                out += l.conj().T @ m @ l
        else:
            out = -1j * (h @ m - m @ h)
            out -= 0.5 * (s @ m + m @ s)
            for l in self.jumps:
                out += l @ m @ l.conj().T
        return out


def materialize_sparse(model: LindbladModel, adjoint: bool = False):
    """Sparse (csr) matrix of the generator in column-stacking vectorization."""
    n = model.lattice.num_sites
    if n > MATERIALIZE_CAP:
        raise TooLargeForDense(
            f"{n} sites gives a {4**n} dimensional superoperator; cap is "
            f"{MATERIALIZE_CAP} sites"
        )
    d = 1 << n
    eye = sp.identity(d, dtype=complex, format="csr")
    acc = sp.csr_matrix((d * d, d * d), dtype=complex)
    h = np.zeros((d, d), dtype=complex)
    for t in model.hamiltonian_terms():
        h += embed(t.scaled_matrix(), t.support, n)
    if np.any(h):
        hs = sp.csr_matrix(h)
        acc = acc - 1j * (sp.kron(eye, hs, format="csr") - sp.kron(hs.T, eye, format="csr"))
    for t in model.jump_terms():
        l = sp.csr_matrix(embed(t.scaled_matrix(), t.support, n))
        ll = (l.conj().T @ l).tocsr()
        acc = acc + sp.kron(l.conj(), l, format="csr")
        acc = acc - 0.5 * sp.kron(eye, ll, format="csr")
        acc = acc - 0.5 * sp.kron(ll.T, eye, format="csr")
    return acc.conj().T.tocsr() if adjoint else acc


def materialize(model: LindbladModel, adjoint: bool = False) -> np.ndarray:
    """Dense matrix of the generator in column-stacking vectorization.

    Forward: -i [(I kron H) - (H^T kron I)]
             + sum_k (Lbar_k kron L_k) - (1/2)(I kron L^dag L) - (1/2)((L^dag L)^T kron I).
    The adjoint matrix is the conjugate transpose of the forward matrix.
    """
    return np.asarray(materialize_sparse(model, adjoint).todense())


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacked vector of a matrix."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(d, d, order="F")


def partial_trace(op: DenseOperator, keep) -> DenseOperator:
    """Trace out every site not in `keep`; result lives on the kept sites in
    ascending order."""
    keep = tuple(sorted(set(int(i) for i in keep)))
    if not keep:
        raise EmptyRegion("must keep at least one site")
    n = op.num_sites
    if any(i < 0 or i >= n for i in keep):
        raise SupportViolation(f"keep set {keep} outside the chain")
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise TooLargeForDense("partial trace label space exhausted")
    row = list(letters[:n])
    col = []
    nxt = n
    for i in range(n):
        if i in keep:
            col.append(letters[nxt])
            nxt += 1
        else:
            col.append(row[i])
    out_idx = "".join(row[i] for i in keep) + "".join(
        col[i] for i in keep
    )
    spec = "".join(row) + "".join(col) + "->" + out_idx
    t = op.matrix.reshape((2,) * n + (2,) * n)
    red = np.einsum(spec, t)
    k = len(keep)
    hint = None
    if op.support_hint is not None:
        hint = tuple(keep.index(i) for i in op.support_hint if i in keep)
    return DenseOperator(red.reshape(1 << k, 1 << k), k, hint)


def norms(m: np.ndarray) -> dict:
    sv = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    return {
        "op": float(sv[0]) if sv.size else 0.0,
        "trace": float(np.sum(sv)),
        "fro": float(np.sqrt(np.sum(sv**2))),
    }


# ---------------------------------------------------------------------------
# Operator I/O

_HEADER = struct.Struct("<III")


def dump_operator(op: DenseOperator, path, flags: int = 0):
    """Binary dump: little-endian header (num_sites, dim, flags) as uint32,
    then the row-major matrix as interleaved float64 (re, im) pairs."""
    m = np.ascontiguousarray(op.matrix.astype("<c16"))
    with open(path, "wb") as f:
        f.write(_HEADER.pack(op.num_sites, op.dim, flags))
        f.write(m.tobytes())


def load_operator(path) -> DenseOperator:
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
        n, d, _flags = _HEADER.unpack(raw)
        if d != 1 << n:
            raise DimensionMismatch(f"header dim {d} does not match {n} sites")
        body = f.read(d * d * 16)
        m = np.frombuffer(body, dtype="<c16").reshape(d, d)
    return DenseOperator(m.astype(complex), n)
