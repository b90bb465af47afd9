"""Liouvillian spectra, steady states, detailed balance, and decay checks.

Two diagonalization routes. The generic route uses a nonsymmetric dense
eigensolve with left operators taken from the inverse eigenvector matrix
(globally biorthonormal by construction), falling back to a two-sided solve
with per-cluster Gram corrections when the eigenbasis is badly conditioned.
When a model advertises a full-rank stationary state it is detailed-balance
checked and, if it passes, the generator is symmetrized by the modular map,

    M = G^(-1/2) L G^(1/2),    G^(1/2) vec(f) = vec(sigma^(1/4) f sigma^(1/4)),

and a Hermitian eigensolve gives an exactly real spectrum with automatically
biorthonormal pairs.

Eigenvalues are always sorted by |Re| ascending; each right operator has unit
Frobenius norm except the zero mode, whose pair is normalized to (sigma, I).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    NonPrimitive,
    NotReversible,
    SingularSteadyState,
    TooLargeForDense,
)
from .model import LindbladModel
from .superop import DenseOperator, materialize, materialize_sparse, unvec, vec

ZERO_TOL = 1e-10
CLUSTER_TOL = 1e-9
COND_CAP = 1e12


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    right_ops: list
    left_ops: list
    steady_state: np.ndarray
    gap: float
    primitive: bool
    residuals: np.ndarray = None
    clusters: list = field(default_factory=list)
    method: str = "geev"
    cond_right: float = np.nan
    null_dim: int = 1

    @property
    def dim(self):
        return self.steady_state.shape[0]


def _hermitize_state(m: np.ndarray) -> np.ndarray:
    """Project onto physical states: Hermitian, positive, unit trace.

    Eigenvector phases are arbitrary, so the candidate is first rotated to
    make its trace real and positive.
    """
    tr = np.trace(m)
    if abs(tr) > 1e-300:
        m = m * (tr.conjugate() / abs(tr))
    h = (m + m.conj().T) / 2
    w, u = np.linalg.eigh(h)
    w = np.clip(w.real, 0.0, None)
    s = w.sum()
    if s <= 0:
        raise SingularSteadyState("null vector has no positive part")
    return (u * (w / s)) @ u.conj().T


def _sort_order(w: np.ndarray) -> np.ndarray:
    return np.lexsort((w.imag, w.real, np.abs(w.real)))


def _cluster(w: np.ndarray, tol: float):
    """Greedy chain clustering of near-equal eigenvalues; returns index lists."""
    order = np.argsort(w.real, kind="stable")
    clusters = []
    cur = [int(order[0])]
    for idx in order[1:]:
        if abs(w[idx] - w[cur[-1]]) < tol:
            cur.append(int(idx))
        else:
            clusters.append(cur)
            cur = [int(idx)]
    clusters.append(cur)
    return clusters


def _mode_powers(sigma: np.ndarray, exps):
    w, u = np.linalg.eigh(sigma)
    if w.min() <= 1e-14:
        raise SingularSteadyState(
            f"steady state eigenvalue {w.min():.3e} too small for modular maps"
        )
    return [(u * np.power(w, e)) @ u.conj().T for e in exps]


def analyze(model: LindbladModel, force_generic: bool = False) -> SpectralData:
    """Full eigendecomposition of the forward generator."""
    lf = materialize(model, adjoint=False)
    if not force_generic and model.reversible_hint and model.steady_state_hint is not None:
        data = _try_reversible_path(model, lf)
        if data is not None:
            return data
    return _generic_path(model, lf)


def _stationarity_residual(lf, sigma):
    return np.linalg.norm(lf @ vec(sigma)) / max(np.linalg.norm(lf, "fro"), 1e-300)


def _try_reversible_path(model, lf):
    sigma = np.asarray(model.steady_state_hint, dtype=complex)
    w = np.linalg.eigvalsh(sigma)
    if w.min() <= 1e-14:
        return None
    if _stationarity_residual(lf, sigma) > 1e-9:
        return None
    s4, s4i = _mode_powers(sigma, (0.25, -0.25))
    d = sigma.shape[0]
    # G^(1/2) and its inverse act by conjugation with sigma^(1/4)
    g_half = np.kron(s4.T, s4)
    g_half_inv = np.kron(s4i.T, s4i)
    m = g_half_inv @ lf @ g_half
    herm_dev = np.linalg.norm(m - m.conj().T, "fro")
    if herm_dev > 1e-8 * max(np.linalg.norm(m, "fro"), 1e-300):
        return None
    m = (m + m.conj().T) / 2
    w, u = np.linalg.eigh(m)
    order = _sort_order(w.astype(complex))
    w = w[order]
    u = u[:, order]
    rights, lefts = [], []
    for i in range(w.size):
        um = unvec(u[:, i])
        r = s4 @ um @ s4
        l = s4i @ um @ s4i
        nr = np.linalg.norm(r, "fro")
        rights.append(r / nr)
        lefts.append(l * nr)
    eigenvalues = w.astype(complex)
    data = _finalize(model, lf, eigenvalues, rights, lefts, method="reversible-eigh")
    data.cond_right = 1.0  # orthonormal basis under the modular inner product
    return data


def _generic_path(model, lf):
    w, v = np.linalg.eig(lf)
    order = _sort_order(w)
    w = w[order]
    v = v[:, order]
    cond = float(np.linalg.cond(v))
    if np.isfinite(cond) and cond < COND_CAP:
        winv = np.linalg.inv(v)
        lefts = [unvec(winv[i, :].conj()) for i in range(w.size)]
        method = "geev"
    else:
        lefts = _two_sided_lefts(lf, w, v)
        method = "geev-twosided"
    rights = []
    for i in range(w.size):
        r = unvec(v[:, i])
        nr = np.linalg.norm(r, "fro")
        rights.append(r / nr)
        lefts[i] = lefts[i] * nr
    data = _finalize(model, lf, w, rights, lefts, method=method)
    data.cond_right = cond
    return data


def _two_sided_lefts(lf, w, v):
    """Left eigenvectors from a second solve, Gram-corrected per cluster."""
    wl, y = np.linalg.eig(lf.conj().T)
    # match left eigenvalues (conjugated) to the sorted right ones
    used = np.zeros(wl.size, dtype=bool)
    pick = np.empty(w.size, dtype=int)
    for i, lam in enumerate(w):
        dist = np.abs(wl.conj() - lam)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        used[j] = True
        pick[i] = j
    y = y[:, pick]
    lefts = [None] * w.size
    for cluster in _cluster(w, CLUSTER_TOL):
        yc = y[:, cluster]
        vc = np.column_stack([v[:, i] for i in cluster])
        gram = yc.conj().T @ vc
        corr = yc @ np.linalg.inv(gram).conj().T
        for k, i in enumerate(cluster):
            lefts[i] = unvec(corr[:, k])
    return lefts


def _finalize(model, lf, w, rights, lefts, method):
    zero_idx = [i for i in range(w.size) if abs(w[i]) < ZERO_TOL]
    null_dim = len(zero_idx)
    primitive = null_dim == 1
    d = model.dim
    if primitive:
        i0 = zero_idx[0]
        sigma = _hermitize_state(rights[i0])
        rights[i0] = sigma
        lefts[i0] = np.eye(d, dtype=complex)
    else:
        # project the maximally mixed state onto the fixed space
        mix = np.eye(d, dtype=complex) / d
        acc = np.zeros((d, d), dtype=complex)
        for i in zero_idx:
            acc += rights[i] * np.trace(lefts[i].conj().T @ mix)
        sigma = _hermitize_state(acc)
    nonzero = [i for i in range(w.size) if i not in zero_idx]
    gap = float(min(abs(w[i].real) for i in nonzero)) if nonzero else 0.0
    rvecs = np.column_stack([vec(r) for r in rights])
    residuals = np.linalg.norm(lf @ rvecs - rvecs * w[None, :], axis=0)
    data = SpectralData(
        eigenvalues=w,
        right_ops=rights,
        left_ops=lefts,
        steady_state=sigma,
        gap=gap,
        primitive=primitive,
        residuals=residuals,
        clusters=_cluster(w, CLUSTER_TOL),
        method=method,
        null_dim=null_dim,
    )
    return data


def biorthonormality_defect(data: SpectralData) -> float:
    """max |Tr[l_i^dag r_j] - delta_ij| over all pairs. O(D^6), tests only."""
    lmat = np.column_stack([vec(l) for l in data.left_ops])
    rmat = np.column_stack([vec(r) for r in data.right_ops])
    overlap = lmat.conj().T @ rmat
    return float(np.max(np.abs(overlap - np.eye(overlap.shape[0]))))


# ---------------------------------------------------------------------------
# Large-chain route: stationary state and gap without full diagonalization


def steady_state_and_gap(model: LindbladModel, k: int = 8,
                         want_gap: bool = True) -> dict:
    """Stationary state by inverse iteration and spectral gap by shift-invert
    Arnoldi around zero, both through one dense LU of the generator.

    This is the path for chains where the full eigendecomposition is out of
    budget; results agree with analyze() on small chains (tested).
    """
    lf = materialize(model, adjoint=False)
    n2 = lf.shape[0]
    d = model.dim
    shift = 1e-12 * max(1.0, float(np.max(np.abs(lf))))
    lu = scipy.linalg.lu_factor(lf - shift * np.eye(n2))
    x = vec(np.eye(d, dtype=complex) / d)
    for _ in range(5):
        x = scipy.linalg.lu_solve(lu, x)
        x /= np.linalg.norm(x)
    sigma = _hermitize_state(unvec(x))
    out = {"steady_state": sigma, "gap": None, "eigenvalues_near_zero": None,
           "null_dim": None}
    if want_gap:
        op = spla.LinearOperator(
            (n2, n2), matvec=lambda b: scipy.linalg.lu_solve(lu, b),
            dtype=complex)
        v0 = np.ones(n2) / np.sqrt(n2)
        nu, _ = spla.eigs(op, k=k, which="LM", v0=v0, tol=1e-10)
        lam = shift + 1.0 / nu
        zero = np.abs(lam) < max(ZERO_TOL, 100 * shift)
        out["eigenvalues_near_zero"] = lam
        out["null_dim"] = int(np.sum(zero))
        nz = lam[~zero]
        out["gap"] = float(np.min(np.abs(nz.real))) if nz.size else 0.0
    return out


# ---------------------------------------------------------------------------
# Detailed balance


def modular_pair_matrix(sigma: np.ndarray, s: float) -> np.ndarray:
    """Matrix of f -> (sigma^s f sigma^(1-s) + sigma^(1-s) f sigma^s) / 2."""
    ps, p1s = _mode_powers(sigma, (s, 1.0 - s))
    return 0.5 * (np.kron(p1s.T, ps) + np.kron(ps.T, p1s))


def check_s_reversibility(model: LindbladModel, sigma: np.ndarray,
                          s: float = 0.5, tol: float = 1e-8) -> dict:
    """Detailed balance of the generator with respect to sigma.

    The defect map f -> Gamma_s(L^dag f) - L(Gamma_s f) is materialized; the
    residual is the largest Frobenius norm of its action on a matrix unit,
    i.e. the largest column 2-norm of the defect matrix.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    g = modular_pair_matrix(sigma, s)
    lf = materialize(model, adjoint=False)
    defect = g @ lf.conj().T - lf @ g
    residual = float(np.max(np.linalg.norm(defect, axis=0)))
    return {"reversible": residual <= tol, "residual": residual, "s": s}


def require_reversible(model, sigma, s=0.5, tol=1e-8):
    res = check_s_reversibility(model, sigma, s, tol)
    if not res["reversible"]:
        raise NotReversible(
            f"detailed balance residual {res['residual']:.3e} exceeds {tol:.1e}"
        )
    return res


# ---------------------------------------------------------------------------
# Decay checks against the gap


def steady_expectation(sigma: np.ndarray, f: np.ndarray) -> float:
    return float(np.real(np.trace(sigma @ f)))


def variance(sigma: np.ndarray, f: np.ndarray) -> float:
    """Var_sigma[f] = Tr[f^2 sigma] - Tr[f sigma]^2 for Hermitian f."""
    mean = steady_expectation(sigma, f)
    second = float(np.real(np.trace(f @ f @ sigma)))
    return second - mean**2


def covariance(sigma: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    """Symmetrized Cov_sigma(f, g) = Tr[(fg + gf) sigma]/2 - <f><g>."""
    sym = float(np.real(np.trace((f @ g + g @ f) @ sigma))) / 2
    return sym - steady_expectation(sigma, f) * steady_expectation(sigma, g)


def _require_hermitian(f: np.ndarray, name: str):
    if np.max(np.abs(f - f.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(f))):
        raise ValueError(f"{name} must be Hermitian")


def _adjoint_trajectory(model, f, time_grid, tol, method):
    from .dynamics import evolve_adjoint, evolve_expm

    op = DenseOperator(f, model.num_sites)
    if method == "expm":
        return evolve_expm(model, op, time_grid, adjoint=True)
    return evolve_adjoint(model, op, time_grid, tol=tol)


def check_variance_decay(model: LindbladModel, data: SpectralData,
                         f: np.ndarray, time_grid, tol: float = 1e-8,
                         method: str = "rk45") -> dict:
    """Var[f_t] <= exp(-2 lambda t) Var[f] along the Heisenberg evolution.

    Requires a primitive, reversible model; lambda is the spectral gap.
    Identity-like observables have zero variance and make the check vacuous.
    method "expm" propagates through the dense exponential, which is much
    cheaper than adaptive stepping when the grid spans many gap times.
    """
    if not data.primitive:
        raise NonPrimitive("variance decay needs a unique full-rank fixed point")
    require_reversible(model, data.steady_state)
    _require_hermitian(f, "observable")
    sigma = data.steady_state
    var0 = variance(sigma, f)
    fnorm = np.linalg.norm(f, "fro")
    if var0 <= 1e-14 * max(1.0, fnorm**2):
        return {"worst_ratio": 0.0, "vacuous": True, "ratios": None,
                "times": np.asarray(time_grid, dtype=float), "var0": var0}
    evo = _adjoint_trajectory(model, f, time_grid, tol, method)
    lam = data.gap
    ratios = np.array([
        variance(sigma, s.matrix) * np.exp(2 * lam * t) / var0
        for t, s in zip(evo.times, evo.snapshots)
    ])
    return {"worst_ratio": float(np.max(ratios)), "vacuous": False,
            "ratios": ratios, "times": evo.times, "var0": var0}


def check_covariance_decay(model: LindbladModel, data: SpectralData,
                           f: np.ndarray, g: np.ndarray, time_grid,
                           tol: float = 1e-8, method: str = "rk45") -> dict:
    """|Cov(f_t, g_t)| <= 4 ||f|| ||g|| exp(-2 lambda t) along the evolution."""
    if not data.primitive:
        raise NonPrimitive("covariance decay needs a unique full-rank fixed point")
    require_reversible(model, data.steady_state)
    _require_hermitian(f, "f")
    _require_hermitian(g, "g")
    sigma = data.steady_state
    bound0 = 4.0 * np.linalg.norm(f, 2) * np.linalg.norm(g, 2)
    evo_f = _adjoint_trajectory(model, f, time_grid, tol, method)
    evo_g = _adjoint_trajectory(model, g, time_grid, tol, method)
    lam = data.gap
    covs = np.array([
        covariance(sigma, sf.matrix, sg.matrix)
        for sf, sg in zip(evo_f.snapshots, evo_g.snapshots)
    ])
    bounds_t = bound0 * np.exp(-2 * lam * evo_f.times)
    ratios = np.abs(covs) / bounds_t
    return {"worst_ratio": float(np.max(ratios)), "covariances": covs,
            "bounds": bounds_t, "times": evo_f.times}


def slowest_hermitian_mode(data: SpectralData) -> tuple:
    """Hermitian eigenoperator of the adjoint at the gap eigenvalue.

    Eigenoperators of a real-spectrum mode close under conjugate transpose,
    so the Hermitian (or anti-Hermitian, rotated) combination is again an
    eigenoperator. Returns (lambda_1, f) with f Hermitian, unit Frobenius.
    """
    idx = None
    for i, lam in enumerate(data.eigenvalues):
        if abs(lam) < ZERO_TOL:
            continue
        if abs(lam.real) <= data.gap + 1e-12 and abs(lam.imag) < 1e-9:
            idx = i
            break
    if idx is None:
        raise NonPrimitive("no real eigenvalue at the gap")
    l1 = data.left_ops[idx]
    h = (l1 + l1.conj().T) / 2
    if np.linalg.norm(h, "fro") < 1e-8 * np.linalg.norm(l1, "fro"):
        h = (l1 - l1.conj().T) / 2j
    return float(data.eigenvalues[idx].real), h / np.linalg.norm(h, "fro")
