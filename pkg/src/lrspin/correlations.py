"""Steady-state correlation measures between disjoint regions.

The central quantity is the covariance-type correlation

    T(X:Y) = sup |Tr[(f (x) g) (rho_XY - rho_X (x) rho_Y)]|

over Hermitian f on X and g on Y with operator norm at most one. For a fixed
g the optimum over f is exact (the trace norm of a contracted block), so the
supremum is computed by alternating exact partial maximizations from several
starting points. Mutual information, reduced trace distances, and an
empirical mixing-rate estimator round out the module.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import evolve_expm, evolve_forward
from .errors import OverlapError, TooLargeReduced
from .model import as_region
from .pauli import haar_product_state, random_hermitian, trace_norm
from .superop import DenseOperator, partial_trace

REDUCED_CAP = 1024


@dataclass(frozen=True)
class CorrelationRecord:
    value: float
    f: np.ndarray
    g: np.ndarray
    iterations: int
    converged: bool
    restarts: int


def _check_regions(region_x, region_y, num_sites):
    rx = as_region(region_x).sites
    ry = as_region(region_y).sites
    if set(rx) & set(ry):
        raise OverlapError(f"regions {rx} and {ry} overlap")
    if max(rx + ry) >= num_sites:
        raise OverlapError("region extends past the chain")
    return rx, ry


def _joint_reduced(state: np.ndarray, rx, ry, num_sites: int) -> np.ndarray:
    """rho_XY reshaped to (dX, dY, dX, dY), X factors first regardless of how
    the two regions interleave on the chain."""
    op = DenseOperator(state, num_sites)
    kept = tuple(sorted(rx + ry))
    joint = partial_trace(op, kept).matrix
    k = len(kept)
    pos = {s: i for i, s in enumerate(kept)}
    order = [pos[s] for s in rx] + [pos[s] for s in ry]
    t = joint.reshape((2,) * k + (2,) * k)
    t = np.transpose(t, order + [k + i for i in order])
    dx, dy = 1 << len(rx), 1 << len(ry)
    return t.reshape(dx, dy, dx, dy)


def correlation_tensor(state: np.ndarray, region_x, region_y,
                       num_sites: int) -> np.ndarray:
    """Delta = rho_XY - rho_X (x) rho_Y as a (dX, dY, dX, dY) tensor with
    row pair (x, y) and column pair (x', y')."""
    rx, ry = _check_regions(region_x, region_y, num_sites)
    dx, dy = 1 << len(rx), 1 << len(ry)
    if dx * dy > REDUCED_CAP:
        raise TooLargeReduced(
            f"joint reduced dimension {dx * dy} exceeds cap {REDUCED_CAP}"
        )
    joint = _joint_reduced(state, rx, ry, num_sites)
    rho_x = np.einsum("xyay->xa", joint)
    rho_y = np.einsum("xyxb->yb", joint)
    prod = np.einsum("xa,yb->xyab", rho_x, rho_y)
    return joint - prod


def _sign_of(m: np.ndarray):
    """Hermitian unitary sign(m) and the trace norm of m."""
    h = (m + m.conj().T) / 2.0
    w, u = np.linalg.eigh(h)
    s = np.where(w >= 0, 1.0, -1.0)
    return (u * s) @ u.conj().T, float(np.sum(np.abs(w)))


def _f_step(g, delta):
    # M[x', x] = sum_{y, y'} g[y, y'] delta[x', y', x, y]
    return np.einsum("ab,wbxa->wx", g, delta)


def _g_step(f, delta):
    # M[y', y] = sum_{x, x'} f[x, x'] delta[x', y', x, y]
    return np.einsum("ab,bwax->wx", f, delta)


def _realignment_init(delta, dy, rng):
    r = delta.transpose(0, 2, 1, 3).reshape(delta.shape[0] ** 2, dy * dy)
    _, _, vh = np.linalg.svd(r)
    g = vh[0].conj().reshape(dy, dy)
    g = (g + g.conj().T) / 2.0
    nrm = np.linalg.norm(g, 2)
    if nrm < 1e-12:
        g = random_hermitian(dy, rng)
        nrm = np.linalg.norm(g, 2)
    return g / nrm


def covariance_correlation(state: np.ndarray, region_x, region_y,
                           num_sites: int, restarts: int = 20, seed: int = 0,
                           max_iter: int = 300,
                           tol: float = 1e-12) -> CorrelationRecord:
    """Alternating maximization of T(X:Y) for a given joint state.

    Each half-step is an exact maximization (sign decomposition of the
    contracted block), so the objective is nondecreasing along the
    iteration; restarts guard against the alternation stalling in a
    suboptimal pair.
    """
    rx, ry = _check_regions(region_x, region_y, num_sites)
    delta = correlation_tensor(state, rx, ry, num_sites)
    dy = delta.shape[1]
    rng = np.random.default_rng(seed)
    best = None
    for k in range(max(1, restarts)):
        if k == 0:
            g = _realignment_init(delta, dy, rng)
        else:
            g = random_hermitian(dy, rng)
            g /= max(np.linalg.norm(g, 2), 1e-12)
        value = -1.0
        converged = False
        for it in range(1, max_iter + 1):
            f, _ = _sign_of(_f_step(g, delta))
            g, new = _sign_of(_g_step(f, delta))
            if new - value <= tol * max(1.0, new):
                value = max(value, new)
                converged = True
                break
            value = new
        cand = CorrelationRecord(value, f, g, it, converged, k + 1)
        if best is None or cand.value > best.value + 1e-15:
            best = cand
    return best


def _entropy(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
    w = w[w > 1e-14]
    return float(-np.sum(w * np.log(w)))


def mutual_information(state: np.ndarray, region_x, region_y,
                       num_sites: int) -> float:
    """I(X:Y) = S(X) + S(Y) - S(XY) in nats, clipped at zero."""
    rx, ry = _check_regions(region_x, region_y, num_sites)
    if (1 << len(rx)) * (1 << len(ry)) > REDUCED_CAP:
        raise TooLargeReduced("joint reduced dimension exceeds cap")
    op = DenseOperator(state, num_sites)
    s_x = _entropy(partial_trace(op, rx).matrix)
    s_y = _entropy(partial_trace(op, ry).matrix)
    s_xy = _entropy(partial_trace(op, tuple(sorted(rx + ry))).matrix)
    return max(0.0, s_x + s_y - s_xy)


def stability_deviation(state: np.ndarray, reference: np.ndarray, region,
                        num_sites: int) -> float:
    """||rho_Y - sigma_Y||_1 for the reduced states on the given region."""
    r = as_region(region)
    a = partial_trace(DenseOperator(state, num_sites), r).matrix
    b = partial_trace(DenseOperator(reference, num_sites), r).matrix
    return trace_norm(a - b)


def mixing_prefactor(sigma: np.ndarray) -> float:
    """sqrt(2 log ||sigma^{-1}||), the state-independent mixing prefactor."""
    w = np.linalg.eigvalsh((sigma + sigma.conj().T) / 2.0)
    lo = float(np.min(w))
    if lo <= 0:
        lo = 1e-300
    return math.sqrt(2.0 * math.log(1.0 / lo))


def _mixing_distances(model, sigma, time_grid, n_states, rng, tol,
                      method="rk45"):
    # expm route pays one dense exponential per grid point instead of
    # stepping across thousands of gap times; exact for these sizes
    dists = []
    for _ in range(n_states):
        rho0 = haar_product_state(model.lattice.num_sites, rng)
        op = DenseOperator(rho0, model.lattice.num_sites)
        if method == "expm":
            evo = evolve_expm(model, op, time_grid, adjoint=False)
        else:
            evo = evolve_forward(model, op, time_grid, tol=tol)
        dists.append([0.5 * trace_norm(s.matrix - sigma) for s in evo.snapshots])
    return np.array(dists)


DIST_FLOOR = 1e-12


def estimate_mixing_rate(model, sigma: np.ndarray, time_grid, n_states: int = 6,
                         seed: int = 0, tol: float = 1e-8,
                         haircut: float = 0.95, method: str = "rk45") -> dict:
    """Empirical mixing rate from sampled trajectory distances to sigma.

    The decay rate is read off a two-point slope over the deep half of the
    grid, log(d(t_mid)/d(t_end)) / (t_end - t_mid) per state, which cancels
    the state-dependent overlap with the slowest mode; the per-point rates
    (1/t) log(pref / d) only reach that slope after a great many gap times.
    The reported beta is the haircut times the smallest slope, additionally
    capped by the largest rate the sampled trajectories themselves certify,
    so pref exp(-beta t) majorizes every sampled distance on the grid.  The
    grid should still extend to roughly 20 / gap so the slope window is past
    the transient; distances are clamped at a small floor so noise near zero
    cannot blow up a logarithm.
    """
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
        raise ValueError("time grid must start at 0 and contain later points")
    pref = mixing_prefactor(sigma)
    rng = np.random.default_rng(seed)
    dists = _mixing_distances(model, sigma, grid, n_states, rng, tol, method)
    mid = int(np.argmin(np.abs(grid[1:-1] - 0.5 * grid[-1]))) + 1
    slopes, rates = [], []
    for row in dists:
        d_mid = max(row[mid], DIST_FLOOR)
        d_end = max(row[-1], DIST_FLOOR)
        slopes.append(math.log(d_mid / d_end) / (grid[-1] - grid[mid]))
        for t, d in zip(grid[1:], row[1:]):
            rates.append(math.log(pref / max(d, DIST_FLOOR)) / t)
    beta = max(0.0, min(haircut * min(slopes), min(rates))) if slopes else 0.0
    return {
        "beta_est": beta,
        "prefactor": pref,
        "slope_rate": min(slopes) if slopes else math.inf,
        "min_rate": min(rates) if rates else math.inf,
        "times": grid,
        "distances": dists,
        "haircut": haircut,
    }


def audit_mixing_bound(model, sigma: np.ndarray, beta: float, prefactor: float,
                       time_grid, n_states: int = 20, seed: int = 1,
                       tol: float = 1e-8, noise_tol: float = 1e-9,
                       method: str = "rk45") -> dict:
    """Check pref exp(-beta t) against fresh random product states; the
    worst signed margin distance - envelope should stay nonpositive up to
    integrator noise."""
    grid = np.asarray(time_grid, dtype=float)
    rng = np.random.default_rng(seed)
    dists = _mixing_distances(model, sigma, grid, n_states, rng, tol, method)
    env = prefactor * np.exp(-beta * grid)
    margins = dists - env[None, :]
    return {
        "worst_margin": float(np.max(margins)),
        "holds": bool(np.max(margins) <= noise_tol),
        "distances": dists,
        "envelope": env,
        "times": grid,
    }
