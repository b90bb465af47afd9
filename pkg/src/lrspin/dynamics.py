"""Time evolution of observables and states on a fixed time grid.

Evolution integrates d/dt vec(O) through an adaptive embedded Runge-Kutta
pair, segment by segment between grid points, always landing exactly on the
requested times (no dense-output interpolation). The input operator is the
snapshot at time_grid[0]. A second, independent route through the dense matrix
exponential of the materialized generator is provided for cross checks.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import RK45

from . import superop
from .errors import StepFailure, SupportViolation
from .model import LindbladModel
from .pauli import operator_support
from .superop import DenseOperator, MatrixApplier, apply_adjoint, apply_forward

DEFAULT_TOL = 1e-8
# matrix-product RHS is used while the embedded jump matrices stay this small
_MATRIX_PATH_BUDGET = 64_000_000


@dataclass
class IntegratorStats:
    steps: int = 0
    rhs_evals: int = 0
    max_local_error: float = 0.0

    def merge(self, other):
        return IntegratorStats(
            self.steps + other.steps,
            self.rhs_evals + other.rhs_evals,
            max(self.max_local_error, other.max_local_error),
        )


@dataclass
class EvolutionResult:
    times: np.ndarray
    snapshots: list
    stats: IntegratorStats
    # cumulative (steps, max error) after reaching each grid point
    per_time: list = None


@dataclass
class Curve:
    """One scalar measurement per grid time, with integrator bookkeeping."""

    label: str
    times: np.ndarray
    values: np.ndarray
    steps: np.ndarray
    max_local_error: np.ndarray

    def csv_text(self, fingerprint: dict = None) -> str:
        from .harness import fingerprint_lines

        lines = fingerprint_lines(fingerprint)
        lines.append("t,value,integrator_steps,max_local_error")
        for t, v, s, e in zip(
            self.times, self.values, self.steps, self.max_local_error
        ):
            lines.append(f"{float(t)!r},{float(v)!r},{int(s)},{float(e)!r}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path, fingerprint: dict = None):
        with open(path, "w") as f:
            f.write(self.csv_text(fingerprint))


def _choose_rhs(model: LindbladModel, adjoint: bool):
    d = model.dim
    n_mats = len(model.jump_terms()) + 2
    if n_mats * d * d <= _MATRIX_PATH_BUDGET:
        applier = MatrixApplier(model, adjoint)
        return lambda m: applier(m)
    if adjoint:
        return lambda m: apply_adjoint(model, DenseOperator(m, model.num_sites),
                                       use_hint=False).matrix
    return lambda m: apply_forward(model, DenseOperator(m, model.num_sites),
                                   use_hint=False).matrix


def _validate_grid(time_grid) -> np.ndarray:
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("time grid must be a nonempty 1d array")
    if not np.all(np.isfinite(grid)):
        raise ValueError("time grid must be finite")
    if np.any(grid < 0):
        raise ValueError("times must be nonnegative")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def _segment(rhs_flat, y0, t0, t1, rtol, atol):
    """One grid segment with the embedded RK pair; returns (y1, stats)."""
    rk = RK45(rhs_flat, t0, y0, t_bound=t1, rtol=rtol, atol=atol)
    stats = IntegratorStats()
    while rk.status == "running":
        rk.step()
        if rk.status == "failed":
            raise StepFailure(
                f"integrator stalled at t = {rk.t:.6g} inside ({t0:g}, {t1:g})"
            )
        stats.steps += 1
        try:
            # embedded error estimate of the accepted step
            err = rk.h_previous * (rk.K.T @ rk.E)
            stats.max_local_error = max(
                stats.max_local_error, float(np.linalg.norm(err))
            )
        except Exception:
            stats.max_local_error = float("nan")
    stats.rhs_evals = rk.nfev
    return rk.y, stats


def _evolve(model, op, time_grid, tol, adjoint, validate):
    grid = _validate_grid(time_grid)
    if op.num_sites != model.lattice.num_sites:
        raise SupportViolation("operator lives on a different chain")
    rhs = _choose_rhs(model, adjoint)
    d = op.dim

    def rhs_flat(_t, y):
        m = np.ascontiguousarray(y).view(complex).reshape(d, d)
        return rhs(m).reshape(-1).view(float)

    rtol = tol
    atol = tol * 1e-2
    y = op.matrix.reshape(-1).view(float).copy()
    snapshots = [DenseOperator(op.matrix.copy(), op.num_sites, op.support_hint)]
    total = IntegratorStats()
    per_time = [(0, 0.0)]
    for t0, t1 in zip(grid[:-1], grid[1:]):
        y, stats = _segment(rhs_flat, y, float(t0), float(t1), rtol, atol)
        total = total.merge(stats)
        m = np.ascontiguousarray(y).view(complex).reshape(d, d).copy()
        snapshots.append(DenseOperator(m, op.num_sites))
        per_time.append((total.steps, total.max_local_error))
    if validate and not adjoint:
        _validate_states(op.matrix, snapshots)
    return EvolutionResult(grid, snapshots, total, per_time)


def _validate_states(rho0, snapshots):
    t0 = np.trace(rho0)
    for s in snapshots:
        m = s.matrix
        if abs(np.trace(m) - t0) > 1e-10 * max(1.0, abs(t0)):
            raise StepFailure("state evolution lost trace normalization")
        if np.max(np.abs(m - m.conj().T)) > 1e-9:
            raise StepFailure("state evolution lost Hermiticity")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -1e-8:
            raise StepFailure("state evolution produced a negative eigenvalue")


def evolve_adjoint(model: LindbladModel, op: DenseOperator, time_grid,
                   tol: float = DEFAULT_TOL) -> EvolutionResult:
    """Evolve an observable in the Heisenberg picture over the grid."""
    return _evolve(model, op, time_grid, tol, adjoint=True, validate=False)


def evolve_forward(model: LindbladModel, rho: DenseOperator, time_grid,
                   tol: float = DEFAULT_TOL, validate: bool = True):
    """Evolve a state over the grid, checking trace, Hermiticity, and
    positivity (to integrator accuracy) on every snapshot."""
    return _evolve(model, rho, time_grid, tol, adjoint=False, validate=validate)


def evolve_expm(model: LindbladModel, op: DenseOperator, time_grid,
                adjoint: bool = True) -> EvolutionResult:
    """Same map through expm of the materialized generator.

    Independent of the adaptive integrator; used to cross check it.
    """
    grid = _validate_grid(time_grid)
    gen = superop.materialize(model, adjoint=adjoint)
    v0 = superop.vec(op.matrix)
    snaps = []
    for t in grid:
        dt = float(t - grid[0])
        if dt == 0.0:
            snaps.append(DenseOperator(op.matrix.copy(), op.num_sites))
            continue
        prop = scipy.linalg.expm(gen * dt)
        snaps.append(DenseOperator(superop.unvec(prop @ v0), op.num_sites))
    return EvolutionResult(grid, snaps, IntegratorStats(), None)


def _required_support(op: DenseOperator):
    if op.support_hint is not None:
        return op.support_hint
    return operator_support(op.matrix, op.num_sites)


def _curve(label, evo: EvolutionResult, values) -> Curve:
    steps = np.array([p[0] for p in evo.per_time], dtype=float)
    errs = np.array([p[1] for p in evo.per_time], dtype=float)
    return Curve(label, evo.times, np.asarray(values, dtype=float), steps, errs)


def measure_truncation_error(model: LindbladModel, a: DenseOperator, region_x,
                             radius: int, time_grid,
                             tol: float = DEFAULT_TOL) -> Curve:
    """Operator-norm gap between full evolution of A and evolution under the
    model truncated to a ball around the region carrying A."""
    from .model import as_region, truncate_to_ball

    x = as_region(region_x)
    sup = _required_support(a)
    if not set(sup) <= set(x.sites):
        raise SupportViolation(f"observable acts on {sup}, outside region {x.sites}")
    trunc = truncate_to_ball(model, x, radius)
    full = evolve_adjoint(model, a, time_grid, tol)
    cut = evolve_adjoint(trunc, a, time_grid, tol)
    values = [
        np.linalg.norm(f.matrix - c.matrix, 2)
        for f, c in zip(full.snapshots, cut.snapshots)
    ]
    merged = EvolutionResult(
        full.times, full.snapshots, full.stats.merge(cut.stats),
        [(a_[0] + b_[0], max(a_[1], b_[1])) for a_, b_ in
         zip(full.per_time, cut.per_time)],
    )
    return _curve(f"truncation(r={radius})", merged, values)


def measure_joint_vs_separate(model: LindbladModel, a: DenseOperator,
                              b: DenseOperator, time_grid,
                              tol: float = DEFAULT_TOL) -> Curve:
    """|| (AB)(t) - A(t) B(t) ||_op for observables on disjoint regions."""
    sa, sb = _required_support(a), _required_support(b)
    if set(sa) & set(sb):
        raise SupportViolation("joint-evolution factorization needs disjoint supports")
    ab = DenseOperator(a.matrix @ b.matrix, a.num_sites,
                       tuple(sorted(set(sa) | set(sb))))
    evo_ab = evolve_adjoint(model, ab, time_grid, tol)
    evo_a = evolve_adjoint(model, a, time_grid, tol)
    evo_b = evolve_adjoint(model, b, time_grid, tol)
    values = [
        np.linalg.norm(sab.matrix - sa_.matrix @ sb_.matrix, 2)
        for sab, sa_, sb_ in zip(evo_ab.snapshots, evo_a.snapshots, evo_b.snapshots)
    ]
    stats = evo_ab.stats.merge(evo_a.stats).merge(evo_b.stats)
    per = [
        (x[0] + y[0] + z[0], max(x[1], y[1], z[1]))
        for x, y, z in zip(evo_ab.per_time, evo_a.per_time, evo_b.per_time)
    ]
    merged = EvolutionResult(evo_ab.times, evo_ab.snapshots, stats, per)
    return _curve("joint_vs_separate", merged, values)


def commutator_values(evolution: EvolutionResult, b: DenseOperator):
    """|| [B, A(t)] ||_op along an existing Heisenberg evolution of A."""
    return np.array([
        np.linalg.norm(b.matrix @ s.matrix - s.matrix @ b.matrix, 2)
        for s in evolution.snapshots
    ])


def measure_commutator_lightcone(model: LindbladModel, a: DenseOperator,
                                 b: DenseOperator, time_grid,
                                 tol: float = DEFAULT_TOL) -> Curve:
    """|| [B, A(t)] ||_op with B held fixed; A and B start disjoint."""
    sa, sb = _required_support(a), _required_support(b)
    if set(sa) & set(sb):
        raise SupportViolation("light-cone observables must start disjoint")
    evo = evolve_adjoint(model, a, time_grid, tol)
    return _curve("commutator", evo, commutator_values(evo, b))
