"""Model types and builders for power-law interacting Lindblad chains.

A model is a list of local terms (Hamiltonian pieces and jump operators) on a
1d qubit lattice, together with a decay exponent alpha. Every builder enforces
the two-site budget

    sum over terms touching both i and j of proxy(term)  <=  dist(i, j)^(-alpha)

where proxy = 2 * strength * ||H|| for a Hamiltonian term and
2 * strength^2 * ||L||^2 for a jump. Single-site terms carry no pair budget.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import pauli
from .errors import (
    DimensionMismatch,
    EmptyRegion,
    InvalidAlpha,
    SupportViolation,
    TooLarge,
)

# Dense-vector treatment of 2^N states caps the chain length.
SIM_CAP = 10

HAMILTONIAN = "hamiltonian"
JUMP = "jump"


@dataclass(frozen=True)
class LatticeSpec:
    """One-dimensional chain of qubits with unit spacing."""

    num_sites: int
    dimension: int = 1

    def __post_init__(self):
        if self.num_sites < 1:
            raise ValueError("num_sites must be positive")
        if self.dimension != 1:
            raise ValueError("only 1d chains are implemented")

    def dist(self, i: int, j: int) -> int:
        self._check_site(i)
        self._check_site(j)
        return abs(i - j)

    def _check_site(self, i: int):
        if not 0 <= i < self.num_sites:
            raise ValueError(f"site {i} outside lattice of {self.num_sites}")

    def sites(self):
        return tuple(range(self.num_sites))


@dataclass(frozen=True)
class Region:
    """Nonempty ordered set of site indices."""

    sites: tuple

    def __post_init__(self):
        s = tuple(sorted(set(int(i) for i in self.sites)))
        if not s:
            raise EmptyRegion("region must contain at least one site")
        object.__setattr__(self, "sites", s)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, i):
        return i in self.sites


def as_region(x) -> Region:
    if isinstance(x, Region):
        return x
    if isinstance(x, int):
        return Region((x,))
    return Region(tuple(x))


def region_distance(x, y) -> int:
    """Minimum |i - j| over i in x, j in y; zero when the regions meet."""
    xr, yr = as_region(x), as_region(y)
    return min(abs(i - j) for i in xr for j in yr)


def ball_sites(lattice: LatticeSpec, center, radius: int) -> tuple:
    """All lattice sites within graph distance radius of the center region."""
    c = as_region(center)
    return tuple(
        i for i in lattice.sites() if min(lattice.dist(i, j) for j in c) <= radius
    )


@dataclass(frozen=True)
class LocalTerm:
    """One Hamiltonian piece or one jump operator on a few sites.

    local_matrix lives on the tensor product of the support sites in ascending
    order; strength is a nonnegative scalar multiplying it. Supports are kept
    honest: the matrix must actually act on every listed site.
    """

    kind: str
    support: tuple
    local_matrix: np.ndarray
    strength: float

    def __post_init__(self):
        if self.kind not in (HAMILTONIAN, JUMP):
            raise ValueError(f"unknown term kind {self.kind!r}")
        sup = tuple(sorted(set(int(i) for i in self.support)))
        if not sup:
            raise EmptyRegion("term support must be nonempty")
        object.__setattr__(self, "support", sup)
        m = np.asarray(self.local_matrix, dtype=complex)
        d = 1 << len(sup)
        if m.shape != (d, d):
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not fit support of {len(sup)} sites"
            )
        object.__setattr__(self, "local_matrix", m)
        if self.strength < 0:
            raise ValueError("strength must be nonnegative")
        if self.kind == HAMILTONIAN and not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValueError("hamiltonian terms must be Hermitian")

    def norm_proxy(self) -> float:
        """Pair-budget cost of this term."""
        nrm = pauli.operator_norm(self.local_matrix)
        if self.kind == HAMILTONIAN:
            return 2.0 * self.strength * nrm
        return 2.0 * self.strength**2 * nrm**2

    def scaled_matrix(self) -> np.ndarray:
        return self.strength * self.local_matrix


@dataclass(frozen=True)
class LindbladModel:
    """Immutable bundle of lattice, terms, and decay exponent."""

    lattice: LatticeSpec
    terms: tuple
    alpha: float
    label: str = "model"
    family: str = "custom"
    steady_state_hint: np.ndarray = None
    reversible_hint: bool = False
    perturbation_region: Region = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        n = self.lattice.num_sites
        for t in self.terms:
            if any(i < 0 or i >= n for i in t.support):
                raise SupportViolation(
                    f"term support {t.support} outside lattice of {n} sites"
                )
        if self.alpha <= 0:
            raise InvalidAlpha("alpha must be positive")

    @property
    def num_sites(self):
        return self.lattice.num_sites

    @property
    def dim(self):
        return 1 << self.lattice.num_sites

    def hamiltonian_terms(self):
        return tuple(t for t in self.terms if t.kind == HAMILTONIAN)

    def jump_terms(self):
        return tuple(t for t in self.terms if t.kind == JUMP)


def pair_proxy_sums(model: LindbladModel) -> dict:
    """Sum of term proxies for every site pair covered by some term."""
    out = {}
    for t in model.terms:
        if len(t.support) < 2:
            continue
        p = t.norm_proxy()
        for a in range(len(t.support)):
            for b in range(a + 1, len(t.support)):
                key = (t.support[a], t.support[b])
                out[key] = out.get(key, 0.0) + p
    return out


def power_law_margins(model: LindbladModel) -> dict:
    """dist^(-alpha) minus the proxy sum, per pair; negative means violated."""
    margins = {}
    for (i, j), p in pair_proxy_sums(model).items():
        budget = float(model.lattice.dist(i, j)) ** (-model.alpha)
        margins[(i, j)] = budget - p
    return margins


def verify_power_law(model: LindbladModel, rel_slack: float = 1e-12) -> float:
    """Check the two-site budget on every pair, returning the worst margin."""
    worst = np.inf
    for (i, j), m in power_law_margins(model).items():
        budget = float(model.lattice.dist(i, j)) ** (-model.alpha)
        if m < -rel_slack * budget:
            raise SupportViolation(
                f"power-law budget exceeded on pair ({i}, {j}) by {-m:.3e}"
            )
        worst = min(worst, m)
    return worst


def _check_build_args(lattice, alpha):
    if alpha <= 0:
        raise InvalidAlpha("alpha must be positive")
    if lattice.num_sites > SIM_CAP:
        raise TooLarge(
            f"chain of {lattice.num_sites} sites exceeds dense cap {SIM_CAP}"
        )


def build_xy_damped(
    lattice: LatticeSpec,
    alpha: float,
    coupling_scale: float = 0.25,
    damping_rate: float = 0.2,
) -> LindbladModel:
    """Power-law XY chain with uniform single-site amplitude damping.

    Couplings are J_ij = s_eff * dist^(-alpha) on the XX + YY pair operator,
    with s_eff capped at 1/4 so each pair saturates at most its full budget
    (||XX + YY|| = 2, so the proxy of one pair term is 4 J_ij). Damping jumps
    are single-site lowering operators at rate damping_rate and cost nothing
    against the pair budget.
    """
    _check_build_args(lattice, alpha)
    if damping_rate < 0 or coupling_scale < 0:
        raise ValueError("rates must be nonnegative")
    s_eff = min(coupling_scale, 0.25)
    xxyy = np.kron(pauli.X, pauli.X) + np.kron(pauli.Y, pauli.Y)
    terms = []
    n = lattice.num_sites
    for i in range(n):
        for j in range(i + 1, n):
            jij = s_eff * float(lattice.dist(i, j)) ** (-alpha)
            if jij > 0:
                terms.append(LocalTerm(HAMILTONIAN, (i, j), xxyy, jij))
    if damping_rate > 0:
        s = float(np.sqrt(damping_rate))
        for i in range(n):
            terms.append(LocalTerm(JUMP, (i,), pauli.SM, s))
    # All-|0> product state is stationary: damping targets it and it is an
    # XX + YY zero mode.
    sigma = np.zeros((1 << n, 1 << n), dtype=complex)
    sigma[0, 0] = 1.0
    model = LindbladModel(
        lattice=lattice,
        terms=terms,
        alpha=alpha,
        label=f"xy_damped(N={n}, alpha={alpha:g})",
        family="xy_damped",
        steady_state_hint=sigma if damping_rate > 0 else None,
        meta={
            "coupling_scale": coupling_scale,
            "coupling_scale_effective": s_eff,
            "damping_rate": damping_rate,
        },
    )
    verify_power_law(model)
    return model


def _spin_values(num_sites: int) -> np.ndarray:
    """(D, N) array of +-1 spins; bit 0 of site 0 is the leftmost factor."""
    d = 1 << num_sites
    z = np.arange(d)
    bits = (z[:, None] >> (num_sites - 1 - np.arange(num_sites))) & 1
    return 1.0 - 2.0 * bits


def _ising_couplings(lattice: LatticeSpec, alpha: float, ising_scale: float):
    n = lattice.num_sites
    jbar = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                jbar[i, j] = ising_scale * float(lattice.dist(i, j)) ** (-alpha)
    return jbar


def _group_by_value(values: np.ndarray, tol: float):
    """Indices grouped by near-equal value; returns list of (value, indices)."""
    order = np.argsort(values, kind="stable")
    groups = []
    cur = [order[0]]
    for idx in order[1:]:
        if values[idx] - values[cur[-1]] <= tol:
            cur.append(idx)
        else:
            groups.append(cur)
            cur = [idx]
    groups.append(cur)
    return [(float(np.mean(values[g])), np.array(g)) for g in groups]


def build_davies_thermal(
    lattice: LatticeSpec,
    alpha: float,
    ising_scale: float = 0.4,
    beta_T: float = 1.0,
    base_rate: float = 0.1,
    pair_dephasing: bool = True,
    dephasing_rate: float = 0.1,
    field: float = 0.0,
) -> LindbladModel:
    """Thermalizing spin-flip model with the Gibbs state of a classical
    long-range Ising energy as its stationary state.

    The energy is E(z) = sum_{i<j} Jbar_ij s_i s_j - (field/2) sum_i s_i with
    Jbar_ij = ising_scale * dist^(-alpha). Jump operators are the frequency
    components of each sigma^x_i with respect to E: one operator per distinct
    energy drop omega, carrying the flip rate

        rate(omega) = base * 1 / (1 + exp(-beta_T * omega)),

    so release and absorption of the same omega satisfy
    rate(+omega) / rate(-omega) = exp(beta_T * omega). Hermitian dephasing
    jumps are added on top: single-site Z_i always (when dephasing_rate > 0),
    plus optional Z_i Z_j pairs. Both commute with E and leave the Gibbs state
    fixed. The single-site pieces matter beyond realism: with zero field the
    flip components all commute with the global spin flip X...X, which would
    otherwise be an exactly conserved observable and the generator would not
    be primitive. Z_i anticommutes with the global flip and removes the
    degeneracy.

    Frequency components of an interacting energy function act on the whole
    flip neighborhood, so their supports span the chain; the pair budget is
    still enforced exactly by rescaling base (and the dephasing weight) until
    every pair fits. The Boltzmann ratio above is scale-invariant, so the
    rescale never disturbs detailed balance. The returned model records the
    effective rates in meta.
    """
    _check_build_args(lattice, alpha)
    if beta_T < 0:
        raise ValueError("beta_T must be nonnegative")
    if base_rate < 0 or dephasing_rate < 0 or ising_scale < 0:
        raise ValueError("rates must be nonnegative")
    n = lattice.num_sites
    d = 1 << n
    spins = _spin_values(n)
    jbar = _ising_couplings(lattice, alpha, ising_scale)
    energies = 0.5 * np.einsum("zi,ij,zj->z", spins, jbar, spins) - 0.5 * field * (
        spins.sum(axis=1)
    )

    # Per-site flip frequencies, computed from the local field directly so
    # equal frequencies come out bit-identical and group exactly.
    terms = []
    raw_pair = {}
    freq_tol = 1e-12 * max(1.0, float(np.max(np.abs(energies))))
    for i in range(n):
        local_field = spins @ jbar[i]
        # energy released by flipping site i out of configuration z
        omega = 2.0 * spins[:, i] * local_field - field * spins[:, i]
        flipped = np.arange(d) ^ (1 << (n - 1 - i))
        for w, zs in _group_by_value(omega, freq_tol):
            a = np.zeros((d, d), dtype=complex)
            a[flipped[zs], zs] = 1.0
            sup = pauli.operator_support(a, n)
            rel = 1.0 / (1.0 + np.exp(-beta_T * w))
            terms.append((LocalTerm(JUMP, sup, _restrict(a, sup, n), 1.0), rel))
    # Budget bookkeeping with base = 1: proxy = 2 * rel * ||A||^2 per pair.
    for t, rel in terms:
        if len(t.support) < 2:
            continue
        p = 2.0 * rel * pauli.operator_norm(t.local_matrix) ** 2
        for a_ in range(len(t.support)):
            for b_ in range(a_ + 1, len(t.support)):
                key = (t.support[a_], t.support[b_])
                raw_pair[key] = raw_pair.get(key, 0.0) + p

    deph_eff = min(dephasing_rate, 0.45) if pair_dephasing and n > 1 else 0.0
    deph_share = 0.0 if deph_eff == 0.0 else 1.0
    base_eff = base_rate
    if raw_pair:
        scale_cap = np.inf
        for (i, j), p in raw_pair.items():
            budget = float(lattice.dist(i, j)) ** (-alpha)
            thermal_budget = budget * (1.0 - 0.5 * deph_share)
            scale_cap = min(scale_cap, thermal_budget / p)
        base_eff = min(base_rate, (1.0 - 1e-9) * scale_cap)

    final_terms = []
    for t, rel in terms:
        s = float(np.sqrt(base_eff * rel))
        if s > 0:
            final_terms.append(replace(t, strength=s))
    if dephasing_rate > 0:
        # single-site dephasing: budget-free, breaks the global-flip symmetry
        s1 = float(np.sqrt(dephasing_rate))
        for i in range(n):
            final_terms.append(LocalTerm(JUMP, (i,), pauli.Z, s1))
    if deph_eff > 0:
        zz = np.kron(pauli.Z, pauli.Z)
        for i in range(n):
            for j in range(i + 1, n):
                budget = float(lattice.dist(i, j)) ** (-alpha)
                q = deph_eff * 0.5 * budget
                # proxy of this term is 2 s^2, keep it at half the pair budget
                s = float(np.sqrt(q / 2.0) * (1.0 - 1e-9))
                if s > 0:
                    final_terms.append(LocalTerm(JUMP, (i, j), zz, s))

    w = np.exp(-beta_T * (energies - energies.min()))
    sigma = np.diag(w / w.sum()).astype(complex)
    model = LindbladModel(
        lattice=lattice,
        terms=final_terms,
        alpha=alpha,
        label=f"davies_thermal(N={n}, alpha={alpha:g}, beta={beta_T:g})",
        family="davies_thermal",
        steady_state_hint=sigma,
        reversible_hint=True,
        meta={
            "ising_scale": ising_scale,
            "beta_T": beta_T,
            "base_rate": base_rate,
            "base_rate_effective": base_eff,
            "dephasing_rate": dephasing_rate,
            "dephasing_rate_effective": deph_eff,
            "field": field,
            "energies": energies,
        },
    )
    verify_power_law(model)
    return model


def _restrict(matrix: np.ndarray, support: tuple, num_sites: int) -> np.ndarray:
    """Factor out identity sites, returning the matrix on the support alone."""
    if len(support) == num_sites:
        return matrix
    if not support:
        # proportional to identity; keep the scalar on a dummy one-site matrix
        raise SupportViolation("jump proportional to identity has empty support")
    others = [k for k in range(num_sites) if k not in support]
    t = matrix.reshape((2,) * num_sites + (2,) * num_sites)
    # fix identity sites to (0, 0); the factor on the support is unchanged
    idx = [slice(None)] * (2 * num_sites)
    for k in others:
        idx[k] = 0
        idx[num_sites + k] = 0
    small = t[tuple(idx)]
    k = len(support)
    return np.ascontiguousarray(small.reshape((1 << k, 1 << k)))


def truncate_to_ball(model: LindbladModel, center, radius: int) -> LindbladModel:
    """Drop every term whose support leaves the ball around the center region.

    Idempotent: truncating twice at the same radius is a no-op.
    """
    keep = set(ball_sites(model.lattice, center, radius))
    terms = tuple(t for t in model.terms if set(t.support) <= keep)
    return replace(
        model,
        terms=terms,
        label=f"{model.label}|ball(r={radius})",
        steady_state_hint=None,
        reversible_hint=False,
    )


def add_local_perturbation(model: LindbladModel, new_terms, region) -> LindbladModel:
    """Append extra terms supported inside the given region.

    The perturbed model keeps the original alpha and must still satisfy the
    pair budget; steady-state hints are dropped since the fixed point moves.
    """
    x = as_region(region)
    new_terms = tuple(new_terms)
    for t in new_terms:
        if not set(t.support) <= set(x.sites):
            raise SupportViolation(
                f"perturbation term on {t.support} leaves region {x.sites}"
            )
    out = replace(
        model,
        terms=model.terms + new_terms,
        label=f"{model.label}+perturbation",
        steady_state_hint=None,
        reversible_hint=False,
        perturbation_region=x,
    )
    verify_power_law(out)
    return out


# ---------------------------------------------------------------------------
# Serialization


def model_from_config(cfg: dict) -> LindbladModel:
    """Build a model from the compact JSON description.

    Expected keys: family ("xy_damped" or "davies_thermal"), N, alpha, rates
    (a dict of the builder's rate arguments), beta_T for the thermal family,
    and an optional seed (recorded but unused by the deterministic builders).
    """
    family = cfg["family"]
    lattice = LatticeSpec(int(cfg["N"]))
    alpha = float(cfg["alpha"])
    rates = dict(cfg.get("rates", {}))
    if family == "xy_damped":
        model = build_xy_damped(
            lattice,
            alpha,
            coupling_scale=float(rates.get("coupling_scale", 0.25)),
            damping_rate=float(rates.get("damping_rate", 0.2)),
        )
    elif family == "davies_thermal":
        model = build_davies_thermal(
            lattice,
            alpha,
            ising_scale=float(rates.get("ising_scale", 0.4)),
            beta_T=float(cfg.get("beta_T", 1.0)),
            base_rate=float(rates.get("base_rate", 0.1)),
            pair_dephasing=bool(rates.get("pair_dephasing", True)),
            dephasing_rate=float(rates.get("dephasing_rate", 0.1)),
            field=float(rates.get("field", 0.0)),
        )
    else:
        raise ValueError(f"unknown model family {family!r}")
    if "seed" in cfg:
        model.meta["seed"] = int(cfg["seed"])
    return model


def _matrix_to_json(m: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def model_to_terms_json(model: LindbladModel) -> dict:
    """Explicit term-list form: every term with support, kind, strength, and
    its row-major complex matrix as [re, im] pairs."""
    return {
        "label": model.label,
        "family": model.family,
        "N": model.lattice.num_sites,
        "d": model.lattice.dimension,
        "alpha": model.alpha,
        "terms": [
            {
                "kind": t.kind,
                "support": list(t.support),
                "strength": t.strength,
                "matrix": _matrix_to_json(t.local_matrix),
            }
            for t in model.terms
        ],
    }


def model_from_terms_json(data: dict) -> LindbladModel:
    lattice = LatticeSpec(int(data["N"]), int(data.get("d", 1)))
    terms = [
        LocalTerm(
            kind=t["kind"],
            support=tuple(t["support"]),
            local_matrix=_matrix_from_json(t["matrix"]),
            strength=float(t["strength"]),
        )
        for t in data["terms"]
    ]
    model = LindbladModel(
        lattice=lattice,
        terms=terms,
        alpha=float(data["alpha"]),
        label=data.get("label", "model"),
        family=data.get("family", "custom"),
    )
    verify_power_law(model)
    return model


def save_terms_json(model: LindbladModel, path):
    with open(path, "w") as f:
        json.dump(model_to_terms_json(model), f, indent=1, sort_keys=True)
        f.write("\n")


def load_model(path) -> LindbladModel:
    """Load either config form or explicit term-list form from a JSON file."""
    with open(path) as f:
        data = json.load(f)
    if "terms" in data:
        return model_from_terms_json(data)
    return model_from_config(data)
