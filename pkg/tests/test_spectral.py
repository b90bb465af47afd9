"""Spectral analysis: frozen small-system spectra, biorthonormality, detailed
balance, and the gap-based decay checks."""

import numpy as np
import pytest

from lrspin import pauli
from lrspin.errors import NonPrimitive, NotReversible, SingularSteadyState
from lrspin.model import (
    LatticeSpec,
    LindbladModel,
    LocalTerm,
    build_davies_thermal,
    build_xy_damped,
)
from lrspin.spectral import (
    analyze,
    biorthonormality_defect,
    check_covariance_decay,
    check_s_reversibility,
    check_variance_decay,
    covariance,
    require_reversible,
    slowest_hermitian_mode,
    steady_state_and_gap,
    variance,
)
from lrspin.superop import DenseOperator


def damped_qubit(gamma):
    return LindbladModel(
        lattice=LatticeSpec(1),
        terms=(LocalTerm("jump", (0,), pauli.SM, float(np.sqrt(gamma))),),
        alpha=3.0,
    )


class TestAmplitudeDampingSpectrum:
    """Exact spectrum of the one-qubit damping generator: {0, -g/2, -g/2, -g}."""

    def test_eigenvalues_frozen(self):
        g = 0.7
        data = analyze(damped_qubit(g))
        got = np.sort_complex(data.eigenvalues)
        want = np.sort_complex(np.array([0.0, -g / 2, -g / 2, -g], dtype=complex))
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_sorted_by_abs_real_part(self):
        data = analyze(damped_qubit(0.7))
        order = np.abs(data.eigenvalues.real)
        assert np.all(np.diff(order) >= -1e-15)
        assert data.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)

    def test_steady_state_is_ground(self):
        data = analyze(damped_qubit(0.4))
        want = np.diag([1.0, 0.0]).astype(complex)
        np.testing.assert_allclose(data.steady_state, want, atol=1e-12)
        assert data.primitive
        assert data.null_dim == 1

    def test_gap_is_half_gamma(self):
        g = 0.9
        data = analyze(damped_qubit(g))
        assert data.gap == pytest.approx(g / 2, rel=1e-12)

    def test_zero_mode_pair_normalization(self):
        data = analyze(damped_qubit(0.5))
        np.testing.assert_allclose(data.right_ops[0], data.steady_state,
                                   atol=1e-14)
        np.testing.assert_allclose(data.left_ops[0], np.eye(2), atol=1e-14)

    def test_eigen_residuals_small(self):
        data = analyze(damped_qubit(0.5))
        assert np.max(data.residuals) < 1e-10


def test_biorthonormality_generic_path(xy3):
    data = analyze(xy3)
    assert data.method.startswith("geev")
    assert biorthonormality_defect(data) < 1e-8


def test_biorthonormality_and_real_spectrum_reversible_path(davies3):
    data = analyze(davies3)
    assert data.method == "reversible-eigh"
    assert np.max(np.abs(data.eigenvalues.imag)) == 0.0
    assert biorthonormality_defect(data) < 1e-8
    assert data.primitive


def test_reversible_and_generic_paths_agree(davies3):
    fast = analyze(davies3)
    slow = analyze(davies3, force_generic=True)
    np.testing.assert_allclose(
        np.sort(fast.eigenvalues.real), np.sort(slow.eigenvalues.real),
        atol=1e-9)
    np.testing.assert_allclose(fast.steady_state, slow.steady_state, atol=1e-9)
    assert fast.gap == pytest.approx(slow.gap, rel=1e-6)


def test_davies_steady_state_is_gibbs(davies3):
    data = analyze(davies3)
    np.testing.assert_allclose(data.steady_state, davies3.steady_state_hint,
                               atol=1e-10)


def test_unitary_only_model_not_primitive():
    m = LindbladModel(
        lattice=LatticeSpec(1),
        terms=(LocalTerm("hamiltonian", (0,), pauli.Z, 0.5),),
        alpha=3.0,
    )
    data = analyze(m)
    assert not data.primitive
    assert data.null_dim > 1
    # projection of the maximally mixed state is still a valid state
    assert np.trace(data.steady_state).real == pytest.approx(1.0, abs=1e-12)


def test_steady_state_and_gap_matches_analyze(davies3):
    ref = analyze(davies3)
    got = steady_state_and_gap(davies3, k=6)
    np.testing.assert_allclose(got["steady_state"], ref.steady_state, atol=1e-8)
    assert got["gap"] == pytest.approx(ref.gap, rel=1e-6)
    assert got["null_dim"] == 1


def test_reversibility_davies(davies3):
    res = check_s_reversibility(davies3, analyze(davies3).steady_state, s=0.5)
    assert res["reversible"]
    assert res["residual"] <= 1e-8


@pytest.mark.parametrize("s", [0.0, 0.25, 0.5, 1.0])
def test_reversibility_all_s_davies(davies3, s):
    """Davies dissipators with commuting jumps satisfy every s."""
    res = check_s_reversibility(davies3, davies3.steady_state_hint, s=s)
    assert res["reversible"]


def test_xy_damped_not_reversible_or_singular():
    m = build_xy_damped(LatticeSpec(3), alpha=3.0)
    data = analyze(m)
    try:
        res = check_s_reversibility(m, data.steady_state, s=0.5)
        assert not res["reversible"]
    except SingularSteadyState:
        pass  # pure steady state has no modular structure; also a correct report


def test_require_reversible_raises():
    """A generator with a full-rank but non-balanced fixed point."""
    # dephasing plus a Hamiltonian that does not commute with it
    m = LindbladModel(
        lattice=LatticeSpec(1),
        terms=(
            LocalTerm("hamiltonian", (0,), pauli.X, 0.7),
            LocalTerm("jump", (0,), pauli.Z, 0.5),
        ),
        alpha=3.0,
    )
    data = analyze(m)
    if data.primitive:
        with pytest.raises(NotReversible):
            require_reversible(m, data.steady_state)


def test_variance_formula():
    sigma = np.diag([0.7, 0.3]).astype(complex)
    # Var[Z] = 1 - (0.4)^2
    assert variance(sigma, pauli.Z) == pytest.approx(1 - 0.4**2, rel=1e-14)
    assert variance(sigma, np.eye(2, dtype=complex)) == pytest.approx(0.0, abs=1e-14)


def test_covariance_formula():
    sigma = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)  # classical corr
    zz_a = np.kron(pauli.Z, np.eye(2))
    zz_b = np.kron(np.eye(2), pauli.Z)
    # <Z_a Z_b> = 1, <Z_a> = <Z_b> = 0
    assert covariance(sigma, zz_a, zz_b) == pytest.approx(1.0, rel=1e-14)


def test_variance_decay_bound_and_saturation(davies3):
    data = analyze(davies3)
    lam1, f_slow = slowest_hermitian_mode(data)
    assert lam1 == pytest.approx(-data.gap, abs=1e-12)
    grid = np.linspace(0.0, 1.0 / data.gap, 5)
    res = check_variance_decay(davies3, data, f_slow, grid)
    assert not res["vacuous"]
    assert res["worst_ratio"] <= 1 + 1e-6
    # the slowest mode saturates the bound at all times
    np.testing.assert_allclose(res["ratios"], 1.0, rtol=1e-5)


def test_variance_decay_random_observables(davies3, rng):
    data = analyze(davies3)
    grid = np.linspace(0.0, 0.7 / data.gap, 4)
    for _ in range(5):
        f = pauli.random_hermitian(8, rng)
        res = check_variance_decay(davies3, data, f, grid)
        assert res["worst_ratio"] <= 1 + 1e-6


def test_variance_decay_vacuous_for_identity(davies3):
    data = analyze(davies3)
    res = check_variance_decay(davies3, data, np.eye(8, dtype=complex),
                               [0.0, 1.0])
    assert res["vacuous"]
    assert res["worst_ratio"] == 0.0


def test_variance_decay_requires_reversible(xy3):
    data = analyze(xy3)
    with pytest.raises((NotReversible, SingularSteadyState)):
        check_variance_decay(xy3, data, np.eye(8, dtype=complex), [0.0, 1.0])


def test_covariance_decay_bound(davies3, rng):
    data = analyze(davies3)
    grid = np.linspace(0.0, 0.5 / data.gap, 4)
    for _ in range(3):
        f = pauli.random_hermitian(8, rng)
        g = pauli.random_hermitian(8, rng)
        res = check_covariance_decay(davies3, data, f, g, grid)
        assert res["worst_ratio"] <= 1 + 1e-6


def test_nonprimitive_rejected_by_decay_checks():
    m = LindbladModel(
        lattice=LatticeSpec(1),
        terms=(LocalTerm("jump", (0,), pauli.Z, 0.4),),  # pure dephasing
        alpha=3.0,
    )
    data = analyze(m)
    assert not data.primitive
    with pytest.raises(NonPrimitive):
        check_variance_decay(m, data, pauli.Z, [0.0, 1.0])
