import math

import numpy as np
import pytest

from lrspin.bounds import (
    BoundParams,
    appendix_tail_sums,
    decomposition_feasible,
    envelope_lemma1,
    envelope_lr,
    envelope_theorem,
    linear_exponent,
    minimize_h,
    n_q,
    q_star,
    q_zero,
    select_mu,
)
from lrspin.errors import NoDecay, OutsideValidity, RegimeInvalid


def test_hk_envelope_doubling_and_zero_time():
    p = BoundParams(alpha=3.0, C=1.7, v=0.9)
    assert envelope_lr(p, "hk", 4.0, 0.0) == 0.0
    v1 = envelope_lr(p, "hk", 4.0, 1.3)
    v2 = envelope_lr(p, "hk", 8.0, 1.3)
    assert v2 / v1 == pytest.approx(2.0**-3.0, rel=1e-12)
    direct = 1.7 * math.expm1(0.9 * 1.3) / 4.0**3
    assert v1 == pytest.approx(direct, rel=1e-12)


def test_zx_envelope_matches_direct_formula():
    p = BoundParams(alpha=2.5, C=2.0, v=0.7, mu=0.3)
    got = envelope_lr(p, "zx", 5.0, 1.2)
    want = 2.0 * math.exp(0.7 * 1.2) * ((0.7 * 5.0) ** -2.5 + math.exp(-0.3 * 5.0))
    assert got == pytest.approx(want, rel=1e-12)


def test_small_alpha_rate_from_chain_length():
    # alpha = 1/2 in d = 1 with 16 sites gives J = 16^{1/2} = 4
    p = BoundParams(alpha=0.5, C=1.0, N_sites=16)
    got = envelope_lr(p, "small_alpha", 2.0, 1.0)
    want = math.expm1(4.0) / (4.0 * 2.0**0.5)
    assert got == pytest.approx(want, rel=1e-12)
    # at alpha = d the rate degrades to log N
    p2 = BoundParams(alpha=1.0, C=1.0, N_sites=16)
    got2 = envelope_lemma1(p2, "small_alpha", 7.0, 0.5)
    j = math.log(16.0)
    assert got2 == pytest.approx(math.expm1(j * 0.5) / j, rel=1e-12)
    # no separation dependence in the lemma form
    assert envelope_lemma1(p2, "small_alpha", 100.0, 0.5) == pytest.approx(got2)


def test_power_law_envelope_scalings():
    p = BoundParams(alpha=3.0, d=1)
    v1 = envelope_lr(p, "power_law", 4.0, 0.5)
    assert envelope_lr(p, "power_law", 8.0, 0.5) / v1 == pytest.approx(0.5)
    p4 = BoundParams(alpha=4.0, d=1)
    w1 = envelope_lemma1(p4, "power", 4.0, 0.5)
    w2 = envelope_lemma1(p4, "power", 4.0, 1.0)
    assert w2 / w1 == pytest.approx(2.0 ** (4.0 - 1.0 + 1.0), rel=1e-12)


def test_linear_envelope_uses_interpolated_exponent():
    assert linear_exponent(4.0, 0.25) == pytest.approx(1.375)
    assert linear_exponent(5.0, 0.0) == pytest.approx(3.0)
    p = BoundParams(alpha=4.0, gamma_f=0.25)
    v1 = envelope_lr(p, "linear", 4.0, 0.8)
    assert v1 == pytest.approx(0.8 / 4.0**1.375, rel=1e-12)
    w = envelope_lemma1(p, "linear", 4.0, 0.8)
    assert w == pytest.approx(0.8**2 / 4.0, rel=1e-12)


def test_regime_validity_checks():
    with pytest.raises(RegimeInvalid):
        envelope_lr(BoundParams(alpha=1.5), "power_law", 4.0, 1.0)
    with pytest.raises(RegimeInvalid):
        envelope_lr(BoundParams(alpha=2.0, N_sites=8), "small_alpha", 4.0, 1.0)
    with pytest.raises(RegimeInvalid):
        envelope_lemma1(BoundParams(alpha=2.5), "power", 4.0, 1.0)
    with pytest.raises(RegimeInvalid):
        envelope_lemma1(BoundParams(alpha=4.0, d=2), "linear", 4.0, 1.0)
    with pytest.raises(RegimeInvalid):
        envelope_lr(BoundParams(alpha=3.0), "nope", 4.0, 1.0)
    with pytest.raises(OutsideValidity):
        envelope_lr(BoundParams(alpha=3.0), "hk", -1.0, 1.0)


def test_minimize_h_exact_case_balances_terms():
    # with lam' = v = 1, r = 4, alpha = 3, K = 16/e^2 the stationary time
    # is exactly 1 and both terms of h equal 1/e there
    p = BoundParams(alpha=3.0, d=1, v=1.0, K=16.0 / math.e**2, lam=0.5)
    out = minimize_h(p, "log", 4.0)
    assert out["t_closed"] == pytest.approx(1.0, rel=1e-12)
    assert out["h_closed"] == pytest.approx(2.0 / math.e, rel=1e-12)
    assert out["h_min"] <= out["grid_min"] + 1e-12


def test_minimize_h_exact_case_rate_exponent():
    # log h_min vs log r slope tends to -(alpha-d) 2 lam / (v + 2 lam)
    p = BoundParams(alpha=3.0, d=1, v=1.0, K=1.0, lam=0.5)
    rs = [2.0**k for k in range(5, 13)]
    hs = [minimize_h(p, "log", r)["h_min"] for r in rs]
    slope = np.polyfit(np.log(rs), np.log(hs), 1)[0]
    assert abs(slope - (-1.0)) < 0.05


def test_minimize_h_power_and_linear_ansatz():
    p = BoundParams(alpha=4.5, d=1, K=0.3, lam=0.7)
    out = minimize_h(p, "power", 32.0)
    assert out["t_closed"] == pytest.approx(1.0 + (1.5 / 1.4) * math.log(32.0))
    assert out["h_min"] <= out["grid_min"] + 1e-12
    out2 = minimize_h(p, "linear", 32.0)
    assert out2["t_closed"] == pytest.approx(1.0 + (1.5 / 1.4) * math.log(32.0))
    with pytest.raises(NoDecay):
        minimize_h(BoundParams(alpha=2.5, d=1, lam=0.7), "power", 32.0)
    with pytest.raises(NoDecay):
        minimize_h(BoundParams(alpha=2.5, d=1, lam=0.7), "linear", 32.0)


def test_minimize_h_grid_audit_on_random_draws():
    rng = np.random.default_rng(7)
    for _ in range(25):
        regime = ["log", "power", "linear"][rng.integers(3)]
        alpha = {"log": 1.5, "power": 3.2, "linear": 3.2}[regime] + rng.uniform(0, 2)
        p = BoundParams(
            alpha=alpha,
            d=1,
            v=rng.uniform(0.2, 2.0),
            K=rng.uniform(0.05, 5.0),
            lam=rng.uniform(0.1, 1.5),
        )
        r = rng.uniform(2.0, 300.0)
        out = minimize_h(p, regime, r)
        assert out["h_min"] <= out["grid_min"] + 1e-12
        assert out["h_min"] <= out["h_closed"] + 1e-12


def test_theorem_envelope_case1_rate():
    p = BoundParams(alpha=3.0, d=1, v=1.0, lam=0.5, c=2.0)
    a = envelope_theorem(p, "covariance", 2.0, case="1")
    b = envelope_theorem(p, "covariance", 4.0, case="1")
    # exponent (alpha-d) 2 lam/(v+2 lam) = 1, so doubling r halves the value
    assert b["value"] / a["value"] == pytest.approx(0.5, rel=1e-12)
    assert a["prefactor"] == pytest.approx(2.0)


def test_theorem_envelope_prefactors_and_rate_choice():
    p = BoundParams(alpha=3.0, d=1, v=1.0, lam=0.5, beta_ls=0.25, c=1.0,
                    log_rho_inv=4.0)
    cov = envelope_theorem(p, "covariance", 8.0, case="1")
    st = envelope_theorem(p, "stability", 8.0, case="1")
    mi = envelope_theorem(p, "mutual_info", 8.0, case="1")
    assert st["prefactor"] == pytest.approx(2.0)   # sqrt(4)
    assert mi["prefactor"] == pytest.approx(8.0)   # 4^{3/2}
    # covariance uses lam, the others use beta_ls
    exp_cov = 2 * 0.5 / (1 + 2 * 0.5)
    exp_mix = 2 * 0.25 / (1 + 2 * 0.25)
    assert cov["value"] == pytest.approx(8.0 ** (-2 * exp_cov), rel=1e-12)
    assert st["value"] == pytest.approx(2.0 * 8.0 ** (-2 * exp_mix), rel=1e-12)


def test_theorem_envelope_auto_picks_smallest_valid():
    p = BoundParams(alpha=5.0, d=1, v=1.0, lam=0.3)
    out = envelope_theorem(p, "covariance", 50.0, case="auto")
    assert out["value"] == pytest.approx(min(out["by_case"].values()))
    assert out["case"] in out["by_case"]
    with pytest.raises(RegimeInvalid):
        envelope_theorem(BoundParams(alpha=4.0, d=2), "covariance", 50.0, case="3")


def test_block_counts_frozen_values():
    assert n_q(1.5, 0.5, 256, 4) == 6
    assert q_star(1.5, 0.5, 256) == 2
    assert q_zero(1.5, 0.5, 256) == 3


def test_block_counts_monotone_and_positive():
    for q in range(1, 10):
        assert n_q(1.2, 0.25, 512, q) >= 1
        assert n_q(1.2, 0.25, 512, q) >= n_q(1.2, 0.25, 512, q + 1)


def test_select_mu_sits_at_feasibility_threshold():
    for r in [32, 128, 1024]:
        mu = select_mu(0.25, r)
        assert 0 < mu < 2
        assert decomposition_feasible(mu, 0.25, r)
        assert not decomposition_feasible(mu + 1.1e-6, 0.25, r)
        total = sum(
            (n_q(mu, 0.25, r, q) - 1) * 2**q
            for q in range(1, math.ceil(math.log2(r)) + 1)
        )
        assert total < r


def test_tail_sums_against_literal_recomputation():
    alpha, gamma_f, r, t = 4.0, 0.25, 256, 0.5
    out = appendix_tail_sums(alpha, gamma_f, r, t)
    mu, q0 = out["mu"], out["q0"]

    # the geometric tail takes over once the block count reaches one
    split = 1
    while n_q(mu, gamma_f, r, split) > 1:
        split += 1
    assert out["q_split"] == split
    assert n_q(mu, gamma_f, r, split - 1) > 1

    def term(q):
        return (
            math.e**2 * t * 2.0 ** (q * (2 * gamma_f + 3 - alpha)) / (mu**2 * r)
        ) ** n_q(mu, gamma_f, r, q)

    s1a = sum(term(q) for q in range(1, min(q0 - 1, split - 1) + 1))
    s1b = sum(term(q) for q in range(max(1, q0), split))
    s2 = sum(r * t * 2.0 ** (-(alpha - 1) * q) for q in range(split, r + 1))
    assert out["S1a"] == pytest.approx(s1a, rel=1e-10)
    assert out["S1b"] == pytest.approx(s1b, rel=1e-10)
    assert out["S2"] == pytest.approx(s2, rel=1e-10)
    assert out["total"] == pytest.approx(s1a + s1b + s2, rel=1e-10)
    assert out["exponent"] == pytest.approx(linear_exponent(alpha, gamma_f))


def test_tail_sums_compensated_total_is_flat_in_r():
    # total * r^e / t stays bounded with near-zero log-log slope
    alpha, gamma_f, t = 4.0, 0.25, 0.5
    e_exp = linear_exponent(alpha, gamma_f)
    comp = []
    for p in range(5, 15):
        r = 2**p
        out = appendix_tail_sums(alpha, gamma_f, r, t)
        comp.append(out["total"] * r**e_exp / t)
    logs = np.log2(np.asarray(comp))
    slope = np.polyfit(np.arange(5, 15, dtype=float), logs, 1)[0]
    assert abs(slope) <= 0.1


def test_tail_sums_zero_time_and_monotone_in_time():
    out0 = appendix_tail_sums(4.0, 0.25, 128, 0.0)
    assert out0["total"] == 0.0
    prev = 0.0
    for t in [0.05, 0.1, 0.2, 0.4]:
        tot = appendix_tail_sums(4.0, 0.25, 128, t)["total"]
        assert tot > prev
        prev = tot


def test_tail_sums_validity_window():
    with pytest.raises(OutsideValidity):
        appendix_tail_sums(4.0, 0.25, 64, 1e9)
    with pytest.raises(OutsideValidity):
        appendix_tail_sums(3.4, 0.25, 64, 0.1)   # alpha <= 3 + 2 gamma
    with pytest.raises(OutsideValidity):
        appendix_tail_sums(4.0, 0.25, 1, 0.1)
    with pytest.raises(RegimeInvalid):
        appendix_tail_sums(4.0, 1.5, 64, 0.1)


def test_params_from_dict_accepts_lambda_alias():
    p = BoundParams.from_dict({"alpha": 3.0, "lambda": 0.25, "C": 2.0})
    assert p.lam == 0.25
    assert p.C == 2.0
    with pytest.raises(RegimeInvalid):
        BoundParams(alpha=-1.0)
