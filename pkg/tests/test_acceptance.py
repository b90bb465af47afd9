"""End-to-end acceptance gate.

Runs the full default verification once (shared across criteria) and
checks each shipped guarantee, printing one pass/fail line per
criterion. Run with -s to see the lines; on failure the line is in the
assertion message.
"""
import filecmp
import os
import time

import pytest

from lrspin import harness
from lrspin.cli import cli


@pytest.fixture(scope="module")
def full_run():
    cfg = harness.load_config(None)
    t0 = time.monotonic()
    report = harness.run_all(cfg, threads=4)
    elapsed = time.monotonic() - t0
    by_id = {r.check_id: r for r in report.records}
    return {"cfg": cfg, "report": report, "by_id": by_id, "elapsed": elapsed}


def _line(num, title, ok, detail):
    msg = f"criterion {num:02d} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    print(msg)
    assert ok, msg


def test_criterion_01_conservation_and_structure(full_run):
    rec = full_run["by_id"]["generator/identities"]
    d = rec.details
    worst = max(d["max_identity_residual"], d["max_trace_residual"],
                d["max_hermiticity_residual"])
    ok = rec.passed and d["cases"] == 200 and worst <= 1e-10
    _line(1, "conservation and structure", ok,
          f"{d['cases']} cases, worst residual {worst:.3e} <= 1e-10")


def test_criterion_02_integrator_matches_exponential(full_run):
    rec = full_run["by_id"]["generator/integrator-vs-expm"]
    d = rec.details
    gen_cfg = full_run["cfg"]["generator"]
    ok = (rec.passed and d["pairs"] == 50 and d["max_difference"] <= 1e-8
          and gen_cfg["expm_max_sites"] == 4)
    _line(2, "integrator vs dense exponential", ok,
          f"{d['pairs']} pairs up to N=4, max difference "
          f"{d['max_difference']:.3e} <= 1e-8")


def test_criterion_03_spectral_decay_suite(full_run):
    by_id = full_run["by_id"]
    scfg = full_run["cfg"]["spectral"]
    ok = scfg["variance_draws"] == 50 and scfg["covariance_pairs"] == 50
    worst = {}
    for n in (3, 4):
        rec = by_id[f"spectral/davies-N{n}"]
        d = rec.details
        ok = (ok and rec.passed
              and d["biorthonormality_defect"] <= 1e-8
              and d["max_imag_eigenvalue"] <= 1e-8
              and d["variance_worst_ratio"] <= 1.0 + 1e-6
              and d["covariance_worst_ratio"] <= 1.0)
        worst[n] = d
    _line(3, "spectral decay on Davies chains", ok,
          "N=3,4: biorthonormality "
          + ",".join(f"{worst[n]['biorthonormality_defect']:.1e}" for n in (3, 4))
          + ", variance ratio "
          + ",".join(f"{worst[n]['variance_worst_ratio']:.6f}" for n in (3, 4))
          + ", covariance ratio "
          + ",".join(f"{worst[n]['covariance_worst_ratio']:.3f}" for n in (3, 4)))


def test_criterion_04_reversibility(full_run):
    by_id = full_run["by_id"]
    sizes = full_run["cfg"]["reversibility"]["davies_sizes"]
    ok = True
    residuals = []
    for n in sizes:
        rec = by_id[f"reversibility/davies-N{n}"]
        ok = ok and rec.passed and rec.details["residual"] <= 1e-8
        residuals.append(rec.details["residual"])
    xy = by_id[f"reversibility/xy-N{full_run['cfg']['reversibility']['xy_size']}"]
    ok = (ok and xy.passed
          and xy.details["outcome"] in ("SingularSteadyState", "non-reversible"))
    _line(4, "detailed balance", ok,
          f"Davies N={sizes} residuals "
          + ",".join(f"{r:.1e}" for r in residuals)
          + f" <= 1e-8; XY model: {xy.details['outcome']}")


def test_criterion_05_lightcone_envelopes(full_run):
    by_id = full_run["by_id"]
    lcfg = full_run["cfg"]["lightcone"]
    ok = True
    worst_margin = 0.0
    for n in lcfg["sizes"]:
        for a in lcfg["alphas"]:
            rec = by_id[f"lightcone/xy-N{n}-a{a:g}"]
            ok = ok and rec.passed
            worst_margin = min(worst_margin, rec.margin_min)
    ok = ok and worst_margin >= -1e-9
    worst_ratio = 0.0
    for a in lcfg["alphas"]:
        for qty in ("commutator", "truncation", "joint"):
            rec = by_id[f"lightcone/stability-a{a:g}-{qty}"]
            ok = ok and rec.passed and rec.details["ratio"] <= 2.0
            worst_ratio = max(worst_ratio, rec.details["ratio"])
    _line(5, "light-cone envelopes", ok,
          f"9 chains under fitted envelopes, worst margin {worst_margin:.2e} "
          f">= -1e-9, C stability ratio {worst_ratio:.3f} <= 2")


def test_criterion_06_h_minimizer(full_run):
    by_id = full_run["by_id"]
    audit = by_id["hopt/audit"]
    slope = by_id["hopt/exact-slope"]
    hcfg = full_run["cfg"]["hopt"]
    # exact-case target for the default parameters: -(alpha-d)*2*lam/(v+2*lam)
    target = -(hcfg["slope_alpha"] - 1.0) * 2 * hcfg["slope_lam"] / (
        hcfg["slope_v"] + 2 * hcfg["slope_lam"])
    ok = (audit.passed and audit.details["draws"] == 100
          and audit.details["worst_excess"] <= 1e-12
          and slope.passed
          and abs(slope.details["target"] - target) <= 1e-12
          and abs(slope.details["slope"] - target) <= 0.05)
    _line(6, "h(t) minimizer", ok,
          f"100 draws, worst excess over grid {audit.details['worst_excess']:.2e}"
          f" <= 1e-12; log-log slope {slope.details['slope']:.4f} vs exact "
          f"{target:g} within 0.05")


def test_criterion_07_dyadic_tail_sums(full_run):
    by_id = full_run["by_id"]
    acfg = full_run["cfg"]["appendix"]
    feas = by_id["appendix/mu-feasibility"]
    recomp = by_id["appendix/integer-recompute"]
    flat = by_id["appendix/flatness"]
    ok = (feas.passed and feas.details["violations"] == []
          and list(acfg["feasibility_powers"]) == list(range(5, 15))
          and recomp.passed and recomp.details["draws"] == 1000
          and recomp.details["mismatches"] == 0
          and flat.passed and abs(flat.details["slope"]) <= 0.1)
    _line(7, "dyadic tail sums", ok,
          f"mu feasible for all r in 2^5..2^14; block counts match on "
          f"{recomp.details['draws']} integer recomputations; compensated "
          f"total slope {flat.details['slope']:+.3f} within 0.1")


def test_criterion_08_steady_state_clustering(full_run):
    by_id = full_run["by_id"]
    n = full_run["cfg"]["clustering"]["size"]
    suite = by_id[f"clustering/davies-N{n}"]
    oracle = by_id["clustering/oracle-2q"]
    d = suite.details
    cases = oracle.details["cases"]
    ok = (suite.passed and all(d["monotone"].values())
          and suite.margin_min >= -1e-9
          and oracle.passed and oracle.details["max_difference"] <= 1e-6
          and abs(cases["bell"]["optimizer"] - 1.0) <= 1e-6
          and abs(cases["product"]["optimizer"]) <= 1e-6
          and abs(cases["classical"]["optimizer"]
                  - cases["classical"]["reference"]) <= 1e-6)
    _line(8, "steady-state clustering", ok,
          f"N={n}: T/MI/stability nonincreasing, envelope margin "
          f"{suite.margin_min:.2e}; optimizer vs oracle within "
          f"{oracle.details['max_difference']:.2e} (Bell=1, product=0)")


def test_criterion_09_mixing_rate(full_run):
    by_id = full_run["by_id"]
    mcfg = full_run["cfg"]["mixing"]
    ok = True
    ratios = []
    for n in mcfg["sizes"]:
        rec = by_id[f"mixing/davies-N{n}"]
        d = rec.details
        ok = (ok and rec.passed and d["beta_over_gap"] <= 1.05
              and d["audit_states"] == 20)
        ratios.append(d["beta_over_gap"])
    _line(9, "mixing rate estimate", ok,
          "beta/gap " + ",".join(f"{x:.4f}" for x in ratios)
          + " <= 1.05, exponential bound audited on 20 fresh states per model")


def test_criterion_10_determinism(full_run, tmp_path):
    quick = os.path.join(os.path.dirname(harness.__file__), "data",
                         "quick_verify.json")
    outs = []
    for name in ("run_a", "run_b"):
        out = str(tmp_path / name)
        rc = cli(["--seed", "20260822", "verify", "all", "--config", quick,
                  "--out", out, "--no-figures"])
        assert rc == 0
        outs.append(out)
    names = sorted(os.listdir(outs[0]))
    assert names == sorted(os.listdir(outs[1])) and names
    same, diff, funny = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    ok = not diff and not funny and full_run["elapsed"] < 600.0
    _line(10, "determinism", ok,
          f"{len(same)} report files byte-identical across seeded reruns; "
          f"full default verification in {full_run['elapsed']:.1f}s < 600s")
