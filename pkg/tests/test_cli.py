import json
import os

import numpy as np
import pytest

from lrspin.cli import cli


MICRO_VERIFY = {
    "seed": 4,
    "generator": {"cases": 5, "max_sites": 3, "expm_pairs": 2,
                  "expm_max_sites": 3},
    "hopt": {"draws": 4, "r_powers": [4, 5, 6, 7, 8]},
    # null out the heavy suites the shipped default would otherwise merge in
    "spectral": None,
    "reversibility": None,
    "lightcone": None,
    "appendix": None,
    "clustering": None,
    "mixing": None,
}


def _write_cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(MICRO_VERIFY))
    return str(p)


def test_model_build_and_export_roundtrip(tmp_path, capsys):
    out = str(tmp_path / "model.json")
    rc = cli(["model", "export", "--family", "xy_damped", "--sites", "3",
              "--alpha", "3.0", "--out", out])
    assert rc == 0
    data = json.loads(open(out).read())
    assert data["N"] == 3
    capsys.readouterr()
    rc = cli(["--json", "model", "build", "--family", "davies_thermal",
              "--sites", "3", "--alpha", "3.0"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["num_sites"] == 3
    assert summary["steady_state_hint"] is True


def test_evolve_writes_curve_csv(tmp_path):
    model = str(tmp_path / "m.json")
    assert cli(["model", "export", "--family", "xy_damped", "--sites", "3",
                "--alpha", "3.0", "--out", model]) == 0
    out = str(tmp_path / "curve.csv")
    rc = cli(["evolve", "--model-file", model, "--observable", "X@0",
              "--times", "0,0.3,0.6", "--out", out])
    assert rc == 0
    lines = open(out).read().splitlines()
    assert lines[0].startswith("# lrspin")
    assert lines[1] == "t,value,integrator_steps,max_local_error"
    assert len(lines) == 5
    first = lines[2].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(1.0)


def test_evolve_methods_agree(tmp_path):
    model = str(tmp_path / "m.json")
    cli(["model", "export", "--family", "xy_damped", "--sites", "3",
         "--alpha", "3.0", "--out", model])
    vals = {}
    for method in ("rk45", "expm"):
        out = str(tmp_path / f"{method}.csv")
        assert cli(["evolve", "--model-file", model, "--observable", "Z@1",
                    "--times", "0,0.5", "--method", method, "--out", out]) == 0
        vals[method] = float(open(out).read().splitlines()[-1].split(",")[1])
    assert vals["rk45"] == pytest.approx(vals["expm"], abs=1e-7)


def test_spectrum_csv_and_state_dump(tmp_path, capsys):
    out = str(tmp_path / "spec.csv")
    ss = str(tmp_path / "ss.bin")
    rc = cli(["--json", "spectrum", "--family", "davies_thermal", "--sites",
              "2", "--alpha", "3.0", "--out", out, "--steady-state-out", ss])
    assert rc == 0
    lines = open(out).read().splitlines()
    assert lines[1] == "re,im,residual"
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[2:]]
    assert len(rows) == 16
    # sorted by |Re|, all decaying, tiny residuals
    assert abs(rows[0][0]) <= 1e-10
    assert all(re <= 1e-10 for re, _, _ in rows)
    assert all(res <= 1e-8 for _, _, res in rows)

    from lrspin.superop import load_operator
    op = load_operator(ss)
    assert op.matrix.shape == (4, 4)
    assert np.trace(op.matrix).real == pytest.approx(1.0)

    out = capsys.readouterr().out
    info = json.loads(out[out.index("{"):])
    assert info["primitive"] is True


def test_bounds_eval_csv(tmp_path):
    out = str(tmp_path / "b.csv")
    rc = cli(["bounds", "eval", "--regime", "hk", "--alpha", "3.0",
              "--r-grid", "2,4", "--t-grid", "0.1", "--out", out])
    assert rc == 0
    lines = open(out).read().splitlines()
    assert lines[1] == "r,t,value,regime"
    vals = [ln.split(",") for ln in lines[2:]]
    assert [v[3] for v in vals] == ["hk", "hk"]
    # doubling r at alpha=3 divides the bound by 8
    assert float(vals[0][2]) / float(vals[1][2]) == pytest.approx(8.0)


def test_bounds_eval_bad_regime_fails(tmp_path):
    rc = cli(["bounds", "eval", "--regime", "bogus", "--alpha", "3.0",
              "--r-grid", "2", "--t-grid", "0.1",
              "--out", str(tmp_path / "x.csv")])
    assert rc == 1


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli(["model", "build"])             # missing required flags
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli(["nonsense"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli(["evolve", "--observable", "X@0"])   # no model source
    assert exc.value.code == 2
    model = str(tmp_path / "m.json")
    cli(["model", "export", "--family", "xy_damped", "--sites", "2",
         "--alpha", "3.0", "--out", model])
    with pytest.raises(SystemExit) as exc:
        cli(["evolve", "--model-file", model, "--observable", "Q@0"])
    assert exc.value.code == 2


def test_verify_all_micro_config(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    out = str(tmp_path / "verify_out")
    rc = cli(["verify", "all", "--config", cfg, "--out", out, "--no-figures"])
    assert rc == 0
    text = (tmp_path / "verify_out" / "report.txt").read_text()
    assert "[PASS] generator/identities" in text
    assert "failures=0" in text
    report = json.loads((tmp_path / "verify_out" / "report.json").read_text())
    assert report["fingerprint"]["seed"] == 4
    assert not os.path.exists(os.path.join(out, "figures"))


def test_verify_runs_are_byte_identical(tmp_path):
    cfg = _write_cfg(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert cli(["verify", "all", "--config", cfg, "--out", out,
                    "--no-figures"]) == 0
        outs.append(out)
    for fname in sorted(os.listdir(outs[0])):
        a = open(os.path.join(outs[0], fname), "rb").read()
        b = open(os.path.join(outs[1], fname), "rb").read()
        assert a == b, fname


def test_lightcone_subcommand_runs_only_that_suite(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({
        "seed": 4,
        "lightcone": {"sizes": [4], "alphas": [3.0], "t_count": 5},
    }))
    out = str(tmp_path / "lc")
    rc = cli(["lightcone", "--config", str(p), "--out", out, "--no-figures"])
    assert rc == 0
    names = sorted(os.listdir(out))
    assert "lightcone_xy-N4-a3_commutator.csv" in names
    report = json.loads(open(os.path.join(out, "report.json")).read())
    ids = [c["check_id"] for c in report["checks"]]
    assert all(i.startswith("lightcone/") for i in ids)
