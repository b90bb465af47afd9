"""Command line interface.

Exit codes: 0 when everything asked for passed, 1 when a verification check
failed, 2 for usage errors (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .errors import LrspinError
from .model import (
    LatticeSpec,
    build_davies_thermal,
    build_xy_damped,
    load_model,
    save_terms_json,
)
from .pauli import PAULI, pauli_string


def _add_model_args(p, required: bool = True):
    p.add_argument("--family", choices=["xy_damped", "davies_thermal"],
                   required=required)
    p.add_argument("--sites", type=int, required=required)
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--coupling-scale", type=float, default=0.25)
    p.add_argument("--damping-rate", type=float, default=0.2)
    p.add_argument("--ising-scale", type=float, default=0.4)
    p.add_argument("--beta-thermal", type=float, default=0.8)
    p.add_argument("--base-rate", type=float, default=0.1)
    p.add_argument("--field", type=float, default=0.0)


def _build_model(args):
    if args.family is None or args.sites is None or args.alpha is None:
        print("usage error: either --model-file or --family/--sites/--alpha "
              "are required", file=sys.stderr)
        raise SystemExit(2)
    spec = LatticeSpec(args.sites)
    if args.family == "xy_damped":
        return build_xy_damped(spec, alpha=args.alpha,
                               coupling_scale=args.coupling_scale,
                               damping_rate=args.damping_rate)
    return build_davies_thermal(spec, alpha=args.alpha,
                                ising_scale=args.ising_scale,
                                beta_T=args.beta_thermal,
                                base_rate=args.base_rate,
                                field=args.field)


def _model_summary(model) -> dict:
    kinds = {}
    for t in model.terms:
        kinds[t.kind] = kinds.get(t.kind, 0) + 1
    return {
        "num_sites": model.lattice.num_sites,
        "alpha": model.alpha,
        "terms": kinds,
        "steady_state_hint": model.steady_state_hint is not None,
    }


def _parse_observable(text: str, num_sites: int):
    """Parse "X@0" or "X@0,Z@3" into an embedded Pauli string operator."""
    from .superop import DenseOperator

    letters = {}
    for piece in text.split(","):
        if "@" not in piece:
            print(f"usage error: observable piece {piece!r} is not "
                  f"LETTER@SITE", file=sys.stderr)
            raise SystemExit(2)
        letter, _, site = piece.partition("@")
        letter = letter.strip().upper()
        if letter not in PAULI:
            print(f"usage error: unknown Pauli letter {letter!r}",
                  file=sys.stderr)
            raise SystemExit(2)
        letters[int(site)] = letter
    return DenseOperator(pauli_string(num_sites, letters), num_sites,
                         support_hint=tuple(sorted(letters)))


def _parse_grid(text: str):
    vals = [float(x) for x in text.split(",") if x.strip() != ""]
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def _write_or_print(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)


def cmd_model(args, fp) -> int:
    model = _build_model(args)
    if args.action == "export":
        save_terms_json(model, args.out)
        print(f"wrote {args.out}")
        return 0
    summary = _model_summary(model)
    if args.out:
        save_terms_json(model, args.out)
        summary["written_to"] = args.out
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for k, v in sorted(summary.items()):
            print(f"{k}: {v}")
    return 0


def cmd_evolve(args, fp) -> int:
    from .dynamics import Curve, evolve_adjoint, evolve_expm
    from .pauli import operator_norm

    if args.model_file:
        model = load_model(args.model_file)
    else:
        model = _build_model(args)
    obs = _parse_observable(args.observable, model.lattice.num_sites)
    grid = (_parse_grid(args.times) if args.times
            else harness.geometric_times(args.t0, args.t_factor, args.t_count))
    if args.method == "expm":
        evo = evolve_expm(model, obs, grid, adjoint=True)
    else:
        evo = evolve_adjoint(model, obs, grid, tol=args.tol or 1e-8)
    values = np.array([operator_norm(s.matrix) for s in evo.snapshots])
    per = evo.per_time or [(0, 0.0)] * len(evo.times)
    curve = Curve(f"norm[{args.observable}]", evo.times, values,
                  np.array([p[0] for p in per], dtype=float),
                  np.array([p[1] for p in per], dtype=float))
    _write_or_print(curve.csv_text(fp), args.out)
    if args.json:
        print(json.dumps({"points": len(grid),
                          "final_value": float(curve.values[-1])},
                         indent=2, sort_keys=True))
    return 0


def cmd_spectrum(args, fp) -> int:
    from .spectral import analyze
    from .superop import DenseOperator, dump_operator

    model = _build_model(args)
    data = analyze(model)
    lines = harness.fingerprint_lines(fp) + ["re,im,residual"]
    for lam, res in zip(data.eigenvalues, data.residuals):
        lines.append(f"{float(lam.real)!r},{float(lam.imag)!r},{float(res)!r}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    if args.steady_state_out:
        op = DenseOperator(data.steady_state, model.lattice.num_sites)
        dump_operator(op, args.steady_state_out)
        print(f"steady state written to {args.steady_state_out}")
    if args.json:
        print(json.dumps({"gap": data.gap, "null_dim": data.null_dim,
                          "primitive": data.null_dim == 1},
                         indent=2, sort_keys=True))
    else:
        print(f"gap: {data.gap}  null_dim: {data.null_dim}")
    return 0


def _run_suite_command(args, fp, sections) -> int:
    cfg = harness.load_config(args.config)
    for name in list(cfg):
        if isinstance(cfg[name], dict) and name not in sections:
            del cfg[name]
    report = harness.run_all(cfg, seed=args.seed, tol=args.tol,
                             threads=args.threads)
    report.write(args.out, render_figures=not args.no_figures)
    if args.json:
        print(report.to_json())
    else:
        print("\n".join(report.lines()))
        print(f"written to {args.out}")
    return 0 if report.passed else 1


def cmd_lightcone(args, fp) -> int:
    return _run_suite_command(args, fp, {"lightcone"})


def cmd_clustering(args, fp) -> int:
    return _run_suite_command(args, fp, {"clustering"})


def cmd_bounds(args, fp) -> int:
    from .bounds import BoundParams, envelope_lemma1, envelope_lr

    params = {"alpha": args.alpha, "d": args.d}
    if args.params_json:
        params.update(json.loads(args.params_json))
    p = BoundParams.from_dict(params)
    fn = envelope_lemma1 if args.family == "lemma1" else envelope_lr
    lines = harness.fingerprint_lines(fp) + ["r,t,value,regime"]
    for r in _parse_grid(args.r_grid):
        for t in _parse_grid(args.t_grid):
            value = fn(p, args.regime, r, t)
            lines.append(f"{r!r},{t!r},{value!r},{args.regime}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_verify(args, fp) -> int:
    config = harness.load_config(args.config)
    report = harness.run_all(config, seed=args.seed, tol=args.tol,
                             threads=args.threads)
    report.write(args.out, render_figures=not args.no_figures)
    if args.json:
        print(report.to_json())
    else:
        print("\n".join(report.lines()))
        print(f"written to {args.out}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lrspin",
        description="Dissipative long-range spin chains: models, spectra, "
                    "light cones, decay envelopes, and the verification "
                    "harness tying them together.")
    ap.add_argument("--json", action="store_true",
                    help="machine-readable summaries on stdout")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="build or export a lattice model")
    p.add_argument("action", choices=["build", "export"])
    _add_model_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("evolve", help="adjoint-evolve an observable, CSV out")
    p.add_argument("--model-file", default=None,
                   help="terms JSON (otherwise build from the flags)")
    _add_model_args(p, required=False)
    p.add_argument("--observable", required=True, help='e.g. "X@0" or "X@0,Z@3"')
    p.add_argument("--times", default=None, help="comma-separated instants")
    p.add_argument("--t0", type=float, default=0.05)
    p.add_argument("--t-factor", type=float, default=2.0)
    p.add_argument("--t-count", type=int, default=8)
    p.add_argument("--method", choices=["rk45", "expm"], default="rk45")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("spectrum", help="full spectral data for a small model")
    _add_model_args(p)
    p.add_argument("--out", default=None, help="eigenvalue CSV (stdout if absent)")
    p.add_argument("--steady-state-out", default=None,
                   help="binary dump of the steady state")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("lightcone", help="run the light-cone suite only")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="lightcone_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_lightcone)

    p = sub.add_parser("clustering", help="run the steady-state decay suite only")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="clustering_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_clustering)

    p = sub.add_parser("bounds", help="evaluate analytic envelopes on a grid")
    p.add_argument("action", choices=["eval"])
    p.add_argument("--family", choices=["lr", "lemma1"], default="lr")
    p.add_argument("--regime", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r-grid", required=True, help="comma-separated separations")
    p.add_argument("--t-grid", required=True, help="comma-separated times")
    p.add_argument("--params-json", default=None,
                   help='extra constants, e.g. \'{"C": 2.0, "v": 1.5}\'')
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the configured verification checks")
    p.add_argument("what", choices=["all"])
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="verify_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_verify)

    return ap


def cli(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    fp = harness.fingerprint(
        seed=args.seed if args.seed is not None else harness.DEFAULT_SEED,
        tol=args.tol if args.tol is not None else 1e-8)
    try:
        return args.func(args, fp)
    except LrspinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
