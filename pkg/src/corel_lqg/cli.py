"""Command-line interface: ``corel-lqg check|run|sweep|diag``.

Exit codes: 0 success, 1 domain failure, 2 usage or parse failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics, pipeline
from .exceptions import ArgumentError, CorelError
from .lqg import check_assumptions

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _int_list(text):
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text):
    out = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in out if v not in pipeline.METHODS]
    if not out or bad:
        raise argparse.ArgumentTypeError(f"methods must be from {pipeline.METHODS}")
    return out


def _auto_int(text):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")


BUILTIN_MODELS = {"ref2x2": pipeline.reference_model_path}


def _load(path):
    """Model file (or a built-in name) or a usage-level error naming the parse location."""
    if path in BUILTIN_MODELS and not os.path.exists(path):
        path = BUILTIN_MODELS[path]()
    try:
        return pipeline.load_model(path)
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"{path}: cannot load model: {exc}")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_check(args):
    model = _load(args.model)
    report = check_assumptions(model)
    for name, ok, value in report.checks:
        print(f"{name}: {'ok' if ok else 'FAIL'} ({value:.6g})")
    return EXIT_OK if report.passed else EXIT_FAIL


def _config(args, **extra):
    return pipeline.RunConfig(
        T=extra.get("T", getattr(args, "T", 1)),
        H=args.H,
        sigma_u=args.sigma_u,
        d_x=args.d_x,
        rank_threshold_ratio=args.rank_threshold,
        method=extra.get("method", getattr(args, "method", "explicit")),
        seed=extra.get("seed", getattr(args, "seed", 0)),
        eval=args.eval,
        T_eval=args.T_eval,
        burn_in=args.burn_in,
        model_path=args.model,
    )


def cmd_run(args):
    model = _load(args.model)
    config = _config(args)
    try:
        record = pipeline.run_corel(config, model)
    except CorelError as exc:
        record = pipeline.RunRecord(config=config, failure=f"setup: {type(exc).__name__}: {exc}")
    _write(args.out, record.to_json(include_timings=args.timings) + "\n")
    print(record.summary(), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK if record.status == "ok" else EXIT_FAIL


def cmd_sweep(args):
    model = _load(args.model)
    base = _config(args, T=args.T[0])
    records = pipeline.run_sweep(model, args.T, args.seeds, args.methods, base, threads=args.threads)
    _write(args.out, pipeline.sweep_csv(records))
    for rec in records:
        print(rec.summary(), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_diag_pe(args):
    model = _load(args.model)
    curve = diagnostics.pe_curve(model, args.H, args.sigma_u, args.T, np.random.default_rng(args.seed))
    _write(args.out, json.dumps(curve.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_diag_quadform(args):
    reports = [diagnostics.quadform_lb_mc(d, args.trials, args.samples, np.random.default_rng([args.seed, d]))
               for d in args.d]
    _write(args.out, json.dumps(reports, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if not any(r["violation"] for r in reports) else EXIT_FAIL


def _add_run_options(p):
    p.add_argument("--model", required=True, help="JSON model file")
    p.add_argument("--H", type=_auto_int, default=None, help="history length or 'auto'")
    p.add_argument("--sigma-u", dest="sigma_u", type=float, default=pipeline.DEFAULT_SIGMA_U)
    p.add_argument("--d-x", dest="d_x", type=_auto_int, default=None, help="latent dimension or 'auto'")
    p.add_argument("--rank-threshold", type=float, default=pipeline.DEFAULT_RANK_THRESHOLD)
    p.add_argument("--eval", choices=pipeline.EVAL_MODES, default="analytic")
    p.add_argument("--T-eval", dest="T_eval", type=int, default=100_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="corel-lqg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check the standing assumptions of a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="one learning run; writes a JSON run record")
    _add_run_options(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--method", choices=pipeline.METHODS, default="explicit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in the record")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid of runs; writes CSV")
    _add_run_options(p)
    p.add_argument("--T", type=_int_list, required=True, help="comma-separated sample counts")
    p.add_argument("--seeds", type=_int_list, required=True)
    p.add_argument("--methods", type=_str_list, default=["explicit"])
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diag", help="diagnostics")
    dsub = p.add_subparsers(dest="diag", required=True)
    q = dsub.add_parser("pe", help="persistency-of-excitation curve")
    q.add_argument("--model", required=True)
    q.add_argument("--T", type=_int_list, default=[2000, 8000, 32000])
    q.add_argument("--H", type=int, default=4)
    q.add_argument("--sigma-u", dest="sigma_u", type=float, default=pipeline.DEFAULT_SIGMA_U)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_diag_pe)
    q = dsub.add_parser("quadform", help="Monte-Carlo check of the quadratic-form lower bound")
    q.add_argument("--d", type=_int_list, default=[1, 2, 4, 8])
    q.add_argument("--trials", type=int, default=100)
    q.add_argument("--samples", type=int, default=200_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_diag_quadform)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorelError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
