"""Command-line entry point: ``gtsaga {run,certificate,plot,validate}``."""

from __future__ import annotations

import argparse
import glob
import json
import sys

from ..errors import CertificateFailure, ConfigError, DivergenceDetected, GTSagaError, PlotError
from .config import load_config, output_dir
from .experiment import report_certificate, run_experiment
from .plot import emit_plot

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CERTIFICATE = 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gtsaga", description="Decentralized GT-SAGA experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment and write traces")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (GTSAGA_OUT_DIR overrides)")
    p.add_argument("--workers", type=int, default=None, help="threads for seed sweeps")

    p = sub.add_parser("certificate", help="print the rate certificate for a config as JSON")
    p.add_argument("--config", required=True)

    p = sub.add_parser("plot", help="render trace CSVs as an SVG chart")
    p.add_argument("--traces", required=True, help="glob of trace CSV files")
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("--config", required=True)
    return ap


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = output_dir(args.out)
    try:
        res = run_experiment(cfg, out, workers=args.workers)
    except DivergenceDetected as exc:
        print(f"error: {exc}; partial traces written to {out}", file=sys.stderr)
        return EXIT_DIVERGED
    for s in res.seeds:
        tr = res.traces[s]
        print(f"seed {s}: {tr.stop_reason} at k={tr.k[-1]}, opt_gap_sq={tr.opt_gap_sq[-1]:.3e}")
    print(f"wrote {len(res.files)} files to {out}")
    return EXIT_OK


def _cmd_certificate(args) -> int:
    cfg = load_config(args.config)
    try:
        doc = report_certificate(cfg)
    except CertificateFailure as exc:
        print(json.dumps({"error": "certificate-failure", "rows": exc.rows, "message": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_plot(args) -> int:
    files = glob.glob(args.traces)
    out = emit_plot(files, args.out)
    print(f"wrote {out} ({len(files)} traces)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(
        json.dumps(
            {
                "valid": True,
                "algorithm": cfg.algorithm,
                "alpha": cfg.alpha,
                "alpha_mode": cfg.alpha_mode,
                "n": cfg.problem.n,
                "dim": cfg.problem.dim,
                "sizes": list(cfg.problem.sizes),
                "sigma": cfg.W.sigma,
                "max_iters": cfg.max_iters,
                "seeds": cfg.seeds,
                "metrics_every": cfg.metrics_every,
                "track_staleness": cfg.track_staleness,
            },
            indent=2,
        )
    )
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "certificate": _cmd_certificate, "plot": _cmd_plot, "validate": _cmd_validate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    except GTSagaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
