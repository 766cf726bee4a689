"""Batch front door: every pipeline stage as a subcommand over one workspace.

Exit codes: 0 success, 2 missing upstream store (the missing path is
printed), 3 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mdmx",
        description="Mortality tensor modeling pipeline",
    )
    parser.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--workdir", default="mdmx-work", help="workspace directory")
    parser.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads")
    parser.add_argument("--seed", type=int, help="override the config seed")

    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate the synthetic corpus")
    p_synth.add_argument("--countries", type=int)
    p_synth.add_argument("--years", type=int)

    for name, help_text in [
        ("ingest", "parse, curate, and label the raw CSVs"),
        ("pool", "adaptive temporal pooling"),
        ("tensor", "assemble the logit-mortality tensor"),
        ("decompose", "weighted higher-order SVD"),
        ("cluster", "regime clustering and epoch calendar"),
        ("trajectory", "trajectory grids and neural trajectory"),
        ("disruption", "exceptional-mortality model"),
        ("forecast", "Kalman forecasts and rolling CV"),
        ("report", "summary tables"),
        ("all", "run synth through report"),
    ]:
        sub.add_parser(name, help=help_text)

    p_fit = sub.add_parser("fit", help="batch-fit schedules from CSV")
    p_fit.add_argument("--in", dest="input", required=True, help="CSV of id + 2A logit values")
    p_fit.add_argument("--out", dest="output", required=True)

    p_pred = sub.add_parser("predict", help="life tables from summary indicators")
    p_pred.add_argument("--q5f", type=float, required=True)
    p_pred.add_argument("--q5m", type=float, required=True)
    p_pred.add_argument("--q45f", type=float)
    p_pred.add_argument("--q45m", type=float)
    p_pred.add_argument("--out", dest="output", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--bundle", help="bundle directory (defaults to the workdir)")
    p_serve.add_argument("--port", type=int, default=8700)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--static", help="directory of explorer assets to serve at /ui")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .config import PipelineConfig
    from .errors import InvalidInput, MdmxError
    from . import pipeline

    try:
        cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    except (InvalidInput, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    if args.seed is not None:
        cfg.seed = args.seed
    if args.command == "synth":
        if getattr(args, "countries", None):
            cfg.synth.n_countries = args.countries
        if getattr(args, "years", None):
            cfg.synth.n_years = args.years

    try:
        if args.command == "synth":
            pipeline.run_synth(cfg, args.workdir)
        elif args.command == "ingest":
            pipeline.run_ingest(cfg, args.workdir)
        elif args.command == "pool":
            pipeline.run_pool(cfg, args.workdir)
        elif args.command == "tensor":
            pipeline.run_tensor(cfg, args.workdir)
        elif args.command == "decompose":
            pipeline.run_decompose(cfg, args.workdir)
        elif args.command == "cluster":
            pipeline.run_cluster(cfg, args.workdir)
        elif args.command == "trajectory":
            pipeline.run_trajectory(cfg, args.workdir)
        elif args.command == "disruption":
            pipeline.run_disruption(cfg, args.workdir)
        elif args.command == "fit":
            pipeline.run_fit(cfg, args.workdir, args.input, args.output)
        elif args.command == "predict":
            q45f, q45m = args.q45f, args.q45m
            pipeline.run_predict(
                cfg, args.workdir, args.q5f, args.q5m, q45f, q45m, out_csv=args.output
            )
        elif args.command == "forecast":
            pipeline.run_forecast(cfg, args.workdir)
        elif args.command == "report":
            pipeline.run_report(cfg, args.workdir)
        elif args.command == "all":
            pipeline.run_all(cfg, args.workdir)
        elif args.command == "serve":
            from .service import ModelBundle, create_app
            import uvicorn

            bundle_dir = args.bundle or args.workdir
            bundle = ModelBundle.load(bundle_dir, cfg)
            app = create_app(bundle, static_dir=args.static)
            uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except pipeline.MissingStore as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except InvalidInput as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except MdmxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
