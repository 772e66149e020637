"""Command-line entry points: run | serve | emit | generate."""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .config import (
    ConfigError,
    PRESETS,
    apply_overrides,
    build_dataset,
    config_from_json,
    get_preset,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _load_config(args) -> "ExperimentConfig":
    if bool(args.preset) == bool(args.config):
        raise ConfigError([("", "pass exactly one of --preset or --config")])
    if args.preset:
        cfg = get_preset(args.preset)
    else:
        with open(args.config, encoding="utf-8") as fh:
            cfg = config_from_json(fh.read())
    return apply_overrides(cfg, seed=args.seed, steps=args.steps, out=args.out)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    p.add_argument("--config", help="path to a JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--steps", type=int, help="override the step/round budget")
    p.add_argument("--out", help="output directory")


def cmd_run(args) -> int:
    from .harness import run_config

    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        for path, message in exc.diagnostics:
            print(f"config error: {path or '<root>'}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = run_config(cfg)
    except Exception as exc:  # noqa: BLE001 - surface any runtime failure
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import make_app

    static = args.static if args.static and os.path.isdir(args.static) else None
    app = make_app(default_preset=args.preset or "toy-live", static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_emit(args) -> int:
    from .harness import HarnessError, PLOT_KINDS, emit_plot_data

    bad = [k for k in args.kinds if k not in PLOT_KINDS]
    if bad:
        for kind in bad:
            print(f"config error: kinds: unknown plot kind {kind!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = emit_plot_data(args.out, args.kinds or None)
    except HarnessError as exc:
        print(f"emit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        for path, message in exc.diagnostics:
            print(f"config error: {path or '<root>'}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    dataset = build_dataset(cfg.dataset)
    out = args.out or f"{cfg.name}-data.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(dataset.feature_names) + ["label"]
        if dataset.group is not None:
            header.append("group")
        writer.writerow(header)
        for i in range(dataset.n_rows):
            row = []
            for j, f in enumerate(dataset.schema):
                v = dataset.rows[i, j]
                row.append(f.categories[int(round(v))] if f.kind == "categorical" else repr(float(v)))
            row.append(int(dataset.labels[i]))
            if dataset.group is not None:
                row.append(dataset.group[i])
            writer.writerow(row)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xal",
        description="explainable active learning: experiments, labeling service, plot data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config or preset")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_serve = sub.add_parser("serve", help="start the labeling session service")
    p_serve.add_argument("--preset", default="toy-live", help="default session preset")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--static", help="directory with the console build to serve at /")
    p_serve.set_defaults(fn=cmd_serve)

    p_emit = sub.add_parser("emit", help="emit tidy plot tables from run artifacts")
    # argparse on 3.10 rejects an empty nargs="*" list when choices is set,
    # so kinds are validated in emit_plot_data instead.
    p_emit.add_argument("kinds", nargs="*", metavar="kind",
                        help="history, curves, scatter (default: all available)")
    p_emit.add_argument("--out", required=True, help="run artifact directory")
    p_emit.set_defaults(fn=cmd_emit)

    p_gen = sub.add_parser("generate", help="write a config's dataset as CSV")
    _add_config_flags(p_gen)
    p_gen.set_defaults(fn=cmd_generate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
