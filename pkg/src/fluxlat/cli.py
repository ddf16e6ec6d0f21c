"""Command-line entry point: ``fluxlat run | validate | schema``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .config import ConfigError, load_config, schema
from .errors import FluxlatError, ValidationError
from .sweep import code_version, config_hash

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("fluxlat")


def _parser():
    parser = argparse.ArgumentParser(prog="fluxlat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario config")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--plot", action="store_true", help="also write SVG figures")
    run.add_argument("--threads", type=int, default=None, help="grid worker threads")
    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("config")
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def _report_problems(problems):
    for p in problems:
        print(f"error: {p}", file=sys.stderr)


def _json(obj):
    from .sweep import _jsonable

    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run(config_path, out=".", plot=False, threads=None) -> int:
    """Run one scenario; returns the process exit code."""
    from .scenarios import run_scenario

    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _report_problems(exc.problems)
        return EXIT_VALIDATION
    if threads is not None:
        if threads < 1:
            _report_problems([f"--threads must be >= 1, got {threads}"])
            return EXIT_VALIDATION
        os.environ["FLUXLAT_THREADS"] = str(threads)

    start = time.perf_counter()
    try:
        result, summary = run_scenario(cfg, threads)
    except ValidationError as exc:
        _report_problems([str(exc)])
        return EXIT_VALIDATION
    except (FluxlatError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - start

    with open(config_path) as fh:
        raw = json.load(fh)
    result.metadata = dict(result.metadata, scenario=cfg["scenario"], config_hash=config_hash(raw),
                           code_version=code_version())
    if summary:
        result.metadata["summary"] = summary

    os.makedirs(out, exist_ok=True)
    prefix = os.path.join(out, cfg["output"])
    if cfg["format"] == "csv":
        with open(prefix + ".csv", "w", newline="") as fh:
            fh.write(result.to_csv())
        with open(prefix + ".meta.json", "w") as fh:
            fh.write(_json(result.metadata))
    else:
        with open(prefix + ".json", "w") as fh:
            fh.write(result.to_json())
    # wall time lives in its own file so the result files stay byte-identical across runs
    with open(prefix + ".timing.json", "w") as fh:
        fh.write(_json({"wall_time_s": wall}))

    if plot or cfg["plot"]:
        from .plotting import emit_plots

        for path in emit_plots(result, prefix):
            log.info("wrote %s", path)

    failures = result.metadata.get("failures") or []
    if failures:
        print(f"warning: {len(failures)} grid point(s) failed; see metadata", file=sys.stderr)
    print(f"{cfg['scenario']}: {result.shape} grid written to {prefix} ({wall:.1f} s)", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(schema(), indent=2))
        return EXIT_OK
    if args.command == "validate":
        try:
            load_config(args.config)
        except ConfigError as exc:
            _report_problems(exc.problems)
            return EXIT_VALIDATION
        print(f"{args.config}: ok")
        return EXIT_OK
    return run(args.config, args.out, args.plot, args.threads)


if __name__ == "__main__":
    sys.exit(main())
