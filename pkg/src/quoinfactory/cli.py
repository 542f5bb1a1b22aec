"""``quoin-factory`` command line entry point.

Usage::

    quoin-factory simulate|classical|bounds|verify --config PATH [--seed N] [--out PATH]

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

from .config import MODES, ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quoin-factory",
                                 description="Bernoulli factories on simulated quantum coins.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="flat key = value config file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="write the report here instead of output_path/stdout")
    ap.add_argument("--criteria", help="verify only: comma separated criterion numbers")
    return ap


def _verify(cfg: ExperimentConfig, criteria: str | None) -> tuple[str, bool]:
    from .acceptance import Suite, summary_line

    wanted = range(1, 9) if not criteria else [int(c) for c in criteria.split(",")]
    results = Suite(seed=cfg.seed).run(wanted)
    checks = [c for cs in results.values() for c in cs]
    for k, cs in results.items():
        print(summary_line(k, cs), file=sys.stderr)
    if cfg.output_format == "json":
        text = json.dumps([c.__dict__ for c in checks], indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("criterion", "name", "passed", "detail"))
        for c in checks:
            w.writerow((c.criterion, c.name, "PASS" if c.passed else "FAIL", c.detail))
        text = buf.getvalue()
    return text, all(c.passed for c in checks)


def _warning_line(message, category, filename, lineno, line=None):
    return f"quoin-factory: warning: {message}\n"


def main(argv: list[str] | None = None) -> int:
    warnings.formatwarning = _warning_line
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(mode=args.mode, seed=args.seed,
                                                      output_path=args.out)
    except ConfigError as exc:
        print(f"quoin-factory: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.criteria and cfg.mode != "verify":
        print("quoin-factory: --criteria only applies to verify", file=sys.stderr)
        return EXIT_CONFIG

    from . import runs

    ok = True
    if cfg.mode == "verify":
        try:
            text, ok = _verify(cfg, args.criteria)
        except ValueError as exc:
            print(f"quoin-factory: config error: --criteria: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        rows = {"simulate": runs.run_simulate, "classical": runs.run_classical,
                "bounds": runs.run_bounds}[cfg.mode](cfg)
        text = runs.render(cfg, rows)
        if cfg.plot_dir:
            runs.write_plots(cfg, rows)
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
