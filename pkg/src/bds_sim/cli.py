"""Command-line entry point: ``bds-sim --config exp.json [--out DIR] [--threads N] [--seed S] [--verify]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import BdsError, ConfigError
from .experiments import run_experiment
from .parallel import default_threads

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


def run(config_path, out: str | Path | None = None, threads: int | None = None, seed: int | None = None,
        verify: bool = False) -> int:
    """Run one experiment config; 0 if every threshold passes, 2 if one fails, 1 on errors."""
    try:
        cfg = ExperimentConfig.load(config_path)
        if seed is not None:
            if seed < 0:
                raise ConfigError("/seed: must be nonnegative", "/seed")
            cfg.seed = int(seed)
        result = run_experiment(cfg, out, threads if threads is not None else default_threads(), verify)
    except ConfigError as exc:
        print(f"config error at {exc.pointer or '/'}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (BdsError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for row in result.rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"{status}  {row.statistic} = {row.value!r} (threshold {row.threshold!r})")
    print(f"{cfg.experiment}: {'passed' if result.passed else 'FAILED'} in {result.elapsed:.1f} s")
    return EXIT_PASS if result.passed else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bds-sim", description="Run a named birth-death-swap experiment.")
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--threads", type=int, help="worker processes (default: $BDS_SIM_THREADS or CPU count)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--verify", action="store_true", help="check intensity domination at every record")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    return run(args.config, args.out, args.threads, args.seed, args.verify)


if __name__ == "__main__":
    sys.exit(main())
