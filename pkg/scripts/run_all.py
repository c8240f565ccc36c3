"""Run every shipped experiment config and summarize the exit codes.

    python3 scripts/run_all.py [--out results] [--threads N] [--verify]
"""
import argparse
import sys
from pathlib import Path

from bds_sim.cli import run

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--verify", action="store_true")
    ap.add_argument("names", nargs="*", help="config stems (default: all)")
    args = ap.parse_args()
    configs = sorted((ROOT / "configs").glob("*.json"))
    if args.names:
        configs = [c for c in configs if c.stem in args.names]
    codes = {}
    for cfg in configs:
        print(f"\n=== {cfg.stem}")
        codes[cfg.stem] = run(cfg, Path(args.out) / cfg.stem, args.threads, verify=args.verify)
    print("\n" + "\n".join(f"{code}  {name}" for name, code in codes.items()))
    return max(codes.values(), default=0)


if __name__ == "__main__":
    sys.exit(main())
