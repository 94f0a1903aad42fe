"""Command-line entry point.

    igdist <subcommand> --config <path> [--out <dir>] [--workers N]

Exit codes: 0 success, 2 config error, 3 runtime/capacity error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, ValidationError
from .runner import SUBCOMMANDS, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="igdist",
        description=(
            "Sample multitype random intersection graphs, measure distance "
            "distributions, and compare them against the branching-process "
            "approximation."
        ),
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument(
        "--workers", type=int, default=None, help="worker process count"
    )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = run(args.subcommand, cfg, out_dir=args.out, workers=args.workers)
    except (ConfigError, ValidationError) as e:
        print(f"igdist: config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # capacity, convergence, simulation, I/O
        print(f"igdist: error: {e}", file=sys.stderr)
        return 3
    print(f"igdist: wrote {args.subcommand} results to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
