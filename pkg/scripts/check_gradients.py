#!/usr/bin/env python
"""
Finite-difference sweep over every network architecture.
Prints the worst relative error per network and exits non-zero above the tolerance.
"""

import argparse
import os
import sys
import time

# Add parent directory to path to import models
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models.gradcheck import architectures, check_network
from schemas.network_schemas import TsgNetConfig

TOLERANCE = 1e-5


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--coordinates", type=int, default=100)
    parser.add_argument("--small", action="store_true", help="Use reduced gridworld widths")
    args = parser.parse_args()

    net = TsgNetConfig(pre_width=16, pre_layers=2, post_width=16, post_layers=2, head_width=16, lstm_units=8) if args.small else None
    started = time.time()
    failed = []
    for name, spec in architectures(net).items():
        worst = max(check_network(spec, seed, args.coordinates).max_relative_error for seed in range(args.seeds))
        status = "ok" if worst < TOLERANCE else "FAIL"
        print(f"{name:<24} max relative error {worst:.2e}  {status}")
        if worst >= TOLERANCE:
            failed.append(name)

    print(f"\n{args.seeds} seeds x {args.coordinates} coordinates in {time.time() - started:.1f}s")
    if failed:
        print(f"Failed: {', '.join(failed)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
