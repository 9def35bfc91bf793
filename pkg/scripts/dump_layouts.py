#!/usr/bin/env python
"""
Write random gridworld layouts with their joint and solo optimal lengths,
or re-plan the layouts of an existing dump and report mismatches.
"""

import argparse
import os
import sys

import numpy as np

# Add parent directory to path to import envs
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from envs.oracles import joint_optimal_plan, parse_layout_line, solo_optimal_plan, write_layout_dump
from schemas.env_schemas import TsgConfig
from services.evaluation_service import planner_lengths


def dump(path, n_layouts, seed, width, height):
    lines = []
    joint, solo = planner_lengths(n_layouts, TsgConfig(width=width, height=height), np.random.default_rng(seed), lines)
    write_layout_dump(lines, path)
    print(f"{n_layouts} layouts written to {path}")
    print(f"joint mean {joint.mean():.3f}, solo mean {solo.mean():.3f}")


def verify(path):
    mismatches = 0
    count = 0
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            state, joint, solo = parse_layout_line(line)
            planned = (joint_optimal_plan(state), solo_optimal_plan(state))
            count += 1
            if planned != (joint, solo):
                mismatches += 1
                print(f"line {number}: recorded {joint},{solo} planned {planned[0]},{planned[1]}")
    print(f"{count} layouts checked, {mismatches} mismatches")
    return 1 if mismatches else 0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("path")
    parser.add_argument("--verify", action="store_true", help="Check an existing dump instead of writing one")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--width", type=int, default=11)
    parser.add_argument("--height", type=int, default=11)
    args = parser.parse_args()

    if args.verify:
        return verify(args.path)
    dump(args.path, args.n, args.seed, args.width, args.height)
    return 0


if __name__ == "__main__":
    sys.exit(main())
