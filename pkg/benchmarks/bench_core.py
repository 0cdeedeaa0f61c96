"""Compiled core vs numpy fallback: pairwise distance tables and SMO.

Usage: python3 benchmarks/bench_core.py [--regions 300] [--svm-size 200] [--repeat 3]
"""

import argparse

from polkern import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--regions", type=int, default=300)
    parser.add_argument("--svm-size", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rows = bench.run(args.regions, args.svm_size, args.repeat, args.seed)
    for r in rows:
        print(f"{r['task']:<16} n={r['size']:<5} {r['backend']:<7} {r['seconds'] * 1e3:9.2f} ms")
    for task, s in bench.speedups(rows).items():
        print(f"{task:<16} speedup x{s:.1f}")


if __name__ == "__main__":
    main()
