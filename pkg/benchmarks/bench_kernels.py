#!/usr/bin/env python3
"""Compare the compiled kernel core against the pure-numpy fallback.

Run after installing the package:  python3 benchmarks/bench_kernels.py
Equivalent to `acppo bench`.
"""

import argparse

from acppo.bench import run_benchmark

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    run_benchmark(repeats=args.repeats)
