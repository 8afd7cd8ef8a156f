"""Compare the compiled and NumPy velocity kernels against the reference oracle.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 512,1024,2048] [--repeats 3] [--json out.json]

Both backends are timed at every size and thread count; the run aborts if
either disagrees with the oracle beyond 1e-13 (relative, sup norm) or if its
output changes with the thread count.
"""
import argparse
import json
import sys

from muskatlab import kernels
from muskatlab.bench import EqualityGateError, format_rows, oracle_doubling_ratio, run_benchmark


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="512,1024,2048,4096")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--threads", default=None, help="comma-separated thread counts (default 1 and max)")
    parser.add_argument("--json", default=None, help="also write the rows as JSON")
    args = parser.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",") if s]
    counts = [int(t) for t in args.threads.split(",")] if args.threads else None
    print(f"active backend: {kernels.BACKEND}; compiled available: {kernels.compiled is not None}; "
          f"max threads: {kernels.max_threads()}")
    try:
        rows = run_benchmark(sizes, counts, repeats=args.repeats, include_fallback=True)
    except EqualityGateError as exc:
        print(f"equality gate failed: {exc}", file=sys.stderr)
        return 1
    print(format_rows(rows))

    by_key = {(r.N, r.backend, r.threads): r.seconds for r in rows}
    for N in sizes:
        cy = [s for (n, b, _), s in by_key.items() if n == N and b == "cython"]
        py = [s for (n, b, _), s in by_key.items() if n == N and b == "numpy"]
        if cy and py:
            print(f"N={N}: compiled is {min(py) / min(cy):.1f}x faster than the NumPy fallback")
    print(f"oracle cost per doubling of N: {oracle_doubling_ratio():.2f} (quadratic = 4)")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([r.as_dict() for r in rows], fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
