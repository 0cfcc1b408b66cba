"""Compare the compiled and pure-Python kernels on layered transition graphs.

    python3 benchmarks/compare_backends.py [--sizes 1000,2000,4000,8000] [--out DIR]
"""
import argparse
import os

from kgcondense import kernels
from kgcondense.bench import DEFAULT_SIZES, run_bench, write_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    ap.add_argument("--repeats", type=int, default=15)
    ap.add_argument("--out", help="directory for bench.csv and bench.json")
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]
    rows, fits = run_bench(sizes, repeats=args.repeats)
    by = {(r.backend, r.m): r.seconds for r in rows}
    names = sorted(kernels.BACKENDS)
    print(f"{'m':>7} " + " ".join(f"{n + ' (ms)':>14}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for m in sizes:
        line = f"{m:>7} " + " ".join(f"{by[n, m] * 1e3:>14.3f}" for n in names)
        if "cython" in names:
            line += f"   {by['python', m] / by['cython', m]:>7.1f}x"
        print(line)
    for f in fits:
        print(f"{f.backend}: seconds = {f.slope:.3e} * m + {f.intercept:.3e}, R^2 = {f.r2:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_bench(rows, fits, os.path.join(args.out, "bench.csv"), os.path.join(args.out, "bench.json"))


if __name__ == "__main__":
    main()
