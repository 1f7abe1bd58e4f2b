"""Backend comparison: numba kernels against their pure-python twins.

Runs a fixed set of hot paths end to end under each backend, checks the
outputs agree bitwise, and reports best-of-``--reps`` wall times.  Usage:

    python3 -m looptrees.bench [--n 100000] [--reps 3] [--out DIR]

Writes a plot-ready ``bench.csv`` next to the printed table.  The numba
column is blank when numba is not importable.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import backend
from .laws import law_from_name
from .looptree import build_loop, profile_Hcirc
from .rng import Stream
from .sampling import sample_bgw_at_least_n, sample_bgw_exact_n
from .trees import PlaneTree
from .walks import WalkLaw, sample_conditioned_walk, survival_table


def _cases(n: int):
    """(name, size, closure) triples; each closure returns a comparable array."""
    geo = law_from_name("geometric")
    heavy = law_from_name("heavytail")
    wl = WalkLaw.from_offspring(heavy)

    def tree_decode(template=sample_bgw_exact_n(geo, n, Stream.from_seed(5, 0, 0))):
        t = PlaneTree(template.degree_seq, _validated=True)
        cp = t.coding_paths
        return t.height + cp.contour[: t.n]

    def exact_n_sample():
        return sample_bgw_exact_n(geo, n, Stream.from_seed(5, 1, 0)).degree_seq

    def loop_bfs(template=sample_bgw_exact_n(geo, n, Stream.from_seed(5, 2, 0))):
        return profile_Hcirc(build_loop(template))

    def big_jump_sample():
        m = max(n // 16, 2100)  # past the stratified-route cutoff
        return sample_bgw_at_least_n(heavy, m, Stream.from_seed(5, 3, 0)).degree_seq[:m]

    def conditioned_walk(m=min(n, 2000)):
        survival_table(wl, max(2048, m - 1))  # shared cache, built outside timing
        out = np.empty(0, dtype=np.int64)
        for r in range(8):
            p = sample_conditioned_walk(wl, m, m, Stream.from_seed(5, 4, r),
                                        table_R=max(2048, m - 1))
            out = np.concatenate([out, p.values])
        return out

    return [
        ("tree-decode", n, tree_decode),
        ("exact-n-sample", n, exact_n_sample),
        ("loop-bfs", n, loop_bfs),
        ("big-jump-sample", max(n // 16, 2100), big_jump_sample),
        ("conditioned-walk-x8", min(n, 2000), conditioned_walk),
    ]


def _best_of(fn, reps: int) -> tuple:
    best = float("inf")
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(n: int, reps: int, out_dir: str) -> int:
    rows = []
    previous = backend.current_backend()
    try:
        for name, size, fn in _cases(n):
            times = {}
            outs = {}
            for side in ("numba", "numpy") if backend.HAS_NUMBA else ("numpy",):
                backend.set_backend(side)
                fn()  # warm: compilation and shared caches stay out of timing
                times[side], outs[side] = _best_of(fn, reps)
            equal = (
                np.array_equal(outs["numba"], outs["numpy"])
                if backend.HAS_NUMBA
                else None
            )
            rows.append((name, size, times.get("numba"), times["numpy"], equal))
    finally:
        backend.set_backend(previous)

    header = f"{'case':<22}{'n':>9}{'numba ms':>12}{'numpy ms':>12}{'ratio':>8}  equal"
    print(header)
    print("-" * len(header))
    for name, size, tb, tp, equal in rows:
        nb = f"{1e3 * tb:.2f}" if tb is not None else ""
        ratio = f"{tp / tb:.1f}x" if tb else ""
        print(f"{name:<22}{size:>9}{nb:>12}{1e3 * tp:>12.2f}{ratio:>8}  {equal}")

    path = Path(out_dir) / "bench.csv"
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("case", "n", "numba_seconds", "numpy_seconds", "outputs_equal"))
        for name, size, tb, tp, equal in rows:
            w.writerow((name, size, "" if tb is None else repr(tb), repr(tp),
                        "" if equal is None else str(equal).lower()))
    print(f"\nwrote {path}")
    bad = [r for r in rows if r[4] is False]
    return 1 if bad else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="looptrees.bench", description="compare the numba and numpy backends"
    )
    ap.add_argument("--n", type=int, default=100_000, help="tree size for the hot paths")
    ap.add_argument("--reps", type=int, default=3, help="repeats; best time wins")
    ap.add_argument("--out", default=".", help="directory for bench.csv")
    args = ap.parse_args(argv)
    return run(args.n, args.reps, args.out)


if __name__ == "__main__":
    sys.exit(main())
