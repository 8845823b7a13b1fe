"""Compare the compiled and numpy kernels, then a full fitness workload.

    python benchmarks/bench_kernels.py [--repeat N]

The end-to-end part runs one short evolution per backend in a subprocess so
each picks its backend at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from conceptevo import _kernels_py, kernels

_E2E = r"""
import time
from conceptevo import kernels
from conceptevo.evolve import GPConfig, evolve_run
from conceptevo.harness import generate_family_kb
from conceptevo.kb import load_kb
from conceptevo.retrieval import load_problem
from conceptevo.splits import calculate_splits
kb_text, uncle = generate_family_kb(10, 1)
kb = load_kb(kb_text); problem, _, _ = load_problem(uncle)
table = calculate_splits(kb, problem, 10)
t = time.perf_counter()
evolve_run(kb, problem, table, GPConfig(population_size=400, generations=40, seed=1))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def _graph(n, m, rng):
    src = np.sort(rng.integers(0, n, m))
    indptr = np.searchsorted(src, np.arange(n + 1)).astype(np.int64)
    return indptr, rng.integers(0, n, m).astype(np.int64)


def micro(repeat: int) -> None:
    rng = np.random.default_rng(0)
    print(f"{'instances':>10} {'edges':>8} {'kernel':>17} {'numpy us':>10} {'compiled us':>12}")
    for n, m in ((200, 600), (2_000, 8_000), (50_000, 200_000)):
        indptr, indices = _graph(n, m, rng)
        member = rng.random(n) < 0.3
        cases = {"successor_counts": lambda mod: mod.successor_counts(indptr, indices, member)}
        for name, fn in cases.items():
            py = min(timeit.repeat(lambda: fn(_kernels_py), number=200, repeat=repeat)) / 200 * 1e6
            if kernels.BACKEND == "cython":
                c = min(timeit.repeat(lambda: fn(kernels), number=200, repeat=repeat)) / 200 * 1e6
                cs = f"{c:12.1f}"
            else:
                cs = f"{'n/a':>12}"
            print(f"{n:>10} {m:>8} {name:>17} {py:10.1f} {cs}")


def end_to_end() -> None:
    for pure in ("0", "1"):
        env = {**os.environ, "CONCEPTEVO_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"evolution 400 x 40 on the kinship KB, {out[0]:>7} backend: {float(out[1]):.2f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    micro(args.repeat)
    end_to_end()


if __name__ == "__main__":
    main()
