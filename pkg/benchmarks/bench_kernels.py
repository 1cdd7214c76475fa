"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends consume the same random stream, so each row also checks that they
finish in the same number of rounds.
"""
import argparse
import time

import numpy as np

from triadlab import _fallback
from triadlab.dynamics import init_tokens
from triadlab.generators import GeneratorSpec, generate
from triadlab.rng import make_rng

try:
    from triadlab import _kernels
except ImportError:
    _kernels = None

CASES = [
    ("triad-median path-101", _fallback.TRIAD_MEDIAN, GeneratorSpec("path", {"length": 101}), 1),
    ("triad-median grid-11", _fallback.TRIAD_MEDIAN, GeneratorSpec("grid", {"size": 11}), 1),
    ("restricted tree-h6 k=3", _fallback.RESTRICTED, GeneratorSpec("tree", {"branching": 2, "height": 6}), 3),
    ("dyad-midpoint path-51", _fallback.DYAD_MIDPOINT, GeneratorSpec("path", {"length": 51}), 1),
]


def time_tokens(module, rule, g, p, k, seed):
    s = init_tokens(p, k)
    owners, counts = s.owners.copy(), s.counts(g.node_count)
    start = time.perf_counter()
    steps, status = module.run_tokens(rule, g.indptr, g.indices, g.dist, owners, counts, make_rng(seed).bit_generator, 10**8)
    return time.perf_counter() - start, steps


def time_star(module, seed):
    leaves = np.full(20, 18, dtype=np.int64)
    start = time.perf_counter()
    _, steps, _ = module.run_star(40, leaves, True, make_rng(seed).bit_generator, 10**8)
    return time.perf_counter() - start, steps


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")

    print(f"{'case':<26}{'rounds':>10}{'python s':>11}{'cython s':>11}{'speedup':>10}")
    rows = [(name, rule, *generate(spec), k) for name, rule, spec, k in CASES]
    for name, rule, g, p, k in rows:
        py = cy = 0.0
        for r in range(args.repeat):
            t_py, n_py = time_tokens(_fallback, rule, g, p, k, r)
            t_cy, n_cy = time_tokens(_kernels, rule, g, p, k, r)
            assert n_py == n_cy, "backends diverged"
            py, cy = py + t_py, cy + t_cy
        print(f"{name:<26}{n_cy:>10}{py / args.repeat:>11.4f}{cy / args.repeat:>11.5f}{py / cy:>9.0f}x")
    py = cy = 0.0
    for r in range(args.repeat):
        t_py, n_py = time_star(_fallback, r)
        t_cy, n_cy = time_star(_kernels, r)
        assert n_py == n_cy, "backends diverged"
        py, cy = py + t_py, cy + t_cy
    print(f"{'crtd star-20 n=400':<26}{n_cy:>10}{py / args.repeat:>11.4f}{cy / args.repeat:>11.5f}{py / cy:>9.0f}x")


if __name__ == "__main__":
    main()
