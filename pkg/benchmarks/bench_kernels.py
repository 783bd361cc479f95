"""Time the compiled kernels against the numpy/Python fallback.

    python3 benchmarks/bench_kernels.py [--n 2000] [--width 64] [--repeat 5]

Both backends run on the same regime-1 CSBM graph; outputs are checked for
agreement before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from nodemoe import _fallback
from nodemoe.csbm import generate, regime1

try:
    from nodemoe import _kernels
except ImportError:
    _kernels = None


def _cases(g, width, rng):
    x = rng.standard_normal((g.num_nodes, width))
    dis = g.inv_sqrt_degrees()
    labels = rng.integers(0, 2, g.num_nodes)
    order = rng.permutation(g.num_nodes).astype(np.int64)

    def lpa(mod):
        lab = np.arange(g.num_nodes, dtype=np.int64)
        mod.label_propagation_sweep(g.csr_offsets, g.csr_targets, order, lab, np.zeros(g.num_nodes, np.int64))
        return lab

    return {
        "csr_spmm": lambda mod: mod.csr_spmm(g.csr_offsets, g.csr_targets, dis, dis, x),
        "same_label_counts": lambda mod: mod.same_label_counts(g.csr_offsets, g.csr_targets, labels),
        "label_propagation_sweep": lpa,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    g = generate(regime1(args.seed).replace(n=args.n)).graph
    print(f"graph: n={g.num_nodes} edges={g.num_edges} width={args.width}")
    print(f"{'kernel':26s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in _cases(g, args.width, np.random.default_rng(args.seed)).items():
        a, b = fn(_fallback), fn(_kernels)
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 2
        tp = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:26s} {tp:10.3f} {tc:10.3f} {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
