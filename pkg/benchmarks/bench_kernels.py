"""Compare the compiled and numpy/scipy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--nodes 4000] [--channels 64] [--K 3] [--repeat 5]

Each kernel runs on a batch of random sparse graphs with both backends;
outputs are cross-checked before timing.
"""

import argparse
import timeit

import numpy as np

from bankgcn.data import random_connected_graph
from bankgcn.graph import batch_graphs, build_graph
from bankgcn.kernels import backends


def make_batch(n_nodes, rng, per_graph=32):
    count = max(1, n_nodes // per_graph)
    graphs = [build_graph(per_graph, random_connected_graph(per_graph, rng, edge_prob=0.15)) for _ in range(count)]
    return batch_graphs(graphs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=4000)
    ap.add_argument("--channels", type=int, default=64)
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    b = make_batch(args.nodes, rng)
    g = b.merged
    R = rng.standard_normal((g.n, args.channels))
    coef = rng.standard_normal((args.K + 1, args.channels))
    impls = backends()
    ops = {name: mod.make_operator(g.n, g.indptr, g.indices, -g.norm_weights) for name, mod in impls.items()}

    cases = {
        "cheb_stack": lambda m, op: m.cheb_stack(op, R, args.K),
        "cheb_apply": lambda m, op: m.cheb_apply(op, R, coef),
        "segment_max": lambda m, op: m.segment_max(R, b.offsets),
    }
    print(f"{g.n} nodes, {len(g.indices)} stored entries, {args.channels} channels, K={args.K}")
    print(f"{'kernel':<12} " + " ".join(f"{name:>12}" for name in impls) + "     speedup")
    for label, fn in cases.items():
        ref = None
        times = {}
        for name, mod in impls.items():
            out = fn(mod, ops[name])
            first = out[0] if isinstance(out, tuple) else out
            if ref is None:
                ref = first
            else:
                np.testing.assert_allclose(first, ref, rtol=1e-12, atol=1e-12)
            times[name] = min(timeit.repeat(lambda: fn(mod, ops[name]), number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<12} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times.values()) + f"   {speed:8.2f}x")


if __name__ == "__main__":
    main()
