"""Benchmark the edge aggregation kernel: compiled extension vs numpy.

Runs both backends on identical synthetic workloads, checks the outputs
are bit-identical, and reports best-of-N wall times.  A second section
times a whole forward+gradient pass on a bin-packing batch under each
backend.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--large]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from symilp.datagen import BppConfig, gen_bpp
from symilp.bipartite import to_bipartite
from symilp.gnn import TrainingSample, fit_scaler, sample_batch
from symilp.gnn import model as model_mod
from symilp.gnn.model import init_model, loss_and_grad
from symilp.kernels import _core_py

try:
    from symilp.kernels import _core
except ImportError:
    _core = None

# (name, num_src, num_dst, num_edges, hidden)
WORKLOADS = [
    ("bpp-desk", 42, 18, 84, 32),
    ("medium", 2_000, 1_000, 20_000, 64),
    ("large", 20_000, 10_000, 200_000, 64),
]


def make_workload(num_src, num_dst, num_edges, hidden, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(num_src, hidden))
    src_idx = rng.integers(0, num_src, size=num_edges).astype(np.int64)
    dst_idx = rng.integers(0, num_dst, size=num_edges).astype(np.int64)
    weights = rng.normal(size=num_edges)
    return src, src_idx, dst_idx, weights, num_dst


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(repeats, include_large):
    print(f"{'workload':<10} {'edges':>8} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for name, ns, nd, ne, h in WORKLOADS:
        if name == "large" and not include_large:
            continue
        args = make_workload(ns, nd, ne, h)
        out_py = _core_py.edge_aggregate(*args)
        t_py = best_of(lambda: _core_py.edge_aggregate(*args), repeats)
        if _core is None:
            print(f"{name:<10} {ne:>8} {t_py * 1e3:>9.3f}ms {'n/a':>10} {'n/a':>8}")
            continue
        out_cy = _core.edge_aggregate(*args)
        assert np.array_equal(out_py, out_cy), "backends disagree bit for bit"
        t_cy = best_of(lambda: _core.edge_aggregate(*args), repeats)
        print(f"{name:<10} {ne:>8} {t_py * 1e3:>9.3f}ms {t_cy * 1e3:>9.3f}ms "
              f"{t_py / t_cy:>7.2f}x")


def bench_model(repeats):
    cfg = BppConfig(num_instances=8, seed=0)
    data = gen_bpp(cfg)
    graphs = [to_bipartite(g.instance) for g in data]
    rng = np.random.default_rng(0)
    samples = [
        TrainingSample(i, g, rng.random(g.num_vars), d.solution.values.copy())
        for i, (g, d) in enumerate(zip(graphs, data))
    ]
    scaler = fit_scaler(samples)
    for s in samples:
        s.batch = sample_batch(s.graph, s.z, scaler)
    model = init_model(hidden=32, seed=0)

    def run():
        for s in samples:
            loss_and_grad(model, s.batch, s.label)

    results = {}
    impls = [("numpy", _core_py.edge_aggregate)]
    if _core is not None:
        impls.append(("cython", _core.edge_aggregate))
    saved = model_mod.edge_aggregate
    try:
        for name, impl in impls:
            model_mod.edge_aggregate = impl
            results[name] = best_of(run, repeats)
    finally:
        model_mod.edge_aggregate = saved

    line = " ".join(f"{k}={v * 1e3:.2f}ms" for k, v in results.items())
    print(f"\nforward+grad over {len(samples)} bpp instances: {line}")
    if "cython" in results:
        print(f"model-level speedup: {results['numpy'] / results['cython']:.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--large", action="store_true",
                    help="include the 200k-edge workload")
    args = ap.parse_args()
    print(f"compiled backend available: {_core is not None}")
    bench_kernel(args.repeats, args.large)
    bench_model(max(3, args.repeats // 4))


if __name__ == "__main__":
    main()
