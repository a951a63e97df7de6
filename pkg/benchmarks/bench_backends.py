#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python/numpy reference lane.

Runs the joint-replica simulator and the short-cut auditor on a medium
workload under both backends (same seeds, so outputs must agree exactly)
and reports wall times and speedups. The exact propagation step, which
is vectorised numpy in both lanes, is timed for reference.

Usage: python benchmarks/bench_backends.py [--replicas N] [--n VERTICES]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nbrewire._kernels import chi_batch, tau_batch
from nbrewire.graphcore import build_halfedge_space, sample_uniform_configuration
from nbrewire.walk import point_mass, propagate_distribution


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000, help="vertex count (3-regular)")
    ap.add_argument("--replicas", type=int, default=400)
    ap.add_argument("--t", type=int, default=60)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    space = build_halfedge_space([3] * args.n)
    cfg = sample_uniform_configuration(space, np.random.default_rng(args.seed))
    print(f"3-regular n={args.n} (|H|={space.total_halfedges}), "
          f"{args.replicas} replicas, t={args.t}")

    rows = []
    for mode, alpha, r in [("local", 0.02, 1), ("near", 0.01, 4),
                           ("global", 0.002, 1)]:
        common = (cfg.pairing, space.v_of, space.vstart, mode, alpha, r,
                  args.t, args.replicas, args.seed, True, 0, True)
        # warm the JIT before timing
        tau_batch(cfg.pairing, space.v_of, space.vstart, mode, alpha, r,
                  5, 2, args.seed, True, 0, True, backend="numba")
        (tau_nb, _), dt_nb = timed(tau_batch, *common, backend="numba")
        (tau_py, _), dt_py = timed(tau_batch, *common, backend="python")
        assert np.array_equal(tau_nb, tau_py), "backends disagree"
        rows.append((f"tau_batch[{mode}]", dt_nb, dt_py))

    chi_batch(cfg.pairing, space.v_of, space.vstart, 3, 10, 2, args.seed,
              True, 0, backend="numba")
    (chi_nb, _), dt_nb = timed(chi_batch, cfg.pairing, space.v_of, space.vstart,
                               3, args.t, args.replicas, args.seed, True, 0,
                               backend="numba")
    (chi_py, _), dt_py = timed(chi_batch, cfg.pairing, space.v_of, space.vstart,
                               3, args.t, args.replicas, args.seed, True, 0,
                               backend="python")
    assert np.array_equal(chi_nb, chi_py), "backends disagree"
    rows.append(("chi_batch", dt_nb, dt_py))

    dist = point_mass(space, 0)
    t0 = time.perf_counter()
    for _ in range(200):
        dist = propagate_distribution(space, cfg, dist)
    dt_prop = time.perf_counter() - t0
    print(f"\n{'kernel':<18} {'numba':>9} {'python':>9} {'speedup':>8}")
    for name, a, b in rows:
        print(f"{name:<18} {a:>8.3f}s {b:>8.3f}s {b / a:>7.1f}x")
    print(f"{'propagate x200':<18} {dt_prop:>8.3f}s   (vectorised numpy, both lanes)")


if __name__ == "__main__":
    main()
