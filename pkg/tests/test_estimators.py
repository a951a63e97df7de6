import math

import numpy as np
import pytest

from nbrewire._rng import ReplicaRng
from nbrewire.dynamics import Configuration, DynamicsSpec
from nbrewire.estimators import (ShortcutAudit, _setup_start, chi_from_s,
                                 estimate_dynamic_tv_plugin, estimate_tau_tail,
                                 exact_dynamic_tv_walk_independent,
                                 partner_churn_factor, plugin_bias_bound,
                                 shortcut_audit, shortcut_experiment,
                                 verify_link_theorem, wilson_interval)
from nbrewire.exactlab import exact_tau_tail_small
from nbrewire.graphcore import build_halfedge_space
from nbrewire.walk import static_tv_curve, total_variation, uniform_distribution

from conftest import sampled_config


def test_wilson_basics():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.1
    lo, hi = wilson_interval(100, 100)
    assert hi > 0.999 and 0.9 < lo < 1.0
    lo, hi = wilson_interval(50, 100, level=0.95)
    assert lo < 0.5 < hi
    lo99, hi99 = wilson_interval(50, 100, level=0.99)
    assert lo99 < lo and hi99 > hi


def test_tau_tail_alpha_zero_all_ones():
    sp = build_halfedge_space([3] * 20)
    tail = estimate_tau_tail(sp, DynamicsSpec("global", 0.0), [1, 5, 10], 500, seed=3)
    assert (tail.estimates == 1.0).all()


def test_tau_tail_seed_reproducible_and_monotone():
    sp = build_halfedge_space([3] * 20)
    spec = DynamicsSpec("global", 0.05)
    a = estimate_tau_tail(sp, spec, [1, 3, 5, 8], 2000, seed=11)
    b = estimate_tau_tail(sp, spec, [1, 3, 5, 8], 2000, seed=11)
    c = estimate_tau_tail(sp, spec, [1, 3, 5, 8], 2000, seed=12)
    assert np.array_equal(a.estimates, b.estimates)
    assert not np.array_equal(a.estimates, c.estimates)
    assert (np.diff(a.estimates) <= 0).all()


def test_tau_tail_backend_equivalence():
    sp = build_halfedge_space([3] * 16)
    spec = DynamicsSpec("near", 0.1, r=2)
    a = estimate_tau_tail(sp, spec, [1, 4, 8], 50, seed=21, backend="numba")
    b = estimate_tau_tail(sp, spec, [1, 4, 8], 50, seed=21, backend="python")
    assert np.array_equal(a.estimates, b.estimates)


def test_tau_tail_matches_exact_lab_small():
    sp = build_halfedge_space([2, 2, 2])
    spec = DynamicsSpec("local", 0.5)
    surv = exact_tau_tail_small(sp, spec, 3)
    n = 50_000
    tail = estimate_tau_tail(sp, spec, [3], n, seed=99, annealed=True)
    p = surv[3]
    assert abs(tail.estimates[0] - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_plugin_t0_exact():
    sp = build_halfedge_space([3] * 8)
    est = estimate_dynamic_tv_plugin(sp, DynamicsSpec("local", 0.5), 0,
                                     samples=sp.total_halfedges, seed=5)
    assert est.estimate == pytest.approx(1 - 1 / sp.total_halfedges)


def test_plugin_rejects_small_m():
    sp = build_halfedge_space([3] * 8)
    with pytest.raises(ValueError, match=str(sp.total_halfedges)):
        estimate_dynamic_tv_plugin(sp, DynamicsSpec("local", 0.5), 1,
                                   samples=10, seed=5)


def test_plugin_alpha_zero_within_bias_bound():
    sp = build_halfedge_space([3] * 40)
    cfg0, x0 = _setup_start(sp, 7, None, None)
    static = static_tv_curve(sp, cfg0, x0, 6)
    for t in (1, 3, 6):
        est = estimate_dynamic_tv_plugin(sp, DynamicsSpec("global", 0.0), t,
                                         samples=40_000, seed=7, cfg0=cfg0, x0=x0)
        assert abs(est.estimate - static[t]) <= est.bias_bound


def test_plugin_supercritical_near_uniform():
    sp = build_halfedge_space([3] * 50)
    est = estimate_dynamic_tv_plugin(sp, DynamicsSpec("global", 0.5), 40,
                                     samples=30_000, seed=8)
    assert est.estimate <= est.bias_bound + 0.01


def test_plugin_self_calibration_uniform_sample():
    # TV of a size-M uniform sample stays within twice the recorded bound
    sp = build_halfedge_space([3] * 100)
    H = sp.total_halfedges
    rng = ReplicaRng(12)
    M = 4 * H
    counts = np.zeros(H)
    for _ in range(M):
        counts[rng.rand_below(H)] += 1
    tv = total_variation(counts / M, uniform_distribution(sp))
    assert tv <= 2 * plugin_bias_bound(H, M)


def test_walk_independent_tv_basics():
    sp = build_halfedge_space([3] * 30)
    cfg0, x0 = _setup_start(sp, 9, None, None)
    out = exact_dynamic_tv_walk_independent(sp, cfg0, x0,
                                            DynamicsSpec("global", 0.0),
                                            [0, 2, 4], 20, seed=9)
    static = static_tv_curve(sp, cfg0, x0, 4)
    assert out.estimates[0] == pytest.approx(1 - 1 / sp.total_halfedges)
    assert np.allclose(out.estimates, static[[0, 2, 4]], atol=1e-12)


def test_walk_independent_rejects_position_dependent():
    sp = build_halfedge_space([3] * 10)
    cfg0, x0 = _setup_start(sp, 9, None, None)
    with pytest.raises(ValueError, match="global"):
        exact_dynamic_tv_walk_independent(sp, cfg0, x0,
                                          DynamicsSpec("local", 0.1), [2], 10, 9)


@pytest.mark.slow
def test_cross_estimator_consistency():
    # plug-in and exact-per-trajectory estimates agree within combined error
    sp = build_halfedge_space([3] * 2000)
    alpha = 1e-3
    spec = DynamicsSpec("global", alpha)
    cfg0, x0 = _setup_start(sp, 14, None, None)
    tgrid = [10, 30, 60]
    exact = exact_dynamic_tv_walk_independent(sp, cfg0, x0, spec, tgrid, 200, seed=14)
    M = 120_000
    for j, t in enumerate(tgrid):
        plug = estimate_dynamic_tv_plugin(sp, spec, t, M, seed=14, cfg0=cfg0, x0=x0)
        budget = plug.bias_bound + max(exact.estimates[j] - exact.ci_lo[j],
                                       exact.ci_hi[j] - exact.estimates[j]) + 0.01
        assert abs(plug.estimate - exact.estimates[j]) <= budget


def brute_force_shortcut(space, cfg, path, k, l, r):
    """Independent oracle: enumerate simple off-path paths up to length r."""
    path_edges = set()
    for s in range(1, len(path)):
        a = int(path[s - 1])
        b = cfg.partner(a)
        path_edges.add((min(a, b), max(a, b)))
    target = int(space.v_of[path[l]])

    def explore(v, depth, visited):
        if depth > r:
            return False
        if v == target and depth > 0:
            return True
        if depth == r:
            return False
        for h in space.halfedges_of(v):
            b = cfg.partner(h)
            e = (min(h, b), max(h, b))
            if e in path_edges:
                continue
            w = int(space.v_of[b])
            if w in visited:
                continue
            if explore(w, depth + 1, visited | {w}):
                return True
        return False

    start = int(space.v_of[path[k]])
    return explore(start, 0, {start})


def test_shortcut_k4_oracle():
    # complete graph on 4 vertices; a 3-step vertex path leaves one chord
    sp = build_halfedge_space([3, 3, 3, 3])
    # explicit K4: edges (v0,v1), (v0,v2), (v0,v3), (v1,v2), (v1,v3), (v2,v3)
    pairing = np.array([3, 6, 9, 0, 7, 10, 1, 4, 11, 2, 5, 8], dtype=np.int64)
    cfg = Configuration(pairing)
    cfg.validate()
    # walk v0 -> v1 -> v2 -> v3 on half-edges: 0 pairs 3 (v1), ...
    path = np.array([0, 4, 8, 11], dtype=np.int64)  # positions at t=0..3
    assert [int(sp.v_of[h]) for h in path] == [0, 1, 2, 3]
    audit = shortcut_audit(sp, cfg, path, r=1)
    assert not audit.skipped
    assert audit.chi == 1  # the (1,3) chord is the only counted hit
    for k in range(1, 4):
        for l in range(1, 4):
            if k != l:
                assert audit.s_matrix[k, l] == brute_force_shortcut(sp, cfg, path, k, l, 1)
    assert np.array_equal(audit.s_matrix[1:, 1:], audit.s_matrix[1:, 1:].T)


def test_shortcut_high_girth_zero():
    # a single long cycle has no off-path connections at small radius
    n = 30
    sp = build_halfedge_space([2] * n)
    pairing = np.empty(2 * n, dtype=np.int64)
    for v in range(n):
        a = 2 * v + 1
        b = (2 * v + 2) % (2 * n)
        pairing[a] = b
        pairing[b] = a
    cfg = Configuration(pairing)
    cfg.validate()
    path = [0]
    rng = ReplicaRng(1)
    from nbrewire.walk import nbrw_step

    for _ in range(10):
        path.append(nbrw_step(sp, cfg, path[-1], rng))
    audit = shortcut_audit(sp, cfg, np.array(path), r=2)
    assert not audit.skipped and audit.chi == 0


def test_shortcut_skips_non_saw():
    sp = build_halfedge_space([2, 2])
    cfg = Configuration(np.array([1, 0, 3, 2], dtype=np.int64))
    path = np.array([0, 0, 0], dtype=np.int64)  # self-loop bouncing
    audit = shortcut_audit(sp, cfg, path, r=1)
    assert audit.skipped and audit.chi is None


def test_chi_from_s_index_ranges():
    # hand check of the double-sum ranges at t=4, r=2
    t, r = 4, 2
    S = np.zeros((t + 1, t + 1), dtype=np.uint8)
    S[1, 3] = 1
    # pairs (k,l)=(1,3): counted for i=2 (head sum, l <= i+r): once
    assert chi_from_s(S, r, t) == 1
    S[1, 4] = 1
    # (1,4): i in {2,3} satisfy k<i<l<=i+r -> i=2 gives l=4 <= 4; i=3 gives l=4
    assert chi_from_s(S, r, t) == 3


def test_shortcut_experiment_kernel_matches_python_audit():
    sp = build_halfedge_space([3] * 200)
    ex = shortcut_experiment(sp, r=2, t=12, replicas=40, seed=77)
    from nbrewire._kernels import static_path_py, _sample_pairing_py
    from nbrewire.estimators import shortcut_audit_arrays

    for rep in range(40):
        rng = ReplicaRng(77, rep)
        pairing = _sample_pairing_py(sp.total_halfedges, rng)
        x = rng.rand_below(sp.total_halfedges)
        path = static_path_py(pairing, sp.v_of, sp.vstart, x, 12, rng)
        S, chi, skipped = shortcut_audit_arrays(pairing, sp.v_of, sp.vstart, path, 2)
        assert bool(ex.skipped[rep]) == skipped
        if not skipped:
            assert ex.chi[rep] == chi


def test_link_theorem_alpha_zero_residual_zero():
    sp = build_halfedge_space([3] * 60)
    table = verify_link_theorem(sp, DynamicsSpec("global", 0.0), [1, 3, 5],
                                {"graph_replicas": 10, "tau_replicas": 200}, seed=6)
    for row in table.rows:
        assert abs(row["residual"]) < 1e-12
        assert row["tau_tail"] == 1.0


def test_partner_churn_factor():
    assert partner_churn_factor(0.0, 10) == 1.0
    assert partner_churn_factor(0.01, 4) == pytest.approx(math.exp(-0.1))
