"""Monte Carlo estimators for the crossing time and the dynamic TV distance.

Tail probabilities come with Wilson intervals (asymmetric, sane near 0
and 1). The plug-in TV estimator records its a-priori bias bound
sqrt(|H| / (2 pi M)) so callers only compare curves where the bound is
small. For walker-independent (global) dynamics an exact-per-trajectory
estimator propagates the walk law through sampled graph histories, which
removes the plug-in bias entirely. The short-cut auditor counts off-path
connections between visited vertices and evaluates the chi statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ._kernels import chi_batch, tau_batch
from ._rng import ReplicaRng
from .dynamics import Configuration, DynamicsSpec, run_trajectory
from .graphcore import HalfEdgeSpace, pairing_from_perm
from .resultio import ResultTable
from .walk import point_mass, static_tv_curve, total_variation, uniform_distribution

SETUP_STREAM = -1  # replica id reserved for sampling the shared (x, cfg)
BOOT_STREAM = -2  # replica id reserved for bootstrap resampling


def wilson_interval(successes: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n >= 1")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return max(0.0, centre - half), min(1.0, centre + half)


def _setup_start(space: HalfEdgeSpace, seed: int,
                 cfg0: Configuration | None, x0: int | None):
    """Shared (x, cfg) for quenched runs, drawn from the setup stream."""
    rng = ReplicaRng(seed, SETUP_STREAM)
    if cfg0 is None:
        perm = np.arange(space.total_halfedges, dtype=np.int64)
        rng.shuffle(perm)
        cfg0 = pairing_from_perm(perm)
    if x0 is None:
        x0 = rng.rand_below(space.total_halfedges)
    return cfg0, int(x0)


@dataclass
class TailEstimate:
    """Empirical tail of the crossing time with Wilson intervals."""

    t_grid: np.ndarray
    estimates: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    replicas: int
    seed: int
    annealed: bool
    ci_level: float = 0.99

    def __post_init__(self):
        # tails from one tau sample are nonincreasing by construction;
        # guard against aggregation bugs.
        if np.any(np.diff(self.estimates) > 1e-15):
            raise AssertionError("tail estimates must be nonincreasing in t")


def estimate_tau_tail(space: HalfEdgeSpace, spec: DynamicsSpec, t_grid,
                      replicas: int, seed: int, annealed: bool = True,
                      cfg0: Configuration | None = None, x0: int | None = None,
                      ci_level: float = 0.99,
                      backend: str | None = None) -> TailEstimate:
    """Monte Carlo P(tau > t) over a grid of times.

    annealed=True draws a fresh uniform (x, cfg) per replica (the
    product-measure averaging behind "typical" statements); otherwise all
    replicas share one (x, cfg), sampled from the setup stream unless
    supplied.
    """
    if replicas < 1:
        raise ValueError("need replicas >= 1")
    t_grid = np.array(sorted(int(t) for t in t_grid), dtype=np.int64)
    if t_grid.size == 0 or t_grid[0] < 0:
        raise ValueError("t grid must be nonempty and nonnegative")
    t_max = int(t_grid[-1])
    if spec.mode == "custom":
        taus = _custom_tau_batch(space, spec, t_max, replicas, seed, annealed,
                                 cfg0, x0)
    else:
        if annealed:
            pairing = _identity_ok_pairing(space)
            x_start = 0
        else:
            cfg0, x_start = _setup_start(space, seed, cfg0, x0)
            pairing = cfg0.pairing
        taus, _ = tau_batch(pairing, space.v_of, space.vstart, spec.mode,
                            spec.alpha, spec.r or 1, t_max, replicas, seed,
                            annealed, x_start, stop_at_tau=True,
                            backend=backend)
    counts = np.array([(taus > t).sum() for t in t_grid], dtype=np.int64)
    est = counts / replicas
    lo = np.empty_like(est)
    hi = np.empty_like(est)
    for i, k in enumerate(counts):
        lo[i], hi[i] = wilson_interval(int(k), replicas, ci_level)
    return TailEstimate(t_grid, est, lo, hi, replicas, seed, annealed, ci_level)


def _identity_ok_pairing(space: HalfEdgeSpace) -> np.ndarray:
    """Placeholder master pairing for annealed runs (resampled per replica)."""
    H = space.total_halfedges
    pairing = np.empty(H, dtype=np.int64)
    pairing[0::2] = np.arange(1, H, 2)
    pairing[1::2] = np.arange(0, H, 2)
    return pairing


def _custom_tau_batch(space, spec, t_max, replicas, seed, annealed, cfg0, x0):
    H = space.total_halfedges
    if not annealed:
        cfg0, x0 = _setup_start(space, seed, cfg0, x0)
    taus = np.empty(replicas, dtype=np.int64)
    for rep in range(replicas):
        rng = ReplicaRng(seed, rep)
        if annealed:
            perm = np.arange(H, dtype=np.int64)
            rng.shuffle(perm)
            cfg = pairing_from_perm(perm)
            x = rng.rand_below(H)
        else:
            cfg, x = cfg0, x0
        rec = run_trajectory(space, cfg, x, spec, t_max, rng, stop_at_tau=True)
        taus[rep] = rec.tau if rec.tau is not None else t_max + 1
    return taus


@dataclass
class TVEstimate:
    """Plug-in TV estimate with its recorded a-priori bias bound."""

    t: int
    estimate: float
    bias_bound: float
    samples: int
    seed: int
    x0: int
    cfg0: Configuration


def plugin_bias_bound(n_halfedges: int, samples: int) -> float:
    return math.sqrt(n_halfedges / (2.0 * math.pi * samples))


def estimate_dynamic_tv_plugin(space: HalfEdgeSpace, spec: DynamicsSpec,
                               t: int, samples: int, seed: int,
                               cfg0: Configuration | None = None,
                               x0: int | None = None,
                               backend: str | None = None) -> TVEstimate:
    """Plug-in dynamic TV at time t from one fixed (x, cfg).

    Runs `samples` independent replicas, histograms X_t, and returns
    TV(empirical, uniform) with the recorded bias bound
    sqrt(|H|/(2 pi M)). Rejects M < |H|, where the plug-in says nothing.
    """
    H = space.total_halfedges
    if samples < H:
        raise ValueError(f"plug-in TV needs M >= |H| = {H}, got {samples}")
    cfg0, x_start = _setup_start(space, seed, cfg0, x0)
    if spec.mode == "custom":
        xs = np.empty(samples, dtype=np.int64)
        for rep in range(samples):
            rng = ReplicaRng(seed, rep)
            rec = run_trajectory(space, cfg0, x_start, spec, t, rng)
            xs[rep] = rec.positions[-1]
    else:
        _, xs = tau_batch(cfg0.pairing, space.v_of, space.vstart, spec.mode,
                          spec.alpha, spec.r or 1, t, samples, seed,
                          annealed=False, x0=x_start, stop_at_tau=False,
                          backend=backend)
    emp = np.bincount(xs, minlength=H) / samples
    tv = total_variation(emp, uniform_distribution(space))
    return TVEstimate(t=int(t), estimate=tv,
                      bias_bound=plugin_bias_bound(H, samples),
                      samples=samples, seed=seed, x0=x_start, cfg0=cfg0)


@dataclass
class WalkIndependentTV:
    """Exact-per-trajectory dynamic TV for walker-independent dynamics."""

    t_grid: np.ndarray
    estimates: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    graph_replicas: int
    seed: int
    x0: int
    cfg0: Configuration


def _global_graph_step(pairing: np.ndarray, alpha: float, rng: ReplicaRng) -> None:
    """One global rewiring of a mutable pairing (no walker involved)."""
    H = len(pairing)
    m_edges = H // 2
    k = rng.binomial(m_edges, alpha)
    if k == 0:
        return
    used: set[int] = set()
    selected = []
    while len(selected) < k:
        h = rng.rand_below(H)
        a, b = h, int(pairing[h])
        if b < a:
            a, b = b, a
        if a in used:
            continue
        used.add(a)
        selected.append((a, b))
    if k >= m_edges - k:
        perm = np.arange(H, dtype=np.int64)
        rng.shuffle(perm)
        a, b = perm[0::2], perm[1::2]
        pairing[a] = b
        pairing[b] = a
        return
    partners = []
    while len(partners) < k:
        h = rng.rand_below(H)
        a, b = h, int(pairing[h])
        if b < a:
            a, b = b, a
        if a in used:
            continue
        used.add(a)
        partners.append((a, b))
    sel_list = [h for e in selected for h in e]
    par_list = [h for e in partners for h in e]
    rng.shuffle(sel_list)
    rng.shuffle(par_list)
    for u, w in zip(sel_list, par_list):
        pairing[u] = w
        pairing[w] = u


def exact_dynamic_tv_walk_independent(space: HalfEdgeSpace, cfg0: Configuration,
                                      x0: int, spec: DynamicsSpec, t_grid,
                                      graph_replicas: int, seed: int,
                                      n_bootstrap: int = 200,
                                      ci_level: float = 0.99) -> WalkIndependentTV:
    """Dynamic TV via exact propagation through sampled graph histories.

    Only valid when the dynamics ignores the walker (global mode): then
    the walk given a graph history is a time-inhomogeneous Markov chain,
    so each sampled history contributes its exact conditional law of X_t
    and only the history sampling carries Monte Carlo error. The CI is a
    trajectory-level bootstrap.
    """
    if spec.mode != "global":
        raise ValueError("walk-independent TV needs global mode "
                         "(position-dependent dynamics breaks the decoupling)")
    if graph_replicas < 2:
        raise ValueError("need at least 2 graph trajectories")
    t_grid = np.array(sorted(int(t) for t in t_grid), dtype=np.int64)
    t_max = int(t_grid[-1])
    H = space.total_halfedges
    u = uniform_distribution(space)
    from .walk import propagate_distribution  # deferred to keep import light

    dists = np.empty((graph_replicas, t_grid.size, H))
    for g in range(graph_replicas):
        rng = ReplicaRng(seed, g)
        pairing = cfg0.pairing.copy()
        dist = point_mass(space, x0)
        col = 0
        for t in range(0, t_max + 1):
            if t > 0:
                _global_graph_step(pairing, spec.alpha, rng)
                dist = propagate_distribution(space, pairing, dist)
            while col < t_grid.size and t == t_grid[col]:
                dists[g, col] = dist
                col += 1
    est = np.array([total_variation(dists[:, j].mean(axis=0), u)
                    for j in range(t_grid.size)])
    boot_rng = ReplicaRng(seed, BOOT_STREAM)
    boots = np.empty((n_bootstrap, t_grid.size))
    for b in range(n_bootstrap):
        idx = np.array([boot_rng.rand_below(graph_replicas)
                        for _ in range(graph_replicas)])
        for j in range(t_grid.size):
            boots[b, j] = total_variation(dists[idx, j].mean(axis=0), u)
    alpha_tail = (1.0 - ci_level) / 2.0
    q_lo = np.quantile(boots, alpha_tail, axis=0)
    q_hi = np.quantile(boots, 1.0 - alpha_tail, axis=0)
    # basic (reflected) bootstrap: corrects the upward bias of TV applied
    # to resampled averages (convexity), which the percentile CI inherits
    lo = np.clip(2.0 * est - q_hi, 0.0, 1.0)
    hi = np.clip(2.0 * est - q_lo, 0.0, 1.0)
    return WalkIndependentTV(t_grid, est, lo, hi, graph_replicas, seed,
                             int(x0), cfg0)


# ---------------------------------------------------------------------------
# Short-cut auditing.
# ---------------------------------------------------------------------------

@dataclass
class ShortcutAudit:
    s_matrix: np.ndarray | None
    chi: int | None
    skipped: bool
    reason: str = ""


def chi_from_s(S: np.ndarray, r: int, t: int) -> int:
    """The chi statistic: the displayed double sum over (i, k, l) ranges."""
    head = max(t - r, 0)
    chi = 0
    for i in range(1, head + 1):
        for l in range(i + 1, i + r + 1):
            for k in range(1, i):
                chi += int(S[k, l])
    for i in range(head + 1, t + 1):
        for l in range(i + 1, t + 1):
            for k in range(1, i):
                chi += int(S[k, l])
    return chi


def shortcut_audit_arrays(pairing: np.ndarray, v_of: np.ndarray,
                          vstart: np.ndarray, path: np.ndarray, r: int):
    """Array-level audit; returns (S, chi, skipped).

    S[k, l] = 1 iff the vertices visited at times k and l are joined by a
    path of length <= r using no edge of the walk path. Skips (returns
    skipped=True) when the walk path is not vertex self-avoiding.
    """
    t = len(path) - 1
    n_vert = len(vstart) - 1
    vindex = {}
    for s in range(t + 1):
        v = int(v_of[path[s]])
        if v in vindex:
            return None, None, True
        vindex[v] = s
    path_edges = set()
    for s in range(1, t + 1):
        a = int(path[s - 1])
        b = int(pairing[a])
        path_edges.add(a if a < b else b)
    S = np.zeros((t + 1, t + 1), dtype=np.uint8)
    for k in range(1, t + 1):
        u = int(v_of[path[k]])
        seen = {u}
        frontier = [u]
        for _depth in range(1, r + 1):
            if not frontier:
                break
            nxt = []
            for w in frontier:
                for h in range(int(vstart[w]), int(vstart[w + 1])):
                    b = int(pairing[h])
                    e = h if h < b else b
                    if e in path_edges:
                        continue
                    w2 = int(v_of[b])
                    if w2 not in seen:
                        seen.add(w2)
                        nxt.append(w2)
                        if w2 in vindex:
                            S[k, vindex[w2]] = 1
            frontier = nxt
    return S, chi_from_s(S, r, t), False


def shortcut_audit(space: HalfEdgeSpace, cfg, walk_path, r: int) -> ShortcutAudit:
    """Audit one walk path for short-cuts of length <= r.

    cfg may be a single Configuration (static audit) or a sequence of
    per-step snapshots; with snapshots, the pair (k, l) is audited on the
    snapshot at the earlier index k.
    """
    path = np.asarray(walk_path, dtype=np.int64)
    t = len(path) - 1
    if isinstance(cfg, Configuration):
        S, chi, skipped = shortcut_audit_arrays(cfg.pairing, space.v_of,
                                                space.vstart, path, r)
        if skipped:
            return ShortcutAudit(None, None, True,
                                 "walk path is not vertex self-avoiding")
        return ShortcutAudit(S, chi, False)
    snapshots = list(cfg)
    if len(snapshots) < t + 1:
        raise ValueError("need one snapshot per path position")
    rows = []
    for k in range(0, t + 1):
        S_k, _chi, skipped = shortcut_audit_arrays(snapshots[k].pairing,
                                                   space.v_of, space.vstart,
                                                   path, r)
        if skipped:
            return ShortcutAudit(None, None, True,
                                 "walk path is not vertex self-avoiding")
        rows.append(S_k[k] if k >= 1 else np.zeros(t + 1, dtype=np.uint8))
    S = np.vstack(rows)
    return ShortcutAudit(S, chi_from_s(S, r, t), False)


@dataclass
class ShortcutExperiment:
    chi: np.ndarray
    skipped: np.ndarray
    replicas: int
    seed: int

    @property
    def audited(self) -> int:
        return int(self.replicas - self.skipped.sum())

    @property
    def fraction_positive(self) -> float:
        """Fraction of audited (self-avoiding) replicas with chi > 0."""
        audited = self.audited
        if audited == 0:
            return float("nan")
        return float(((self.chi > 0) & (self.skipped == 0)).sum() / audited)


def shortcut_experiment(space: HalfEdgeSpace, r: int, t: int, replicas: int,
                        seed: int, annealed: bool = True,
                        cfg0: Configuration | None = None,
                        x0: int | None = None,
                        backend: str | None = None) -> ShortcutExperiment:
    """Static-walk chi statistics over replicas (fresh (x, cfg) each when
    annealed)."""
    if annealed:
        pairing = _identity_ok_pairing(space)
        x_start = 0
    else:
        cfg0, x_start = _setup_start(space, seed, cfg0, x0)
        pairing = cfg0.pairing
    chi, skipped = chi_batch(pairing, space.v_of, space.vstart, r, t,
                             replicas, seed, annealed, x_start, backend=backend)
    return ShortcutExperiment(chi, skipped, replicas, seed)


# ---------------------------------------------------------------------------
# The link identity.
# ---------------------------------------------------------------------------

def partner_churn_factor(alpha: float, t: int) -> float:
    """First-order survival factor for silent partner re-pairings.

    Rewiring breaks the selected edges AND their drawn partner edges, but
    only the selected edges raise flags; a walk can therefore cross a
    silently re-paired (and hence uniformising) edge without stopping its
    clock. Each crossed edge is a partner with probability about alpha
    per elapsed step, giving exp(-alpha * t(t+1)/2) for the chance that
    none of the first t crossings were silently churned. Multiplying the
    product identity by this factor accounts for the dominant finite-size
    deviation in moderate-rate runs.
    """
    return math.exp(-alpha * t * (t + 1) / 2.0)


def verify_link_theorem(space: HalfEdgeSpace, spec: DynamicsSpec, t_grid,
                        budgets: dict, seed: int,
                        backend: str | None = None) -> ResultTable:
    """Tabulate D_dyn(t) against P(tau > t) * D_stat(t) on a shared start.

    Uses the walk-independent exact-per-trajectory TV estimator (global
    mode), the tau-tail estimator quenched on the same (x, cfg), and the
    exact static curve; the residual column is the empirical error term
    of the product identity. Extra columns carry the partner-churn
    corrected product and its residual.
    """
    graph_replicas = int(budgets.get("graph_replicas", 200))
    tau_replicas = int(budgets.get("tau_replicas", 100_000))
    cfg0, x0 = _setup_start(space, seed, None, None)
    t_grid = sorted(int(t) for t in t_grid)
    tv = exact_dynamic_tv_walk_independent(space, cfg0, x0, spec, t_grid,
                                           graph_replicas, seed)
    tail = estimate_tau_tail(space, spec, t_grid, tau_replicas, seed,
                             annealed=False, cfg0=cfg0, x0=x0, backend=backend)
    stat = static_tv_curve(space, cfg0, x0, max(t_grid))
    table = ResultTable(seed=seed, replicas=tau_replicas)
    table.metadata.update({"graph_replicas": graph_replicas,
                           "estimator": "walk-independent exact per trajectory"})
    for j, t in enumerate(t_grid):
        product = float(tail.estimates[j] * stat[t])
        residual = float(tv.estimates[j] - product)
        churn = partner_churn_factor(spec.alpha, t)
        corrected = product * churn
        table.add_row(mode=spec.mode, n=space.n, alpha=spec.alpha, r=spec.r,
                      t=t, estimate=float(tv.estimates[j]),
                      ci_lo=float(tv.ci_lo[j]), ci_hi=float(tv.ci_hi[j]),
                      theory=product, residual=residual,
                      tau_tail=float(tail.estimates[j]),
                      d_stat=float(stat[t]), churn_theory=corrected,
                      churn_residual=float(tv.estimates[j]) - corrected)
    return table
