"""Rewiring engines and the joint (walk, graph) process.

At each time step the eligible edge set K_t is built from the walker's
position on the pre-step configuration: the walker's own edge (local),
every edge the walk could sit on within r-1 further steps (near), or all
edges (global). Each eligible edge is independently selected with
probability alpha; selected edges are broken up and re-paired against
partner edges drawn without replacement from the rest, or -- when the
selection reaches half of the remainder -- the whole union is re-matched
uniformly. The degree sequence is invariant throughout.

The stopping time tau is the first step at which the walker's current
half-edge carries a rewired flag; flags are cumulative over time and are
set for both half-edges of every selected edge, including edges selected
at the very step being tested (the test runs after the rewiring and
before the move).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernels import (MODE_GLOBAL, MODE_LOCAL, MODE_NEAR, bfs_ball_py,
                       sim_step_py)
from ._rng import ReplicaRng
from .graphcore import Configuration, HalfEdgeSpace

Edge = tuple[int, int]
EdgeSelector = Callable[[HalfEdgeSpace, Configuration, int], Sequence[Edge]]

_MODES = ("local", "near", "global", "custom")


@dataclass(frozen=True)
class DynamicsSpec:
    """Which edges may rewire (relative to the walker) and how often.

    mode: "local", "near" (radius r >= 1), "global", or "custom" with
    explicit K/L selectors (only K subset-of L or L = all edges is
    supported). alpha is the per-edge rewiring probability per step.
    """

    mode: str
    alpha: float
    r: int | None = None
    k_selector: EdgeSelector | None = None
    l_selector: EdgeSelector | None = None

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.mode == "near":
            if self.r is None or self.r < 1:
                raise ValueError("near mode needs radius r >= 1")
        if self.mode == "custom" and self.k_selector is None:
            raise ValueError("custom mode needs a k_selector")


def local_set(cfg: Configuration, h: int) -> Edge:
    """The single edge the half-edge h belongs to, as a (min, max) pair."""
    g = int(cfg.pairing[h])
    return (h, g) if h < g else (g, h)


def near_set(space: HalfEdgeSpace, cfg: Configuration, h: int, r: int) -> list[Edge]:
    """Edges under every position the walk can reach within r-1 steps of h.

    Offsets 0..r-1 on the frozen configuration, so r=1 reproduces the
    local set exactly. Edges are deduplicated, in BFS discovery order.
    """
    if r < 1:
        raise ValueError("radius must be >= 1")
    ball = bfs_ball_py(cfg.pairing, space.v_of, space.vstart, h, r)
    seen: set[int] = set()
    out: list[Edge] = []
    for p in ball:
        q = int(cfg.pairing[p])
        a, b = (p, q) if p < q else (q, p)
        if a not in seen:
            seen.add(a)
            out.append((a, b))
    return out


def edge_set(cfg: Configuration) -> list[Edge]:
    """All edges of the configuration, ascending by smaller half-edge."""
    return cfg.edges()


@dataclass(frozen=True)
class RewireRecord:
    t: int
    edges: tuple[Edge, ...]  # R_t, the Bernoulli-selected edges of C_{t-1}
    branch: str | None  # "resample-union" | "draw-partners" | None


@dataclass
class JointState:
    """Walker position, configuration, cumulative rewired flags, clock, tau."""

    x: int
    cfg: Configuration
    rewired_flags: np.ndarray
    t: int = 0
    tau: int | None = None

    def copy(self) -> "JointState":
        return JointState(self.x, Configuration(self.cfg.pairing.copy()),
                          self.rewired_flags.copy(), self.t, self.tau)


def initial_state(space: HalfEdgeSpace, cfg: Configuration, x: int) -> JointState:
    return JointState(x=int(x), cfg=Configuration(cfg.pairing.copy()),
                      rewired_flags=np.zeros(space.total_halfedges, np.uint8))


def rewire_step(space: HalfEdgeSpace, cfg: Configuration, K: Sequence[Edge],
                L: Sequence[Edge] | None, alpha: float,
                rng: ReplicaRng, t: int = 0) -> tuple[Configuration, RewireRecord]:
    """One rewiring of cfg: Bernoulli(alpha)-select from K, re-pair within L.

    L=None means the full edge set. Selected edges either trigger a fresh
    uniform matching of all half-edges of the union (when they are at
    least half of L minus themselves) or draw distinct partner edges from
    L minus the selection; each side's half-edges are ordered uniformly
    and paired across.
    """
    pairing = cfg.pairing.copy()
    H = len(pairing)
    K = [(a, b) if a < b else (b, a) for a, b in K]
    full_L = L is None
    if not full_L:
        L = [(a, b) if a < b else (b, a) for a, b in L]
        l_keys = {e[0] for e in L}
        if not all(e[0] in l_keys for e in K):
            raise ValueError("need K subset of L, or L = full edge set")
    selected = [e for e in K if rng.bernoulli(alpha)] if alpha > 0.0 else []
    branch = None
    if selected:
        n_l = H // 2 if full_L else len(L)
        nsel = len(selected)
        if nsel >= n_l - nsel:
            branch = "resample-union"
            # uniform matching of the half-edges of R u L (= L here)
            pool = np.arange(H, dtype=np.int64) if full_L else \
                np.array([h for e in L for h in e], dtype=np.int64)
            rng.shuffle(pool)
            a, b = pool[0::2], pool[1::2]
            pairing[a] = b
            pairing[b] = a
        else:
            branch = "draw-partners"
            used = {e[0] for e in selected}
            partners: list[Edge] = []
            if full_L:
                while len(partners) < nsel:
                    h = rng.rand_below(H)
                    a, b = h, int(pairing[h])
                    if b < a:
                        a, b = b, a
                    if a in used:
                        continue
                    used.add(a)
                    partners.append((a, b))
            else:
                l_list = list(L)
                while len(partners) < nsel:
                    e = l_list[rng.rand_below(len(l_list))]
                    if e[0] in used:
                        continue
                    used.add(e[0])
                    partners.append(e)
            sel_list = [h for e in selected for h in e]
            par_list = [h for e in partners for h in e]
            rng.shuffle(sel_list)
            rng.shuffle(par_list)
            for u, w in zip(sel_list, par_list):
                pairing[u] = w
                pairing[w] = u
    rec = RewireRecord(t=t, edges=tuple(selected), branch=branch)
    return Configuration(pairing), rec


def eligible_edges(space: HalfEdgeSpace, cfg: Configuration, x: int,
                   spec: DynamicsSpec) -> list[Edge]:
    """K_t for the walker at x on configuration cfg."""
    if spec.mode == "local":
        return [local_set(cfg, x)]
    if spec.mode == "near":
        return near_set(space, cfg, x, spec.r)
    if spec.mode == "global":
        return edge_set(cfg)
    return list(spec.k_selector(space, cfg, x))


def _custom_joint_step(state: JointState, spec: DynamicsSpec, rng: ReplicaRng,
                       space: HalfEdgeSpace) -> tuple[JointState, RewireRecord]:
    """Joint transition for custom K/L selectors; returns the rewire record."""
    new = state.copy()
    t = state.t + 1
    K = eligible_edges(space, state.cfg, state.x, spec)
    L = None if spec.l_selector is None else \
        list(spec.l_selector(space, state.cfg, state.x))
    cfg2, rec = rewire_step(space, state.cfg, K, L, spec.alpha, rng, t=t)
    pairing = cfg2.pairing
    flags = new.rewired_flags
    for a, b in rec.edges:
        flags[a] = 1
        flags[b] = 1
    i_t = int(flags[state.x])
    q = int(pairing[state.x])
    v = int(space.v_of[q])
    base = int(space.vstart[v])
    d = int(space.vstart[v + 1]) - base - 1
    j = rng.rand_below(d)
    pos = base + j
    if pos >= q:
        pos += 1
    new.cfg = cfg2
    new.x = int(pos)
    new.t = t
    if state.tau is None and i_t == 1:
        new.tau = t
    return new, rec


def joint_step(state: JointState, spec: DynamicsSpec, rng: ReplicaRng,
               space: HalfEdgeSpace) -> JointState:
    """One joint transition: rewire, flag, test the walker, then move.

    Pure: returns a fresh JointState. For the three built-in mechanisms
    this consumes the replica stream exactly like the batch kernels, so
    trajectories replay kernel runs draw for draw.
    """
    if spec.mode == "custom":
        new, _rec = _custom_joint_step(state, spec, rng, space)
        return new
    new = state.copy()
    t = state.t + 1
    pairing = new.cfg.pairing.copy()
    pairing.setflags(write=True)
    mode = {"local": MODE_LOCAL, "near": MODE_NEAR, "global": MODE_GLOBAL}[spec.mode]
    i_t, new_x = sim_step_py(pairing, new.rewired_flags, space.v_of,
                             space.vstart, mode, spec.alpha,
                             spec.r or 1, state.x, rng)
    new.cfg = Configuration(pairing)
    new.x = int(new_x)
    new.t = t
    if state.tau is None and i_t == 1:
        new.tau = t
    return new


@dataclass
class TrajectoryRecord:
    """Replica transcript: positions, per-step crossing indicators, tau."""

    positions: np.ndarray
    indicators: np.ndarray
    tau: int | None
    t_end: int
    rewire_records: list[RewireRecord] = field(default_factory=list)
    final_state: JointState | None = None


def run_trajectory(space: HalfEdgeSpace, cfg0: Configuration, x0: int,
                   spec: DynamicsSpec, t_max: int, rng: ReplicaRng,
                   record_rewires: bool = False,
                   stop_at_tau: bool = False) -> TrajectoryRecord:
    """Run one replica of the joint process for up to t_max steps.

    For the built-in mechanisms the stream consumption matches the batch
    kernels, so a trajectory replays exactly the replica with the same
    (seed, replica id). stop_at_tau ends the run at the crossing step.
    """
    positions = [int(x0)]
    indicators: list[int] = []
    recs: list[RewireRecord] = []
    tau: int | None = None
    t_end = 0

    if spec.mode == "custom":
        state = initial_state(space, cfg0, x0)
        for t in range(1, t_max + 1):
            prev_x = state.x
            state, rec = _custom_joint_step(state, spec, rng, space)
            if record_rewires:
                recs.append(rec)
            indicators.append(int(state.rewired_flags[prev_x]))
            positions.append(state.x)
            tau = state.tau
            t_end = t
            if stop_at_tau and tau is not None:
                break
        final = state
        pairing = state.cfg.pairing
        flags = state.rewired_flags
    else:
        mode_code = {"local": MODE_LOCAL, "near": MODE_NEAR,
                     "global": MODE_GLOBAL}[spec.mode]
        pairing = cfg0.pairing.copy()
        pairing.setflags(write=True)
        flags = np.zeros(space.total_halfedges, np.uint8)
        x = int(x0)
        for t in range(1, t_max + 1):
            rec_dict: dict | None = {} if record_rewires else None
            i_t, new_x = sim_step_py(pairing, flags, space.v_of, space.vstart,
                                     mode_code, spec.alpha, spec.r or 1, x,
                                     rng, record=rec_dict)
            if record_rewires:
                recs.append(RewireRecord(t=t, edges=tuple(rec_dict["selected"]),
                                         branch=rec_dict["branch"]))
            indicators.append(i_t)
            if tau is None and i_t == 1:
                tau = t
            x = int(new_x)
            positions.append(x)
            t_end = t
            if stop_at_tau and tau is not None:
                break
        final = JointState(x=x, cfg=Configuration(pairing),
                           rewired_flags=flags, t=t_end, tau=tau)
    return TrajectoryRecord(positions=np.array(positions, dtype=np.int64),
                            indicators=np.array(indicators, dtype=np.int64),
                            tau=tau, t_end=t_end, rewire_records=recs,
                            final_state=final)


def trajectory_json_lines(record: TrajectoryRecord, replica: int,
                          include_rewires: bool = False) -> list[str]:
    """Serialize a trajectory as JSON lines {replica, t, x, I_t, tau}.

    include_rewires adds the per-step selected edges and branch when the
    trajectory was recorded with record_rewires=True.
    """
    import json

    recs = {r.t: r for r in record.rewire_records}
    out = []
    tau_repr = record.tau if record.tau is not None else None
    for t in range(record.t_end + 1):
        row = {"replica": replica, "t": t, "x": int(record.positions[t]),
               "I_t": (int(record.indicators[t - 1]) if t >= 1 else 0),
               "tau": tau_repr}
        if include_rewires and t in recs:
            row["rewired_edges"] = [list(e) for e in recs[t].edges]
            row["branch"] = recs[t].branch
        out.append(json.dumps(row, sort_keys=True))
    return out
