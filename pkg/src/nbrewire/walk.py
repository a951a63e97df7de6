"""Non-backtracking random walk on a frozen configuration.

The walk lives on half-edges: from half-edge x it moves to a uniformly
chosen sibling of the half-edge x is paired with, never to the partner
itself. The transition matrix is doubly stochastic, so the uniform
distribution on half-edges is stationary. Exact distribution propagation
is dense (one real per half-edge) and vectorised; total variation uses
the half-L1 convention so values live in [0, 1].
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from ._rng import ReplicaRng
from .graphcore import Configuration, HalfEdgeSpace, size_biased_nu

# hazard(t, history of jump times so far) -> jump probability in [0, 1]
JumpHazard = Callable[[int, tuple[int, ...]], float]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Half-L1 total variation distance; equals sup_A (p(A) - q(A))."""
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def uniform_distribution(space: HalfEdgeSpace) -> np.ndarray:
    H = space.total_halfedges
    return np.full(H, 1.0 / H)


def point_mass(space: HalfEdgeSpace, x: int) -> np.ndarray:
    out = np.zeros(space.total_halfedges)
    out[x] = 1.0
    return out


def validate_distribution(weights: np.ndarray, tol: float = 1e-12) -> None:
    w = np.asarray(weights)
    if np.any(w < 0):
        raise ValueError("negative weight")
    if abs(float(w.sum()) - 1.0) > tol:
        raise ValueError(f"weights sum to {float(w.sum())}, not 1")


def nbrw_step(space: HalfEdgeSpace, cfg: Configuration, x: int, rng: ReplicaRng) -> int:
    """One walk step: a uniform sibling of the partner of x."""
    q = int(cfg.pairing[x])
    v = int(space.v_of[q])
    lo = int(space.vstart[v])
    d = int(space.vstart[v + 1]) - lo - 1
    j = rng.rand_below(d)
    pos = lo + j
    if pos >= q:
        pos += 1
    return pos


def propagate_distribution(space: HalfEdgeSpace, cfg: Configuration | np.ndarray,
                           dist: np.ndarray) -> np.ndarray:
    """One exact transition of a half-edge distribution.

    out[y] = (sum of arriving mass at v(y)) minus the mass that arrived
    on y itself, divided by the forward degree: mass entering a vertex
    through half-edge p spreads uniformly over the other half-edges of
    that vertex. cfg may be a Configuration or a raw pairing array.
    """
    pairing = cfg.pairing if isinstance(cfg, Configuration) else cfg
    arriving = np.asarray(dist, dtype=np.float64)[pairing]
    per_vertex = np.bincount(space.v_of, weights=arriving, minlength=space.n)
    return (per_vertex[space.v_of] - arriving) / space.deg_h


def static_tv_curve(space: HalfEdgeSpace, cfg: Configuration, x: int,
                    t_max: int) -> np.ndarray:
    """TV distance to uniform after t = 0..t_max exact steps from delta_x."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    u = uniform_distribution(space)
    dist = point_mass(space, x)
    out = np.empty(t_max + 1)
    out[0] = total_variation(dist, u)
    for t in range(1, t_max + 1):
        dist = propagate_distribution(space, cfg, dist)
        out[t] = total_variation(dist, u)
    return out


class MixingTimeResult(NamedTuple):
    time: int | None  # smallest t with TV <= epsilon, or None
    mixed: bool
    horizon: int
    tv_at_stop: float


def default_mixing_horizon(space: HalfEdgeSpace) -> int:
    """An order of magnitude beyond the theoretical mixing scale log|H|/log nu."""
    H = space.total_halfedges
    nu = size_biased_nu(space.degrees)
    if nu > 1.05:
        return int(math.ceil(10.0 * math.log(H) / math.log(nu)))
    return 10 * H


def static_mixing_time(space: HalfEdgeSpace, cfg: Configuration, x: int,
                       epsilon: float, horizon: int | None = None) -> MixingTimeResult:
    """Smallest t with TV(P^t delta_x, U_H) <= epsilon, searched up to a horizon.

    Horizon exhaustion is reported explicitly (mixed=False, time=None)
    rather than returning a number.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    if horizon is None:
        horizon = default_mixing_horizon(space)
    u = uniform_distribution(space)
    dist = point_mass(space, x)
    tv = total_variation(dist, u)
    if tv <= epsilon:
        return MixingTimeResult(0, True, horizon, tv)
    for t in range(1, horizon + 1):
        dist = propagate_distribution(space, cfg, dist)
        tv = total_variation(dist, u)
        if tv <= epsilon:
            return MixingTimeResult(t, True, horizon, tv)
    return MixingTimeResult(None, False, horizon, tv)


class ModifiedWalkSample(NamedTuple):
    trajectory: np.ndarray  # positions Y_0..Y_{t_max}
    sigma: int | None  # first uniform-jump time, None if no jump by t_max


def constant_hazard(p: float) -> JumpHazard:
    if not 0.0 <= p <= 1.0:
        raise ValueError("hazard probability must be in [0, 1]")
    return lambda t, history: p


def modified_walk_sample(space: HalfEdgeSpace, cfg: Configuration, x: int,
                         hazard: JumpHazard, t_max: int,
                         rng: ReplicaRng) -> ModifiedWalkSample:
    """Static-graph walk that jumps to a uniform half-edge at hazard times.

    At each step t the jump indicator J_t is drawn from hazard(t, jumps so
    far); on J_t = 1 the walk lands uniformly on H, otherwise it makes a
    plain non-backtracking step. sigma is the first jump time.
    """
    H = space.total_halfedges
    traj = np.empty(t_max + 1, dtype=np.int64)
    traj[0] = x
    jumps: list[int] = []
    sigma: int | None = None
    pos = x
    for t in range(1, t_max + 1):
        p = float(hazard(t, tuple(jumps)))
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"hazard returned {p} outside [0, 1]")
        if rng.bernoulli(p):
            pos = rng.rand_below(H)
            jumps.append(t)
            if sigma is None:
                sigma = t
        else:
            pos = nbrw_step(space, cfg, pos, rng)
        traj[t] = pos
    return ModifiedWalkSample(traj, sigma)
