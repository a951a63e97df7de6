"""Half-edge universe, configurations, and degree statistics.

A multigraph on n vertices with degree sequence d is represented by its
half-edges: vertex v owns deg(v) half-edges laid out contiguously in
vertex order, and a configuration is a perfect matching (fixed-point-free
involution) of all half-edges. Uniform matchings give the configuration
model. This module also computes the degree statistics that drive the
theory: the size-biased forward mean nu and the static mixing constant
c_stat = 1 / mean(log forward-degree), plus checkable finite-n versions
of the regularity conditions used by the scaling results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

ENUMERATION_CAP = 12  # (cap-1)!! = 10395 matchings; keeps exact labs fast


@dataclass(frozen=True)
class HalfEdgeSpace:
    """Immutable half-edge universe for a fixed degree sequence.

    Half-edges are integers 0..|H|-1, assigned to vertices in contiguous
    blocks in input vertex order. deg_h[h] = deg(v(h)) - 1 is the forward
    degree of half-edge h (its number of siblings).
    """

    degrees: np.ndarray
    vstart: np.ndarray  # len n+1 prefix offsets; vertex v owns [vstart[v], vstart[v+1])
    v_of: np.ndarray  # half-edge -> vertex
    deg_h: np.ndarray  # half-edge -> forward degree

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def total_halfedges(self) -> int:
        return len(self.v_of)

    def halfedges_of(self, v: int) -> range:
        return range(int(self.vstart[v]), int(self.vstart[v + 1]))

    def siblings(self, h: int) -> np.ndarray:
        v = int(self.v_of[h])
        block = np.arange(self.vstart[v], self.vstart[v + 1], dtype=np.int64)
        return block[block != h]


def build_halfedge_space(degrees: Iterable[int]) -> HalfEdgeSpace:
    """Build the half-edge universe, rejecting inadmissible degree lists.

    Requires every degree >= 2 (non-backtracking steps must always have a
    sibling to move to) and an even degree sum (half-edges must pair up).
    """
    deg = np.asarray(list(degrees), dtype=np.int64)
    if deg.size == 0:
        raise ValueError("empty degree sequence")
    bad = np.nonzero(deg < 2)[0]
    if bad.size:
        raise ValueError(f"vertex {int(bad[0])} has degree {int(deg[bad[0]])} < 2")
    total = int(deg.sum())
    if total % 2 != 0:
        raise ValueError(f"degree sum {total} is odd; half-edges cannot be paired")
    vstart = np.zeros(deg.size + 1, dtype=np.int64)
    np.cumsum(deg, out=vstart[1:])
    v_of = np.repeat(np.arange(deg.size, dtype=np.int64), deg)
    deg_h = deg[v_of] - 1
    for a in (deg, vstart, v_of, deg_h):
        a.setflags(write=False)
    return HalfEdgeSpace(degrees=deg, vstart=vstart, v_of=v_of, deg_h=deg_h)


@dataclass(frozen=True)
class Configuration:
    """A perfect matching of the half-edges: pairing[pairing[h]] == h != pairing[h]."""

    pairing: np.ndarray

    def __post_init__(self):
        self.pairing.setflags(write=False)

    def partner(self, h: int) -> int:
        return int(self.pairing[h])

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (min, max) half-edge pairs, ascending."""
        p = self.pairing
        return [(h, int(p[h])) for h in range(len(p)) if h < p[h]]

    def validate(self) -> None:
        p = self.pairing
        h = np.arange(len(p))
        if len(p) % 2 != 0:
            raise ValueError("odd number of half-edges")
        if not np.array_equal(p[p], h):
            raise ValueError("pairing is not an involution")
        if np.any(p == h):
            raise ValueError("pairing has a fixed point")

    def to_line(self) -> str:
        return " ".join(str(int(x)) for x in self.pairing)

    @staticmethod
    def from_line(line: str) -> "Configuration":
        cfg = Configuration(np.array([int(tok) for tok in line.split()], dtype=np.int64))
        cfg.validate()
        return cfg


class DegreeSequenceResult(NamedTuple):
    degrees: np.ndarray
    parity_adjusted: bool


def make_degree_sequence(kind: str, n: int, rng: np.random.Generator | None = None,
                         **params) -> DegreeSequenceResult:
    """Generate a degree sequence of one of the supported kinds.

    kind="regular": params d.
    kind="two-point": params d1, d2, fraction; the first ceil(fraction*n)
        vertices get d1, the rest d2 (deterministic stratification).
    kind="power-law": params exponent, min (default 3), max; i.i.d. draws
        from the truncated law P(k) proportional to k**-exponent.

    If the sampled sum is odd the last vertex's degree is incremented by 1
    and the adjustment is reported in the result.
    """
    if n < 2:
        raise ValueError("need n >= 2 vertices")
    if kind == "regular":
        d = int(params["d"])
        if d < 2:
            raise ValueError("regular degree must be >= 2")
        deg = np.full(n, d, dtype=np.int64)
    elif kind == "two-point":
        d1, d2 = int(params["d1"]), int(params["d2"])
        frac = float(params["fraction"])
        if min(d1, d2) < 2:
            raise ValueError("two-point degrees must be >= 2")
        if not 0.0 <= frac <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        k = math.ceil(frac * n)
        deg = np.concatenate([np.full(k, d1, dtype=np.int64),
                              np.full(n - k, d2, dtype=np.int64)])
    elif kind == "power-law":
        gamma = float(params["exponent"])
        lo = int(params.get("min", 3))
        hi = int(params["max"])
        if lo < 2:
            raise ValueError("power-law minimum degree must be >= 2")
        if hi < lo:
            raise ValueError("power-law max must be >= min")
        if rng is None:
            raise ValueError("power-law sequences need an rng")
        support = np.arange(lo, hi + 1, dtype=np.int64)
        mass = support.astype(np.float64) ** (-gamma)
        mass /= mass.sum()
        deg = rng.choice(support, size=n, p=mass)
    else:
        raise ValueError(f"unknown degree sequence kind {kind!r}")

    adjusted = False
    if int(deg.sum()) % 2 != 0:
        deg = deg.copy()
        deg[-1] += 1
        adjusted = True
    deg.setflags(write=False)
    return DegreeSequenceResult(deg, adjusted)


def truncated_power_law_mean(exponent: float, lo: int, hi: int) -> float:
    """Brute-force mean of the truncated power law (oracle for sampling tests)."""
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    mass = ks ** (-exponent)
    mass /= mass.sum()
    return float((ks * mass).sum())


def sample_uniform_configuration(space: HalfEdgeSpace,
                                 rng: np.random.Generator) -> Configuration:
    """Uniform perfect matching: shuffle all half-edges, pair consecutive entries."""
    perm = rng.permutation(space.total_halfedges).astype(np.int64)
    pairing = np.empty(space.total_halfedges, dtype=np.int64)
    a, b = perm[0::2], perm[1::2]
    pairing[a] = b
    pairing[b] = a
    return Configuration(pairing)


def pairing_from_perm(perm: np.ndarray) -> Configuration:
    """Configuration pairing consecutive entries of an explicit permutation."""
    pairing = np.empty(len(perm), dtype=np.int64)
    a, b = perm[0::2], perm[1::2]
    pairing[a] = b
    pairing[b] = a
    return Configuration(pairing)


def count_configurations(n_halfedges: int) -> int:
    """(|H|-1)!! -- the number of perfect matchings of |H| half-edges."""
    if n_halfedges % 2 != 0:
        raise ValueError("odd half-edge count")
    out = 1
    for k in range(n_halfedges - 1, 0, -2):
        out *= k
    return out


def enumerate_configurations(space: HalfEdgeSpace,
                             cap: int = ENUMERATION_CAP) -> Iterator[Configuration]:
    """Yield every configuration on the space, (|H|-1)!! in total.

    Refuses |H| > cap: the count grows like a double factorial and exact
    labs are only meant for desk-size instances.
    """
    H = space.total_halfedges
    if H > cap:
        raise ValueError(f"|H| = {H} exceeds enumeration cap {cap}")
    pairing = np.full(H, -1, dtype=np.int64)

    def rec(first_free: int) -> Iterator[Configuration]:
        while first_free < H and pairing[first_free] >= 0:
            first_free += 1
        if first_free == H:
            yield Configuration(pairing.copy())
            return
        for mate in range(first_free + 1, H):
            if pairing[mate] >= 0:
                continue
            pairing[first_free] = mate
            pairing[mate] = first_free
            yield from rec(first_free + 1)
            pairing[first_free] = -1
            pairing[mate] = -1

    yield from rec(0)


def size_biased_nu(degrees: Iterable[int]) -> float:
    """Size-biased mean minus one of the empirical degree distribution.

    nu = sum m(m-1) p_n(m) / sum m p_n(m); the average forward degree of a
    uniform half-edge. nu <= 1 signals the degenerate all-degree-2 regime.
    """
    deg = np.asarray(list(degrees), dtype=np.float64)
    if deg.size == 0:
        raise ValueError("empty degree sequence")
    return float((deg * (deg - 1)).sum() / deg.sum())


def c_stat(space: HalfEdgeSpace) -> float:
    """Static mixing constant: 1 / mean over half-edges of log forward degree.

    Needs forward degree >= 2 everywhere (i.e. min vertex degree >= 3),
    otherwise log terms vanish and the constant is meaningless.
    """
    if int(space.deg_h.min()) < 2:
        raise ValueError("c_stat needs min vertex degree >= 3 (forward degree >= 2)")
    return float(1.0 / np.log(space.deg_h.astype(np.float64)).mean())


@dataclass
class RegularityReport:
    """Pass/fail flags and finite-n margins for the degree regularity conditions.

    Dynamic context evaluates R1-R3 (sparse graph, moderate max degree,
    min degree 2) and, when a limit distribution is supplied, R1*-R3*
    (pointwise convergence and first/second moments). Static-cutoff
    context additionally evaluates R1**-R3** (subpolynomial max degree,
    the log-degree dispersion ratios, min degree 3).
    """

    context: str
    n: int
    flags: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    nu: float = float("nan")
    c_stat: float = float("nan")
    d_max: int = 0

    def passed(self, item: str) -> bool:
        return bool(self.flags[item])

    def all_passed(self) -> bool:
        return all(self.flags.values())


def check_regularity(space: HalfEdgeSpace,
                     limit_distribution: dict[int, float] | None = None,
                     context: str = "dynamic",
                     moment_rtol: float = 0.05,
                     pointwise_tol: float = 0.05,
                     dmax_exponent_tol: float = 0.5) -> RegularityReport:
    """Evaluate the finite-n regularity predicates. Report-only, never raises.

    Asymptotic conditions are rendered as margins against their finite-n
    comparators (e.g. d_max vs n/(log n)^2); the chosen tolerances are
    explicit arguments so reports are pure functions of their inputs.
    """
    if context not in ("dynamic", "static-cutoff"):
        raise ValueError("context must be 'dynamic' or 'static-cutoff'")
    deg = space.degrees
    n = space.n
    H = space.total_halfedges
    d_max = int(deg.max())
    logn = math.log(n) if n > 1 else 1.0

    rep = RegularityReport(context=context, n=n, d_max=d_max)
    rep.nu = size_biased_nu(deg)

    # R1: |H| = Theta(n); report the ratio, which is >= 2 by construction.
    rep.flags["R1"] = H >= 2 * n
    rep.margins["R1"] = H / n
    # R2: d_max = o(n / (log n)^2).
    comparator = n / logn**2
    rep.flags["R2"] = d_max < comparator
    rep.margins["R2"] = comparator - d_max
    # R3: min degree >= 2.
    rep.flags["R3"] = int(deg.min()) >= 2
    rep.margins["R3"] = int(deg.min()) - 2

    if limit_distribution is not None:
        p = {int(m): float(q) for m, q in limit_distribution.items()}
        vals, counts = np.unique(deg, return_counts=True)
        p_n = {int(m): c / n for m, c in zip(vals, counts)}
        support = set(p_n) | set(p)
        sup_dist = max(abs(p_n.get(m, 0.0) - p.get(m, 0.0)) for m in support)
        m1_n = float(deg.mean())
        m2_n = float((deg.astype(np.float64) ** 2).mean())
        m1 = sum(m * q for m, q in p.items())
        m2 = sum(m * m * q for m, q in p.items())
        rep.flags["R1*"] = sup_dist <= pointwise_tol
        rep.margins["R1*"] = sup_dist
        rep.flags["R2*"] = abs(m1_n - m1) <= moment_rtol * max(m1, 1e-12)
        rep.margins["R2*"] = abs(m1_n - m1)
        rep.flags["R3*"] = abs(m2_n - m2) <= moment_rtol * max(m2, 1e-12)
        rep.margins["R3*"] = abs(m2_n - m2)

    if context == "static-cutoff":
        rep.flags["R3**"] = int(deg.min()) >= 3
        rep.margins["R3**"] = int(deg.min()) - 3
        # R1**: d_max = n^{o(1)}; report the empirical exponent.
        expo = math.log(d_max) / logn if n > 1 and d_max > 1 else 0.0
        rep.flags["R1**"] = expo <= dmax_exponent_tol
        rep.margins["R1**"] = expo
        # R2**: dispersion ratios of log forward degrees against their
        # vanishing comparators.
        logs = np.log(np.maximum(space.deg_h.astype(np.float64), 1.0))
        lam1 = float(logs.mean())
        lam2 = float((np.abs(logs - lam1) ** 2).mean())
        lam3 = float((np.abs(logs - lam1) ** 3).mean())
        logH = math.log(H)
        comp_a = (math.log(logH)) ** 2 / logH
        comp_b = 1.0 / math.sqrt(logH)
        if lam2 > 0:
            ratio_a = lam2 / lam1**3
            ratio_b = lam2**1.5 / (lam3 * math.sqrt(lam1)) if lam3 > 0 else float("inf")
        else:
            # Regular graphs: both lambda_2 and lambda_3 vanish; the
            # dispersion conditions hold vacuously (zero-width profile).
            ratio_a = float("inf")
            ratio_b = float("inf")
        rep.flags["R2**"] = ratio_a > comp_a and ratio_b > comp_b
        rep.margins["R2**"] = min(ratio_a - comp_a, ratio_b - comp_b)
        if rep.flags["R3**"]:
            rep.c_stat = c_stat(space)

    return rep


def write_degree_sequence(path, degrees: Iterable[int]) -> None:
    with open(path, "w") as fh:
        for d in degrees:
            fh.write(f"{int(d)}\n")


def read_degree_sequence(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=np.int64)


def write_configuration(path, cfg: Configuration) -> None:
    with open(path, "w") as fh:
        fh.write(cfg.to_line() + "\n")


def read_configuration(path) -> Configuration:
    with open(path) as fh:
        return Configuration.from_line(fh.read())
