import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbrewire.graphcore import (Configuration, build_halfedge_space, c_stat,
                                check_regularity, count_configurations,
                                enumerate_configurations, make_degree_sequence,
                                read_configuration, read_degree_sequence,
                                sample_uniform_configuration, size_biased_nu,
                                truncated_power_law_mean, write_configuration,
                                write_degree_sequence)

# chi-square critical values at significance 0.001
CHI2_999 = {2: 13.815510557964274, 14: 36.12327368039813}


def test_build_regular():
    sp = build_halfedge_space([3, 3, 3, 3])
    assert sp.total_halfedges == 12
    assert (sp.deg_h == 2).all()
    assert sp.n == 4


def test_build_rejects_odd_sum():
    with pytest.raises(ValueError, match="odd"):
        build_halfedge_space([2, 3])


def test_build_rejects_low_degree_naming_vertex():
    with pytest.raises(ValueError, match="vertex 2"):
        build_halfedge_space([3, 3, 1, 3])


def test_build_index_ranges_prefix_sums():
    degrees = [3, 4, 3, 4]
    sp = build_halfedge_space(degrees)
    assert sp.total_halfedges == 14
    # oracle: recompute the contiguous layout by prefix sums
    prefix = [0]
    for d in degrees:
        prefix.append(prefix[-1] + d)
    for v in range(4):
        assert list(sp.halfedges_of(v)) == list(range(prefix[v], prefix[v + 1]))
    assert list(sp.halfedges_of(1)) == [3, 4, 5, 6]


def test_siblings():
    sp = build_halfedge_space([3, 4, 3, 4])
    assert list(sp.siblings(3)) == [4, 5, 6]
    assert len(sp.siblings(0)) == sp.deg_h[0]


def test_make_regular_sequence():
    res = make_degree_sequence("regular", 4, None, d=3)
    assert list(res.degrees) == [3, 3, 3, 3]
    assert not res.parity_adjusted


def test_make_two_point_stratified():
    res = make_degree_sequence("two-point", 4, None, d1=3, d2=4, fraction=0.5)
    assert list(res.degrees) == [3, 3, 4, 4]


def test_make_two_point_parity_repair():
    res = make_degree_sequence("two-point", 3, None, d1=3, d2=2, fraction=0.3)
    assert res.parity_adjusted
    assert list(res.degrees) == [3, 2, 3]  # last vertex bumped from 2
    assert int(res.degrees.sum()) % 2 == 0


def test_power_law_mean_matches_oracle():
    rng = np.random.default_rng(42)
    res = make_degree_sequence("power-law", 1000, rng, exponent=2.5, min=3, max=50)
    mean = truncated_power_law_mean(2.5, 3, 50)
    ks = np.arange(3, 51, dtype=float)
    mass = ks ** -2.5
    mass /= mass.sum()
    var = float((ks * ks * mass).sum() - mean**2)
    # parity repair moves the mean by at most 1/n
    tol = 3 * math.sqrt(var / 1000) + 1e-3
    assert abs(res.degrees.mean() - mean) < tol


def test_power_law_rejects_low_min():
    with pytest.raises(ValueError):
        make_degree_sequence("power-law", 10, np.random.default_rng(0),
                             exponent=2.0, min=1, max=5)


def test_sample_unique_pairing_h2():
    sp = build_halfedge_space([2])  # one vertex, one self-loop
    for seed in range(5):
        cfg = sample_uniform_configuration(sp, np.random.default_rng(seed))
        assert list(cfg.pairing) == [1, 0]


def test_sample_validity_invariants():
    sp = build_halfedge_space([3, 4, 2, 3, 2, 4])
    rng = np.random.default_rng(1)
    for _ in range(200):
        sample_uniform_configuration(sp, rng).validate()


def test_sampler_uniform_chi_square_h4():
    sp = build_halfedge_space([2, 2])
    rng = np.random.default_rng(7)
    keys = {}
    counts = {}
    n = 100_000
    for _ in range(n):
        cfg = sample_uniform_configuration(sp, rng)
        k = cfg.pairing.tobytes()
        counts[k] = counts.get(k, 0) + 1
    assert len(counts) == 3
    expected = n / 3
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < CHI2_999[2]


@pytest.mark.slow
def test_sampler_uniform_chi_square_h6():
    sp = build_halfedge_space([2, 2, 2])
    rng = np.random.default_rng(8)
    counts = {}
    n = 100_000
    for _ in range(n):
        k = sample_uniform_configuration(sp, rng).pairing.tobytes()
        counts[k] = counts.get(k, 0) + 1
    assert len(counts) == 15
    expected = n / 15
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert stat < CHI2_999[14]


@pytest.mark.parametrize("H,count", [(2, 1), (4, 3), (6, 15), (8, 105), (10, 945)])
def test_enumeration_double_factorial(H, count):
    degrees = [2] * (H // 2)
    sp = build_halfedge_space(degrees)
    seen = set()
    for cfg in enumerate_configurations(sp):
        cfg.validate()
        seen.add(cfg.pairing.tobytes())
    assert len(seen) == count == count_configurations(H)


def test_enumeration_cap():
    sp = build_halfedge_space([2] * 7)  # |H| = 14
    with pytest.raises(ValueError, match="cap"):
        next(iter(enumerate_configurations(sp)))


def test_nu_values():
    assert size_biased_nu([3, 3, 3]) == pytest.approx(2.0)
    assert size_biased_nu([2, 2, 2]) == pytest.approx(1.0)  # degenerate flag value
    assert size_biased_nu([3, 3, 4, 4]) == pytest.approx(18 / 7)


@given(st.lists(st.integers(min_value=2, max_value=9), min_size=1, max_size=30))
def test_nu_permutation_invariant(degrees):
    rng = np.random.default_rng(0)
    perm = list(degrees)
    rng.shuffle(perm)
    assert size_biased_nu(degrees) == pytest.approx(size_biased_nu(perm), abs=1e-12)


def test_c_stat_regular_cases():
    assert c_stat(build_halfedge_space([3] * 4)) == pytest.approx(1 / math.log(2), abs=1e-12)
    assert c_stat(build_halfedge_space([4] * 4)) == pytest.approx(1 / math.log(3), abs=1e-12)


def test_c_stat_halfedge_weighting():
    degrees = [3, 5, 4, 4]
    sp = build_halfedge_space(degrees)
    # oracle: brute-force sum over half-edges (not vertices)
    acc = 0.0
    for d in degrees:
        acc += d * math.log(d - 1)
    expected = 1.0 / (acc / sum(degrees))
    assert c_stat(sp) == pytest.approx(expected, abs=1e-12)
    per_vertex = 1.0 / (sum(math.log(d - 1) for d in degrees) / len(degrees))
    assert abs(expected - per_vertex) > 1e-3  # the weighting genuinely differs


def test_c_stat_rejects_degree_two():
    with pytest.raises(ValueError):
        c_stat(build_halfedge_space([2, 3, 3]))


def test_regularity_dynamic_pass():
    sp = build_halfedge_space([3] * 1000)
    rep = check_regularity(sp, limit_distribution={3: 1.0}, context="dynamic")
    assert rep.all_passed()
    assert rep.nu == pytest.approx(2.0)


def test_regularity_static_min_degree():
    sp = build_halfedge_space([3, 3, 2, 2])
    rep = check_regularity(sp, context="static-cutoff")
    assert not rep.passed("R3**")


def test_regularity_dmax_margin():
    n = 1024
    degrees = [n // 2] + [2] * (n - 1)
    sp = build_halfedge_space(degrees)
    rep = check_regularity(sp, context="dynamic")
    assert rep.margins["R2"] < 0 and not rep.passed("R2")


def test_regularity_moment_distances():
    sp = build_halfedge_space([3, 3, 4, 4])
    rep = check_regularity(sp, limit_distribution={3: 0.5, 4: 0.5})
    assert rep.passed("R1*") and rep.passed("R2*") and rep.passed("R3*")
    rep2 = check_regularity(sp, limit_distribution={3: 1.0})
    assert not rep2.passed("R1*")


def test_serialization_roundtrips(tmp_path):
    degrees = [3, 4, 3, 4]
    write_degree_sequence(tmp_path / "deg.txt", degrees)
    assert list(read_degree_sequence(tmp_path / "deg.txt")) == degrees
    sp = build_halfedge_space(degrees)
    cfg = sample_uniform_configuration(sp, np.random.default_rng(3))
    write_configuration(tmp_path / "cfg.txt", cfg)
    back = read_configuration(tmp_path / "cfg.txt")
    assert np.array_equal(back.pairing, cfg.pairing)


def test_configuration_validate_rejects_bad():
    with pytest.raises(ValueError):
        Configuration(np.array([0, 1], dtype=np.int64)).validate()  # fixed points
    with pytest.raises(ValueError):
        Configuration(np.array([1, 2, 0, 3], dtype=np.int64)).validate()
