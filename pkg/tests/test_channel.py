import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risoutmin.channel import (
    ArrayGeometry,
    BlockageModel,
    ClusterGeometry,
    assemble_equivalent,
    blockage_probability,
    init_rng,
    pathloss_db,
    power_fractions,
    realize_scenario,
    sample_channel,
    sample_vector_link,
    steering_vector,
    stream_rng,
)
from risoutmin.config import ScenarioConfig

from oracles import random_complex, random_phases


def small_config(**kw):
    base = dict(n_tx=4, elems_per_ris=4, n_clusters=3, n_subpaths=4)
    base.update(kw)
    return ScenarioConfig(**base)


# steering vectors


def test_steering_broadside_all_ones():
    a = steering_vector(ArrayGeometry(2, 2), 0.0, 0.0)
    np.testing.assert_allclose(a, np.ones(4))


def test_steering_alternating_line():
    a = steering_vector(ArrayGeometry(1, 4, 0.5), math.pi / 2, math.pi / 2)
    np.testing.assert_allclose(a, [1, -1, 1, -1], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    rows=st.integers(1, 8),
    cols=st.integers(1, 8),
    az=st.floats(-10, 10),
    el=st.floats(-10, 10),
    spacing=st.floats(0.1, 2.0),
)
def test_steering_unit_modulus(rows, cols, az, el, spacing):
    a = steering_vector(ArrayGeometry(rows, cols, spacing), az, el)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)
    assert np.vdot(a, a).real == pytest.approx(rows * cols, rel=1e-12)


def test_square_factorization():
    assert (ArrayGeometry.square(64).rows, ArrayGeometry.square(64).cols) == (8, 8)
    assert (ArrayGeometry.square(8).rows, ArrayGeometry.square(8).cols) == (2, 4)
    assert ArrayGeometry.square(7).rows == 1
    with pytest.raises(ValueError):
        ArrayGeometry.square(8, rows=3)


# path loss and blockage


def test_pathloss_examples():
    rng = np.random.default_rng(0)
    assert pathloss_db(28, 1, 3.5, 0, rng) == pytest.approx(61.34, abs=5e-3)
    assert pathloss_db(28, 50, 2.0, 0, rng) == pytest.approx(95.32, abs=5e-3)
    assert pathloss_db(28, 50, 2.0, 0, rng) == pytest.approx(32.4 + 20 * math.log10(28) + 20 * math.log10(50))


def test_pathloss_deterministic_and_domain():
    a = pathloss_db(28, 60, 3.5, 8.2, np.random.default_rng(5))
    b = pathloss_db(28, 60, 3.5, 8.2, np.random.default_rng(5))
    assert a == b
    with pytest.raises(ValueError):
        pathloss_db(28, 0.5, 2.0, 0.0, np.random.default_rng(0))


def test_blockage_examples():
    assert blockage_probability(BlockageModel(0.01, 1.0), 50) == 0.0
    assert blockage_probability(BlockageModel(0.0, 0.0), 123.0) == 0.0
    assert blockage_probability(BlockageModel(0.02, 0.0), 50) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert blockage_probability(BlockageModel(0.02, 0.0), 50) == pytest.approx(0.6321, abs=1e-4)
    assert blockage_probability(BlockageModel(p_block=0.3), 10) == 0.3


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0, 10), b=st.floats(-50, 50), d=st.floats(0, 1e4))
def test_blockage_probability_in_unit_interval(a, b, d):
    assert 0.0 <= blockage_probability(BlockageModel(a, b), d) <= 1.0


def test_power_fractions():
    z0, zl = power_fractions(3.0, 5)
    assert z0 == pytest.approx(0.75)
    assert z0 + 4 * zl == pytest.approx(1.0)
    assert power_fractions(math.inf, 5) == (1.0, 0.0)
    assert power_fractions(0.0, 5) == (0.0, 0.25)


# equivalent channel


def test_assemble_scalar_case():
    G = assemble_equivalent(np.array([3.0]), [np.array([1.0])], [np.array([[2.0]])])
    np.testing.assert_allclose(G, [[2.0], [3.0]])


def test_assemble_zero_ris_user_rows():
    rng = np.random.default_rng(1)
    G = assemble_equivalent(random_complex(rng, 3), [np.zeros(4)], [random_complex(rng, 4, 3)])
    np.testing.assert_array_equal(G[:4], 0)
    assert G.shape == (5, 3)


def test_assemble_dimension_mismatch():
    with pytest.raises(ValueError):
        assemble_equivalent(np.ones(3), [np.ones(4)], [np.ones((5, 3))])
    with pytest.raises(ValueError):
        assemble_equivalent(np.ones(3), [np.ones(4)], [])


def composite_gain(e, f, h_b, h_r, H, M):
    # (h_b^H + sum_u h_u^H E_u H_u) f with E_u carrying the conjugated e-segment,
    # which is the convention under which the compact form e^H G f holds
    total = h_b.conj() @ f
    for u in range(len(H)):
        seg = e[u * M : (u + 1) * M]
        total += h_r[u].conj() @ np.diag(seg.conj()) @ H[u] @ f
    return total


def test_equivalent_channel_matches_composite():
    scenario = realize_scenario(small_config(n_ris=2, n_users=3), seed=3)
    rng = np.random.default_rng(0)
    M = scenario.ris_array.size
    for _ in range(20):
        sample = sample_channel(scenario, rng)
        e = random_phases(rng, 2 * M + 1)
        f = random_complex(rng, 4)
        for k in range(3):
            direct = e.conj() @ sample.G[k] @ f
            oracle = composite_gain(e, f, sample.h_b[k], sample.h_r[:, k], sample.H, M)
            assert abs(direct - oracle) <= 1e-12 * abs(oracle)
            np.testing.assert_array_equal(sample.G[k, -1], sample.h_b[k].conj())


# blockage and fading statistics


def test_p_block_zero_and_one():
    clear = realize_scenario(small_config(p_block=0.0), 0)
    blocked = realize_scenario(small_config(p_block=1.0), 0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        s0 = sample_channel(clear, rng)
        s1 = sample_channel(blocked, rng)
        assert s0.blockage_mask.all()
        assert not s1.blockage_mask.any()
        np.testing.assert_array_equal(s1.h_b, 0)
        np.testing.assert_array_equal(s1.G[:, -1], 0)
        assert np.any(s1.G[:, :-1])  # reflected links are never masked


def test_blockage_frequency_within_three_standard_errors():
    scenario = realize_scenario(small_config(n_tx=1, elems_per_ris=1, p_block=0.35), 0)
    rng = np.random.default_rng(11)
    masks = np.concatenate([sample_channel(scenario, rng).blockage_mask.ravel() for _ in range(2500)])
    masks = masks[:10000]
    freq = 1.0 - masks.mean()
    se = math.sqrt(0.35 * 0.65 / masks.size)
    assert abs(freq - 0.35) <= 3 * se


def test_los_coefficient_variance():
    link = ClusterGeometry(
        los_az=0.3,
        los_el=1.2,
        cluster_az=np.zeros(3),
        cluster_el=np.zeros(3),
        n_subpaths=4,
        kappa=math.inf,
        distance=50.0,
        pathloss_db=90.0,
        spread=0.05,
    )
    geom = ArrayGeometry(1, 1)
    rng = np.random.default_rng(2)
    g = np.array([sample_vector_link(link, geom, rng)[0] for _ in range(10000)])
    target = link.zeta[0] * 10 ** (-90 / 10)
    assert np.mean(np.abs(g) ** 2) == pytest.approx(target, rel=0.10)


def test_nlos_power_matches_fractions():
    kappa, L = 3.0, 4
    link = ClusterGeometry(
        los_az=0.3,
        los_el=1.2,
        cluster_az=np.full(L, 0.1),
        cluster_el=np.full(L, 1.4),
        n_subpaths=5,
        kappa=kappa,
        distance=50.0,
        pathloss_db=80.0,
        spread=0.05,
    )
    rng = np.random.default_rng(3)
    h = np.array([sample_vector_link(link, ArrayGeometry(1, 1), rng)[0] for _ in range(10000)])
    z0, zl = power_fractions(kappa, L)
    assert np.mean(np.abs(h) ** 2) == pytest.approx((z0 + zl) * 1e-8, rel=0.10)


def test_los_only_ris_link_is_rank_one():
    scenario = realize_scenario(small_config(kappa_ris=math.inf), 1)
    sample = sample_channel(scenario, np.random.default_rng(0))
    s = np.linalg.svd(sample.H[0], compute_uv=False)
    assert s[1] <= 1e-12 * s[0]


# seeding


def test_sampling_deterministic():
    scenario = realize_scenario(small_config(p_block=0.4), 9)
    a = sample_channel(scenario, stream_rng(9, 1)).G
    b = sample_channel(scenario, stream_rng(9, 1)).G
    np.testing.assert_array_equal(a, b)
    c = sample_channel(scenario, stream_rng(9, 2)).G
    assert not np.array_equal(a, c)


def test_direct_links_shared_across_ris_size():
    a = realize_scenario(small_config(elems_per_ris=4, p_block=0.5), 4)
    b = realize_scenario(small_config(elems_per_ris=16, p_block=0.5), 4)
    ga = sample_channel(a, stream_rng(4, 1))
    gb = sample_channel(b, stream_rng(4, 1))
    np.testing.assert_array_equal(ga.h_b, gb.h_b)
    np.testing.assert_array_equal(ga.blockage_mask, gb.blockage_mask)


def test_blockage_draws_coupled_across_probability():
    lo = realize_scenario(small_config(p_block=0.25), 2)
    hi = realize_scenario(small_config(p_block=0.75), 2)
    rng_lo, rng_hi = stream_rng(2, 1), stream_rng(2, 1)
    for _ in range(50):
        m_lo = sample_channel(lo, rng_lo).blockage_mask
        m_hi = sample_channel(hi, rng_hi).blockage_mask
        assert np.all(m_hi <= m_lo)


def test_init_rng_is_separate_stream():
    assert init_rng(0).random() != stream_rng(0, 1).random()


def test_scenario_geometry():
    sc = realize_scenario(small_config(n_users=4), 0)
    radii = sc.user_positions[:, 0]
    assert np.all((radii >= 50) & (radii <= 80))
    assert np.all((sc.user_positions[:, 1] >= 0) & (sc.user_positions[:, 1] <= math.pi / 6))
    assert sc.draw(np.random.default_rng(0)).shape == (4, 5, 4)
