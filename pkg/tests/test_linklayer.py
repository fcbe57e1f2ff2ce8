import numpy as np
import pytest

from risnoma import linklayer as ll
from risnoma.presets import medium_config, tiny_config

from literal_link import literal_sic_and_sinr, random_instance


class TestCorrelation:
    def test_identical_is_one(self):
        h = np.array([1 + 2j, -0.5j, 3.0])
        assert ll.channel_correlation(h, h) == pytest.approx(1.0)

    def test_orthogonal_is_zero(self):
        assert ll.channel_correlation(np.array([1.0, 0]), np.array([0, 1.0])) == 0

    def test_complex_scale_invariant(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=6) + 1j * rng.normal(size=6)
        c = 0.3 - 1.7j
        assert ll.channel_correlation(h, c * h) == pytest.approx(1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            ll.channel_correlation(np.zeros(3), np.ones(3))


class TestClustering:
    def test_no_iot_singleton_clusters(self):
        h = np.eye(3, dtype=complex)
        assert ll.cluster_users(h, [0, 1], [], 3) == [[0], [1]]

    def test_parallel_channel_joins_matching_head(self):
        h = np.zeros((3, 4), dtype=complex)
        h[0] = [1, 0, 0, 0]
        h[1] = [0, 1, 0, 0]
        h[2] = 2j * h[1]  # parallel to head 1
        assert ll.cluster_users(h, [0, 1], [2], 3) == [[0], [1, 2]]

    def test_equal_correlation_lowest_index_wins(self):
        h = np.zeros((3, 4), dtype=complex)
        h[0] = [1, 0, 0, 0]
        h[1] = [0, 1, 0, 0]
        h[2] = [1, 1, 0, 0]  # same correlation with both heads
        assert ll.cluster_users(h, [0, 1], [2], 3) == [[0, 2], [1]]

    def test_capacity_spills_to_next_best(self):
        h = np.zeros((4, 4), dtype=complex)
        h[0] = [1, 0, 0, 0]
        h[1] = [0, 1, 0, 0]
        h[2] = [1, 0.1, 0, 0]
        h[3] = [1, 0.2, 0, 0]
        got = ll.cluster_users(h, [0, 1], [2, 3], 2)
        assert got == [[0, 2], [1, 3]]

    def test_input_order_invariant(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=(6, 8)) + 1j * rng.normal(size=(6, 8))
        a = ll.cluster_users(h, [0, 1], [2, 3, 4, 5], 3)
        b = ll.cluster_users(h, [0, 1], [5, 3, 2, 4], 3)
        assert a == b


class TestAnalogBeamformer:
    def test_real_positive_heads_give_flat_phases(self):
        heads = np.abs(np.random.default_rng(0).normal(size=(2, 8))) + 0.1
        v = ll.analog_beamformer(heads, 4, 3)
        nz = v[v != 0]
        assert np.allclose(nz, 1 / np.sqrt(4))

    def test_one_bit_matches_two_candidate_brute_force(self):
        rng = np.random.default_rng(2)
        heads = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        v = ll.analog_beamformer(heads, 4, 1)
        for n in range(2):
            for i in range(4):
                entry = v[n * 4 + i, n] * np.sqrt(4)
                target = heads[n, n * 4 + i]
                target = target / abs(target)
                cands = [1.0, -1.0]
                best = min(cands, key=lambda c: abs(c - target))
                assert entry == pytest.approx(np.conj(best))

    def test_block_diagonal_structure(self):
        rng = np.random.default_rng(3)
        heads = rng.normal(size=(3, 12)) + 1j * rng.normal(size=(3, 12))
        v = ll.analog_beamformer(heads, 4, 2)
        for n in range(3):
            for i in range(3):
                block = v[i * 4:(i + 1) * 4, n]
                if i == n:
                    assert np.allclose(np.abs(block), 1 / np.sqrt(4))
                else:
                    assert np.all(block == 0)

    def test_zero_entry_defaults_to_phase_zero(self):
        heads = np.zeros((1, 4), dtype=complex)
        v = ll.analog_beamformer(heads, 4, 2)
        assert np.allclose(v[:, 0], 1 / np.sqrt(4))


class TestZF:
    def test_orthonormal_centers_give_adjoint(self):
        centers = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
        w, loaded = ll.zf_digital_beamformer(centers, np.eye(2, dtype=complex))
        assert not loaded
        assert np.allclose(w, centers.conj().T, atol=1e-12)
        assert np.allclose(centers @ w, np.eye(2), atol=1e-12)

    def test_nulling_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n_r, n_sub = 3, 4
            heads = rng.normal(size=(n_r, 12)) + 1j * rng.normal(size=(n_r, 12))
            v = ll.analog_beamformer(heads, n_sub, 3)
            centers = rng.normal(size=(n_r, 12)) + 1j * rng.normal(size=(n_r, 12))
            w, _ = ll.zf_digital_beamformer(centers, v)
            for i in range(n_r):
                for n in range(n_r):
                    if i != n:
                        leak = abs(centers[i] @ v @ w[:, n])
                        assert leak < 1e-9 * np.linalg.norm(centers[i])

    def test_unit_composed_norm(self):
        rng = np.random.default_rng(5)
        heads = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        v = ll.analog_beamformer(heads, 4, 2)
        centers = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        w, _ = ll.zf_digital_beamformer(centers, v)
        for n in range(2):
            assert np.linalg.norm(v @ w[:, n]) == pytest.approx(1.0, rel=1e-12)

    def test_near_singular_loads_and_warns(self):
        centers = np.array([[1.0, 0.0], [1.0, 1e-13]], dtype=complex)
        with pytest.warns(RuntimeWarning):
            w, loaded = ll.zf_digital_beamformer(centers, np.eye(2, dtype=complex))
        assert loaded and np.all(np.isfinite(w))


class TestDecodeOrder:
    def test_sorted_descending(self):
        gains = {10: 3.0, 11: 1.0, 12: 2.0, 0: 9.0}
        assert ll.decoding_order([0, 10, 11, 12], gains) == [10, 12, 11, 0]

    def test_singleton(self):
        assert ll.decoding_order([0, 5], {0: 1.0, 5: 2.0}) == [5, 0]

    def test_ties_by_user_index(self):
        gains = {7: 1.0, 3: 1.0, 0: 5.0}
        assert ll.decoding_order([0, 7, 3], gains) == [3, 7, 0]


def _flagged(plans, fail):
    for plan in plans:
        plan.sic_fail = {u: fail[u] for u in fail if u in plan.position
                         and plan.position[u] > 1}
    return plans


class TestSicAndSinr:
    def test_identical_channels_equality_means_success(self):
        rng = np.random.default_rng(6)
        h_eff, plans, alpha, ap_of = random_instance(rng, m=1, n_r=1,
                                                     extra_users=1)
        h_eff[0, 1] = h_eff[0, 0]  # IoT user sees exactly the head's channel
        alpha[:] = 0.2
        fail = ll.sic_feasibility(h_eff, plans, alpha, 1e-3, ap_of)
        assert fail[1] == 0

    def test_zeroed_head_channel_fails(self):
        rng = np.random.default_rng(7)
        h_eff, plans, alpha, ap_of = random_instance(rng, m=1, n_r=1,
                                                     extra_users=2)
        h_eff[0, 0] = 0.0
        alpha[:] = 0.2
        fail = ll.sic_feasibility(h_eff, plans, alpha, 1e-3, ap_of)
        assert all(fail[u] == 1 for u in (1, 2))

    def test_matches_literal_transcription(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            h_eff, plans, alpha, ap_of = random_instance(
                rng, m=int(rng.integers(1, 3)), n_r=int(rng.integers(1, 3)),
                extra_users=int(rng.integers(0, 3)))
            sigma2 = 10.0 ** rng.uniform(-4, 0)
            lit_fail, lit_sinr = literal_sic_and_sinr(h_eff, plans, alpha, sigma2)
            fail = ll.sic_feasibility(h_eff, plans, alpha, sigma2, ap_of)
            assert fail == lit_fail
            _flagged(plans, fail)
            got = ll.sinr_all(h_eff, plans, alpha, sigma2, ap_of)
            np.testing.assert_allclose(got, lit_sinr, rtol=1e-12)

    def test_single_user_no_interference(self):
        rng = np.random.default_rng(9)
        h_eff, plans, alpha, ap_of = random_instance(rng, m=1, n_r=1,
                                                     extra_users=0)
        sigma2 = 1e-2
        _flagged(plans, {})
        got = ll.sinr_all(h_eff, plans, alpha, sigma2, ap_of)
        g = abs(h_eff[0, 0] @ plans[0].v @ plans[0].w[:, 0]) ** 2
        assert got[0] == pytest.approx(g * alpha[0] / sigma2, rel=1e-12)

    def test_zero_power_zero_sinr(self):
        rng = np.random.default_rng(10)
        h_eff, plans, alpha, ap_of = random_instance(rng)
        alpha[3] = 0.0
        fail = ll.sic_feasibility(h_eff, plans, alpha, 1e-2, ap_of)
        _flagged(plans, fail)
        assert ll.sinr_all(h_eff, plans, alpha, 1e-2, ap_of)[3] == 0

    def test_own_power_monotone(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            h_eff, plans, alpha, ap_of = random_instance(rng)
            u = int(rng.integers(0, len(alpha)))
            sigma2 = 1e-2

            def gamma_of(a_u):
                a = alpha.copy()
                a[u] = a_u
                fail = ll.sic_feasibility(h_eff, plans, a, sigma2, ap_of)
                _flagged(plans, fail)
                return ll.sinr_all(h_eff, plans, a, sigma2, ap_of)[u]

            lo, hi = sorted(rng.uniform(0, 1, 2))
            assert gamma_of(hi) >= gamma_of(lo) - 1e-15


class TestRates:
    def test_unit_sinr(self):
        assert ll.rates_gbps(np.array([1.0]), 10e9)[0] == pytest.approx(10.0)

    def test_zero_sinr(self):
        assert ll.rates_gbps(np.array([0.0]), 10e9)[0] == 0.0

    def test_three_sinr(self):
        assert ll.rates_gbps(np.array([3.0]), 10e9)[0] == pytest.approx(20.0)


class TestPowerAndEfficiency:
    def test_idle_network_is_circuit_only(self):
        cfg = medium_config()
        p = ll.power_consumption(np.zeros(cfg.total_users),
                                 np.zeros((2, cfg.ris_elements)), cfg)
        p_ap = cfg.p_bb + cfg.rf_chains * cfg.p_rf + cfg.antennas * (cfg.p_ps + cfg.p_a)
        assert p == pytest.approx(cfg.total_users * cfg.p_d + cfg.num_aps * p_ap)

    def test_one_ris_element_increment(self):
        cfg = tiny_config()
        base = np.zeros((1, cfg.ris_elements))
        one = base.copy()
        one[0, 0] = 1
        alpha = np.full(cfg.total_users, 0.1)
        assert (ll.power_consumption(alpha, one, cfg)
                - ll.power_consumption(alpha, base, cfg)
                == pytest.approx(cfg.p_ris_element))

    def test_composite_hand_sum(self):
        cfg = tiny_config()
        alpha = np.array([0.3, 0.2])
        on = np.ones((1, cfg.ris_elements))
        p_ap = cfg.p_bb + cfg.rf_chains * cfg.p_rf + cfg.antennas * (cfg.p_ps + cfg.p_a)
        expect = (cfg.pa_inefficiency * 0.5 + cfg.total_users * cfg.p_d
                  + p_ap + cfg.ris_elements * cfg.p_ris_element)
        assert ll.power_consumption(alpha, on, cfg) == pytest.approx(expect, rel=1e-12)

    def test_efficiency_linear_in_rates(self):
        r = np.array([4.0, 6.0])
        assert ll.energy_efficiency(2 * r, 5.0) == pytest.approx(
            2 * ll.energy_efficiency(r, 5.0))

    def test_efficiency_zero_rates(self):
        assert ll.energy_efficiency(np.zeros(3), 2.0) == 0.0

    def test_efficiency_recomposes(self):
        r = np.array([1.5, 2.5, 3.0])
        assert ll.energy_efficiency(r, 4.0) == pytest.approx(r.sum() / 4.0)


class TestDerivePlan:
    def test_decode_positions_follow_gains(self):
        cfg = medium_config()
        rng = np.random.default_rng(12)
        n_a = cfg.antennas
        h = rng.normal(size=(6, n_a)) + 1j * rng.normal(size=(6, n_a))
        plan = ll.derive_plan(h, [0, 1], [2, 3, 4, 5], cfg)
        for members in plan.clusters:
            assert plan.position[members[0]] == 1
            gains = [abs(h[u] @ plan.v @ plan.w[:, plan.cluster_of[u]]) ** 2
                     for u in members[1:]]
            assert gains == sorted(gains, reverse=True)

    def test_iot_permutation_leaves_plan_identical(self):
        cfg = medium_config()
        rng = np.random.default_rng(13)
        h = rng.normal(size=(6, cfg.antennas)) + 1j * rng.normal(size=(6, cfg.antennas))
        p1 = ll.derive_plan(h, [0, 1], [2, 3, 4, 5], cfg)
        p2 = ll.derive_plan(h, [0, 1], [5, 4, 3, 2], cfg)
        assert p1.clusters == p2.clusters and p1.position == p2.position
        assert np.array_equal(p1.v, p2.v) and np.array_equal(p1.w, p2.w)

    def test_too_many_heads_rejected(self):
        cfg = medium_config()
        h = np.ones((4, cfg.antennas), dtype=complex)
        with pytest.raises(ValueError):
            ll.derive_plan(h, [0, 1, 2], [3], cfg)
