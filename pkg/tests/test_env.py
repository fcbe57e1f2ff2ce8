import numpy as np
import pytest

from risnoma.env import NetworkEnv, shaped_reward
from risnoma.graphs import feature_dims, state_digest
from risnoma.presets import medium_config, tiny_config
from risnoma.topology import SE


def random_action(cfg, rng):
    power = rng.uniform(0, cfg.max_tx_power / cfg.users_per_ap, cfg.total_users)
    on = rng.integers(0, 2, (cfg.num_ris, cfg.ris_elements))
    beta = rng.integers(0, 2 ** cfg.ris_phase_bits, (cfg.num_ris, cfg.ris_elements))
    return power, on, beta


class TestStepSemantics:
    def test_identical_seeds_identical_outcomes(self):
        cfg = tiny_config()
        outs = []
        for _ in range(2):
            env = NetworkEnv(cfg, seed=3)
            rng = np.random.default_rng(0)
            rewards = [env.step(*random_action(cfg, rng)).reward for _ in range(5)]
            outs.append(rewards)
        assert outs[0] == outs[1]

    def test_all_off_zero_power(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=1)
        zeros = np.zeros(cfg.total_users)
        off = np.zeros((1, cfg.ris_elements), dtype=int)
        out = env.step(zeros, off, off)
        assert np.all(out.rates == 0)
        assert out.delta == pytest.approx(cfg.rmin_se_gbps + cfg.rmin_iot_gbps)
        assert out.reward == pytest.approx(cfg.zeta * out.eta
                                           - cfg.xi_penalty * out.delta)

    def test_queue_conservation(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=2)
        rng = np.random.default_rng(7)
        for _ in range(10):
            q0 = env.queues.q.copy()
            out = env.step(*random_action(cfg, rng))
            served = out.rates * cfg.slot_seconds
            expect = out.arrivals + np.maximum(q0 - served, 0.0)
            np.testing.assert_allclose(out.q, expect, rtol=1e-12)

    def test_reward_recomposes_exactly(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=5)
        rng = np.random.default_rng(8)
        for _ in range(10):
            out = env.step(*random_action(cfg, rng))
            again = shaped_reward(out.eta, out.delta, out.weights, out.rates,
                                  cfg.zeta, cfg.xi_penalty)
            assert again == out.reward  # bitwise, same helper and inputs

    def test_power_projection_scales_onto_budget(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        heavy = np.full(cfg.total_users, cfg.max_tx_power)
        scaled = env.project_power(heavy)
        assert scaled.sum() == pytest.approx(cfg.max_tx_power)

    def test_malformed_action_rejected(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        with pytest.raises(ValueError):
            env.step(np.zeros(cfg.total_users + 1),
                     np.zeros((1, cfg.ris_elements), dtype=int),
                     np.zeros((1, cfg.ris_elements), dtype=int))
        with pytest.raises(ValueError):
            env.step(np.zeros(cfg.total_users),
                     np.zeros((2, cfg.ris_elements), dtype=int),
                     np.zeros((2, cfg.ris_elements), dtype=int))

    def test_peek_matches_step_reward(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=9)
        rng = np.random.default_rng(4)
        act = random_action(cfg, rng)
        peeked = env.peek_reward(*act)
        assert env.step(*act).reward == peeked

    def test_checksum_stable_and_config_sensitive(self):
        cfg = tiny_config()
        a, b = NetworkEnv(cfg, seed=1), NetworkEnv(cfg, seed=1)
        assert a.checksum() == b.checksum()
        c = NetworkEnv(tiny_config(zeta=2.0), seed=1)
        assert c.checksum() != a.checksum()


class TestObservations:
    def test_ris_observation_has_no_queue_data(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=0)
        obs = env.observe("ris", 0)
        assert not any("weight" in k or "queue" in k for k in obs.blocks)

    def test_ap_observation_blocks(self):
        cfg = medium_config(neighbor_radius=1e-6)  # isolate every agent
        env = NetworkEnv(cfg, seed=0)
        obs = env.observe("ap", 0)
        assert set(obs.blocks) == {"own_direct", "weights", "last_action"}

    def test_observation_dims_match_formula(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=0)
        k, n_a, n_el = cfg.users_per_ap, cfg.antennas, cfg.ris_elements
        for i in range(cfg.num_aps):
            obs = env.observe("ap", i)
            n_neighbors = len(env.topo.ap_neighbor_ap[i])
            expect = 2 * k * n_a * (1 + n_neighbors) + 2 * k
            assert obs.vector.size == expect
        for r in range(cfg.num_ris):
            obs = env.observe("ris", r)
            n_ap = len(env.topo.ris_neighbor_ap[r])
            expect = n_ap * (2 * k * n_el + 2 * n_el * n_a) + 2 * n_el
            assert obs.vector.size == expect


class TestCommGraph:
    def test_no_ris_means_only_ap_edges(self):
        cfg = medium_config(num_ris=0)
        env = NetworkEnv(cfg, seed=0)
        graph = env.comm_graph()
        assert all(kind == "ap_ap" for _, _, kind in graph.edges)

    def test_edge_counts_match_neighbor_sets(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=0)
        graph = env.comm_graph()
        topo = env.topo
        expect = (sum(len(v) for v in topo.ap_neighbor_ap)
                  + sum(len(v) for v in topo.ap_neighbor_ris)
                  + sum(len(v) for v in topo.ris_neighbor_ap))
        assert len(graph.edges) == expect

    def test_node_feature_dims(self):
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=0)
        graph = env.comm_graph()
        dims = feature_dims(cfg, env.topo)
        for kind, feat in zip(graph.node_kind, graph.node_feat):
            assert feat.size == dims[f"{kind}_node"]
        for (src, dst, kind), feat in zip(graph.edges, graph.edge_feat):
            assert feat.size == dims[kind]

    def test_ris_relabel_permutes_graph(self):
        # swapping the two RIS agents permutes node features verbatim
        cfg = medium_config()
        env = NetworkEnv(cfg, seed=0)
        graph = env.comm_graph()
        m = cfg.num_aps
        perm = np.arange(graph.num_nodes)
        perm[m], perm[m + 1] = m + 1, m
        permuted = graph.permuted(perm)
        assert np.array_equal(permuted.node_feat[m + 1], graph.node_feat[m])
        assert np.array_equal(permuted.node_feat[m], graph.node_feat[m + 1])
        for (s, d, kind), feat in zip(graph.edges, graph.edge_feat):
            moved = (int(perm[s]), int(perm[d]), kind)
            assert moved in permuted.edges
            assert np.array_equal(
                permuted.edge_feat[permuted.edges.index(moved)], feat)

    def test_digest_is_node_concat(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        graph = env.comm_graph()
        assert np.array_equal(env.state_digest(), state_digest(graph))


class TestLyapunovPressure:
    def test_weights_grow_without_service(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        zeros = np.zeros(cfg.total_users)
        off = np.zeros((1, cfg.ris_elements), dtype=int)
        w0 = env.queues.weights().sum()
        for _ in range(20):
            env.step(zeros, off, off)
        assert env.queues.weights().sum() > w0

    def test_outage_flags_match_threshold(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        zeros = np.zeros(cfg.total_users)
        off = np.zeros((1, cfg.ris_elements), dtype=int)
        for _ in range(5):
            out = env.step(zeros, off, off)
            np.testing.assert_array_equal(out.outage, out.q >= env.queues.q_max)

    def test_reset_zeroes_queues_and_time(self):
        cfg = tiny_config()
        env = NetworkEnv(cfg, seed=0)
        rng = np.random.default_rng(1)
        for _ in range(3):
            env.step(*random_action(cfg, rng))
        env.reset()
        assert env.t == 0
        assert np.all(env.queues.q == 0) and np.all(env.queues.y == 0)
