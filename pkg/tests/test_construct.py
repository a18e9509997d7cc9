import numpy as np
import pytest

from conftest import make_dataset
from oracles import lif_unroll, single_unit_update_sq_norm
from spikegrow import (
    Candidate,
    ConfigError,
    LifParams,
    PruningConfig,
    candidate_features,
    grow_one,
    sample_candidates,
    select_best,
    xi_index,
)
from spikegrow.construct import pool_features

PARAMS = LifParams()


class TestSampleCandidates:
    def test_degenerate_range_gives_zero_weights(self):
        cfg = PruningConfig(pool_size=1, weight_scale=1.0)
        rng = np.random.default_rng(0)
        (c,) = sample_candidates(cfg, 3, rng, weight_scale=0.0)
        assert np.all(c.w == 0.0) and c.v == 0.0

    def test_values_within_range(self):
        cfg = PruningConfig(pool_size=40, weight_scale=0.7)
        pool = sample_candidates(cfg, 5, np.random.default_rng(1))
        for c in pool:
            assert np.all(np.abs(c.w) <= 0.7) and abs(c.v) <= 0.7

    def test_pool_indices_in_draw_order(self):
        cfg = PruningConfig(pool_size=10)
        pool = sample_candidates(cfg, 2, np.random.default_rng(2))
        assert [c.pool_index for c in pool] == list(range(10))

    def test_same_seed_same_pool(self):
        cfg = PruningConfig(pool_size=5)
        a = sample_candidates(cfg, 3, np.random.default_rng(7))
        b = sample_candidates(cfg, 3, np.random.default_rng(7))
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.w, cb.w) and ca.v == cb.v

    def test_larger_pool_shares_prefix(self):
        small = sample_candidates(PruningConfig(pool_size=4), 3,
                                  np.random.default_rng(5))
        large = sample_candidates(PruningConfig(pool_size=9), 3,
                                  np.random.default_rng(5))
        for ca, cb in zip(small, large):
            assert np.array_equal(ca.w, cb.w) and ca.v == cb.v

    def test_uniform_moments(self):
        cfg = PruningConfig(pool_size=2000, weight_scale=1.0)
        pool = sample_candidates(cfg, 50, np.random.default_rng(11))
        draws = np.concatenate([c.w for c in pool])  # 1e5 values
        se = np.sqrt(1.0 / 3.0 / draws.size)  # Var(U[-1,1]) = 1/3
        assert abs(draws.mean()) <= 3 * se


class TestCandidateFeatures:
    def test_zero_weight_candidate_silent(self, tiny_dataset):
        c = Candidate(np.zeros(tiny_dataset.d), 0.0, 0)
        h = candidate_features(c, tiny_dataset, PARAMS)
        assert np.all(h == 0.0)

    def test_values_in_unit_interval(self, tiny_dataset):
        rng = np.random.default_rng(3)
        c = Candidate(rng.uniform(-1, 1, tiny_dataset.d), 0.5, 0)
        h = candidate_features(c, tiny_dataset, PARAMS)
        assert np.all((h >= 0.0) & (h <= 1.0))
        assert h.shape == (len(tiny_dataset),)

    def test_matches_scalar_unroll(self, tiny_dataset):
        rng = np.random.default_rng(4)
        w = rng.uniform(-1, 1, tiny_dataset.d)
        c = Candidate(w, 0.3, 0)
        h = candidate_features(c, tiny_dataset, PARAMS)
        for i, s in enumerate(tiny_dataset.samples):
            spikes = lif_unroll(s.channels.tolist(), w.tolist(), 0.3,
                                PARAMS.dt, PARAMS.tau_syn, PARAMS.tau_mem,
                                PARAMS.theta)
            assert h[i] == sum(spikes) / len(spikes)

    def test_thread_fanout_matches_serial(self, tiny_dataset):
        cfg = PruningConfig(pool_size=8)
        pool = sample_candidates(cfg, tiny_dataset.d, np.random.default_rng(6))
        serial = pool_features(pool, tiny_dataset, PARAMS, threads=1)
        parallel = pool_features(pool, tiny_dataset, PARAMS, threads=4)
        for (ca, ha), (cb, hb) in zip(serial, parallel):
            assert ca is cb
            assert np.array_equal(ha, hb)


class TestXiIndex:
    def test_orthogonal_feature_rejected(self):
        E = np.array([[1.0], [1.0]])
        h = np.array([1.0, -1.0])  # orthogonal to E's only column
        xi = xi_index(E, h, 0.9)
        assert xi == pytest.approx(-(1 - 0.9) * 2.0)
        assert xi < 0

    def test_parallel_feature_accepted(self):
        E = np.array([[2.0], [4.0]])
        h = np.array([1.0, 2.0])
        sigma = 0.8
        xi = xi_index(E, h, sigma)
        assert xi == pytest.approx(sigma * 20.0)

    def test_hand_computed_value(self):
        E = np.array([[1.0], [1.0]])
        h = np.array([1.0, 0.0])
        assert xi_index(E, h, 0.9) == pytest.approx(0.8)

    def test_silent_feature_raises(self):
        with pytest.raises(ValueError, match="silent"):
            xi_index(np.ones((3, 1)), np.zeros(3), 0.5)

    def test_bad_sigma_rejected(self):
        with pytest.raises(ConfigError):
            xi_index(np.ones((2, 1)), np.ones(2), 1.0)

    def test_certificate_identity(self):
        # xi >= 0 iff the single-unit update contracts by at least sigma.
        rng = np.random.default_rng(8)
        for _ in range(200):
            N, m = int(rng.integers(2, 12)), int(rng.integers(1, 5))
            E = rng.normal(size=(N, m))
            h = rng.normal(size=N)
            sigma = float(rng.uniform(0.05, 0.999))
            xi = xi_index(E, h, sigma)
            new_sq = single_unit_update_sq_norm(E, h)
            bound = sigma * np.sum(E * E)
            if xi >= 0:
                assert new_sq <= bound * (1 + 1e-9) + 1e-12
            else:
                assert new_sq > bound * (1 - 1e-9) - 1e-12


class TestSelectBest:
    def _pool(self, hs):
        return [(Candidate(np.zeros(1), 0.0, i), np.asarray(h, float))
                for i, h in enumerate(hs)]

    def test_single_qualifier(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[1.0, 1.0]])
        sel = select_best(pool, E, 0.9)
        assert sel is not None and sel.winner.pool_index == 0

    def test_max_xi_wins(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[1.0, 0.0], [1.0, 1.0]])  # xi 0.8 < 1.8
        sel = select_best(pool, E, 0.9)
        assert sel.winner.pool_index == 1

    def test_tie_breaks_to_lowest_index(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[1.0, 1.0], [1.0, 1.0]])
        sel = select_best(pool, E, 0.9)
        assert sel.winner.pool_index == 0

    def test_silent_candidates_skipped(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[0.0, 0.0], [1.0, 1.0]])
        sel = select_best(pool, E, 0.9)
        assert sel.winner.pool_index == 1

    def test_no_qualifier_returns_none(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[1.0, -1.0]])
        assert select_best(pool, E, 0.9999) is None

    def test_superset_pool_never_worse(self, tiny_dataset):
        from spikegrow import encode_targets
        E = encode_targets(tiny_dataset)
        rng1 = np.random.default_rng(21)
        rng2 = np.random.default_rng(21)
        small = sample_candidates(PruningConfig(pool_size=5), tiny_dataset.d, rng1)
        large = sample_candidates(PruningConfig(pool_size=20), tiny_dataset.d, rng2)
        sigma = 0.999
        s_sel = select_best(pool_features(small, tiny_dataset, PARAMS), E, sigma)
        l_sel = select_best(pool_features(large, tiny_dataset, PARAMS), E, sigma)
        if s_sel is not None:
            assert l_sel is not None and l_sel.xi >= s_sel.xi

    def test_error_gain_definition(self):
        E = np.array([[1.0], [1.0]])
        pool = self._pool([[1.0, 0.0]])
        sigma = 0.9
        sel = select_best(pool, E, sigma)
        assert sel.error_gain == pytest.approx(sel.xi + (1 - sigma) * 2.0)
        assert sel.error_gain > 0


class TestGrowOne:
    def test_first_round_success_uses_sigma0(self, tiny_dataset):
        from spikegrow import encode_targets
        E = encode_targets(tiny_dataset)
        cfg = PruningConfig(pool_size=30, sigma0=0.999)
        out = grow_one(E, tiny_dataset, cfg, PARAMS,
                       np.random.default_rng(13))
        assert not out.saturated
        assert out.sigma_used == 0.999
        assert out.rounds_used == 1

    def test_all_silent_saturates_after_all_rounds(self):
        # Huge threshold: no candidate can ever fire.
        ds = make_dataset(n_per_cat=2, n_cats=2, d=3, T=6)
        from spikegrow import encode_targets
        params = LifParams(theta=1e9)
        cfg = PruningConfig(pool_size=4, sigma_relax_steps=3)
        out = grow_one(encode_targets(ds), ds, cfg, params,
                       np.random.default_rng(1))
        assert out.saturated
        assert out.rounds_used == cfg.sigma_relax_steps + 1

    def test_deterministic_across_thread_counts(self, tiny_dataset):
        from spikegrow import encode_targets
        E = encode_targets(tiny_dataset)
        cfg = PruningConfig(pool_size=16)
        a = grow_one(E, tiny_dataset, cfg, PARAMS,
                     np.random.default_rng(3), threads=1)
        b = grow_one(E, tiny_dataset, cfg, PARAMS,
                     np.random.default_rng(3), threads=8)
        assert a.sigma_used == b.sigma_used
        assert np.array_equal(a.selection.winner.w, b.selection.winner.w)
        assert np.array_equal(a.selection.feature, b.selection.feature)
