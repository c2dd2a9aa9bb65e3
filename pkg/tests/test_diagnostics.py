import numpy as np
import pytest

from watf import (
    SeededGenerator,
    SynthSpec,
    collect_statistics,
    compactness_metrics,
    compute_prototypes,
    compute_weight_matrix,
    foreground_background_weight_means,
    generate_benchmark,
    generate_episode,
    weight_histogram,
)

from conftest import make_episode


class TestWeightHistogram:
    def test_constant_pool_single_occupied_bin(self):
        hist = weight_histogram(np.full(40, 0.25), n_bins=10)
        assert int(hist.counts.sum()) == 40
        assert int((hist.counts > 0).sum()) == 1
        assert hist.sigma == 0.0
        assert hist.skewness == 0.0

    def test_counts_cover_pool_and_span_min_max(self, rng):
        pool = rng.uniform(size=1000)
        hist = weight_histogram(pool, n_bins=16)
        assert int(hist.counts.sum()) == 1000
        assert hist.bin_edges[0] == pytest.approx(pool.min())
        assert hist.bin_edges[-1] == pytest.approx(pool.max())
        widths = np.diff(hist.bin_edges)
        np.testing.assert_allclose(widths, widths[0], rtol=1e-9)

    def test_weight_pool_mean_is_reciprocal_m(self, rng):
        episode = make_episode(rng, n_way=3, k_shot=2, m=8, c=4)
        wm = compute_weight_matrix(episode.support, compute_prototypes(episode.support))
        hist = weight_histogram(wm.w_bar, n_bins=20)
        assert hist.mu == pytest.approx(1.0 / 8, abs=1e-9)

    def test_sixty_eight_percent_rule(self):
        # thresholding normal draws at mu - sigma keeps the upper ~84.1%
        draws = SeededGenerator(123).standard_normal(100_000)
        hist = weight_histogram(draws, n_bins=50)
        retained = float(np.mean(draws > hist.mu - hist.sigma))
        assert retained == pytest.approx(0.8413, abs=0.02)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            weight_histogram(np.empty(0), n_bins=4)
        with pytest.raises(ValueError):
            weight_histogram(np.ones(5), n_bins=1)


class TestCompactness:
    def test_duplicated_orthogonal_classes(self):
        pools = [np.tile([1.0, 0.0], (4, 1)), np.tile([0.0, 1.0], (4, 1))]
        metrics = compactness_metrics(pools)
        assert metrics.silhouette == pytest.approx(1.0, abs=1e-12)
        assert metrics.intra_inter_ratio == pytest.approx(0.0, abs=1e-12)

    def test_shared_distribution_scores_near_zero(self):
        rng = np.random.default_rng(99)
        cloud = rng.normal(size=(1000, 6))
        labels_split = [cloud[:500], cloud[500:]]
        metrics = compactness_metrics(labels_split)
        assert metrics.silhouette == pytest.approx(0.0, abs=0.1)

    def test_singleton_pools_follow_zero_convention(self):
        pools = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])]
        metrics = compactness_metrics(pools)
        assert metrics.silhouette == 0.0

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            compactness_metrics([np.empty((0, 2)), np.ones((2, 2))])
        with pytest.raises(ValueError):
            compactness_metrics([np.ones((2, 2))])


class TestForegroundBackgroundSplit:
    def test_partition_arithmetic(self):
        synth = generate_episode(
            SynthSpec(n_way=2, k_shot=1, n_query=1, m_descriptors=4, c_dim=6,
                      noise_fraction=0.5, foreground_spread=0.0, n_background_motifs=1, seed=3)
        )
        w_bar = np.arange(8, dtype=float).reshape(2, 4)
        fg_mean, bg_mean = foreground_background_weight_means(synth, w_bar)
        masks = np.stack(synth.support_background)
        assert fg_mean == pytest.approx(float(w_bar[~masks].mean()))
        assert bg_mean == pytest.approx(float(w_bar[masks].mean()))

    def test_shape_mismatch_rejected(self):
        synth = generate_episode(
            SynthSpec(n_way=2, k_shot=1, n_query=1, m_descriptors=4, c_dim=6,
                      noise_fraction=0.5, foreground_spread=0.0, n_background_motifs=1, seed=3)
        )
        with pytest.raises(ValueError):
            foreground_background_weight_means(synth, np.ones((3, 4)))


class TestCollectStatistics:
    def test_summary_over_synth_stream(self):
        spec = SynthSpec(n_way=3, k_shot=1, n_query=2, m_descriptors=12, c_dim=8,
                         noise_fraction=0.25, foreground_spread=0.1, n_background_motifs=2, seed=11)
        episodes = (s.episode for s in generate_benchmark(spec, 5))
        summary = collect_statistics(episodes, n_bins=10)
        assert summary.n_episodes == 5
        assert summary.histogram.mu == pytest.approx(1.0 / 12, abs=1e-9)
        assert 0.0 < summary.support_retention <= 1.0
        assert 0.0 < summary.query_retention <= 1.0
        assert 0.0 <= summary.fallback_rate <= 1.0

    def test_empty_stream_rejected(self):
        with pytest.raises(ValueError):
            collect_statistics(iter(()), n_bins=10)
