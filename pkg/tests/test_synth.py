import math

import numpy as np
import pytest

from watf import (
    GenerationError,
    RunConfig,
    SeededGenerator,
    SynthSpec,
    episode_content_hash,
    generate_benchmark,
    generate_episode,
    run_episode,
)
from watf.synth import MIN_DIRECTION_COSINE_DISTANCE


def spec(**overrides):
    base = dict(
        n_way=3,
        k_shot=1,
        n_query=2,
        m_descriptors=10,
        c_dim=8,
        noise_fraction=0.4,
        foreground_spread=0.1,
        n_background_motifs=3,
        seed=7,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestSeededGenerator:
    def test_uniform_range_and_determinism(self):
        a = SeededGenerator(42).uniform(1000)
        b = SeededGenerator(42).uniform(1000)
        np.testing.assert_array_equal(a, b)
        assert np.all((a >= 0.0) & (a < 1.0))

    def test_normal_moments(self):
        z = SeededGenerator(7).standard_normal(200_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_normal_shapes(self):
        gen = SeededGenerator(0)
        assert gen.standard_normal((3, 4)).shape == (3, 4)
        assert gen.standard_normal(5).shape == (5,)

    def test_integers_in_range(self):
        draws = SeededGenerator(3).integers(3, size=1000)
        assert set(np.unique(draws)) <= {0, 1, 2}

    def test_permutation_is_bijection(self):
        perm = SeededGenerator(9).permutation(50)
        assert sorted(perm.tolist()) == list(range(50))


class TestGenerateEpisode:
    def test_zero_noise_zero_spread_is_pure(self):
        synth = generate_episode(spec(noise_fraction=0.0, foreground_spread=0.0))
        episode = synth.episode
        for masks in (synth.support_background, synth.query_background):
            for mask in masks:
                assert not mask.any()
        # every descriptor equals its class direction exactly -> identical rows
        for ds in episode.support:
            assert np.all(ds.descriptors == ds.descriptors[0])
        outcome = run_episode(episode, RunConfig(k_neighbors=1, n_episodes=1))
        assert outcome.accuracy == 1.0
        # each sample's weights are uniform, so filtering degenerates to a no-op:
        # every sample keeps all M descriptors (via > tau or via the fallback)
        assert outcome.filtered.support_result.retention_fraction == 1.0
        assert outcome.filtered.query_result.retention_fraction == 1.0
        for before, after in zip(outcome.filtered.initial_prototypes, outcome.filtered.updated_prototypes):
            np.testing.assert_array_equal(before.vector, after.vector)

    def test_background_counts_match_floor(self):
        s = spec(noise_fraction=0.4, m_descriptors=36, c_dim=16, n_way=5, k_shot=1, n_query=1)
        synth = generate_episode(s)
        expected = math.floor(0.4 * 36)
        for mask in synth.support_background + synth.query_background:
            assert int(mask.sum()) == expected

    def test_separation_constraint_holds(self):
        s = spec(c_dim=16, n_way=5, n_background_motifs=3)
        synth = generate_episode(s)
        # recover directions from a zero-spread twin of the same seed
        pure = generate_episode(spec(c_dim=16, n_way=5, n_background_motifs=3, noise_fraction=0.0, foreground_spread=0.0))
        dirs = np.stack([ds.descriptors[0] for ds in pure.episode.support])
        cos = dirs @ dirs.T
        off_diag = cos[~np.eye(len(dirs), dtype=bool)]
        assert np.all(1.0 - off_diag >= MIN_DIRECTION_COSINE_DISTANCE - 1e-12)

    def test_impossible_separation_raises(self):
        with pytest.raises(GenerationError):
            generate_episode(spec(c_dim=1, n_way=2, n_background_motifs=2))

    def test_masks_not_exposed_on_episode(self):
        episode = generate_episode(spec()).episode
        assert not hasattr(episode, "support_background")
        assert not hasattr(episode.support[0], "background")

    def test_episode_is_valid(self):
        from watf import validate_episode

        assert validate_episode(generate_episode(spec()).episode) == []


class TestBenchmarkStream:
    def test_bit_identical_streams(self):
        a = [episode_content_hash(s.episode) for s in generate_benchmark(spec(), 3)]
        b = [episode_content_hash(s.episode) for s in generate_benchmark(spec(), 3)]
        assert a == b

    def test_indexed_generation_matches_stream(self):
        stream = list(generate_benchmark(spec(), 3))
        for i, synth in enumerate(stream):
            again = generate_episode(spec(), episode_index=i)
            assert episode_content_hash(again.episode) == episode_content_hash(synth.episode)

    def test_child_seeds_differ(self):
        hashes = {episode_content_hash(s.episode) for s in generate_benchmark(spec(), 10)}
        assert len(hashes) == 10

    def test_different_seeds_differ(self):
        a = episode_content_hash(generate_episode(spec(seed=1)).episode)
        b = episode_content_hash(generate_episode(spec(seed=2)).episode)
        assert a != b

    def test_empty_stream_rejected_by_evaluate(self):
        from watf import EvaluationError, evaluate

        episodes = (s.episode for s in generate_benchmark(spec(), 0))
        with pytest.raises(EvaluationError):
            evaluate(episodes, RunConfig(n_episodes=1))


class TestSpecValidation:
    def test_noise_fraction_bounds(self):
        with pytest.raises(ValueError):
            spec(noise_fraction=1.0)
        with pytest.raises(ValueError):
            spec(noise_fraction=-0.1)

    def test_one_way_rejected(self):
        with pytest.raises(ValueError):
            spec(n_way=1)

    def test_negative_spread_rejected(self):
        with pytest.raises(ValueError):
            spec(foreground_spread=-1.0)
