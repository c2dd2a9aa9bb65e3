import numpy as np
import pytest

from watf import DescriptorSet, Episode, cosine, cosine_matrix, validate_episode, ensure_valid_episode, EpisodeValidationError

from conftest import make_episode


class TestCosine:
    def test_identical_unit_vectors(self):
        assert cosine([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == 0.0

    def test_analytic_inv_sqrt2(self):
        assert cosine([1, 1], [1, 0]) == pytest.approx(2 ** -0.5, abs=1e-9)

    def test_zero_vector_convention(self):
        assert cosine([0, 0], [1, 0]) == 0.0
        assert cosine([1, 0], [0, 0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1, 0], [1, 0, 0])

    def test_symmetry(self, rng):
        for _ in range(200):
            u = rng.normal(size=5)
            v = rng.normal(size=5)
            assert cosine(u, v) == cosine(v, u)

    def test_positive_scale_invariance(self, rng):
        for _ in range(200):
            u = rng.normal(size=4)
            v = rng.normal(size=4)
            alpha = float(rng.uniform(1e-3, 1e3))
            assert cosine(alpha * u, v) == pytest.approx(cosine(u, v), rel=1e-12, abs=1e-12)

    def test_range_clamped(self, rng):
        for _ in range(500):
            u = rng.normal(size=3) * 10.0 ** float(rng.integers(-8, 8))
            assert -1.0 <= cosine(u, u * float(rng.uniform(0.5, 2.0))) <= 1.0

    def test_matrix_agrees_with_scalar(self, rng):
        a = rng.normal(size=(6, 4))
        b = rng.normal(size=(5, 4))
        mat = cosine_matrix(a, b)
        for i in range(6):
            for j in range(5):
                assert mat[i, j] == pytest.approx(cosine(a[i], b[j]), abs=1e-12)

    def test_matrix_zero_row(self):
        mat = cosine_matrix(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
        assert mat[0, 0] == 0.0


class TestValidation:
    def test_well_formed_accepted(self, rng):
        episode = make_episode(rng, n_way=5, k_shot=1, n_query=2)
        assert validate_episode(episode) == []
        assert ensure_valid_episode(episode) is episode

    def test_nan_entry_rejected(self, rng):
        episode = make_episode(rng)
        bad = np.array(episode.support[0].descriptors)
        bad[0, 0] = np.nan
        support = (DescriptorSet(bad, "bad", label=0),) + episode.support[1:]
        broken = Episode(episode.n_way, episode.k_shot, episode.n_query, support, episode.query, episode.query_labels)
        violations = validate_episode(broken)
        assert any("non-finite entry" in v for v in violations)
        with pytest.raises(EpisodeValidationError):
            ensure_valid_episode(broken)

    def test_missing_support_class_rejected(self, rng):
        episode = make_episode(rng, n_way=3, k_shot=1)
        # relabel class 2's only support set as class 0
        ds = episode.support[2]
        support = episode.support[:2] + (DescriptorSet(ds.descriptors, ds.sample_id, label=0),)
        broken = Episode(episode.n_way, episode.k_shot, episode.n_query, support, episode.query, episode.query_labels)
        violations = validate_episode(broken)
        assert any("class coverage" in v for v in violations)

    def test_query_label_leak_rejected(self, rng):
        episode = make_episode(rng)
        leaked = (DescriptorSet(episode.query[0].descriptors, "leak", label=0),) + episode.query[1:]
        broken = Episode(episode.n_way, episode.k_shot, episode.n_query, episode.support, leaked, episode.query_labels)
        assert any("query_labels" in v for v in validate_episode(broken))

    def test_mismatched_shapes_rejected(self, rng):
        episode = make_episode(rng, m=4, c=3)
        odd = (DescriptorSet(rng.normal(size=(5, 3)), "odd", label=0),) + episode.support[1:]
        broken = Episode(episode.n_way, episode.k_shot, episode.n_query, odd, episode.query, episode.query_labels)
        assert any("share one M x C shape" in v for v in validate_episode(broken))

    def test_one_way_rejected(self, rng):
        episode = make_episode(rng)
        broken = Episode(1, 1, episode.n_query, episode.support[:1], episode.query[:2], (0, 0))
        violations = validate_episode(broken)
        assert any("n_way" in v for v in violations)

    def test_query_imbalance_rejected(self, rng):
        episode = make_episode(rng, n_way=2, n_query=2)
        broken = Episode(2, 1, 2, episode.support, episode.query, (0, 0, 0, 1))
        assert any("class coverage" in v for v in validate_episode(broken))

    def test_all_violations_collected(self, rng):
        episode = make_episode(rng, n_way=3)
        bad = np.array(episode.support[0].descriptors)
        bad[0, 0] = np.inf
        support = (DescriptorSet(bad, "bad", label=0), episode.support[1]) + episode.support[2:]
        ds = support[2]
        support = support[:2] + (DescriptorSet(ds.descriptors, ds.sample_id, label=1),)
        broken = Episode(3, 1, episode.n_query, support, episode.query, episode.query_labels)
        violations = validate_episode(broken)
        assert len(violations) >= 2


class TestImmutability:
    def test_descriptor_arrays_read_only(self, rng):
        ds = DescriptorSet(rng.normal(size=(3, 2)), "x", label=0)
        with pytest.raises(ValueError):
            ds.descriptors[0, 0] = 1.0

    def test_construction_copies_input(self, rng):
        raw = rng.normal(size=(3, 2))
        ds = DescriptorSet(raw, "x")
        raw[0, 0] = 99.0
        assert ds.descriptors[0, 0] != 99.0
