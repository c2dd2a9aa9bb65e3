import numpy as np
import pytest

from watf import DescriptorSet, Episode


def make_episode(rng, n_way=2, k_shot=1, n_query=2, m=4, c=3, scale=1.0):
    """Random dense episode; descriptors are plain standard-normal rows."""
    support = tuple(
        DescriptorSet(scale * rng.normal(size=(m, c)), f"s/c{cls}/k{shot}", label=cls)
        for cls in range(n_way)
        for shot in range(k_shot)
    )
    query = tuple(
        DescriptorSet(scale * rng.normal(size=(m, c)), f"q/c{cls}/j{j}")
        for cls in range(n_way)
        for j in range(n_query)
    )
    labels = tuple(cls for cls in range(n_way) for _ in range(n_query))
    return Episode(n_way, k_shot, n_query, support, query, labels)


def copycat_episode(n_way=2, k_shot=1, n_query=1, m=3, c=4, seed=0):
    """Episode whose queries are exact copies of their class's support sets.

    Classes sit near distinct basis directions so self-matches dominate with
    or without filtering.
    """
    assert c >= n_way
    rng = np.random.default_rng(seed)
    eye = np.eye(c)
    blocks = [eye[cls] + 0.05 * rng.normal(size=(m, c)) for cls in range(n_way)]
    support = tuple(DescriptorSet(blocks[cls], f"s/c{cls}/k{shot}", label=cls) for cls in range(n_way) for shot in range(k_shot))
    query = tuple(DescriptorSet(blocks[cls], f"q/c{cls}/j{j}") for cls in range(n_way) for j in range(n_query))
    labels = tuple(cls for cls in range(n_way) for _ in range(n_query))
    return Episode(n_way, k_shot, n_query, support, query, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
