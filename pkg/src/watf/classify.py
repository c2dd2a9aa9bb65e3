"""Image-to-class k-NN scoring over retained local descriptors.

A query is scored against each class by summing, over its descriptors, the
cosine similarities of the k nearest pool descriptors; class probabilities
are the softmax of those scores. Pools are small, so search is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .descriptors import DescriptorSet, Episode, cosine_matrix
from .filtering import FilterResult

__all__ = [
    "ClassScore",
    "class_score",
    "classify",
    "episode_loss",
    "support_class_pools",
]


@dataclass(frozen=True)
class ClassScore:
    """Similarity scores for one query against all N classes.

    ``probabilities`` is the softmax of ``scores`` (computed with the usual
    max shift, which leaves the values unchanged up to rounding), and
    ``predicted`` is the lowest class index among the argmax ties.
    """

    scores: np.ndarray
    probabilities: np.ndarray
    predicted: int

    def __post_init__(self):
        for name in ("scores", "probabilities"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _as_rows(descriptors: Union[DescriptorSet, np.ndarray]) -> np.ndarray:
    if isinstance(descriptors, DescriptorSet):
        return descriptors.descriptors
    arr = np.asarray(descriptors, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D descriptor matrix, got shape {arr.shape}")
    return arr


def class_score(query_descriptors, class_pool, k: int) -> float:
    """Sum of top-k cosine similarities of each query descriptor against one class pool.

    For every one of the H query descriptors, the k largest cosines against
    the pool are summed; a pool smaller than k contributes all of its
    descriptors instead of failing.
    """
    query = _as_rows(query_descriptors)
    pool = _as_rows(class_pool)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if query.shape[0] < 1:
        raise ValueError("query must hold at least one descriptor")
    if pool.shape[0] < 1:
        raise ValueError("class pool is empty")
    cos = cosine_matrix(query, pool)
    kk = min(k, pool.shape[0])
    top = np.partition(cos, pool.shape[0] - kk, axis=1)[:, pool.shape[0] - kk:]
    return float(top.sum())


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def classify(query_descriptors, support_pools: Sequence[np.ndarray], k: int) -> ClassScore:
    """Score one query against every class pool and pick the most probable class."""
    if not support_pools:
        raise ValueError("need at least one class pool")
    scores = np.array([class_score(query_descriptors, pool, k) for pool in support_pools])
    probabilities = _softmax(scores)
    return ClassScore(scores=scores, probabilities=probabilities, predicted=int(np.argmax(probabilities)))


def episode_loss(class_scores: Sequence[ClassScore], labels: Sequence[int]) -> float:
    """Mean negative log probability of the true class (diagnostic only).

    Evaluated in log space from the raw scores, so it stays finite even when
    a probability underflows to zero.
    """
    if len(class_scores) != len(labels):
        raise ValueError(f"{len(class_scores)} scores do not align with {len(labels)} labels")
    if not class_scores:
        raise ValueError("need at least one scored query")
    total = 0.0
    for cs, label in zip(class_scores, labels):
        s = cs.scores
        m = s.max()
        log_norm = m + np.log(np.exp(s - m).sum())
        total += log_norm - s[label]
    return total / len(class_scores)


def support_class_pools(episode: Episode, support_result: Optional[FilterResult] = None) -> list[np.ndarray]:
    """Concatenate each class's support descriptors, restricted to retained indices when given.

    Returns one pool per class index 0..N-1, in order.
    """
    pools: dict[int, list[np.ndarray]] = {c: [] for c in range(episode.n_way)}
    for j, ds in enumerate(episode.support):
        if ds.label is None:
            raise ValueError(f"support sample {ds.sample_id!r} has no label")
        rows = ds.descriptors if support_result is None else ds.descriptors[support_result.retained[j]]
        pools[ds.label].append(rows)
    return [np.concatenate(pools[c], axis=0) for c in range(episode.n_way)]
