"""Core data model: per-image descriptor sets, episodes, and cosine primitives.

Descriptors are stored row-major (M descriptors x C channels); an optional
source grid shape is metadata only. Arrays are coerced to float64 and frozen
at construction, so every type here is immutable and safe to share across
workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DescriptorSet",
    "Episode",
    "Prototype",
    "EpisodeValidationError",
    "cosine",
    "cosine_matrix",
    "validate_episode",
    "ensure_valid_episode",
]


class EpisodeValidationError(ValueError):
    """An episode violated one or more data-model invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = tuple(violations)
        super().__init__("episode validation failed: " + "; ".join(self.violations))


def _owned_readonly(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DescriptorSet:
    """All local descriptors of one image.

    Parameters
    ----------
    descriptors : array_like, shape (M, C)
        One row per local descriptor. Stored as read-only float64.
    sample_id : str
        Opaque identifier, used in reports and fallback bookkeeping.
    label : int, optional
        Class index for support samples. Query samples keep ``None``;
        their ground truth lives in ``Episode.query_labels``.
    """

    descriptors: np.ndarray
    sample_id: str
    label: Optional[int] = None

    def __post_init__(self):
        arr = _owned_readonly(self.descriptors)
        if arr.ndim != 2:
            raise ValueError(f"descriptors must be 2-D (M x C), got shape {arr.shape}")
        object.__setattr__(self, "descriptors", arr)

    @property
    def m(self) -> int:
        return self.descriptors.shape[0]

    @property
    def c(self) -> int:
        return self.descriptors.shape[1]


@dataclass(frozen=True)
class Episode:
    """One N-way K-shot task: labeled support sets plus query sets to classify.

    Ground-truth query labels are held in ``query_labels`` (aligned with
    ``query``) rather than on the query sets themselves, so the scoring path
    never sees them.
    """

    n_way: int
    k_shot: int
    n_query: int
    support: tuple[DescriptorSet, ...]
    query: tuple[DescriptorSet, ...]
    query_labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "query", tuple(self.query))
        object.__setattr__(self, "query_labels", tuple(int(x) for x in self.query_labels))


@dataclass(frozen=True)
class Prototype:
    """Mean descriptor vector representing one support class."""

    vector: np.ndarray
    class_index: int

    def __post_init__(self):
        vec = _owned_readonly(self.vector)
        if vec.ndim != 1:
            raise ValueError(f"prototype vector must be 1-D, got shape {vec.shape}")
        if not np.isfinite(vec).all():
            raise ValueError("prototype vector has non-finite entries")
        object.__setattr__(self, "vector", vec)


def cosine(u, v) -> float:
    """Cosine similarity between two vectors, clamped to [-1, 1].

    A zero vector on either side yields 0.0 (neutral similarity), which keeps
    downstream softmax weights well defined for degenerate descriptors.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ValueError(f"cosine expects two vectors of equal dimension, got shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    # zero rows stay zero, so their cosine against anything is 0
    return a / np.where(norms > 0.0, norms, 1.0)


def cosine_matrix(a, b) -> np.ndarray:
    """All-pairs cosine similarity between rows of ``a`` and rows of ``b``.

    Returns an array of shape ``(a.shape[0], b.shape[0])``, clamped to
    [-1, 1], with the same zero-vector convention as :func:`cosine`.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"cosine_matrix expects row matrices with equal width, got shapes {a.shape} and {b.shape}")
    return np.clip(_unit_rows(a) @ _unit_rows(b).T, -1.0, 1.0)


def _check_descriptor_set(ds: DescriptorSet, where: str, violations: list[str]) -> None:
    if ds.m < 1 or ds.c < 1:
        violations.append(f"{where}: empty descriptor matrix (shape {ds.descriptors.shape})")
        return
    if not np.isfinite(ds.descriptors).all():
        violations.append(f"{where}: non-finite entry in descriptors")


def validate_episode(episode: Episode) -> list[str]:
    """Check every episode invariant and return the list of violations.

    An empty list means the episode is well formed. All violations are
    collected rather than stopping at the first, so callers can report a
    complete picture.
    """
    violations: list[str] = []
    n, k, q = episode.n_way, episode.k_shot, episode.n_query
    if n < 2:
        violations.append(f"n_way must be >= 2, got {n}")
    if k < 1:
        violations.append(f"k_shot must be >= 1, got {k}")
    if q < 1:
        violations.append(f"n_query must be >= 1, got {q}")
    if len(episode.support) != n * k:
        violations.append(f"support must hold n_way*k_shot={n * k} sets, got {len(episode.support)}")
    if len(episode.query) != n * q:
        violations.append(f"query must hold n_way*n_query={n * q} sets, got {len(episode.query)}")
    if len(episode.query_labels) != len(episode.query):
        violations.append(
            f"query_labels length {len(episode.query_labels)} does not match query count {len(episode.query)}"
        )

    for i, ds in enumerate(episode.support):
        _check_descriptor_set(ds, f"support[{i}] (id={ds.sample_id!r})", violations)
    for i, ds in enumerate(episode.query):
        _check_descriptor_set(ds, f"query[{i}] (id={ds.sample_id!r})", violations)

    shapes = {ds.descriptors.shape for ds in episode.support + episode.query}
    if len(shapes) > 1:
        violations.append(f"all descriptor sets must share one M x C shape, got {sorted(shapes)}")

    support_counts = dict.fromkeys(range(n), 0)
    for i, ds in enumerate(episode.support):
        if ds.label is None:
            violations.append(f"support[{i}] (id={ds.sample_id!r}): missing label")
        elif not 0 <= ds.label < n:
            violations.append(f"support[{i}] (id={ds.sample_id!r}): label {ds.label} outside [0, {n})")
        else:
            support_counts[ds.label] += 1
    bad_support = {c: m for c, m in support_counts.items() if m != k}
    if bad_support:
        violations.append(f"class coverage: support must hold exactly k_shot={k} sets per class, got {bad_support}")

    for i, ds in enumerate(episode.query):
        if ds.label is not None:
            violations.append(
                f"query[{i}] (id={ds.sample_id!r}): query sets must not carry labels "
                "(ground truth lives in Episode.query_labels)"
            )
    query_counts = dict.fromkeys(range(n), 0)
    for i, label in enumerate(episode.query_labels):
        if not 0 <= label < n:
            violations.append(f"query_labels[{i}]: label {label} outside [0, {n})")
        else:
            query_counts[label] += 1
    if len(episode.query_labels) == len(episode.query):
        bad_query = {c: m for c, m in query_counts.items() if m != q}
        if bad_query:
            violations.append(f"class coverage: query must hold exactly n_query={q} samples per class, got {bad_query}")

    return violations


def ensure_valid_episode(episode: Episode) -> Episode:
    """Return the episode unchanged, raising :class:`EpisodeValidationError` on any violation."""
    violations = validate_episode(episode)
    if violations:
        raise EpisodeValidationError(violations)
    return episode
