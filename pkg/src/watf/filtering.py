"""Weighted adaptive threshold filtering of local descriptors.

The filtering core: class prototypes, per-descriptor softmax-cosine weights,
class-averaged weights, pooled mean/std statistics, the mu - sigma threshold,
and the two-stage support-then-query pipeline. Everything here is a pure
function over immutable inputs; episodes can be processed in parallel, and
within one episode only stage 2 depends on stage 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .descriptors import DescriptorSet, Episode, Prototype, cosine_matrix

__all__ = [
    "WeightMatrix",
    "FilterResult",
    "FilteredEpisode",
    "POOLING_MODES",
    "compute_prototypes",
    "compute_weight_matrix",
    "aggregate_weights",
    "pooled_stats",
    "adaptive_threshold",
    "filter_descriptors",
    "watf_pipeline",
]

POOLING_MODES = ("per-stage", "global")


@dataclass(frozen=True)
class WeightMatrix:
    """Per-descriptor importance weights for a batch of L samples.

    ``w`` has shape [L, N, M]: for each sample and class, a softmax over the
    sample's M descriptors of the cosine similarity to that class prototype,
    so every ``w[j, n, :]`` sums to 1. ``w_bar`` has shape [L, M] and averages
    ``w`` over the class axis; its rows also sum to 1.
    """

    w: np.ndarray
    w_bar: np.ndarray

    def __post_init__(self):
        for name in ("w", "w_bar"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class FilterResult:
    """Outcome of thresholding one batch of samples.

    ``retained`` holds one sorted index array per sample. Samples where the
    strict threshold would have dropped everything fall back to retaining all
    M descriptors and are listed in ``fallback_samples``. ``mu`` and ``sigma``
    are the pooled statistics behind ``tau`` when the caller supplied them
    (``tau == mu - sigma`` exactly in that case); ``retention_fraction``
    counts post-fallback retained descriptors over L*M.
    """

    retained: tuple[np.ndarray, ...]
    tau: float
    mu: Optional[float]
    sigma: Optional[float]
    retention_fraction: float
    fallback_samples: tuple[str, ...]

    def __post_init__(self):
        frozen = []
        for idx in self.retained:
            arr = np.asarray(idx, dtype=np.intp)
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "retained", tuple(frozen))


@dataclass(frozen=True)
class FilteredEpisode:
    """Both stages of the pipeline applied to one episode."""

    initial_prototypes: tuple[Prototype, ...]
    updated_prototypes: tuple[Prototype, ...]
    support_weights: WeightMatrix
    query_weights: WeightMatrix
    support_result: FilterResult
    query_result: FilterResult
    pooling_mode: str


def _stacked_descriptors(samples: Sequence[DescriptorSet]) -> np.ndarray:
    if not samples:
        raise ValueError("need at least one sample")
    try:
        return np.stack([s.descriptors for s in samples])
    except ValueError as exc:
        raise ValueError("all samples must share one M x C shape") from exc


def _prototype_rows(prototypes: Sequence[Prototype]) -> np.ndarray:
    indices = sorted(p.class_index for p in prototypes)
    if indices != list(range(len(prototypes))):
        raise ValueError(f"prototypes must cover classes 0..N-1 exactly once, got indices {indices}")
    ordered = sorted(prototypes, key=lambda p: p.class_index)
    return np.stack([p.vector for p in ordered])


def compute_prototypes(
    support: Sequence[DescriptorSet],
    retained: Optional[Sequence[np.ndarray]] = None,
) -> tuple[Prototype, ...]:
    """Average each class's (optionally restricted) support descriptors into one prototype.

    Parameters
    ----------
    support : labeled descriptor sets
        Every set must carry a class label; every class present gets one
        prototype, the arithmetic mean over all its descriptors pooled across
        shots.
    retained : per-sample index arrays, optional
        Aligned with ``support``; restricts each set to the given descriptor
        rows. Omitted means all M rows contribute.
    """
    if retained is not None and len(retained) != len(support):
        raise ValueError(f"retained has {len(retained)} entries for {len(support)} samples")
    by_class: dict[int, list[np.ndarray]] = {}
    for j, ds in enumerate(support):
        if ds.label is None:
            raise ValueError(f"support sample {ds.sample_id!r} has no label")
        rows = ds.descriptors if retained is None else ds.descriptors[np.asarray(retained[j], dtype=np.intp)]
        by_class.setdefault(ds.label, []).append(rows)
    prototypes = []
    for class_index in sorted(by_class):
        pooled = np.concatenate(by_class[class_index], axis=0)
        if pooled.shape[0] == 0:
            # the fallback in filter_descriptors guarantees non-empty retention
            raise RuntimeError(f"internal error: class {class_index} has no descriptors after restriction")
        prototypes.append(Prototype(vector=pooled.mean(axis=0), class_index=class_index))
    return tuple(prototypes)


def compute_weight_matrix(samples: Sequence[DescriptorSet], prototypes: Sequence[Prototype]) -> WeightMatrix:
    """Softmax-normalized cosine weights of every descriptor against every prototype.

    For sample j, class n and descriptor i:
    ``w[j, n, i] = exp(cos(x_ji, c_n)) / sum_i' exp(cos(x_ji', c_n))``.
    The exponent is the raw cosine; no temperature is applied.
    """
    stacked = _stacked_descriptors(samples)
    protos = _prototype_rows(prototypes)
    L, M, C = stacked.shape
    N = protos.shape[0]
    if protos.shape[1] != C:
        raise ValueError(f"prototype dimension {protos.shape[1]} does not match descriptor dimension {C}")
    cos = cosine_matrix(stacked.reshape(L * M, C), protos)  # [L*M, N]
    cos = cos.reshape(L, M, N).transpose(0, 2, 1)  # [L, N, M]
    expw = np.exp(cos)
    w = expw / expw.sum(axis=2, keepdims=True)
    if not np.isfinite(w).all():
        raise ArithmeticError("weight computation produced non-finite values")
    return WeightMatrix(w=w, w_bar=aggregate_weights(w))


def aggregate_weights(w: np.ndarray) -> np.ndarray:
    """Average an [L, N, M] weight tensor over the class axis into [L, M] rows."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 3:
        raise ValueError(f"expected weights of shape [L, N, M], got {w.shape}")
    return w.mean(axis=1)


def pooled_stats(w_bar: np.ndarray) -> tuple[float, float]:
    """Mean and population standard deviation of a pool of average weights."""
    w_bar = np.asarray(w_bar, dtype=np.float64)
    if w_bar.size == 0:
        raise ValueError("pooled_stats needs a non-empty pool")
    return float(w_bar.mean()), float(w_bar.std())


def adaptive_threshold(mu: float, sigma: float) -> float:
    """Threshold at one standard deviation below the pooled mean."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return mu - sigma


def filter_descriptors(
    samples: Sequence[DescriptorSet],
    w_bar: np.ndarray,
    tau: float,
    mu: Optional[float] = None,
    sigma: Optional[float] = None,
) -> FilterResult:
    """Retain, per sample, the descriptor indices whose average weight strictly exceeds ``tau``.

    Equality drops the descriptor. A sample that would end up empty (e.g.
    uniform weights make sigma 0 and tau equal every weight) falls back to
    retaining all of its descriptors and is recorded in ``fallback_samples``.
    """
    w_bar = np.asarray(w_bar, dtype=np.float64)
    if w_bar.ndim != 2:
        raise ValueError(f"expected w_bar of shape [L, M], got {w_bar.shape}")
    if len(samples) != w_bar.shape[0]:
        raise ValueError(f"{len(samples)} samples do not align with w_bar rows {w_bar.shape[0]}")
    L, M = w_bar.shape
    retained: list[np.ndarray] = []
    fallback: list[str] = []
    kept = 0
    for j in range(L):
        idx = np.flatnonzero(w_bar[j] > tau)
        if idx.size == 0:
            idx = np.arange(M, dtype=np.intp)
            fallback.append(samples[j].sample_id)
        retained.append(idx.astype(np.intp))
        kept += idx.size
    return FilterResult(
        retained=tuple(retained),
        tau=float(tau),
        mu=mu,
        sigma=sigma,
        retention_fraction=kept / (L * M),
        fallback_samples=tuple(fallback),
    )


def _filter_stage(samples: Sequence[DescriptorSet], w_bar: np.ndarray) -> FilterResult:
    mu, sigma = pooled_stats(w_bar)
    tau = adaptive_threshold(mu, sigma)
    return filter_descriptors(samples, w_bar, tau, mu=mu, sigma=sigma)


def watf_pipeline(episode: Episode, pooling_mode: str = "per-stage") -> FilteredEpisode:
    """Run both filtering stages over one episode.

    Stage 1 builds prototypes from all raw support descriptors, weights the
    support samples against them, pools mean/std over the N*K support samples
    and filters. Stage 2 rebuilds prototypes from the retained support
    descriptors only, weights the queries against the updated prototypes,
    pools over the N*Q query samples independently, and filters.

    ``pooling_mode="global"`` is a single-pass experimental variant: support
    and query weights are both taken against the initial prototypes and one
    threshold is computed from their combined pool; the updated prototypes
    are still recomputed from the retained support descriptors.
    """
    if pooling_mode not in POOLING_MODES:
        raise ValueError(f"pooling_mode must be one of {POOLING_MODES}, got {pooling_mode!r}")

    initial = compute_prototypes(episode.support)
    support_weights = compute_weight_matrix(episode.support, initial)

    if pooling_mode == "per-stage":
        support_result = _filter_stage(episode.support, support_weights.w_bar)
        updated = compute_prototypes(episode.support, support_result.retained)
        query_weights = compute_weight_matrix(episode.query, updated)
        query_result = _filter_stage(episode.query, query_weights.w_bar)
    else:
        query_weights = compute_weight_matrix(episode.query, initial)
        pool = np.concatenate([support_weights.w_bar.ravel(), query_weights.w_bar.ravel()])
        mu, sigma = pooled_stats(pool)
        tau = adaptive_threshold(mu, sigma)
        support_result = filter_descriptors(episode.support, support_weights.w_bar, tau, mu=mu, sigma=sigma)
        query_result = filter_descriptors(episode.query, query_weights.w_bar, tau, mu=mu, sigma=sigma)
        updated = compute_prototypes(episode.support, support_result.retained)

    return FilteredEpisode(
        initial_prototypes=initial,
        updated_prototypes=updated,
        support_weights=support_weights,
        query_weights=query_weights,
        support_result=support_result,
        query_result=query_result,
        pooling_mode=pooling_mode,
    )
