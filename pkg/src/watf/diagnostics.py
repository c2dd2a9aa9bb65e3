"""Diagnostics: weight histograms, cluster compactness, and pooled statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats
from sklearn.metrics import silhouette_score

from .classify import support_class_pools
from .descriptors import Episode, cosine_matrix
from .filtering import FilterResult, watf_pipeline
from .synth import SynthEpisode

__all__ = [
    "WeightHistogram",
    "CompactnessMetrics",
    "StatsSummary",
    "weight_histogram",
    "compactness_metrics",
    "foreground_background_weight_means",
    "collect_statistics",
]


@dataclass(frozen=True)
class WeightHistogram:
    """Equal-width histogram of an average-weight pool, annotated for normality checks."""

    bin_edges: np.ndarray
    counts: np.ndarray
    mu: float
    sigma: float
    skewness: float

    def __post_init__(self):
        for name, dtype in (("bin_edges", np.float64), ("counts", np.int64)):
            arr = np.asarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class CompactnessMetrics:
    silhouette: float
    intra_inter_ratio: float


def weight_histogram(pool, n_bins: int) -> WeightHistogram:
    """Bin a pool of average weights into ``n_bins`` equal-width bins over [min, max].

    Counts sum to the pool size. ``mu``/``sigma`` are the pooled mean and
    population standard deviation; ``skewness`` is the sample skewness
    (0.0 for a constant pool).
    """
    pool = np.asarray(pool, dtype=np.float64).ravel()
    if pool.size == 0:
        raise ValueError("weight_histogram needs a non-empty pool")
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    counts, edges = np.histogram(pool, bins=n_bins)
    sigma = float(pool.std())
    skewness = float(scipy_stats.skew(pool)) if sigma > 0.0 else 0.0
    return WeightHistogram(
        bin_edges=edges,
        counts=counts,
        mu=float(pool.mean()),
        sigma=sigma,
        skewness=skewness,
    )


def _cosine_distances(rows: np.ndarray) -> np.ndarray:
    dist = 1.0 - cosine_matrix(rows, rows)
    np.fill_diagonal(dist, 0.0)
    return np.clip(dist, 0.0, 2.0)


def compactness_metrics(pools: Sequence[np.ndarray]) -> CompactnessMetrics:
    """Numeric cluster-quality proxies for per-class descriptor pools.

    Silhouette uses cosine distance (1 - cosine); singleton pools contribute
    0 for their point, and a batch of all-singleton pools scores 0 overall.
    ``intra_inter_ratio`` is the mean within-class pairwise distance over the
    mean cross-class pairwise distance (0.0 when there are no within-class
    pairs or both means vanish).
    """
    if len(pools) < 2:
        raise ValueError("compactness needs at least two class pools")
    for index, pool in enumerate(pools):
        if pool.shape[0] < 1:
            raise ValueError(f"class pool {index} is empty")
    rows = np.concatenate(pools, axis=0)
    labels = np.concatenate([np.full(pool.shape[0], index) for index, pool in enumerate(pools)])
    dist = _cosine_distances(rows)

    same = labels[:, None] == labels[None, :]
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)
    intra_values = dist[same & upper]
    inter_values = dist[~same & upper]
    intra = float(intra_values.mean()) if intra_values.size else 0.0
    inter = float(inter_values.mean()) if inter_values.size else 0.0
    if inter == 0.0:
        ratio = 0.0 if intra == 0.0 else float("inf")
    else:
        ratio = intra / inter

    if len(rows) == len(pools):
        # every pool is a singleton: by convention each point scores 0
        silhouette = 0.0
    else:
        silhouette = float(silhouette_score(dist, labels, metric="precomputed"))
    return CompactnessMetrics(silhouette=silhouette, intra_inter_ratio=ratio)


def foreground_background_weight_means(
    synth_episode: SynthEpisode,
    support_w_bar: np.ndarray,
) -> tuple[float, float]:
    """Mean support-stage average weight of foreground vs background descriptors.

    Uses the generator's ground-truth masks; returns (foreground_mean,
    background_mean), with NaN for a side that has no descriptors.
    """
    masks = np.stack(synth_episode.support_background)
    w_bar = np.asarray(support_w_bar, dtype=np.float64)
    if masks.shape != w_bar.shape:
        raise ValueError(f"masks of shape {masks.shape} do not align with w_bar of shape {w_bar.shape}")
    fg = w_bar[~masks]
    bg = w_bar[masks]
    fg_mean = float(fg.mean()) if fg.size else float("nan")
    bg_mean = float(bg.mean()) if bg.size else float("nan")
    return fg_mean, bg_mean


@dataclass(frozen=True)
class StatsSummary:
    """Aggregate diagnostics over an episode stream (support stage of the pipeline)."""

    n_episodes: int
    histogram: WeightHistogram
    support_retention: float
    query_retention: float
    fallback_rate: float
    compactness_before: CompactnessMetrics
    compactness_after: CompactnessMetrics


def _fallback_count(result: FilterResult) -> int:
    return len(result.fallback_samples)


def collect_statistics(episodes: Iterable[Episode], n_bins: int, pooling_mode: str = "per-stage") -> StatsSummary:
    """Run the filtering pipeline over a stream and pool its diagnostics.

    Pools support-stage average weights into one histogram, averages the
    per-episode retention fractions and compactness metrics (support pools
    before vs after filtering), and reports the overall fallback rate.
    """
    weight_pool: list[np.ndarray] = []
    support_retention: list[float] = []
    query_retention: list[float] = []
    sil_before: list[float] = []
    sil_after: list[float] = []
    ratio_before: list[float] = []
    ratio_after: list[float] = []
    fallbacks = 0
    samples = 0
    count = 0
    for episode in episodes:
        filtered = watf_pipeline(episode, pooling_mode)
        weight_pool.append(filtered.support_weights.w_bar.ravel())
        support_retention.append(filtered.support_result.retention_fraction)
        query_retention.append(filtered.query_result.retention_fraction)
        fallbacks += _fallback_count(filtered.support_result) + _fallback_count(filtered.query_result)
        samples += len(episode.support) + len(episode.query)
        before = compactness_metrics(support_class_pools(episode))
        after = compactness_metrics(support_class_pools(episode, filtered.support_result))
        sil_before.append(before.silhouette)
        sil_after.append(after.silhouette)
        ratio_before.append(before.intra_inter_ratio)
        ratio_after.append(after.intra_inter_ratio)
        count += 1
    if count == 0:
        raise ValueError("collect_statistics needs at least one episode")
    return StatsSummary(
        n_episodes=count,
        histogram=weight_histogram(np.concatenate(weight_pool), n_bins),
        support_retention=float(np.mean(support_retention)),
        query_retention=float(np.mean(query_retention)),
        fallback_rate=fallbacks / samples,
        compactness_before=CompactnessMetrics(float(np.mean(sil_before)), float(np.mean(ratio_before))),
        compactness_after=CompactnessMetrics(float(np.mean(sil_after)), float(np.mean(ratio_after))),
    )
