"""Episodic evaluation: run filtering + classification over episode streams.

Episodes are independent work units; ``evaluate`` can fan them out to a
thread pool but always merges results in stream order, so a report is
byte-identical regardless of worker count. The JSON form of a report
contains only deterministic fields (wall time is reported in the human
format but kept out of the JSON).
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .classify import ClassScore, classify, support_class_pools
from .descriptors import Episode, ensure_valid_episode
from .filtering import POOLING_MODES, FilteredEpisode, watf_pipeline
from .packs import episode_content_hash

__all__ = [
    "RunConfig",
    "EpisodeOutcome",
    "EvaluationReport",
    "EvaluationError",
    "run_episode",
    "evaluate",
    "k_sweep",
]

CI95_Z = 1.96


class EvaluationError(RuntimeError):
    """An episode failed during evaluation; carries which one and why."""

    def __init__(self, episode_index: int, message: str):
        self.episode_index = episode_index
        super().__init__(f"episode {episode_index}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Evaluation settings; defaults mirror the standard 600-episode, k=3 protocol."""

    k_neighbors: int = 3
    filtering_enabled: bool = True
    n_episodes: int = 600
    seed: int = 0
    pooling_mode: str = "per-stage"

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.n_episodes < 1:
            raise ValueError(f"n_episodes must be >= 1, got {self.n_episodes}")
        if self.pooling_mode not in POOLING_MODES:
            raise ValueError(f"pooling_mode must be one of {POOLING_MODES}, got {self.pooling_mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class EpisodeOutcome:
    """Per-episode result: accuracy, the filter results (when enabled), per-query scores."""

    accuracy: float
    filtered: Optional[FilteredEpisode]
    class_scores: tuple[ClassScore, ...]


def run_episode(episode: Episode, config: RunConfig) -> EpisodeOutcome:
    """Classify every query of one episode, with or without descriptor filtering.

    With filtering disabled each query is scored with all of its descriptors
    against the raw per-class support pools, which is the unfiltered
    baseline arm of the ablation.
    """
    ensure_valid_episode(episode)
    if config.filtering_enabled:
        filtered = watf_pipeline(episode, config.pooling_mode)
        pools = support_class_pools(episode, filtered.support_result)
        query_rows = [
            ds.descriptors[filtered.query_result.retained[j]]
            for j, ds in enumerate(episode.query)
        ]
    else:
        filtered = None
        pools = support_class_pools(episode)
        query_rows = [ds.descriptors for ds in episode.query]

    scores = tuple(classify(rows, pools, config.k_neighbors) for rows in query_rows)
    correct = sum(1 for cs, label in zip(scores, episode.query_labels) if cs.predicted == label)
    return EpisodeOutcome(
        accuracy=correct / len(episode.query),
        filtered=filtered,
        class_scores=scores,
    )


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregated evaluation results plus the resolved config for reproducibility."""

    config: RunConfig
    n_episodes: int
    per_episode_accuracy: tuple[float, ...]
    mean_accuracy: float
    ci95_half_width: float
    support_retention: Optional[float]
    query_retention: Optional[float]
    fallback_rate: Optional[float]
    episodes_hash: str
    wall_time_seconds: float

    def as_json_dict(self) -> dict:
        """Deterministic report content; excludes wall time (volatile)."""
        return {
            "config": self.config.as_dict(),
            "n_episodes": self.n_episodes,
            "per_episode_accuracy": list(self.per_episode_accuracy),
            "mean_accuracy": self.mean_accuracy,
            "ci95_half_width": self.ci95_half_width,
            "support_retention": self.support_retention,
            "query_retention": self.query_retention,
            "fallback_rate": self.fallback_rate,
            "episodes_hash": self.episodes_hash,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_json_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        def fmt(value, digits=4):
            return "n/a" if value is None else f"{value:.{digits}f}"

        lines = [
            f"{'episodes':<20}{self.n_episodes}",
            f"{'mean accuracy':<20}{self.mean_accuracy:.4f} +/- {self.ci95_half_width:.4f} (95% CI)",
            f"{'support retention':<20}{fmt(self.support_retention)}",
            f"{'query retention':<20}{fmt(self.query_retention)}",
            f"{'fallback rate':<20}{fmt(self.fallback_rate, 6)}",
            f"{'episodes hash':<20}{self.episodes_hash}",
            f"{'wall time [s]':<20}{self.wall_time_seconds:.3f}",
            "config",
        ]
        for key, value in sorted(self.config.as_dict().items()):
            lines.append(f"  {key:<18}{value}")
        return "\n".join(lines) + "\n"


def _ci95_half_width(accuracies: Sequence[float]) -> float:
    if len(accuracies) < 2:
        # single-episode runs have no sample standard deviation
        return 0.0
    return CI95_Z * float(np.std(accuracies, ddof=1)) / float(np.sqrt(len(accuracies)))


def evaluate(episodes: Iterable[Episode], config: RunConfig, workers: int = 1) -> EvaluationReport:
    """Evaluate exactly ``config.n_episodes`` episodes from a stream.

    Episodes are hashed and dispatched in stream order and results merged in
    that same order; a failed episode aborts the run with its index and
    cause. ``workers`` only controls concurrency, never results.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    start = time.perf_counter()
    iterator = iter(episodes)
    hasher = hashlib.sha256()

    accuracies: list[float] = []
    support_retention: list[float] = []
    query_retention: list[float] = []
    fallback_count = 0
    filtered_sample_count = 0

    def consume(index: int, future) -> None:
        nonlocal fallback_count, filtered_sample_count
        try:
            outcome = future.result()
        except Exception as exc:
            raise EvaluationError(index, str(exc)) from exc
        accuracies.append(outcome.accuracy)
        if outcome.filtered is not None:
            support_result = outcome.filtered.support_result
            query_result = outcome.filtered.query_result
            support_retention.append(support_result.retention_fraction)
            query_retention.append(query_result.retention_fraction)
            fallback_count += len(support_result.fallback_samples) + len(query_result.fallback_samples)
            filtered_sample_count += len(support_result.retained) + len(query_result.retained)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for index in range(config.n_episodes):
            try:
                episode = next(iterator)
            except StopIteration:
                raise EvaluationError(index, f"episode stream exhausted after {index} episodes")
            try:
                hasher.update(bytes.fromhex(episode_content_hash(episode)))
            except Exception as exc:
                raise EvaluationError(index, str(exc)) from exc
            pending.append((index, pool.submit(run_episode, episode, config)))
            # keep at most ~2x workers episodes in flight to bound memory
            while len(pending) > 2 * workers:
                consume(*pending.popleft())
        while pending:
            consume(*pending.popleft())

    return EvaluationReport(
        config=config,
        n_episodes=config.n_episodes,
        per_episode_accuracy=tuple(accuracies),
        mean_accuracy=float(np.mean(accuracies)),
        ci95_half_width=_ci95_half_width(accuracies),
        support_retention=float(np.mean(support_retention)) if support_retention else None,
        query_retention=float(np.mean(query_retention)) if query_retention else None,
        fallback_rate=fallback_count / filtered_sample_count if filtered_sample_count else None,
        episodes_hash=hasher.hexdigest(),
        wall_time_seconds=time.perf_counter() - start,
    )


def k_sweep(
    episode_stream_factory: Callable[[], Iterable[Episode]],
    config: RunConfig,
    ks: Sequence[int],
    workers: int = 1,
) -> dict[int, EvaluationReport]:
    """Run one evaluation per k over identical episode streams.

    The factory is called once per k and must reproduce the same episodes;
    the per-run content hashes are cross-checked to prove it.
    """
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be non-empty")
    if len(set(ks)) != len(ks):
        raise ValueError(f"duplicate k values rejected: {ks}")
    if any(k < 1 for k in ks):
        raise ValueError(f"all k values must be >= 1, got {ks}")
    reports: dict[int, EvaluationReport] = {}
    for k in ks:
        reports[k] = evaluate(episode_stream_factory(), dataclasses.replace(config, k_neighbors=k), workers=workers)
    hashes = {report.episodes_hash for report in reports.values()}
    if len(hashes) != 1:
        raise RuntimeError(f"episode stream changed between sweep runs (hashes {sorted(hashes)})")
    return reports
