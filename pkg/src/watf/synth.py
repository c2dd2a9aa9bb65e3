"""Seeded synthetic episode generator.

Each image mixes "foreground" descriptors scattered around its class
direction with "background" descriptors drawn from motif directions shared
by every class in the episode. The ground-truth foreground/background split
is kept next to the episode for diagnostics only; the classification
pipeline never sees it.

Determinism contract: all randomness comes from the raw PCG64 bit stream.
Uniforms are the standard 53-bit construction (top 53 bits of a 64-bit word
times 2**-53), normal variates are Box-Muller pairs over those uniforms,
integer draws are floor(uniform * n), and shuffles are Fisher-Yates driven
by the same uniforms. Episode i of a benchmark uses the child stream
SeedSequence(seed, spawn_key=(i,)), so generation is order-stable and
parallelizes by episode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .descriptors import DescriptorSet, Episode

__all__ = [
    "GenerationError",
    "SynthSpec",
    "SynthEpisode",
    "SeededGenerator",
    "generate_episode",
    "generate_benchmark",
]

MAX_REJECTION_ATTEMPTS = 10_000
MIN_DIRECTION_COSINE_DISTANCE = 0.2


class GenerationError(RuntimeError):
    """Raised when direction placement cannot satisfy the separation constraint."""


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic benchmark family."""

    n_way: int
    k_shot: int
    n_query: int
    m_descriptors: int
    c_dim: int
    noise_fraction: float
    foreground_spread: float
    n_background_motifs: int
    seed: int

    def __post_init__(self):
        if self.n_way < 2:
            raise ValueError(f"n_way must be >= 2, got {self.n_way}")
        for name in ("k_shot", "n_query", "m_descriptors", "c_dim", "n_background_motifs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError(f"noise_fraction must be in [0, 1), got {self.noise_fraction}")
        if self.foreground_spread < 0.0:
            raise ValueError(f"foreground_spread must be >= 0, got {self.foreground_spread}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.background_count >= self.m_descriptors:
            raise ValueError("every image needs at least one foreground descriptor")

    @property
    def background_count(self) -> int:
        """Background descriptors per image: floor(noise_fraction * M)."""
        return int(math.floor(self.noise_fraction * self.m_descriptors))

    @property
    def foreground_count(self) -> int:
        return self.m_descriptors - self.background_count


@dataclass(frozen=True)
class SynthEpisode:
    """A generated episode plus its diagnostics-only background masks.

    Mask entries are True where the descriptor came from a background motif;
    the masks align with ``episode.support`` / ``episode.query`` order and
    with each sample's (shuffled) descriptor rows.
    """

    episode: Episode
    support_background: tuple[np.ndarray, ...]
    query_background: tuple[np.ndarray, ...]

    def __post_init__(self):
        for masks in (self.support_background, self.query_background):
            for mask in masks:
                mask.setflags(write=False)


class SeededGenerator:
    """Deterministic random source with explicitly pinned draw conventions.

    Backed by the named, platform-independent PCG64 bit generator; see the
    module docstring for the exact uniform / normal / integer / shuffle
    constructions. Streams are stable across runs for a fixed seed.
    """

    def __init__(self, seed: Union[int, np.random.SeedSequence]):
        if isinstance(seed, np.random.SeedSequence):
            entropy = seed
        else:
            entropy = np.random.SeedSequence(int(seed))
        self._bits = np.random.PCG64(entropy)

    def uniform(self, size: int = None):
        """53-bit uniforms in [0, 1): (raw_word >> 11) * 2**-53."""
        if size is None:
            return (self._bits.random_raw() >> 11) * 2.0**-53
        raw = self._bits.random_raw(size)
        return (raw >> np.uint64(11)) * 2.0**-53

    def standard_normal(self, size) -> np.ndarray:
        """Standard normal variates via Box-Muller over 53-bit uniforms."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        pairs = (count + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u1))  # ln(1 - u1), safe since u1 < 1
        theta = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:count]
        return z.reshape(shape)

    def integers(self, n: int, size: int = None):
        """Integer draws in [0, n) as floor(uniform * n)."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if size is None:
            return int(self.uniform() * n)
        return (self.uniform(size) * n).astype(np.intp)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n) driven by uniform draws."""
        idx = np.arange(n, dtype=np.intp)
        if n < 2:
            return idx
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[step] * (i + 1))
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def _separated_directions(gen: SeededGenerator, count: int, dim: int) -> np.ndarray:
    """Unit vectors with pairwise cosine distance >= 0.2, by rejection sampling."""
    directions: list[np.ndarray] = []
    attempts = 0
    while len(directions) < count:
        if attempts >= MAX_REJECTION_ATTEMPTS:
            raise GenerationError(
                f"could not place {count} directions with pairwise cosine distance "
                f">= {MIN_DIRECTION_COSINE_DISTANCE} in {dim} dimensions "
                f"within {MAX_REJECTION_ATTEMPTS} attempts"
            )
        attempts += 1
        v = gen.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        u = v / norm
        if all(1.0 - float(u @ d) >= MIN_DIRECTION_COSINE_DISTANCE for d in directions):
            directions.append(u)
    return np.stack(directions)


def _build_sample(
    gen: SeededGenerator,
    spec: SynthSpec,
    class_direction: np.ndarray,
    motifs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    n_fg, n_bg = spec.foreground_count, spec.background_count
    eps = spec.foreground_spread
    fg = class_direction + eps * gen.standard_normal((n_fg, spec.c_dim))
    if n_bg:
        choice = gen.integers(spec.n_background_motifs, size=n_bg)
        bg = motifs[choice] + eps * gen.standard_normal((n_bg, spec.c_dim))
        block = np.concatenate([fg, bg], axis=0)
    else:
        block = fg
    mask = np.concatenate([np.zeros(n_fg, dtype=bool), np.ones(n_bg, dtype=bool)])
    perm = gen.permutation(spec.m_descriptors)
    return block[perm], mask[perm]


def generate_episode(spec: SynthSpec, episode_index: int = 0) -> SynthEpisode:
    """Generate one episode (with diagnostics masks) for a benchmark position.

    ``generate_episode(spec, i)`` is exactly the i-th element of
    ``generate_benchmark(spec, ...)``.
    """
    if episode_index < 0:
        raise ValueError(f"episode_index must be >= 0, got {episode_index}")
    gen = SeededGenerator(np.random.SeedSequence(spec.seed, spawn_key=(episode_index,)))
    directions = _separated_directions(gen, spec.n_way + spec.n_background_motifs, spec.c_dim)
    class_dirs = directions[: spec.n_way]
    motifs = directions[spec.n_way:]

    support: list[DescriptorSet] = []
    support_masks: list[np.ndarray] = []
    for c in range(spec.n_way):
        for s in range(spec.k_shot):
            block, mask = _build_sample(gen, spec, class_dirs[c], motifs)
            support.append(DescriptorSet(block, f"ep{episode_index:06d}/support/c{c}/s{s}", label=c))
            support_masks.append(mask)

    query: list[DescriptorSet] = []
    query_masks: list[np.ndarray] = []
    query_labels: list[int] = []
    for c in range(spec.n_way):
        for s in range(spec.n_query):
            block, mask = _build_sample(gen, spec, class_dirs[c], motifs)
            query.append(DescriptorSet(block, f"ep{episode_index:06d}/query/c{c}/q{s}"))
            query_masks.append(mask)
            query_labels.append(c)

    episode = Episode(
        n_way=spec.n_way,
        k_shot=spec.k_shot,
        n_query=spec.n_query,
        support=tuple(support),
        query=tuple(query),
        query_labels=tuple(query_labels),
    )
    return SynthEpisode(
        episode=episode,
        support_background=tuple(support_masks),
        query_background=tuple(query_masks),
    )


def generate_benchmark(spec: SynthSpec, n_episodes: int) -> Iterator[SynthEpisode]:
    """Yield ``n_episodes`` episodes with per-index child seeds; order-stable and lazy."""
    if n_episodes < 0:
        raise ValueError(f"n_episodes must be >= 0, got {n_episodes}")
    for index in range(n_episodes):
        yield generate_episode(spec, index)
