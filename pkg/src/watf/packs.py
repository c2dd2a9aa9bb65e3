"""Episode-pack files: a text manifest followed by a raw descriptor tensor.

Layout of a pack:

    WATFPACK\\n                 magic line
    <manifest length>\\n        decimal byte length of the manifest
    <manifest>                  canonical JSON (sorted keys, 2-space indent,
                                trailing newline)
    <payload>                   little-endian IEEE-754 floats, row-major
                                [n_samples, M, C]; support samples first
                                (class-major, shot-minor), then queries
                                (class-major)

Labels live in the manifest so the payload stays a pure tensor. Writing is
canonical: the same episode always produces byte-identical files, and any
provenance timestamp is excluded from the content hash.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .descriptors import DescriptorSet, Episode, ensure_valid_episode, validate_episode

__all__ = [
    "PACK_MAGIC",
    "FORMAT_VERSION",
    "PackError",
    "write_pack",
    "read_pack",
    "content_hash",
    "episode_content_hash",
]

PACK_MAGIC = b"WATFPACK\n"
FORMAT_VERSION = 1
PACK_SUFFIX = ".pack"

_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


class PackError(ValueError):
    """A pack could not be read or written; ``code`` names the failing layer.

    Codes: ``manifest`` (framing or malformed/incomplete manifest),
    ``version`` (unknown format_version), ``payload`` (length mismatch),
    ``invariants`` (episode-level violations).
    """

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def _canonical_order(episode: Episode) -> tuple[list[DescriptorSet], list[int], list[DescriptorSet], list[int]]:
    support, support_labels = [], []
    for c in range(episode.n_way):
        for ds in episode.support:
            if ds.label == c:
                support.append(ds)
                support_labels.append(c)
    query, query_labels = [], []
    for c in range(episode.n_way):
        for ds, label in zip(episode.query, episode.query_labels):
            if label == c:
                query.append(ds)
                query_labels.append(c)
    return support, support_labels, query, query_labels


def _build_manifest(episode: Episode, dtype: str, provenance: Optional[dict]) -> dict:
    support, support_labels, query, query_labels = _canonical_order(episode)
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_way": episode.n_way,
        "k_shot": episode.k_shot,
        "n_query": episode.n_query,
        "m_descriptors": episode.support[0].m,
        "c_dim": episode.support[0].c,
        "dtype": dtype,
        "sample_ids": [ds.sample_id for ds in support + query],
        "labels": support_labels + query_labels,
    }
    if provenance is not None:
        manifest["provenance"] = provenance
    return manifest


def _serialize_manifest(manifest: dict) -> bytes:
    return (json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _payload_bytes(episode: Episode, dtype: str) -> bytes:
    support, _, query, _ = _canonical_order(episode)
    stacked = np.stack([ds.descriptors for ds in support + query])
    return np.ascontiguousarray(stacked.astype(_DTYPES[dtype])).tobytes()


def _encode(episode: Episode, dtype: str, provenance: Optional[dict]) -> bytes:
    if dtype not in _DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {dtype!r}")
    violations = validate_episode(episode)
    if violations:
        raise PackError("invariants", "refusing to write invalid episode: " + "; ".join(violations))
    manifest_bytes = _serialize_manifest(_build_manifest(episode, dtype, provenance))
    header = PACK_MAGIC + f"{len(manifest_bytes)}\n".encode("ascii")
    return header + manifest_bytes + _payload_bytes(episode, dtype)


def write_pack(
    episodes: Union[Episode, Iterable[Episode]],
    destination: Union[str, os.PathLike],
    dtype: str = "float64",
    provenance: Optional[dict] = None,
) -> int:
    """Write one episode to a file, or a stream of episodes to a directory.

    Returns the total number of bytes written. Stream mode names files
    ``episode_000000.pack``, ``episode_000001.pack``, ... in stream order.
    """
    destination = Path(destination)
    if isinstance(episodes, Episode):
        blob = _encode(episodes, dtype, provenance)
        destination.write_bytes(blob)
        return len(blob)
    destination.mkdir(parents=True, exist_ok=True)
    total = 0
    for index, episode in enumerate(episodes):
        blob = _encode(episode, dtype, provenance)
        (destination / f"episode_{index:06d}{PACK_SUFFIX}").write_bytes(blob)
        total += len(blob)
    return total


def _split_pack(blob: bytes, source: str) -> tuple[dict, bytes]:
    if not blob.startswith(PACK_MAGIC):
        raise PackError("manifest", f"{source}: not a pack file (bad magic)")
    rest = blob[len(PACK_MAGIC):]
    newline = rest.find(b"\n")
    if newline < 0:
        raise PackError("manifest", f"{source}: truncated header")
    length_field = rest[:newline]
    if not length_field.isdigit():
        raise PackError("manifest", f"{source}: bad manifest length field {length_field!r}")
    manifest_len = int(length_field)
    body = rest[newline + 1:]
    if len(body) < manifest_len:
        raise PackError("manifest", f"{source}: manifest truncated")
    try:
        manifest = json.loads(body[:manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PackError("manifest", f"{source}: malformed manifest JSON ({exc})") from exc
    if not isinstance(manifest, dict):
        raise PackError("manifest", f"{source}: manifest must be a JSON object")
    return manifest, body[manifest_len:]


_REQUIRED_KEYS = ("format_version", "n_way", "k_shot", "n_query", "m_descriptors", "c_dim", "dtype", "sample_ids", "labels")


def _check_manifest(manifest: dict, source: str) -> None:
    missing = [key for key in _REQUIRED_KEYS if key not in manifest]
    if missing:
        raise PackError("manifest", f"{source}: manifest missing keys {missing}")
    if manifest["format_version"] != FORMAT_VERSION:
        raise PackError(
            "version",
            f"{source}: unsupported format_version {manifest['format_version']!r} (expected {FORMAT_VERSION})",
        )
    if manifest["dtype"] not in _DTYPES:
        raise PackError("manifest", f"{source}: unsupported dtype {manifest['dtype']!r}")
    for key in ("n_way", "k_shot", "n_query", "m_descriptors", "c_dim"):
        if not isinstance(manifest[key], int) or manifest[key] < 1:
            raise PackError("manifest", f"{source}: {key} must be a positive integer, got {manifest[key]!r}")


def read_pack(source: Union[str, os.PathLike]) -> Episode:
    """Read and validate one episode from a pack file."""
    source = Path(source)
    manifest, payload = _split_pack(source.read_bytes(), str(source))
    _check_manifest(manifest, str(source))

    n, k, q = manifest["n_way"], manifest["k_shot"], manifest["n_query"]
    m, c = manifest["m_descriptors"], manifest["c_dim"]
    n_samples = n * k + n * q
    sample_ids, labels = manifest["sample_ids"], manifest["labels"]
    if len(sample_ids) != n_samples or len(labels) != n_samples:
        raise PackError(
            "manifest",
            f"{source}: expected {n_samples} sample_ids and labels, got {len(sample_ids)} and {len(labels)}",
        )

    dtype = _DTYPES[manifest["dtype"]]
    expected = n_samples * m * c * dtype.itemsize
    if len(payload) != expected:
        raise PackError(
            "payload",
            f"{source}: payload length mismatch (expected {expected} bytes, found {len(payload)})",
        )
    tensor = np.frombuffer(payload, dtype=dtype).reshape(n_samples, m, c).astype(np.float64)

    canonical_support = [cls for cls in range(n) for _ in range(k)]
    canonical_query = [cls for cls in range(n) for _ in range(q)]
    if labels[: n * k] != canonical_support or labels[n * k:] != canonical_query:
        raise PackError("invariants", f"{source}: sample order is not canonical (class-major support, then class-major query)")

    support = tuple(
        DescriptorSet(tensor[i], sample_ids[i], label=labels[i])
        for i in range(n * k)
    )
    query = tuple(
        DescriptorSet(tensor[i], sample_ids[i])
        for i in range(n * k, n_samples)
    )
    episode = Episode(
        n_way=n,
        k_shot=k,
        n_query=q,
        support=support,
        query=query,
        query_labels=tuple(labels[n * k:]),
    )
    violations = validate_episode(episode)
    if violations:
        raise PackError("invariants", f"{source}: " + "; ".join(violations))
    return episode


def _hashed_region(manifest: dict, payload: bytes) -> bytes:
    manifest = dict(manifest)
    provenance = manifest.get("provenance")
    if isinstance(provenance, dict) and "timestamp" in provenance:
        provenance = {key: value for key, value in provenance.items() if key != "timestamp"}
        manifest["provenance"] = provenance
    return _serialize_manifest(manifest) + payload


def content_hash(source: Union[str, os.PathLike]) -> str:
    """SHA-256 over the canonical manifest (minus any provenance timestamp) and payload."""
    source = Path(source)
    manifest, payload = _split_pack(source.read_bytes(), str(source))
    return hashlib.sha256(_hashed_region(manifest, payload)).hexdigest()


def episode_content_hash(episode: Episode) -> str:
    """Content hash of an in-memory episode.

    Equals :func:`content_hash` of that episode written as a float64 pack
    without provenance, so in-memory streams and pack files hash alike.
    """
    ensure_valid_episode(episode)
    manifest = _build_manifest(episode, "float64", None)
    return hashlib.sha256(_hashed_region(manifest, _payload_bytes(episode, "float64"))).hexdigest()
