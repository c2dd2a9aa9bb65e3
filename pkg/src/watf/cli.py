"""Command-line interface: eval, synth, stats, sweep-k, and validate.

Exit codes: 0 success, 2 validation failure (bad episodes or packs),
3 I/O failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import glob
import json
import sys
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .descriptors import Episode, EpisodeValidationError, validate_episode
from .diagnostics import collect_statistics
from .harness import EvaluationError, RunConfig, evaluate, k_sweep
from .packs import PACK_SUFFIX, PackError, read_pack, write_pack
from .synth import GenerationError, SynthSpec, generate_benchmark

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_CONFIG = 4


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default; flag problems are config errors here
    def error(self, message):
        raise _ConfigError(message)


def _resolve_packs(spec: str) -> list[Path]:
    if any(ch in spec for ch in "*?["):
        paths = sorted(Path(p) for p in glob.glob(spec))
    else:
        path = Path(spec)
        if path.is_dir():
            paths = sorted(path.glob(f"*{PACK_SUFFIX}"))
        else:
            paths = [path]
    if not paths:
        raise FileNotFoundError(f"no packs matched {spec!r}")
    return paths


def _pack_stream(paths: Iterable[Path]) -> Iterator[Episode]:
    for path in paths:
        yield read_pack(path)


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_eval(args) -> int:
    config = RunConfig(
        k_neighbors=args.k,
        filtering_enabled=not args.no_filter,
        n_episodes=args.episodes,
        seed=args.seed,
        pooling_mode=args.pooling,
    )
    paths = _resolve_packs(args.packs)[: args.episodes]
    report = evaluate(_pack_stream(paths), config, workers=args.workers)
    _write_or_print(report.to_json() if args.report == "json" else report.to_text(), args.out)
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_way=args.n_way,
        k_shot=args.k_shot,
        n_query=args.n_query,
        m_descriptors=args.m,
        c_dim=args.c,
        noise_fraction=args.noise,
        foreground_spread=args.eps,
        n_background_motifs=args.motifs,
        seed=args.seed,
    )
    provenance = {"source": "synth", "spec": dataclasses.asdict(spec)}
    episodes = (synth.episode for synth in generate_benchmark(spec, args.episodes))
    written = write_pack(episodes, args.out, dtype=args.dtype, provenance=provenance)
    sys.stdout.write(f"wrote {args.episodes} packs ({written} bytes) to {args.out}\n")
    return EXIT_OK


def _cmd_stats(args) -> int:
    paths = _resolve_packs(args.packs)
    summary = collect_statistics(_pack_stream(paths), args.histogram_bins, pooling_mode=args.pooling)
    hist = summary.histogram
    rows = [("record", "key", "bin_left", "bin_right", "count", "value")]
    for i in range(len(hist.counts)):
        rows.append(("histogram_bin", str(i), repr(float(hist.bin_edges[i])), repr(float(hist.bin_edges[i + 1])), str(int(hist.counts[i])), ""))
    metrics = {
        "n_episodes": summary.n_episodes,
        "weight_mu": hist.mu,
        "weight_sigma": hist.sigma,
        "weight_skewness": hist.skewness,
        "support_retention": summary.support_retention,
        "query_retention": summary.query_retention,
        "fallback_rate": summary.fallback_rate,
        "silhouette_before": summary.compactness_before.silhouette,
        "silhouette_after": summary.compactness_after.silhouette,
        "intra_inter_before": summary.compactness_before.intra_inter_ratio,
        "intra_inter_after": summary.compactness_after.intra_inter_ratio,
        "histogram_bins": args.histogram_bins,
        "pooling_mode": args.pooling,
    }
    for key, value in metrics.items():
        rows.append(("metric", key, "", "", "", repr(value) if isinstance(value, float) else str(value)))
    with open(args.out, "w", newline="") as handle:
        csv.writer(handle).writerows(rows)
    sys.stdout.write(
        f"{summary.n_episodes} episodes: support retention {summary.support_retention:.4f}, "
        f"query retention {summary.query_retention:.4f}, "
        f"silhouette {summary.compactness_before.silhouette:.4f} -> {summary.compactness_after.silhouette:.4f}\n"
    )
    return EXIT_OK


def _parse_ks(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise _ConfigError(f"--ks must be a comma-separated list of integers, got {text!r}") from exc


def _cmd_sweep_k(args) -> int:
    ks = _parse_ks(args.ks)
    config = RunConfig(
        k_neighbors=ks[0] if ks else 1,
        filtering_enabled=not args.no_filter,
        n_episodes=args.episodes,
        seed=args.seed,
        pooling_mode=args.pooling,
    )
    paths = _resolve_packs(args.packs)[: args.episodes]
    reports = k_sweep(lambda: _pack_stream(paths), config, ks, workers=args.workers)
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["k", "n_episodes", "mean_accuracy", "ci95_half_width", "support_retention",
             "query_retention", "fallback_rate", "seed", "pooling_mode", "episodes_hash"]
        )
        for k, report in reports.items():
            writer.writerow([
                k,
                report.n_episodes,
                repr(report.mean_accuracy),
                repr(report.ci95_half_width),
                "" if report.support_retention is None else repr(report.support_retention),
                "" if report.query_retention is None else repr(report.query_retention),
                "" if report.fallback_rate is None else repr(report.fallback_rate),
                report.config.seed,
                report.config.pooling_mode,
                report.episodes_hash,
            ])
    for k, report in reports.items():
        sys.stdout.write(f"k={k}: {report.mean_accuracy:.4f} +/- {report.ci95_half_width:.4f}\n")
    return EXIT_OK


def _cmd_validate(args) -> int:
    episode = read_pack(args.pack)
    violations = validate_episode(episode)
    if violations:
        for violation in violations:
            sys.stderr.write(f"{args.pack}: {violation}\n")
        return EXIT_VALIDATION
    sys.stdout.write(
        f"OK {args.pack}: {episode.n_way}-way {episode.k_shot}-shot, "
        f"{episode.n_query} queries/class, M={episode.support[0].m}, C={episode.support[0].c}\n"
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="watf", description="Weighted adaptive threshold filtering over descriptor episode packs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_eval = sub.add_parser("eval", help="evaluate episode packs")
    p_eval.add_argument("--packs", required=True, help="pack file, directory, or glob")
    p_eval.add_argument("--k", type=int, default=3)
    p_eval.add_argument("--episodes", type=int, default=600)
    p_eval.add_argument("--no-filter", action="store_true", help="classify over raw descriptors (ablation arm)")
    p_eval.add_argument("--pooling", choices=["per-stage", "global"], default="per-stage")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--report", choices=["json", "text"], default="text")
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.set_defaults(func=_cmd_eval)

    p_synth = sub.add_parser("synth", help="generate synthetic episode packs")
    p_synth.add_argument("--n-way", type=int, default=5)
    p_synth.add_argument("--k-shot", type=int, default=1)
    p_synth.add_argument("--n-query", type=int, default=15)
    p_synth.add_argument("--m", type=int, default=441, help="descriptors per image")
    p_synth.add_argument("--c", type=int, default=64, help="descriptor dimension")
    p_synth.add_argument("--noise", type=float, default=0.4, help="background fraction per image")
    p_synth.add_argument("--eps", type=float, default=0.1, help="isotropic perturbation scale")
    p_synth.add_argument("--motifs", type=int, default=3, help="shared background motifs")
    p_synth.add_argument("--episodes", type=int, default=600)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--dtype", choices=["float32", "float64"], default="float64")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(func=_cmd_synth)

    p_stats = sub.add_parser("stats", help="weight histogram, retention, and compactness over packs")
    p_stats.add_argument("--packs", required=True)
    p_stats.add_argument("--histogram-bins", type=int, default=50)
    p_stats.add_argument("--pooling", choices=["per-stage", "global"], default="per-stage")
    p_stats.add_argument("--out", required=True, help="output CSV")
    p_stats.set_defaults(func=_cmd_stats)

    p_sweep = sub.add_parser("sweep-k", help="evaluate one shared stream for several k values")
    p_sweep.add_argument("--packs", required=True)
    p_sweep.add_argument("--ks", default="1,3,5,7")
    p_sweep.add_argument("--episodes", type=int, default=600)
    p_sweep.add_argument("--no-filter", action="store_true")
    p_sweep.add_argument("--pooling", choices=["per-stage", "global"], default="per-stage")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", required=True, help="output CSV")
    p_sweep.set_defaults(func=_cmd_sweep_k)

    p_validate = sub.add_parser("validate", help="check one pack against the format and episode invariants")
    p_validate.add_argument("--pack", required=True)
    p_validate.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (EpisodeValidationError, PackError, EvaluationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except GenerationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
