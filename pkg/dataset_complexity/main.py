"""Command-line entry point for Dataset Complexity.

Subcommands:
    complexity     per-image Shannon / GLCM / delentropy records
    dataset-stats  per-dataset distribution of one metric
    fid            Fréchet Inception Distance between two feature files
    sample         seeded subset manifests for training runs
    curve          fidelity curves, reductions, correlation and report bundle

Exit codes: 0 success, 1 fatal, 2 partial (some images failed).
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, config
from .bench import (
    correlation_report,
    emit_report,
    file_slug,
    load_fid_table,
    report_document,
    sample_ladder,
    write_manifest,
)
from .errors import ComplexityError, describe
from .fid import fid_from_files, load_stats, save_stats
from .imaging import list_images, parse_size
from .metrics import GLCM_DIRECTIONS, MetricParams
from .pipeline import CorpusResult, compute_records
from .stats import DatasetDistribution, aggregate, spread_descriptors
from .store import RecordStore

log = logging.getLogger(__name__)

RECORD_CSV_FIELDS = [
    "path", "contentHash", "shannonBits", "glcmBits", "delentropyBits",
    "width", "height", "toolVersion",
]


@dataclass(frozen=True)
class CliConfig:
    """Flags shared by every subcommand."""
    jobs: int = config.DEFAULT_JOBS
    output_format: str = config.DEFAULT_FORMAT
    seed: Optional[int] = None
    resize: Optional[tuple[int, int]] = None
    store_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    progress: bool = False

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError(f"--jobs must be >= 1, got {self.jobs}")
        if self.output_format not in config.OUTPUT_FORMATS:
            raise ValueError(f"--format must be one of {config.OUTPUT_FORMATS}")
        if self.resize is not None and min(self.resize) < 1:
            raise ValueError("--resize dimensions must be >= 1")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        return cls(
            jobs=args.jobs,
            output_format=args.format,
            seed=args.seed,
            resize=parse_size(args.resize) if args.resize else None,
            store_path=Path(args.store) if args.store else None,
            out_dir=Path(args.out) if args.out else None,
            progress=not args.quiet and sys.stderr.isatty(),
        )


def version_string() -> str:
    return f"dataset-complexity {__version__} (metrics {MetricParams().fingerprint()})"


def _sig(value: float) -> str:
    return f"{value:.{config.REPORT_SIGNIFICANT_DIGITS}g}"


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# =============================================================================
# Shared helpers
# =============================================================================

def _metric_params(args: argparse.Namespace, cfg: CliConfig) -> MetricParams:
    return MetricParams(
        kernel=args.kernel,
        glcm_distance=args.glcm_distance,
        glcm_angle=args.glcm_angle,
        glcm_symmetric=args.glcm_symmetric,
        resize=cfg.resize,
    )


def _expand_inputs(inputs: Sequence[str]) -> list[Path]:
    paths: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(list_images(p))
        else:
            paths.append(p)
    return paths


def _run_corpus(paths: list[Path], params: MetricParams, cfg: CliConfig) -> CorpusResult:
    store = RecordStore(cfg.store_path) if cfg.store_path else None
    return compute_records(paths, params, store=store, jobs=cfg.jobs, progress=cfg.progress)


def _exit_code(result: CorpusResult) -> int:
    if not result.records:
        return config.EXIT_FATAL
    if result.failures:
        log.warning("%d image(s) failed", len(result.failures))
        return config.EXIT_PARTIAL
    return config.EXIT_OK


# =============================================================================
# Subcommands
# =============================================================================

def cmd_complexity(args: argparse.Namespace, cfg: CliConfig) -> int:
    """Per-image records for files and directories."""
    paths = _expand_inputs(args.inputs)
    if not paths:
        log.error("No PNG/PGM images found in %s", ", ".join(args.inputs))
        return config.EXIT_FATAL
    result = _run_corpus(paths, _metric_params(args, cfg), cfg)

    rows = [{"path": path.as_posix(), **record.to_dict()} for path, record in result.records]
    if cfg.output_format == "json":
        sys.stdout.write(_dump_json({"records": rows}))
    elif cfg.output_format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RECORD_CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        for row in rows:
            sys.stdout.write(
                f"{row['path']}  shannon={_sig(row['shannonBits'])}  "
                f"glcm={_sig(row['glcmBits'])}  delentropy={_sig(row['delentropyBits'])}  "
                f"{row['width']}x{row['height']}\n"
            )
    return _exit_code(result)


def _distribution_document(dist: DatasetDistribution) -> dict:
    doc = dist.to_dict()
    doc["spread"] = spread_descriptors(dist).to_dict() if dist.count >= 2 else None
    return doc


def cmd_dataset_stats(args: argparse.Namespace, cfg: CliConfig) -> int:
    """Distribution of one metric over a directory of images."""
    directory = Path(args.directory)
    paths = list_images(directory)
    if not paths:
        log.error("Empty dataset: no PNG/PGM images under %s", directory)
        return config.EXIT_FATAL
    result = _run_corpus(paths, _metric_params(args, cfg), cfg)
    if not result.records:
        log.error("Empty dataset: no image in %s could be processed", directory)
        return config.EXIT_FATAL

    dataset_id = args.dataset_id or directory.resolve().name
    dist = aggregate(
        [record for _, record in result.records],
        metric=args.metric,
        dataset_id=dataset_id,
        bin_width=args.bin_width,
    )
    if cfg.output_format == "csv":
        text = dist.histogram_csv()
    elif cfg.output_format == "text":
        spread = spread_descriptors(dist) if dist.count >= 2 else None
        text = (
            f"{dataset_id} {args.metric}: n={dist.count} mean={_sig(dist.mean)} "
            f"std={_sig(dist.std_dev)} min={_sig(dist.min)} max={_sig(dist.max)}"
        )
        if spread is not None:
            cv = "n/a" if spread.cv is None else _sig(spread.cv)
            text += f" cv={cv} iqr={_sig(spread.iqr)} modes={spread.modes}"
        text += "\n"
    else:
        text = _dump_json(_distribution_document(dist))
    sys.stdout.write(text)

    if cfg.out_dir is not None:
        suffix = "csv" if cfg.output_format == "csv" else "json"
        target = cfg.out_dir / f"{file_slug(dataset_id)}_{args.metric}.{suffix}"
        target.parent.mkdir(parents=True, exist_ok=True)
        payload = text if cfg.output_format != "text" else _dump_json(_distribution_document(dist))
        target.write_text(payload, encoding="utf-8")
        log.info("Wrote distribution %s", target)
    return _exit_code(result)


def cmd_fid(args: argparse.Namespace, cfg: CliConfig) -> int:
    """FID between two feature files, or save one file's statistics."""
    if args.save_stats:
        stats, _ = load_stats(args.file_a)
        save_stats(stats, args.save_stats)
        if args.file_b is None:
            return config.EXIT_OK
    if args.file_b is None:
        log.error("fid needs two feature files (or --save-stats with one)")
        return config.EXIT_FATAL

    report = fid_from_files(args.file_a, args.file_b)
    if cfg.output_format == "json":
        doc = report.to_dict()
        doc["fid"] = float(_sig(report.score))
        sys.stdout.write(_dump_json(doc))
    else:
        sys.stdout.write(_sig(report.score) + "\n")
    return config.EXIT_OK


def _read_listing(listing: Path) -> list[Path]:
    if listing.is_dir():
        return list_images(listing)
    lines = listing.read_text(encoding="utf-8").splitlines()
    return [
        (listing.parent / line.strip()) if not Path(line.strip()).is_absolute() else Path(line.strip())
        for line in lines if line.strip() and not line.lstrip().startswith("#")
    ]


def cmd_sample(args: argparse.Namespace, cfg: CliConfig) -> int:
    """Seeded subset manifests for one or more sizes."""
    listing = Path(args.listing)
    seed = cfg.seed if cfg.seed is not None else config.DEFAULT_SEED
    if cfg.seed is None:
        log.info("No --seed given; using %d", seed)
    dataset_id = args.dataset_id or (listing.resolve().name if listing.is_dir() else listing.stem)
    manifests = sample_ladder(_read_listing(listing), args.sizes, seed=seed, dataset_id=dataset_id)

    out_dir = cfg.out_dir or Path(config.DEFAULT_OUT_DIR)
    written = [
        write_manifest(m, out_dir / f"manifest_{dataset_id}_{m.size}_seed{seed}.json")
        for m in manifests
    ]
    if cfg.output_format == "json":
        sys.stdout.write(_dump_json({"manifests": [p.as_posix() for p in written]}))
    else:
        for p in written:
            sys.stdout.write(p.as_posix() + "\n")
    return config.EXIT_OK


def cmd_curve(args: argparse.Namespace, cfg: CliConfig) -> int:
    """Fidelity curves, reductions, slopes, correlation and the report bundle."""
    curves = load_fid_table(args.table)
    distributions = [
        DatasetDistribution.from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
        for p in args.distributions
    ]

    correlations = []
    if distributions:
        at_size = args.at_size
        if at_size is None:
            at_size = max(set.intersection(*(set(c.sizes) for c in curves)), default=None)
            if at_size is None:
                log.error("Curves share no training size; pass --at-size")
                return config.EXIT_FATAL
        for label in sorted({c.model_label for c in curves}):
            correlations.append(
                correlation_report(distributions, curves, at_size, stat=args.stat, model_label=label)
            )

    out_dir = cfg.out_dir or Path(config.DEFAULT_OUT_DIR)
    emit_report(out_dir, curves, distributions, correlations, plateau_threshold=args.plateau_threshold)
    document = report_document(curves, distributions, correlations, args.plateau_threshold)
    if cfg.output_format == "text":
        for curve_doc in document["curves"]:
            reduction = curve_doc["reduction"]
            sys.stdout.write(
                f"{curve_doc['datasetId']} {curve_doc['modelLabel']}: reduction="
                f"{'n/a' if reduction is None else _sig(reduction)}\n"
            )
        for corr in document["correlations"]:
            rho = corr["spearmanRho"]
            sys.stdout.write(
                f"rho({corr['stat']}, FID@{corr['size']}, {corr['modelLabel']})="
                f"{'n/a' if rho is None else _sig(rho)}\n"
            )
    else:
        sys.stdout.write(_dump_json(document))
    return config.EXIT_OK


# =============================================================================
# Argument parsing
# =============================================================================

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--jobs",
        type=int,
        default=config.DEFAULT_JOBS,
        metavar="N",
        help=f"Worker processes for per-image work (default: {config.DEFAULT_JOBS})",
    )
    common.add_argument(
        "--format",
        choices=config.OUTPUT_FORMATS,
        default=config.DEFAULT_FORMAT,
        help=f"Output format on stdout (default: {config.DEFAULT_FORMAT})",
    )
    common.add_argument(
        "--store",
        metavar="PATH",
        help="JSON Lines record store used as a cache",
    )
    common.add_argument(
        "--resize",
        metavar="WxH",
        help="Resize images bilinearly before measuring (default: native resolution)",
    )
    common.add_argument(
        "--seed",
        type=int,
        metavar="U64",
        help=f"Sampling seed (default: {config.DEFAULT_SEED})",
    )
    common.add_argument(
        "--out",
        metavar="DIR",
        help=f"Output directory for files (default: {config.DEFAULT_OUT_DIR} where needed)",
    )
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings and errors only, no progress bar")
    return common


def _add_metric_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--kernel",
        choices=config.KERNELS,
        default=config.DEFAULT_KERNEL,
        help=f"Gradient kernel for delentropy (default: {config.DEFAULT_KERNEL})",
    )
    parser.add_argument(
        "--glcm-distance",
        type=int,
        default=config.GLCM_DISTANCE,
        metavar="D",
        help=f"GLCM pixel distance (default: {config.GLCM_DISTANCE})",
    )
    parser.add_argument(
        "--glcm-angle",
        type=int,
        choices=sorted(GLCM_DIRECTIONS),
        default=config.GLCM_ANGLE,
        help=f"GLCM angle in degrees (default: {config.GLCM_ANGLE})",
    )
    parser.add_argument(
        "--glcm-symmetric",
        action="store_true",
        help="Count each GLCM pair in both directions",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dataset-complexity",
        description="Dataset Complexity - delentropy distributions and FID fidelity curves",
    )
    parser.add_argument("--version", action="version", version=version_string())
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", parents=[common], help="Per-image complexity records")
    p.add_argument("inputs", nargs="+", help="Image files or directories")
    _add_metric_flags(p)
    p.set_defaults(handler=cmd_complexity)

    p = sub.add_parser("dataset-stats", parents=[common], help="Per-dataset metric distribution")
    p.add_argument("directory", help="Directory of images")
    p.add_argument("--metric", choices=config.METRICS, default=config.DEFAULT_METRIC,
                   help=f"Metric to aggregate (default: {config.DEFAULT_METRIC})")
    p.add_argument("--dataset-id", help="Dataset name (default: directory name)")
    p.add_argument("--bin-width", type=float, default=config.HISTOGRAM_BIN_WIDTH,
                   help=f"Histogram bin width in bits (default: {config.HISTOGRAM_BIN_WIDTH})")
    _add_metric_flags(p)
    p.set_defaults(handler=cmd_dataset_stats)

    p = sub.add_parser("fid", parents=[common], help="Fréchet Inception Distance of two feature files")
    p.add_argument("file_a", help="Features or stats document (CSV, FEAT binary or JSON)")
    p.add_argument("file_b", nargs="?", help="Second features or stats document")
    p.add_argument("--save-stats", metavar="PATH", help="Write the first file's statistics as JSON")
    p.set_defaults(handler=cmd_fid)

    p = sub.add_parser("sample", parents=[common], help="Seeded subset manifests")
    p.add_argument("listing", help="Directory of images or text file with one path per line")
    p.add_argument("sizes", nargs="+", type=int, help=f"Subset sizes (e.g. {' '.join(map(str, config.SUBSET_SIZES))})")
    p.add_argument("--dataset-id", help="Dataset name (default: listing name)")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("curve", parents=[common], help="Fidelity curves and report bundle")
    p.add_argument("table", help="CSV of FID scores or of feature-file pairs")
    p.add_argument("--distributions", nargs="*", default=[], metavar="JSON",
                   help="Distribution documents from dataset-stats")
    p.add_argument("--at-size", type=int, help="Training size compared in the correlation (default: largest shared)")
    p.add_argument("--stat", choices=config.CORRELATION_STATS, default="mean",
                   help="Complexity statistic correlated with FID (default: mean)")
    p.add_argument("--plateau-threshold", type=float, default=config.PLATEAU_THRESHOLD,
                   help=f"|slope| below which an interval is a plateau (default: {config.PLATEAU_THRESHOLD})")
    p.set_defaults(handler=cmd_curve)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=config.LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the Dataset Complexity CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        cfg = CliConfig.from_args(args)
        return args.handler(args, cfg)
    except (ComplexityError, OSError, ValueError, KeyError, ZeroDivisionError) as exc:
        log.error("%s", describe(exc))
        return config.EXIT_FATAL
    except KeyboardInterrupt:
        log.warning("Interrupted")
        return config.EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
