"""Benchmark harness around external GAN training.

Produces the inputs of a training run (seeded subset manifests) and turns
its outputs (FID scores per training-set size) into fidelity curves,
reductions, slopes, the complexity-vs-FID rank correlation and a report
bundle of JSON plus CSV plot data.
"""

import csv
import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from . import config
from .errors import (
    AmbiguousCurve,
    DegenerateCurve,
    DegenerateDistribution,
    EmptyListing,
    MissingDataset,
    MissingSizePoint,
    SizeExceedsDataset,
)
from .fid import fid_from_files
from .imaging import content_hash, load_grayscale
from .stats import DatasetDistribution

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Partial Fisher-Yates driven by numpy PCG64 (SeedSequence-seeded) raw 64-bit
# output reduced modulo the remaining length. Bump when the draw changes.
PRNG_ID = "pcg64-raw-mod/v1"

FID_TABLE_FIELDS = ["dataset_id", "model_label", "training_size", "fid"]
FEATURE_TABLE_FIELDS = [
    "dataset_id", "model_label", "training_size", "real_features", "generated_features",
]
CURVE_CSV_FIELDS = ["size", "fid"]


# =============================================================================
# Subset sampling
# =============================================================================

@dataclass(frozen=True)
class ManifestMember:
    path: str
    content_hash: str


@dataclass(frozen=True)
class SampleManifest:
    """Frozen listing of the images in one training subset."""
    dataset_id: str
    size: int
    seed: int
    members: tuple[ManifestMember, ...]
    prng: str = PRNG_ID
    schema: str = config.MANIFEST_SCHEMA

    def __post_init__(self):
        if len(self.members) != self.size:
            raise ValueError(f"manifest lists {len(self.members)} members, size is {self.size}")
        if len({m.content_hash for m in self.members}) != self.size:
            raise ValueError("manifest contains duplicate content hashes")

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "datasetId": self.dataset_id,
            "size": self.size,
            "seed": self.seed,
            "prng": self.prng,
            "members": [{"path": m.path, "contentHash": m.content_hash} for m in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SampleManifest":
        return cls(
            dataset_id=str(data["datasetId"]),
            size=int(data["size"]),
            seed=int(data["seed"]),
            members=tuple(
                ManifestMember(path=str(m["path"]), content_hash=str(m["contentHash"]))
                for m in data["members"]
            ),
            prng=str(data.get("prng", PRNG_ID)),
            schema=str(data.get("schema", config.MANIFEST_SCHEMA)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def image_hash(path: PathLike) -> str:
    """Content hash of the decoded grayscale image at path."""
    return content_hash(load_grayscale(path))


def _draw(
    listing: Iterable[PathLike],
    size: int,
    seed: int,
    hasher: Callable[[str], str],
) -> list[ManifestMember]:
    """First `size` distinct images of a seeded partial Fisher-Yates shuffle.

    The draw is prefix-stable: the first k members do not depend on size.
    """
    order = sorted((Path(p).as_posix() for p in listing))
    if not order:
        raise EmptyListing("dataset listing is empty")
    if size < 1:
        raise ValueError(f"subset size must be >= 1, got {size}")
    if size > len(order):
        raise SizeExceedsDataset(f"requested {size} images from a listing of {len(order)}")
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")

    rng = np.random.PCG64(seed)
    n = len(order)
    members: list[ManifestMember] = []
    seen: set[str] = set()
    i = 0
    while len(members) < size:
        if i >= n:
            raise SizeExceedsDataset(
                f"requested {size} images but the listing holds only {len(members)} distinct ones"
            )
        j = i + int(rng.random_raw()) % (n - i)
        order[i], order[j] = order[j], order[i]
        digest = hasher(order[i])
        if digest in seen:
            log.warning("Skipping duplicate image content: %s", order[i])
        else:
            seen.add(digest)
            members.append(ManifestMember(path=order[i], content_hash=digest))
        i += 1
    return members


def sample_subset(
    listing: Iterable[PathLike],
    size: int,
    seed: int = config.DEFAULT_SEED,
    dataset_id: str = "dataset",
    hasher: Callable[[str], str] = image_hash,
) -> SampleManifest:
    """Seeded random subset of a dataset listing.

    The listing is sorted lexicographically first, so filesystem order never
    matters. Images with identical content are drawn at most once.

    Raises:
        EmptyListing: listing has no files
        SizeExceedsDataset: fewer distinct images than requested
    """
    members = _draw(listing, size, seed, hasher)
    return SampleManifest(dataset_id=dataset_id, size=size, seed=seed, members=tuple(members))


def sample_ladder(
    listing: Iterable[PathLike],
    sizes: Sequence[int] = config.SUBSET_SIZES,
    seed: int = config.DEFAULT_SEED,
    dataset_id: str = "dataset",
    hasher: Callable[[str], str] = image_hash,
) -> list[SampleManifest]:
    """One manifest per size from a single shuffle; smaller subsets nest in larger ones."""
    if not sizes:
        raise ValueError("no subset sizes given")
    ordered = sorted(set(sizes))
    members = _draw(listing, ordered[-1], seed, hasher)
    return [
        SampleManifest(dataset_id=dataset_id, size=s, seed=seed, members=tuple(members[:s]))
        for s in ordered
    ]


def write_manifest(manifest: SampleManifest, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.to_json(), encoding="utf-8")
    log.info("Wrote manifest %s (%d images, seed %d)", path, manifest.size, manifest.seed)
    return path


def read_manifest(path: PathLike) -> SampleManifest:
    return SampleManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# =============================================================================
# Fidelity curves
# =============================================================================

@dataclass(frozen=True)
class FidelityCurve:
    """FID against training-set size for one dataset and one generator."""
    dataset_id: str
    points: tuple[tuple[int, float], ...]
    model_label: str = ""

    def __post_init__(self):
        if len(self.points) < 2:
            raise DegenerateCurve(
                f"curve {self.dataset_id}/{self.model_label} needs at least 2 points, has {len(self.points)}"
            )
        sizes = [s for s, _ in self.points]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"curve {self.dataset_id}/{self.model_label}: sizes must strictly increase")
        for size, fid in self.points:
            if not math.isfinite(fid) or fid < 0:
                raise ValueError(f"curve {self.dataset_id}/{self.model_label}: bad FID {fid} at {size}")

    @classmethod
    def from_points(
        cls, dataset_id: str, points: Iterable[tuple[int, float]], model_label: str = ""
    ) -> "FidelityCurve":
        """Build from unordered (size, fid) pairs."""
        ordered = tuple(sorted((int(s), float(f)) for s, f in points))
        return cls(dataset_id=dataset_id, points=ordered, model_label=model_label)

    @property
    def sizes(self) -> list[int]:
        return [s for s, _ in self.points]

    def fid_at(self, size: int) -> float:
        for s, fid in self.points:
            if s == size:
                return fid
        raise MissingSizePoint(
            f"curve {self.dataset_id}/{self.model_label} has no point at size {size}"
        )

    def to_dict(self) -> dict:
        return {
            "datasetId": self.dataset_id,
            "modelLabel": self.model_label,
            "points": [[s, f] for s, f in self.points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FidelityCurve":
        return cls.from_points(
            str(data["datasetId"]),
            [(p[0], p[1]) for p in data["points"]],
            str(data.get("modelLabel", "")),
        )


@dataclass(frozen=True)
class CurveInterval:
    start_size: int
    end_size: int
    slope: float
    plateau: bool

    def to_dict(self) -> dict:
        return {
            "startSize": self.start_size,
            "endSize": self.end_size,
            "slope": self.slope,
            "plateau": self.plateau,
        }


def percent_reduction(curve: FidelityCurve) -> float:
    """(FID at smallest size - FID at largest size) / FID at smallest size.

    Raises:
        ZeroDivisionError: FID at the smallest size is 0
    """
    first = curve.points[0][1]
    last = curve.points[-1][1]
    if first == 0:
        raise ZeroDivisionError(
            f"curve {curve.dataset_id}/{curve.model_label}: FID at size {curve.points[0][0]} is 0"
        )
    return (first - last) / first


def curve_slopes(
    curve: FidelityCurve, plateau_threshold: float = config.PLATEAU_THRESHOLD
) -> list[CurveInterval]:
    """ΔFID/Δsize per consecutive pair of points, flagged as plateau when |slope| < threshold."""
    intervals = []
    for (s0, f0), (s1, f1) in zip(curve.points, curve.points[1:]):
        slope = (f1 - f0) / (s1 - s0)
        intervals.append(CurveInterval(s0, s1, slope, abs(slope) < plateau_threshold))
    return intervals


def average_reduction(curves: Iterable[FidelityCurve], model_label: str) -> float:
    """Arithmetic mean of the per-dataset reductions of one generator.

    Curves whose FID at the smallest size is 0 have no reduction and are left
    out of the mean.

    Raises:
        DegenerateCurve: no curve of the model has a defined reduction
    """
    reductions = []
    for c in curves:
        if c.model_label != model_label:
            continue
        try:
            reductions.append(percent_reduction(c))
        except ZeroDivisionError as exc:
            log.warning("%s; left out of the average", exc)
    if not reductions:
        raise DegenerateCurve(f"no curves with a defined reduction for model {model_label!r}")
    return math.fsum(reductions) / len(reductions)


def model_gap(curves: Iterable[FidelityCurve], label_a: str, label_b: str) -> float:
    """Mean relative FID difference (a - b) / a over every shared (dataset, size).

    A value of 0.33 reads "model b scores 33% lower FID than model a on average".
    """
    by_key: dict[str, dict[str, FidelityCurve]] = defaultdict(dict)
    for c in curves:
        by_key[c.model_label][c.dataset_id] = c
    ratios = []
    for dataset_id, curve_a in sorted(by_key.get(label_a, {}).items()):
        curve_b = by_key.get(label_b, {}).get(dataset_id)
        if curve_b is None:
            continue
        fids_b = dict(curve_b.points)
        for size, fid_a in curve_a.points:
            if size in fids_b and fid_a > 0:
                ratios.append((fid_a - fids_b[size]) / fid_a)
    if not ratios:
        raise DegenerateCurve(f"models {label_a!r} and {label_b!r} share no (dataset, size) point")
    return math.fsum(ratios) / len(ratios)


def load_fid_table(path: PathLike) -> list[FidelityCurve]:
    """Curves from a CSV of FID scores or of feature-file pairs.

    Accepted headers:
        dataset_id,model_label,training_size,fid
        dataset_id,model_label,training_size,real_features,generated_features
    Feature paths are resolved relative to the table's directory.
    """
    path = Path(path)
    points: dict[tuple[str, str], list[tuple[int, float]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        fields = set(reader.fieldnames or [])
        if set(FID_TABLE_FIELDS) <= fields:
            mode = "fid"
        elif set(FEATURE_TABLE_FIELDS) <= fields:
            mode = "features"
        else:
            raise ValueError(
                f"{path}: expected columns {FID_TABLE_FIELDS} or {FEATURE_TABLE_FIELDS}, "
                f"got {reader.fieldnames}"
            )
        for line_number, row in enumerate(reader, start=2):
            try:
                size = int(row["training_size"])
                if mode == "fid":
                    fid = float(row["fid"])
                else:
                    fid = fid_from_files(
                        path.parent / row["real_features"],
                        path.parent / row["generated_features"],
                    ).score
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_number}: {exc}") from exc
            points[(row["dataset_id"], row["model_label"])].append((size, fid))
    curves = [
        FidelityCurve.from_points(dataset_id, pts, model_label)
        for (dataset_id, model_label), pts in sorted(points.items())
    ]
    log.info("Loaded %d curve(s) from %s", len(curves), path)
    return curves


# =============================================================================
# Complexity vs fidelity
# =============================================================================

@dataclass(frozen=True)
class CorrelationPair:
    dataset_id: str
    complexity: float
    fid: float


@dataclass(frozen=True)
class CorrelationReport:
    """Rank correlation between a complexity statistic and FID at one size."""
    pairs: tuple[CorrelationPair, ...]
    spearman_rho: Optional[float]
    size: int
    stat: str = "mean"
    model_label: str = ""

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "stat": self.stat,
            "modelLabel": self.model_label,
            "spearmanRho": self.spearman_rho,
            "pairs": [
                {"datasetId": p.dataset_id, "complexity": p.complexity, "fid": p.fid}
                for p in self.pairs
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationReport":
        rho = data.get("spearmanRho")
        return cls(
            pairs=tuple(
                CorrelationPair(str(p["datasetId"]), float(p["complexity"]), float(p["fid"]))
                for p in data["pairs"]
            ),
            spearman_rho=None if rho is None else float(rho),
            size=int(data["size"]),
            stat=str(data.get("stat", "mean")),
            model_label=str(data.get("modelLabel", "")),
        )


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation with average ranks for ties.

    None when either variable is constant.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have the same length")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    mx, my = rx.mean(), ry.mean()
    dx, dy = (rx - mx).tolist(), (ry - my).tolist()
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        return None
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def complexity_stat(d: DatasetDistribution, stat: str) -> float:
    if stat == "mean":
        return d.mean
    if stat == "stdDev":
        return d.std_dev
    if stat == "cv":
        if d.mean == 0:
            raise DegenerateDistribution(f"{d.dataset_id}: coefficient of variation undefined (mean 0)")
        return d.std_dev / d.mean
    raise ValueError(f"unknown statistic {stat!r}, expected one of {config.CORRELATION_STATS}")


def correlation_report(
    distributions: Iterable[DatasetDistribution],
    curves: Iterable[FidelityCurve],
    at_size: int,
    stat: str = "mean",
    model_label: Optional[str] = None,
) -> CorrelationReport:
    """Pair each dataset's complexity statistic with its FID at one size.

    rho is reported only with at least three datasets.

    Raises:
        MissingDataset: a dataset appears in only one of the two inputs
        MissingSizePoint: a curve has no point at at_size
        AmbiguousCurve: several curves per dataset and no model_label
    """
    by_dataset: dict[str, DatasetDistribution] = {}
    for d in distributions:
        if d.dataset_id in by_dataset:
            raise ValueError(f"dataset {d.dataset_id!r} has more than one distribution")
        by_dataset[d.dataset_id] = d

    curve_by_dataset: dict[str, FidelityCurve] = {}
    for c in curves:
        if model_label is not None and c.model_label != model_label:
            continue
        if c.dataset_id in curve_by_dataset:
            raise AmbiguousCurve(
                f"dataset {c.dataset_id!r} has several curves; choose a model label"
            )
        curve_by_dataset[c.dataset_id] = c

    missing = sorted(set(by_dataset) ^ set(curve_by_dataset))
    if missing:
        raise MissingDataset(f"datasets missing from distributions or curves: {', '.join(missing)}")

    pairs = tuple(
        CorrelationPair(
            dataset_id=dataset_id,
            complexity=complexity_stat(by_dataset[dataset_id], stat),
            fid=curve_by_dataset[dataset_id].fid_at(at_size),
        )
        for dataset_id in sorted(by_dataset)
    )
    rho = None
    if len(pairs) >= config.MIN_DATASETS_FOR_RHO:
        rho = spearman_rho([p.complexity for p in pairs], [p.fid for p in pairs])
    else:
        log.info("Only %d dataset(s); rank correlation omitted", len(pairs))
    label = model_label if model_label is not None else ""
    return CorrelationReport(pairs=pairs, spearman_rho=rho, size=at_size, stat=stat, model_label=label)


# =============================================================================
# Report bundle
# =============================================================================

@dataclass(frozen=True)
class ReportBundle:
    """Everything a report holds, as parsed back from disk."""
    curves: tuple[FidelityCurve, ...]
    distributions: tuple[DatasetDistribution, ...]
    correlations: tuple[CorrelationReport, ...] = ()
    average_reductions: dict = field(default_factory=dict)
    model_gaps: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BundleFiles:
    report: Path
    curve_files: tuple[Path, ...]
    distribution_files: tuple[Path, ...]


def _sig(value: float, digits: int = config.REPORT_SIGNIFICANT_DIGITS) -> float:
    return float(f"{value:.{digits}g}")


def _round_floats(obj):
    if isinstance(obj, float):
        return _sig(obj) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def file_slug(text: str) -> str:
    """File-name-safe form of a dataset or model id."""
    return re.sub(r"[^A-Za-z0-9.-]+", "-", text).strip("-") or "unnamed"


def _claim(name: str, taken: set[str]) -> str:
    """Reserve a file stem, suffixing -2, -3, ... when another id already mapped to it."""
    candidate = name
    n = 1
    while candidate in taken:
        n += 1
        candidate = f"{name}-{n}"
    if candidate != name:
        log.warning("file name %r already used; writing %r instead", name, candidate)
    taken.add(candidate)
    return candidate


def report_document(
    curves: Sequence[FidelityCurve],
    distributions: Sequence[DatasetDistribution] = (),
    correlations: Sequence[CorrelationReport] = (),
    plateau_threshold: float = config.PLATEAU_THRESHOLD,
) -> dict:
    """JSON-ready report with every float at report precision."""
    if not curves:
        raise DegenerateCurve("report needs at least one fidelity curve")
    curve_docs = []
    for c in curves:
        doc = c.to_dict()
        try:
            doc["reduction"] = percent_reduction(c)
        except ZeroDivisionError as exc:
            log.warning("%s", exc)
            doc["reduction"] = None
        doc["slopes"] = [i.to_dict() for i in curve_slopes(c, plateau_threshold)]
        curve_docs.append(doc)

    labels = sorted({c.model_label for c in curves})
    averages = {}
    for label in labels:
        try:
            averages[label] = average_reduction(curves, label)
        except DegenerateCurve as exc:
            log.warning("average reduction for %r skipped: %s", label, exc)
    gaps = {}
    for a, b in combinations(labels, 2):
        try:
            gaps[f"{a}|{b}"] = model_gap(curves, a, b)
        except DegenerateCurve as exc:
            log.info("%s", exc)

    return _round_floats({
        "schema": config.REPORT_SCHEMA,
        "plateauThreshold": plateau_threshold,
        "curves": curve_docs,
        "averageReductions": averages,
        "modelGaps": gaps,
        "distributions": [d.to_dict() for d in distributions],
        "correlations": [r.to_dict() for r in correlations],
    })


def emit_report(
    outdir: PathLike,
    curves: Sequence[FidelityCurve],
    distributions: Sequence[DatasetDistribution] = (),
    correlations: Sequence[CorrelationReport] = (),
    plateau_threshold: float = config.PLATEAU_THRESHOLD,
) -> BundleFiles:
    """Write report.json, curves/<dataset>_<model>.csv and distributions/<dataset>.csv.

    Raises:
        DegenerateCurve: no curves
        OSError: output cannot be written
    """
    document = report_document(curves, distributions, correlations, plateau_threshold)
    outdir = Path(outdir)
    (outdir / "curves").mkdir(parents=True, exist_ok=True)
    (outdir / "distributions").mkdir(parents=True, exist_ok=True)

    curve_files = []
    curve_names: set[str] = set()
    for c in curves:
        name = file_slug(c.dataset_id) + (f"_{file_slug(c.model_label)}" if c.model_label else "")
        name = _claim(name, curve_names)
        target = outdir / "curves" / f"{name}.csv"
        with open(target, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=CURVE_CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            for size, fid in c.points:
                writer.writerow({"size": size, "fid": f"{fid:.{config.REPORT_SIGNIFICANT_DIGITS}g}"})
        curve_files.append(target)

    distribution_files = []
    distribution_names: set[str] = set()
    for d in distributions:
        name = _claim(file_slug(d.dataset_id), distribution_names)
        target = outdir / "distributions" / f"{name}.csv"
        target.write_text(d.histogram_csv(config.REPORT_SIGNIFICANT_DIGITS), encoding="utf-8")
        distribution_files.append(target)

    report_path = outdir / "report.json"
    report_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info(
        "Report bundle in %s: %d curve file(s), %d distribution file(s)",
        outdir, len(curve_files), len(distribution_files),
    )
    return BundleFiles(report_path, tuple(curve_files), tuple(distribution_files))


def parse_report(outdir: PathLike) -> ReportBundle:
    """Read a bundle's report.json back into domain objects."""
    document = json.loads((Path(outdir) / "report.json").read_text(encoding="utf-8"))
    return ReportBundle(
        curves=tuple(FidelityCurve.from_dict(c) for c in document["curves"]),
        distributions=tuple(DatasetDistribution.from_dict(d) for d in document.get("distributions", [])),
        correlations=tuple(CorrelationReport.from_dict(r) for r in document.get("correlations", [])),
        average_reductions=dict(document.get("averageReductions", {})),
        model_gaps=dict(document.get("modelGaps", {})),
    )
