"""Fréchet Inception Distance from feature statistics.

Feature extraction happens elsewhere; this module consumes feature
matrices (CSV or the binary FEAT format) or precomputed Gaussian
statistics (JSON) and evaluates

    FID = ||μ1 - μ2||² + Tr(Σ1 + Σ2 - 2 (Σ1 Σ2)^½)

with the trace of the square root taken from the symmetric form
sqrt(Σ1^½ Σ2 Σ1^½) through a symmetric eigendecomposition.
"""

import csv
import hashlib
import io
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import scipy.linalg

from . import config
from .errors import (
    DimensionMismatch,
    FeatureFileError,
    NonFiniteInput,
    NonFiniteResult,
    NonPsdCovariance,
    TooFewSamples,
)

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

# magic, N, D, reserved
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class FeatureStats:
    """Gaussian summary (mean, covariance) of a feature set."""
    mean: np.ndarray
    cov: np.ndarray
    sample_count: int

    def __post_init__(self):
        d = self.mean.shape[0] if self.mean.ndim == 1 else -1
        if d < 1 or self.cov.shape != (d, d):
            raise DimensionMismatch(
                f"mean shape {self.mean.shape} and covariance shape {self.cov.shape} disagree"
            )
        if not (np.isfinite(self.mean).all() and np.isfinite(self.cov).all()):
            raise NonFiniteInput("statistics contain NaN or Inf")
        scale = max(float(np.abs(self.cov).max(initial=0.0)), 1.0)
        if np.abs(self.cov - self.cov.T).max(initial=0.0) > 1e-9 * scale:
            raise ValueError("covariance is not symmetric")
        if (np.diag(self.cov) < 0).any():
            raise NonPsdCovariance("covariance has a negative diagonal entry")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "n": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureStats":
        mean = np.asarray(data["mean"], dtype=np.float64)
        cov = np.atleast_2d(np.asarray(data["cov"], dtype=np.float64))
        dim = int(data.get("dim", mean.shape[0]))
        if mean.shape != (dim,):
            raise DimensionMismatch(f"stats document declares dim {dim}, mean has shape {mean.shape}")
        return cls(mean=mean, cov=cov, sample_count=int(data.get("n", 0)))


@dataclass(frozen=True)
class FeatureInput:
    """Provenance of one side of an FID computation."""
    path: Path
    kind: str            # "csv", "binary" or "stats"
    sample_count: int
    dim: int
    sha256: str

    def to_dict(self) -> dict:
        return {
            "path": str(self.path),
            "kind": self.kind,
            "n": self.sample_count,
            "dim": self.dim,
            "sha256": self.sha256,
        }


@dataclass(frozen=True)
class FidReport:
    score: float
    inputs: tuple[FeatureInput, FeatureInput]

    def to_dict(self) -> dict:
        return {"fid": self.score, "inputs": [i.to_dict() for i in self.inputs]}


# =============================================================================
# Statistics
# =============================================================================

def as_feature_matrix(values) -> np.ndarray:
    """Validate an N×D feature matrix (N >= 2, all finite)."""
    f = np.asarray(values, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    if f.ndim != 2 or f.shape[1] < 1:
        raise ValueError(f"feature matrix must be 2D with at least one column, got shape {f.shape}")
    if f.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 feature rows, got {f.shape[0]}")
    if not np.isfinite(f).all():
        raise NonFiniteInput("feature matrix contains NaN or Inf")
    return f


def stats_from_features(features) -> FeatureStats:
    """Column means and unbiased (N-1) covariance, symmetrized."""
    f = as_feature_matrix(features)
    n = f.shape[0]
    mean = f.mean(axis=0)
    centered = f - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return FeatureStats(mean=mean, cov=cov, sample_count=n)


def _psd_eigh(mat: np.ndarray, label: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric PSD matrix with noise clamping."""
    eigvals, eigvecs = scipy.linalg.eigh(mat)
    lam_max = max(float(eigvals.max()), 0.0)
    tol = config.EIGEN_REL_TOL * lam_max
    if (eigvals < -tol).any():
        raise NonPsdCovariance(
            f"{label} has eigenvalue {float(eigvals.min()):.3e} below -{tol:.3e}"
        )
    return np.where(eigvals < 0, 0.0, eigvals), eigvecs


def _psd_sqrt(mat: np.ndarray, label: str) -> np.ndarray:
    eigvals, eigvecs = _psd_eigh(mat, label)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return (root + root.T) / 2.0


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """Fréchet distance between two Gaussians, clamped to >= 0.

    Raises:
        DimensionMismatch: a and b have different feature dimensions
        NonPsdCovariance: a covariance is not positive semi-definite
        NonFiniteResult: the distance is NaN or Inf
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"feature dimensions differ: {a.dim} vs {b.dim}")

    _psd_eigh(b.cov, "second covariance")
    root_a = _psd_sqrt(a.cov, "first covariance")
    inner = root_a @ b.cov @ root_a
    inner = (inner + inner.T) / 2.0
    inner_eigvals, _ = _psd_eigh(inner, "Σ1^½ Σ2 Σ1^½")
    trace_sqrt = math.fsum(np.sqrt(inner_eigvals).tolist())

    diff = a.mean - b.mean
    mean_term = float(diff @ diff)
    trace_term = float(np.trace(a.cov)) + float(np.trace(b.cov)) - 2.0 * trace_sqrt
    fid = mean_term + trace_term
    if not math.isfinite(fid):
        raise NonFiniteResult(f"Fréchet distance evaluated to {fid}")

    if fid < 0:
        scale = max(1.0, float(np.trace(a.cov)) + float(np.trace(b.cov)))
        if fid < -config.FID_NEGATIVE_TOL * scale:
            log.warning("Fréchet distance %.3e below zero beyond rounding noise; clamping", fid)
        fid = 0.0
    return fid


# =============================================================================
# Files
# =============================================================================

def _parse_csv(text: str) -> np.ndarray:
    rows = [row for row in csv.reader(io.StringIO(text)) if any(cell.strip() for cell in row)]
    if not rows:
        raise TooFewSamples("feature CSV is empty")
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        log.debug("feature CSV header detected: %s", rows[0])
        rows = rows[1:]
    if rows and len({len(r) for r in rows}) != 1:
        raise ValueError("feature CSV rows have differing column counts")
    try:
        values = np.array([[float(cell) for cell in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"non-numeric feature value: {exc}") from None
    return values.reshape(len(rows), -1) if rows else np.empty((0, 0))


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < config.FEATURE_HEADER_BYTES:
        raise ValueError("binary feature file shorter than its header")
    magic, n, d, _reserved = _HEADER.unpack_from(data)
    if magic != config.FEATURE_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    expected = config.FEATURE_HEADER_BYTES + n * d * 4
    if len(data) != expected:
        raise ValueError(f"binary feature file is {len(data)} bytes, header implies {expected}")
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=config.FEATURE_HEADER_BYTES)
    return values.reshape(n, d).astype(np.float64)


def load_features(path: PathLike) -> tuple[Union[np.ndarray, FeatureStats], str, str]:
    """Read a feature file: (matrix or stats, kind, sha256 of the file bytes).

    Raises:
        FeatureFileError: the file cannot be read or parsed
    """
    path = Path(path)
    try:
        data = path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if data.startswith(config.FEATURE_MAGIC):
            return _parse_binary(data), "binary", digest
        text = data.decode("utf-8-sig")
        if text.lstrip().startswith("{"):
            return FeatureStats.from_dict(json.loads(text)), "stats", digest
        return _parse_csv(text), "csv", digest
    except FeatureFileError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FeatureFileError(path, exc) from exc


def load_stats(path: PathLike) -> tuple[FeatureStats, FeatureInput]:
    """Statistics for a feature file, computing them from raw features if needed."""
    path = Path(path)
    content, kind, digest = load_features(path)
    try:
        stats = content if isinstance(content, FeatureStats) else stats_from_features(content)
    except (ValueError, ArithmeticError) as exc:
        raise FeatureFileError(path, exc) from exc
    return stats, FeatureInput(
        path=path, kind=kind, sample_count=stats.sample_count, dim=stats.dim, sha256=digest,
    )


def save_stats(stats: FeatureStats, path: PathLike) -> Path:
    """Write a JSON stats document."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(stats.to_dict()) + "\n", encoding="utf-8")
    log.info("Saved feature statistics: %s (n=%d, dim=%d)", path, stats.sample_count, stats.dim)
    return path


def save_features(features, path: PathLike, binary: bool = True) -> Path:
    """Write a feature matrix as FEAT binary (float32) or headerless CSV."""
    f = as_feature_matrix(features)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        n, d = f.shape
        header = _HEADER.pack(config.FEATURE_MAGIC, n, d, 0)
        path.write_bytes(header + f.astype("<f4").tobytes(order="C"))
    else:
        with open(path, "w", newline="", encoding="utf-8") as out:
            writer = csv.writer(out, lineterminator="\n")
            for row in f:
                writer.writerow([repr(float(v)) for v in row])
    return path


def fid_from_files(path_a: PathLike, path_b: PathLike) -> FidReport:
    """FID between two feature files (raw features or stats documents).

    Raises:
        FeatureFileError: parsing or statistics failed for one of the files
        DimensionMismatch, NonPsdCovariance, NonFiniteResult: numeric failures
    """
    stats_a, input_a = load_stats(path_a)
    stats_b, input_b = load_stats(path_b)
    if stats_a.dim != stats_b.dim:
        raise DimensionMismatch(
            f"{input_a.path} has dimension {stats_a.dim}, {input_b.path} has {stats_b.dim}"
        )
    score = frechet_distance(stats_a, stats_b)
    log.debug("FID %s vs %s = %.9g", input_a.path, input_b.path, score)
    return FidReport(score=score, inputs=(input_a, input_b))
