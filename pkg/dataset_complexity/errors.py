"""Exception hierarchy for Dataset Complexity.

Library code raises these; only the CLI turns them into exit codes.
"""

from pathlib import Path
from typing import Optional


class ComplexityError(Exception):
    """Base class for every error raised by the toolkit."""


# ─── Imaging ──────────────────────────────────────────────────────────────────

class UnsupportedFormat(ComplexityError, ValueError):
    """File is neither PNG nor binary PGM (P5)."""


class CorruptImage(ComplexityError, ValueError):
    """File claims a supported format but fails to decode."""


class ZeroDimension(ComplexityError, ValueError):
    """Image or target size has a zero width or height."""


# ─── Metrics ──────────────────────────────────────────────────────────────────

class ImageTooSmall(ComplexityError, ValueError):
    """Image is too small for the gradient kernel."""


class OffsetTooLarge(ComplexityError, ValueError):
    """GLCM offset leaves no valid pixel pair."""


# ─── Stats / store ────────────────────────────────────────────────────────────

class EmptyDataset(ComplexityError, ValueError):
    """No records to aggregate."""


class DegenerateDistribution(ComplexityError, ValueError):
    """Distribution cannot provide the requested statistic."""


class CorruptRecord(ComplexityError, ValueError):
    """A record-store line failed to parse."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


# ─── FID ──────────────────────────────────────────────────────────────────────

class TooFewSamples(ComplexityError, ValueError):
    """Covariance needs at least two feature rows."""


class NonFiniteInput(ComplexityError, ValueError):
    """Feature matrix contains NaN or Inf."""


class DimensionMismatch(ComplexityError, ValueError):
    """Two statistics have different feature dimensions."""


class NonPsdCovariance(ComplexityError, ValueError):
    """Covariance has an eigenvalue below the negative tolerance."""


class NonFiniteResult(ComplexityError, ArithmeticError):
    """Fréchet distance evaluated to NaN or Inf."""


class FeatureFileError(ComplexityError):
    """Wraps a parse or numeric error with the feature file it came from."""

    def __init__(self, path: Path, cause: Exception):
        super().__init__(f"{path}: {cause}")
        self.path = Path(path)
        self.cause = cause


# ─── Bench ────────────────────────────────────────────────────────────────────

class SizeExceedsDataset(ComplexityError, ValueError):
    """Requested subset is larger than the listing."""


class EmptyListing(ComplexityError, ValueError):
    """Dataset listing has no files."""


class DegenerateCurve(ComplexityError, ValueError):
    """Fidelity curve has fewer than two points (or none at all)."""


class MissingDataset(ComplexityError, KeyError):
    """Dataset present in one input list but not the other."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class MissingSizePoint(ComplexityError, KeyError):
    """Curve has no point at the requested training size."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class AmbiguousCurve(ComplexityError, ValueError):
    """Several curves for one dataset and no model label to choose between them."""


def describe(exc: BaseException, path: Optional[Path] = None) -> str:
    """One-line diagnostic for the error stream."""
    prefix = f"{path}: " if path is not None else ""
    return f"{prefix}{type(exc).__name__}: {exc}"
