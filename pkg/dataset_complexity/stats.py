"""Per-dataset complexity distributions.

Aggregates ComplexityRecords into mean, population standard deviation,
quartiles and a fixed-range histogram, plus spread descriptors (coefficient
of variation, interquartile range, number of modes).
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import config
from .errors import EmptyDataset
from .metrics import ComplexityRecord

log = logging.getLogger(__name__)

HISTOGRAM_CSV_FIELDS = ["bin_low", "bin_high", "count"]


@dataclass(frozen=True)
class DatasetDistribution:
    """Distribution of one metric over one dataset."""
    dataset_id: str
    metric: str
    count: int
    mean: float
    std_dev: float
    min: float
    max: float
    q1: float
    median: float
    q3: float
    bin_width: float
    histogram: tuple[int, ...]
    histogram_range: tuple[float, float] = config.HISTOGRAM_RANGE
    clamped: int = 0

    def __post_init__(self):
        if sum(self.histogram) != self.count:
            raise ValueError("histogram counts must add up to count")
        if not (self.min <= self.mean <= self.max) or self.std_dev < 0:
            raise ValueError("inconsistent distribution summary")

    def bin_edges(self) -> list[tuple[float, float]]:
        low = self.histogram_range[0]
        return [
            (low + k * self.bin_width, low + (k + 1) * self.bin_width)
            for k in range(len(self.histogram))
        ]

    def to_dict(self) -> dict:
        return {
            "datasetId": self.dataset_id,
            "metric": self.metric,
            "count": self.count,
            "mean": self.mean,
            "stdDev": self.std_dev,
            "min": self.min,
            "max": self.max,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "binWidth": self.bin_width,
            "histogramRange": list(self.histogram_range),
            "histogram": list(self.histogram),
            "clamped": self.clamped,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetDistribution":
        return cls(
            dataset_id=str(data["datasetId"]),
            metric=str(data["metric"]),
            count=int(data["count"]),
            mean=float(data["mean"]),
            std_dev=float(data["stdDev"]),
            min=float(data["min"]),
            max=float(data["max"]),
            q1=float(data["q1"]),
            median=float(data["median"]),
            q3=float(data["q3"]),
            bin_width=float(data["binWidth"]),
            histogram=tuple(int(c) for c in data["histogram"]),
            histogram_range=tuple(float(v) for v in data.get("histogramRange", config.HISTOGRAM_RANGE)),
            clamped=int(data.get("clamped", 0)),
        )

    def histogram_csv(self, digits: Optional[int] = None) -> str:
        """bin_low,bin_high,count rows with a header; edges printed at `digits` significant digits."""
        fmt = repr if digits is None else (lambda v: f"{v:.{digits}g}")
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=HISTOGRAM_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for (low, high), count in zip(self.bin_edges(), self.histogram):
            writer.writerow({"bin_low": fmt(low), "bin_high": fmt(high), "count": count})
        return buf.getvalue()


@dataclass(frozen=True)
class SpreadDescriptors:
    """How wide and how multi-peaked a distribution is."""
    cv: Optional[float]
    iqr: float
    modes: int

    def to_dict(self) -> dict:
        return {"cv": self.cv, "iqr": self.iqr, "modes": self.modes}


def _histogram(
    values: np.ndarray, bin_width: float, value_range: tuple[float, float]
) -> tuple[tuple[int, ...], int]:
    low, high = value_range
    nbins = int(round((high - low) / bin_width))
    if nbins < 1:
        raise ValueError(f"bin width {bin_width} does not fit range {value_range}")
    index = np.floor((values - low) / bin_width).astype(np.intp)
    # the top edge belongs to the last bin
    index[values == high] = nbins - 1
    outside = (index < 0) | (index >= nbins)
    clamped = int(outside.sum())
    index = np.clip(index, 0, nbins - 1)
    return tuple(int(c) for c in np.bincount(index, minlength=nbins)), clamped


def aggregate(
    records: Iterable[ComplexityRecord],
    metric: str = config.DEFAULT_METRIC,
    dataset_id: str = "dataset",
    bin_width: float = config.HISTOGRAM_BIN_WIDTH,
    value_range: tuple[float, float] = config.HISTOGRAM_RANGE,
) -> DatasetDistribution:
    """Summarise one metric over a set of records.

    Records are sorted by content hash first so the result does not depend
    on input order. Standard deviation is the population one (divide by N).

    Raises:
        EmptyDataset: no records
    """
    if metric not in config.METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {config.METRICS}")
    ordered = sorted(records, key=lambda r: (r.content_hash, r.tool_version))
    if not ordered:
        raise EmptyDataset(f"dataset {dataset_id!r} has no records")

    values = [r.value(metric) for r in ordered]
    n = len(values)
    lo, hi = min(values), max(values)
    mean = min(max(math.fsum(values) / n, lo), hi)
    std_dev = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)

    arr = np.asarray(values, dtype=np.float64)
    q1, median, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75], method="linear"))
    histogram, clamped = _histogram(arr, bin_width, value_range)
    if clamped:
        log.warning(
            "%s: %d %s value(s) outside [%g, %g] clamped into edge bins",
            dataset_id, clamped, metric, *value_range,
        )

    return DatasetDistribution(
        dataset_id=dataset_id,
        metric=metric,
        count=n,
        mean=mean,
        std_dev=std_dev,
        min=lo,
        max=hi,
        q1=q1,
        median=median,
        q3=q3,
        bin_width=bin_width,
        histogram=histogram,
        histogram_range=tuple(value_range),
        clamped=clamped,
    )


def count_modes(histogram: Iterable[int]) -> int:
    """Local maxima of the 3-bin moving sum.

    A run of equal values is one peak when it is strictly greater than the
    values on both sides of the run; positions outside the histogram count
    as lower than any bin.
    """
    counts = np.asarray(list(histogram), dtype=np.int64)
    if counts.size == 0 or not counts.any():
        return 0
    smoothed = np.convolve(counts, np.ones(3, dtype=np.int64), mode="same")
    modes = 0
    k = 0
    n = smoothed.size
    while k < n:
        end = k
        while end + 1 < n and smoothed[end + 1] == smoothed[k]:
            end += 1
        left_ok = k == 0 or smoothed[k - 1] < smoothed[k]
        right_ok = end == n - 1 or smoothed[end + 1] < smoothed[k]
        if left_ok and right_ok and smoothed[k] > 0:
            modes += 1
        k = end + 1
    return modes


def spread_descriptors(d: DatasetDistribution) -> SpreadDescriptors:
    """Coefficient of variation, interquartile range and mode count.

    CV is None when the mean is 0.

    Raises:
        EmptyDataset: fewer than two records
    """
    if d.count < 2:
        raise EmptyDataset(f"dataset {d.dataset_id!r} needs at least 2 records for spread, has {d.count}")
    cv: Optional[float]
    if d.mean == 0:
        log.warning("%s: mean %s is 0, coefficient of variation undefined", d.dataset_id, d.metric)
        cv = None
    else:
        cv = d.std_dev / d.mean
    return SpreadDescriptors(cv=cv, iqr=d.q3 - d.q1, modes=count_modes(d.histogram))
