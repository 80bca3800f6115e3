"""Tests for per-dataset distributions and spread descriptors."""

import json
import math

import numpy as np
import pytest

from dataset_complexity.errors import EmptyDataset
from dataset_complexity.metrics import ComplexityRecord
from dataset_complexity.stats import (
    DatasetDistribution,
    aggregate,
    count_modes,
    spread_descriptors,
)


def make_records(values, metric="delentropy"):
    """One record per value, with distinct synthetic content hashes."""
    records = []
    for i, v in enumerate(values):
        bits = {"shannon_bits": 0.0, "glcm_bits": 0.0, "delentropy_bits": 0.0}
        bits[f"{metric}_bits"] = float(v)
        records.append(ComplexityRecord(
            content_hash=f"{i:064x}", width=8, height=8, tool_version="test", **bits,
        ))
    return records


class TestAggregate:

    def test_single_record(self):
        d = aggregate(make_records([3.0]))
        assert d.count == 1
        assert d.mean == 3.0
        assert d.std_dev == 0.0
        assert d.min == d.max == d.median == 3.0

    def test_population_std(self):
        d = aggregate(make_records([2.0, 4.0]))
        assert d.mean == 3.0
        assert d.std_dev == 1.0

    def test_two_pass_oracle(self):
        pool = [1.25, 3.5, 7.0, 2.2, 9.9, 4.4, 0.3, 5.75, 6.1, 8.05]
        values = [pool[(i * 7) % len(pool)] + 0.01 * (i % 13) for i in range(100)]
        d = aggregate(make_records(values))
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        assert d.mean == pytest.approx(mean, abs=1e-12)
        assert d.std_dev == pytest.approx(math.sqrt(var), abs=1e-12)

    def test_order_independent(self):
        records = make_records([5.5, 1.1, 3.3, 9.9, 2.2])
        forward = aggregate(records)
        backward = aggregate(list(reversed(records)))
        assert forward == backward

    def test_metric_selection(self):
        d = aggregate(make_records([1.0, 3.0], metric="shannon"), metric="shannon")
        assert d.mean == 2.0
        assert d.metric == "shannon"

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            aggregate(make_records([1.0]), metric="fid")

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            aggregate([])

    def test_quartiles_linear_interpolation(self):
        d = aggregate(make_records([1.0, 2.0, 3.0, 4.0]))
        # position (n - 1) * q: 0.75 -> 1.75, 1.5 -> 2.5, 2.25 -> 3.25
        assert (d.q1, d.median, d.q3) == (1.75, 2.5, 3.25)


class TestHistogram:

    def test_layout(self):
        d = aggregate(make_records([0.1, 0.3, 0.3]))
        assert len(d.histogram) == 72
        assert d.histogram[0] == 1
        assert d.histogram[1] == 2
        assert sum(d.histogram) == d.count
        assert d.bin_edges()[1] == (0.25, 0.5)

    def test_top_edge_in_last_bin(self):
        d = aggregate(make_records([18.0]))
        assert d.histogram[-1] == 1
        assert d.clamped == 0

    def test_out_of_range_clamped(self, caplog):
        d = aggregate(make_records([20.0, 1.0]))
        assert d.histogram[-1] == 1
        assert d.clamped == 1
        assert "clamped" in caplog.text

    def test_custom_bin_width(self):
        d = aggregate(make_records([0.9, 1.1]), bin_width=1.0)
        assert len(d.histogram) == 18
        assert d.histogram[:2] == (1, 1)

    def test_csv(self):
        d = aggregate(make_records([0.1]))
        lines = d.histogram_csv(9).splitlines()
        assert lines[0] == "bin_low,bin_high,count"
        assert lines[1] == "0,0.25,1"
        assert len(lines) == 73


class TestSpreadDescriptors:

    def test_point_mass(self):
        s = spread_descriptors(aggregate(make_records([4.0] * 10)))
        assert s.cv == 0.0
        assert s.iqr == 0.0
        assert s.modes == 1

    def test_bimodal(self):
        s = spread_descriptors(aggregate(make_records([2.0] * 20 + [6.0] * 20)))
        assert s.modes == 2

    def test_iqr(self):
        s = spread_descriptors(aggregate(make_records([1.0, 2.0, 3.0, 4.0])))
        assert s.iqr == 1.5

    def test_cv(self):
        s = spread_descriptors(aggregate(make_records([2.0, 4.0])))
        assert s.cv == pytest.approx(1.0 / 3.0)

    def test_zero_mean_cv_absent(self):
        s = spread_descriptors(aggregate(make_records([0.0, 0.0])))
        assert s.cv is None

    def test_needs_two_records(self):
        with pytest.raises(EmptyDataset):
            spread_descriptors(aggregate(make_records([1.0])))


class TestCountModes:

    def test_empty(self):
        assert count_modes([0, 0, 0]) == 0

    def test_single_peak(self):
        assert count_modes([0, 1, 5, 1, 0]) == 1

    def test_separated_peaks(self):
        assert count_modes([4, 0, 0, 0, 0, 3, 0, 0]) == 2

    def test_adjacent_noise_is_smoothed(self):
        # 3-bin moving sum merges the neighbouring spikes into one hump
        assert count_modes([0, 0, 3, 2, 3, 0, 0]) == 1


class TestDistributionDocument:

    def test_dict_round_trip(self):
        d = aggregate(make_records([1.5, 2.5, 7.25]), dataset_id="chest")
        data = json.loads(json.dumps(d.to_dict()))
        assert data["datasetId"] == "chest"
        assert data["stdDev"] == d.std_dev
        assert DatasetDistribution.from_dict(data) == d

    def test_inconsistent_histogram_rejected(self):
        data = aggregate(make_records([1.0])).to_dict()
        data["count"] = 2
        with pytest.raises(ValueError):
            DatasetDistribution.from_dict(data)

    def test_numpy_quantile_agrees(self):
        values = np.random.default_rng(1).uniform(0, 10, 57)
        d = aggregate(make_records(values))
        assert d.q3 == pytest.approx(float(np.percentile(values, 75)))
