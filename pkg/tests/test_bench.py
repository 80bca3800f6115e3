"""Tests for subset manifests, fidelity curves, correlation and the report bundle."""

import csv
import hashlib
import json
import math

import numpy as np
import pytest

from dataset_complexity.bench import (
    PRNG_ID,
    FidelityCurve,
    average_reduction,
    correlation_report,
    curve_slopes,
    emit_report,
    load_fid_table,
    model_gap,
    parse_report,
    percent_reduction,
    read_manifest,
    report_document,
    sample_ladder,
    sample_subset,
    spearman_rho,
    write_manifest,
)
from dataset_complexity.errors import (
    AmbiguousCurve,
    DegenerateCurve,
    DegenerateDistribution,
    EmptyListing,
    MissingDataset,
    MissingSizePoint,
    SizeExceedsDataset,
)
from dataset_complexity.fid import save_features
from dataset_complexity.metrics import ComplexityRecord
from dataset_complexity.stats import aggregate


def path_hash(path: str) -> str:
    return hashlib.sha256(path.encode("utf-8")).hexdigest()


def listing(n):
    return [f"data/img_{i:03d}.png" for i in range(n)]


def distribution(dataset_id, values):
    records = [
        ComplexityRecord(f"{i:064x}", 0.0, 0.0, float(v), 8, 8, "test")
        for i, v in enumerate(values)
    ]
    return aggregate(records, dataset_id=dataset_id)


def curve(dataset_id, points, model=""):
    return FidelityCurve.from_points(dataset_id, points, model)


# =============================================================================
# Sampling
# =============================================================================

class TestSampleSubset:

    def test_full_size_is_permutation(self):
        m = sample_subset(listing(20), 20, seed=1, hasher=path_hash)
        assert sorted(member.path for member in m.members) == listing(20)

    def test_deterministic(self):
        a = sample_subset(listing(50), 10, seed=42, hasher=path_hash)
        b = sample_subset(listing(50), 10, seed=42, hasher=path_hash)
        assert a.to_json() == b.to_json()

    def test_listing_order_irrelevant(self):
        files = listing(30)
        a = sample_subset(files, 7, seed=3, hasher=path_hash)
        b = sample_subset(list(reversed(files)), 7, seed=3, hasher=path_hash)
        assert a == b

    def test_seeds_differ(self):
        picks = {
            tuple(m.path for m in sample_subset(listing(5), 3, seed=s, hasher=path_hash).members)
            for s in range(10)
        }
        assert len(picks) > 1

    def test_manifest_fields(self):
        m = sample_subset(listing(8), 3, seed=9, dataset_id="chest", hasher=path_hash)
        data = m.to_dict()
        assert data["prng"] == PRNG_ID
        assert data["schema"] == "v1"
        assert data["datasetId"] == "chest"
        assert data["seed"] == 9
        assert [x["contentHash"] for x in data["members"]] == [
            path_hash(x["path"]) for x in data["members"]
        ]

    def test_duplicates_skipped(self):
        files = listing(6)
        # every odd file duplicates its predecessor's content
        hasher = lambda p: path_hash(files[files.index(p) // 2 * 2])
        m = sample_subset(files, 3, seed=0, hasher=hasher)
        assert len({x.content_hash for x in m.members}) == 3
        with pytest.raises(SizeExceedsDataset):
            sample_subset(files, 4, seed=0, hasher=hasher)

    def test_size_exceeds(self):
        with pytest.raises(SizeExceedsDataset):
            sample_subset(listing(3), 4, hasher=path_hash)

    def test_empty_listing(self):
        with pytest.raises(EmptyListing):
            sample_subset([], 1, hasher=path_hash)

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            sample_subset(listing(3), 1, seed=-1, hasher=path_hash)


class TestSampleLadder:

    def test_subsets_nest(self):
        ladder = sample_ladder(listing(40), [25, 5, 10], seed=7, hasher=path_hash)
        assert [m.size for m in ladder] == [5, 10, 25]
        for small, large in zip(ladder, ladder[1:]):
            assert large.members[: small.size] == small.members

    def test_matches_single_draws(self):
        ladder = sample_ladder(listing(40), [5, 10], seed=7, hasher=path_hash)
        assert ladder[0] == sample_subset(listing(40), 5, seed=7, hasher=path_hash)

    def test_manifest_file_round_trip(self, tmp_path):
        m = sample_subset(listing(12), 4, seed=5, hasher=path_hash)
        path = write_manifest(m, tmp_path / "out" / "manifest.json")
        assert read_manifest(path) == m
        assert path.read_text(encoding="utf-8") == m.to_json()


# =============================================================================
# Curves
# =============================================================================

class TestPercentReduction:

    def test_48_percent(self):
        assert percent_reduction(curve("a", [(500, 100.0), (2500, 52.0)])) == 0.48

    def test_31_percent(self):
        assert percent_reduction(curve("a", [(500, 100.0), (2500, 69.0)])) == 0.31

    def test_flat(self):
        assert percent_reduction(curve("a", [(500, 50.0), (2500, 50.0)])) == 0.0

    def test_reaches_one_only_at_zero(self):
        assert percent_reduction(curve("a", [(500, 20.0), (2500, 0.0)])) == 1.0

    def test_zero_start(self):
        with pytest.raises(ZeroDivisionError):
            percent_reduction(curve("a", [(500, 0.0), (2500, 3.0)]))

    def test_degenerate(self):
        with pytest.raises(DegenerateCurve):
            curve("a", [(500, 10.0)])

    def test_unsorted_points_are_ordered(self):
        c = curve("a", [(2500, 52.0), (500, 100.0), (1000, 60.0)])
        assert c.sizes == [500, 1000, 2500]

    def test_duplicate_size_rejected(self):
        with pytest.raises(ValueError):
            curve("a", [(500, 10.0), (500, 11.0)])

    def test_negative_fid_rejected(self):
        with pytest.raises(ValueError):
            curve("a", [(500, 10.0), (1000, -1.0)])


class TestCurveSlopes:

    def test_slopes_and_plateau(self):
        c = curve("a", [(500, 100.0), (1000, 60.0), (2500, 58.0)])
        slopes = curve_slopes(c)
        assert slopes[0].slope == pytest.approx(-0.08)
        assert slopes[1].slope == pytest.approx(-2.0 / 1500.0)
        assert [s.plateau for s in slopes] == [False, False]
        assert [s.plateau for s in curve_slopes(c, 1e-2)] == [False, True]

    def test_flat_is_plateau(self):
        (interval,) = curve_slopes(curve("a", [(500, 30.0), (1000, 30.0)]))
        assert interval.slope == 0.0
        assert interval.plateau

    def test_increasing_fid(self):
        slopes = curve_slopes(curve("a", [(500, 10.0), (1000, 20.0), (2500, 80.0)]))
        assert all(s.slope > 0 for s in slopes)
        assert not any(s.plateau for s in slopes)


class TestModelComparison:

    CURVES = [
        curve("chest", [(500, 100.0), (2500, 52.0)], "sg2"),
        curve("brain", [(500, 80.0), (2500, 40.0)], "sg2"),
        curve("chest", [(500, 50.0), (2500, 26.0)], "sg3"),
        curve("brain", [(500, 40.0), (2500, 20.0)], "sg3"),
    ]

    def test_average_reduction(self):
        # (0.48 + 0.5) / 2
        assert average_reduction(self.CURVES, "sg2") == pytest.approx(0.49)

    def test_average_reduction_unknown_model(self):
        with pytest.raises(DegenerateCurve):
            average_reduction(self.CURVES, "dcgan")

    def test_average_reduction_skips_zero_start(self):
        curves = [
            curve("a", [(500, 100.0), (2500, 52.0)], "sg3"),
            curve("b", [(500, 0.0), (2500, 0.0)], "sg3"),
        ]
        assert average_reduction(curves, "sg3") == pytest.approx(0.48)

    def test_average_reduction_all_zero_start(self):
        with pytest.raises(DegenerateCurve):
            average_reduction([curve("b", [(500, 0.0), (2500, 0.0)], "sg3")], "sg3")

    def test_model_gap(self):
        assert model_gap(self.CURVES, "sg2", "sg3") == pytest.approx(0.5)

    def test_model_gap_no_overlap(self):
        with pytest.raises(DegenerateCurve):
            model_gap(self.CURVES, "sg2", "dcgan")


class TestLoadFidTable:

    def test_score_table(self, tmp_path):
        path = tmp_path / "fid.csv"
        path.write_text(
            "dataset_id,model_label,training_size,fid\n"
            "chest,sg2,2500,52\n"
            "chest,sg2,500,100\n"
            "brain,sg2,500,80\n"
            "brain,sg2,2500,40\n"
        )
        curves = load_fid_table(path)
        assert [(c.dataset_id, c.model_label) for c in curves] == [("brain", "sg2"), ("chest", "sg2")]
        assert curves[1].points == ((500, 100.0), (2500, 52.0))

    def test_feature_table(self, tmp_path):
        rng = np.random.default_rng(0)
        real = rng.normal(size=(40, 3))
        save_features(real, tmp_path / "real.feat")
        save_features(real, tmp_path / "gen_500.feat")
        save_features(real + 1.0, tmp_path / "gen_1000.feat")
        path = tmp_path / "pairs.csv"
        path.write_text(
            "dataset_id,model_label,training_size,real_features,generated_features\n"
            "chest,sg3,500,real.feat,gen_500.feat\n"
            "chest,sg3,1000,real.feat,gen_1000.feat\n"
        )
        (c,) = load_fid_table(path)
        assert c.fid_at(500) <= 1e-6
        assert c.fid_at(1000) == pytest.approx(3.0, rel=1e-5)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "fid.csv"
        path.write_text("dataset,size,score\nchest,500,1\n")
        with pytest.raises(ValueError):
            load_fid_table(path)

    def test_bad_value_has_line_number(self, tmp_path):
        path = tmp_path / "fid.csv"
        path.write_text("dataset_id,model_label,training_size,fid\nchest,,500,abc\n")
        with pytest.raises(ValueError, match=":2:"):
            load_fid_table(path)


# =============================================================================
# Correlation
# =============================================================================

def oracle_spearman(x, y):
    def ranks(values):
        result = []
        for v in values:
            below = sum(1 for w in values if w < v)
            equal = sum(1 for w in values if w == v)
            result.append(below + (equal + 1) / 2)
        return result

    rx, ry = ranks(x), ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return cov / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))


class TestSpearman:

    def test_perfect_agreement(self):
        assert spearman_rho([1.0, 2.0, 3.0], [10.0, 20.0, 30.0]) == 1.0

    def test_perfect_inversion(self):
        assert spearman_rho([1.0, 2.0, 3.0], [30.0, 20.0, 10.0]) == -1.0

    def test_tie_matches_oracle(self):
        x, y = [1.0, 2.0, 2.0, 4.0], [10.0, 30.0, 20.0, 40.0]
        assert spearman_rho(x, y) == pytest.approx(oracle_spearman(x, y), abs=1e-12)
        assert spearman_rho(x, y) == pytest.approx(4.5 / math.sqrt(22.5))

    def test_random_with_ties(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            x = rng.integers(0, 5, 8).tolist()
            y = rng.integers(0, 5, 8).tolist()
            if len(set(x)) == 1 or len(set(y)) == 1:
                continue
            assert spearman_rho(x, y) == pytest.approx(oracle_spearman(x, y), abs=1e-12)

    def test_constant_is_absent(self):
        assert spearman_rho([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


class TestCorrelationReport:

    DISTRIBUTIONS = [
        distribution("brain", [2.0, 4.0]),        # mean 3
        distribution("chest", [5.0, 7.0]),        # mean 6
        distribution("knee", [8.0, 10.0]),        # mean 9
    ]

    def test_inverse_relationship(self):
        curves = [
            curve("brain", [(500, 90.0), (2500, 60.0)]),
            curve("chest", [(500, 70.0), (2500, 40.0)]),
            curve("knee", [(500, 50.0), (2500, 20.0)]),
        ]
        report = correlation_report(self.DISTRIBUTIONS, curves, 2500)
        assert report.spearman_rho == -1.0
        assert [p.dataset_id for p in report.pairs] == ["brain", "chest", "knee"]
        assert report.pairs[0].fid == 60.0

    def test_agreement(self):
        curves = [
            curve("brain", [(500, 10.0), (2500, 5.0)]),
            curve("chest", [(500, 20.0), (2500, 15.0)]),
            curve("knee", [(500, 30.0), (2500, 25.0)]),
        ]
        assert correlation_report(self.DISTRIBUTIONS, curves, 2500).spearman_rho == 1.0

    def test_stat_choice(self):
        wide = [
            distribution("a", [5.0, 5.0]),
            distribution("b", [4.0, 6.0]),
            distribution("c", [1.0, 9.0]),
        ]
        curves = [curve(d, [(500, 1.0), (2500, f)]) for d, f in [("a", 10.0), ("b", 20.0), ("c", 30.0)]]
        assert correlation_report(wide, curves, 2500, stat="mean").spearman_rho is None
        assert correlation_report(wide, curves, 2500, stat="stdDev").spearman_rho == 1.0
        assert correlation_report(wide, curves, 2500, stat="cv").spearman_rho == 1.0

    def test_cv_with_zero_mean(self):
        zero = [distribution("a", [0.0, 0.0])]
        with pytest.raises(DegenerateDistribution):
            correlation_report(zero, [curve("a", [(500, 1.0), (2500, 2.0)])], 2500, stat="cv")

    def test_rho_needs_three(self):
        curves = [
            curve("brain", [(500, 1.0), (2500, 2.0)]),
            curve("chest", [(500, 1.0), (2500, 3.0)]),
        ]
        report = correlation_report(self.DISTRIBUTIONS[:2], curves, 2500)
        assert report.spearman_rho is None
        assert len(report.pairs) == 2

    def test_missing_dataset(self):
        curves = [curve("brain", [(500, 1.0), (2500, 2.0)])]
        with pytest.raises(MissingDataset):
            correlation_report(self.DISTRIBUTIONS, curves, 2500)

    def test_missing_size(self):
        curves = [curve(d, [(500, 1.0), (1000, 2.0)]) for d in ("brain", "chest", "knee")]
        with pytest.raises(MissingSizePoint):
            correlation_report(self.DISTRIBUTIONS, curves, 2500)

    def test_model_label(self):
        curves = [curve(d, [(500, 1.0), (2500, f)], "sg2") for d, f in [("brain", 3.0), ("chest", 2.0), ("knee", 1.0)]]
        curves += [curve(d, [(500, 1.0), (2500, f)], "sg3") for d, f in [("brain", 1.0), ("chest", 2.0), ("knee", 3.0)]]
        with pytest.raises(AmbiguousCurve):
            correlation_report(self.DISTRIBUTIONS, curves, 2500)
        assert correlation_report(self.DISTRIBUTIONS, curves, 2500, model_label="sg2").spearman_rho == -1.0
        assert correlation_report(self.DISTRIBUTIONS, curves, 2500, model_label="sg3").spearman_rho == 1.0


# =============================================================================
# Report bundle
# =============================================================================

class TestReport:

    CURVES = [
        curve("brain", [(500, 90.0), (1000, 70.0), (2500, 60.0)], "sg2"),
        curve("chest", [(500, 100.0), (1000, 61.0), (2500, 52.0)], "sg2"),
    ]

    def test_requires_curves(self):
        with pytest.raises(DegenerateCurve):
            report_document([])

    def test_document_contents(self):
        doc = report_document(self.CURVES)
        assert doc["schema"] == "v1"
        assert doc["curves"][1]["reduction"] == 0.48
        assert len(doc["curves"][0]["slopes"]) == 2
        assert doc["averageReductions"]["sg2"] == pytest.approx((1 / 3 + 0.48) / 2)

    def test_nine_significant_digits(self):
        doc = report_document([curve("a", [(500, 3.0), (1500, 1.0)])])
        assert doc["curves"][0]["reduction"] == 0.666666667

    def test_zero_start_reduction_absent(self):
        doc = report_document([curve("a", [(500, 0.0), (1000, 1.0)])])
        assert doc["curves"][0]["reduction"] is None

    def test_zero_start_curve_keeps_model_average(self):
        doc = report_document([
            curve("a", [(500, 100.0), (2500, 52.0)], "sg3"),
            curve("b", [(500, 0.0), (2500, 0.0)], "sg3"),
        ])
        assert doc["averageReductions"] == {"sg3": 0.48}

    def test_colliding_ids_get_distinct_files(self, tmp_path):
        curves = [
            curve("a b", [(500, 10.0), (2500, 5.0)], "sg2"),
            curve("a-b", [(500, 20.0), (2500, 5.0)], "sg2"),
        ]
        dists = [distribution("a b", [1.0, 2.0]), distribution("a-b", [3.0, 4.0])]
        files = emit_report(tmp_path, curves, dists)
        assert [p.name for p in files.curve_files] == ["a-b_sg2.csv", "a-b_sg2-2.csv"]
        assert [p.name for p in files.distribution_files] == ["a-b.csv", "a-b-2.csv"]
        with open(files.curve_files[1], newline="") as f:
            assert next(csv.DictReader(f))["fid"] == "20"

    def test_emit_and_parse(self, tmp_path):
        dists = [distribution("brain", [2.0, 3.0]), distribution("chest", [4.0, 6.0])]
        files = emit_report(tmp_path / "bundle", self.CURVES, dists)
        assert files.report.exists()
        assert [p.name for p in files.curve_files] == ["brain_sg2.csv", "chest_sg2.csv"]
        assert [p.name for p in files.distribution_files] == ["brain.csv", "chest.csv"]

        with open(files.curve_files[1], newline="") as f:
            rows = list(csv.DictReader(f))
        assert rows == [
            {"size": "500", "fid": "100"},
            {"size": "1000", "fid": "61"},
            {"size": "2500", "fid": "52"},
        ]
        assert files.distribution_files[0].read_text().startswith("bin_low,bin_high,count\n")

        bundle = parse_report(tmp_path / "bundle")
        assert bundle.curves == tuple(self.CURVES)
        assert [d.dataset_id for d in bundle.distributions] == ["brain", "chest"]
        assert bundle.average_reductions["sg2"] == pytest.approx((1 / 3 + 0.48) / 2)

    def test_correlations_in_report(self, tmp_path):
        dists = [
            distribution("a", [1.0, 1.5]),
            distribution("b", [3.0, 3.5]),
            distribution("c", [5.0, 5.5]),
        ]
        curves = [curve(d, [(500, 50.0), (2500, f)]) for d, f in [("a", 30.0), ("b", 20.0), ("c", 10.0)]]
        report = correlation_report(dists, curves, 2500)
        emit_report(tmp_path, curves, dists, [report])
        document = json.loads((tmp_path / "report.json").read_text())
        assert document["correlations"][0]["spearmanRho"] == -1.0
        assert parse_report(tmp_path).correlations[0].spearman_rho == -1.0

    def test_model_gaps_keyed_by_pair(self):
        curves = self.CURVES + [
            curve("brain", [(500, 45.0), (2500, 30.0)], "sg3"),
        ]
        doc = report_document(curves)
        assert set(doc["modelGaps"]) == {"sg2|sg3"}
        assert doc["modelGaps"]["sg2|sg3"] == pytest.approx(0.5)
