import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadslice.errors import DegenerateLabelsError
from roadslice.events import Direction, EventRecord, Severity
from roadslice.metrics import (
    auc,
    auprc,
    export_heatmap,
    pairwise_auc,
    pr_auc,
    pr_curve,
    read_heatmap,
    roc_auc,
    roc_curve,
)


class TestRoc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.3], [1, 1, 0]) == 1.0

    def test_half_from_pairwise(self):
        scores, labels = [0.9, 0.3, 0.6], [1, 1, 0]
        assert roc_auc(scores, labels) == pytest.approx(0.5)
        assert pairwise_auc(scores, labels) == pytest.approx(0.5)

    def test_label_inversion_flips_area(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(size=60)
        labels = rng.integers(0, 2, size=60)
        a = roc_auc(scores, labels)
        assert roc_auc(scores, 1 - labels) == pytest.approx(1.0 - a)

    def test_endpoints(self):
        fpr, tpr, _ = roc_curve([0.9, 0.1, 0.5, 0.7], [1, 0, 0, 1])
        assert (fpr[0], tpr[0]) == (0.0, 0.0)
        assert (fpr[-1], tpr[-1]) == (1.0, 1.0)

    def test_matches_pairwise_with_ties(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(4, 40))
            scores = rng.choice([0.2, 0.4, 0.6, 0.8], size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                continue
            assert roc_auc(scores, labels) == pytest.approx(
                pairwise_auc(scores, labels), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabelsError):
            roc_auc([0.3, 0.4], [1, 1])
        with pytest.raises(DegenerateLabelsError):
            roc_auc([0.3, 0.4], [0, 0])


class TestPr:
    def test_perfect(self):
        assert pr_auc([0.9, 0.8, 0.3], [1, 1, 0]) == 1.0

    def test_constant_scores_give_base_rate(self):
        labels = [1, 1, 0, 0, 0, 0, 0, 0, 0, 0]
        assert pr_auc([0.5] * 10, labels) == pytest.approx(0.2)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(2)
        scores = rng.uniform(size=12)
        labels = rng.integers(0, 2, size=12)
        labels[0] = 1
        recall, precision, thresholds = pr_curve(scores, labels)
        # recompute every point by brute force
        for r, p, t in zip(recall, precision, thresholds):
            flagged = scores >= t
            tp = int((flagged & (labels == 1)).sum())
            assert p == pytest.approx(tp / flagged.sum())
            assert r == pytest.approx(tp / labels.sum())
        assert auprc(recall, precision) <= 1.0

    def test_needs_positives(self):
        with pytest.raises(DegenerateLabelsError):
            pr_auc([0.1, 0.2], [0, 0])


@given(st.integers(1, 4))
@settings(max_examples=20, deadline=None)
def test_monotone_transform_invariance(power):
    rng = np.random.default_rng(42)
    scores = rng.uniform(0.01, 1.0, size=40)
    labels = rng.integers(0, 2, size=40)
    labels[:2] = [0, 1]
    transformed = scores ** power  # strictly monotone on (0, 1)
    assert roc_auc(scores, labels) == pytest.approx(roc_auc(transformed, labels))
    assert pr_auc(scores, labels) == pytest.approx(pr_auc(transformed, labels))
    assert 0.0 <= roc_auc(scores, labels) <= 1.0
    assert 0.0 <= pr_auc(scores, labels) <= 1.0


class TestHeatmap:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        probs = rng.uniform(size=(5, 4))
        ends = np.arange(30, 35)
        path = tmp_path / "heat.csv"
        export_heatmap(probs, ends, [], path)
        mat, ts = read_heatmap(path)
        assert np.allclose(mat, probs, atol=1e-6)
        assert np.array_equal(ts, ends)

    def test_clipping_on_write(self, tmp_path):
        probs = np.array([[1.7, -0.2]])
        path = tmp_path / "heat.csv"
        export_heatmap(probs, [0], [], path)
        mat, _ = read_heatmap(path)
        assert mat.max() <= 1.0 and mat.min() >= 0.0

    def test_truth_markers(self, tmp_path):
        probs = np.zeros((4, 3))
        ends = np.arange(10, 14)
        events = [EventRecord(1, 11, 2, Severity.SEVERE, Direction.EAST_TO_WEST)]
        path = tmp_path / "heat.csv"
        export_heatmap(probs, ends, events, path)
        truth = (tmp_path / "heat_truth.csv").read_text().splitlines()
        assert truth[0] == "station_id,t,severity"
        assert truth[1:] == ["1,11,Severe", "1,12,Severe"]

    def test_empty_events_header_only(self, tmp_path):
        path = tmp_path / "heat.csv"
        export_heatmap(np.zeros((2, 2)), [0, 1], [], path)
        truth = (tmp_path / "heat_truth.csv").read_text().splitlines()
        assert truth == ["station_id,t,severity"]
