"""Metric definitions against brute-force oracles, plus report round-trips."""

import numpy as np
import pytest

from earlygesture.errors import DataError
from earlygesture.metrics import (EvalSettings, auc_from_points, confusion_matrix,
                                  emit_report, evaluate_videos, frame_rates,
                                  jaccard_for_class, nttd, parse_summary,
                                  roc_points, segments_from_classes,
                                  thresholded_classes, video_jaccard)
from earlygesture.model import ModelOutput
from earlygesture.objectives import Segment

from oracles import (auc_rank_oracle, frame_rates_oracle, jaccard_oracle,
                     nttd_oracle)


def seg(class_id, start, end, vid="v"):
    return Segment(video_id=vid, class_id=class_id, start=start, end=end)


class TestNttd:
    def test_trigger_at_end_is_one(self):
        assert nttd(20, seg(1, 10, 20)) == 1.0

    def test_formula_example(self):
        assert np.isclose(nttd(15, seg(1, 10, 20)), 6 / 11)

    def test_trigger_at_start(self):
        s = seg(1, 10, 20)
        assert nttd(10, s) == 1 / 11

    def test_outside_segment_is_false_positive(self):
        assert nttd(9, seg(1, 10, 20)) is None
        assert nttd(21, seg(1, 10, 20)) is None

    def test_fuzz_against_counting_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            start = int(rng.integers(0, 30))
            end = start + int(rng.integers(0, 20))
            trigger = int(rng.integers(0, 55))
            got = nttd(trigger, seg(1, start, end))
            want = nttd_oracle(trigger, start, end)
            assert got == want


class TestFrameRates:
    def test_perfect_predictions(self):
        truth = np.array([0, 1, 1, 0, 2])
        assert frame_rates(truth, truth) == (1.0, 0.0)

    def test_all_background_predictions(self):
        truth = np.array([0, 1, 1, 0, 2])
        pred = np.zeros(5, dtype=int)
        assert frame_rates(pred, truth) == (0.0, 0.0)

    def test_undefined_rates_absent(self):
        tpr, fpr = frame_rates(np.array([1, 1]), np.array([1, 1]))
        assert tpr == 1.0 and fpr is None
        tpr, fpr = frame_rates(np.array([0, 0]), np.array([0, 0]))
        assert tpr is None and fpr == 0.0

    def test_fuzz_against_counting_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            truth = rng.integers(0, 4, size=n)
            pred = rng.integers(0, 4, size=n)
            assert frame_rates(pred, truth) == frame_rates_oracle(pred, truth)


class TestRoc:
    def test_perfect_separation_auc_one(self):
        scores = np.concatenate([np.full(50, 0.9), np.full(50, 0.1)])
        positive = np.arange(100) < 50
        points = roc_points(scores, positive, np.linspace(0, 1, 101))
        assert auc_from_points(points) == 1.0

    def test_random_scores_auc_half(self):
        rng = np.random.default_rng(2)
        scores = rng.uniform(size=6000)
        positive = rng.random(6000) < 0.5
        points = roc_points(scores, positive, np.linspace(0, 1, 101))
        assert abs(auc_from_points(points) - 0.5) <= 0.05

    def test_matches_pairwise_rank_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(50, 200))
            scores = rng.uniform(size=n)
            positive = rng.random(n) < rng.uniform(0.2, 0.8)
            if positive.all() or (~positive).all():
                continue
            points = roc_points(scores, positive, np.linspace(0, 1, 101))
            got = auc_from_points(points)
            want = auc_rank_oracle(scores, positive)
            assert abs(got - want) <= 0.01

    def test_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(4)
        scores = rng.uniform(0.05, 0.95, size=400)
        positive = rng.random(400) < 0.5
        grid = np.linspace(0, 1, 101)
        base = auc_from_points(roc_points(scores, positive, grid))
        squashed = auc_from_points(roc_points(scores ** 3, positive, grid))
        assert abs(base - squashed) <= 0.02


class TestJaccard:
    def test_partial_overlap(self):
        assert jaccard_for_class([seg(1, 10, 20)], [seg(1, 15, 25)], 1) == 6 / 16

    def test_exact_match(self):
        assert jaccard_for_class([seg(1, 3, 9)], [seg(1, 3, 9)], 1) == 1.0

    def test_absent_both_excluded(self):
        assert jaccard_for_class([], [], 1) is None

    def test_absent_one_side_zero(self):
        assert jaccard_for_class([seg(1, 0, 4)], [], 1) == 0.0
        assert jaccard_for_class([], [seg(1, 0, 4)], 1) == 0.0

    def test_symmetry_and_order_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a = [seg(1, int(s), int(s) + int(rng.integers(0, 6)))
                 for s in rng.integers(0, 40, size=rng.integers(1, 4)) * 3]
            b = [seg(1, int(s), int(s) + int(rng.integers(0, 6)))
                 for s in rng.integers(0, 40, size=rng.integers(1, 4)) * 3]
            fwd = jaccard_for_class(a, b, 1)
            rev = jaccard_for_class(b, a, 1)
            assert fwd == rev
            shuffled = list(a)
            rng.shuffle(shuffled)
            assert jaccard_for_class(shuffled, b, 1) == fwd

    def test_fuzz_against_set_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            def random_segments():
                segments, cursor = [], 0
                while cursor < 30 and rng.random() < 0.6:
                    start = cursor + int(rng.integers(0, 4))
                    end = start + int(rng.integers(0, 5))
                    segments.append(seg(int(rng.integers(1, 3)), start, end))
                    cursor = end + 2
                return segments
            a, b = random_segments(), random_segments()
            for c in (1, 2):
                assert jaccard_for_class(a, b, c) == jaccard_oracle(a, b, c)

    def test_segments_from_classes(self):
        classes = np.array([0, 1, 1, 2, 0, 2, 2])
        got = segments_from_classes(classes, "v")
        assert got == [seg(1, 1, 2), seg(2, 3, 3), seg(2, 5, 6)]

    def test_video_jaccard_means_over_present_classes(self):
        pred = [seg(1, 0, 4)]
        true = [seg(1, 0, 4), seg(2, 10, 14)]
        assert video_jaccard(pred, true, [1, 2, 3]) == 0.5


class TestConfusion:
    def test_row_sums_equal_support(self):
        rng = np.random.default_rng(7)
        truth = rng.integers(0, 4, size=100)
        pred = rng.integers(0, 4, size=100)
        matrix = confusion_matrix(pred, truth, 3)
        for c in range(4):
            assert matrix[c].sum() == np.sum(truth == c)


class TestEvaluateAndReport:
    @staticmethod
    def _toy_split(rng, n_videos=6, k=3, t=14):
        outputs, segment_lists, labels = [], [], []
        for _ in range(n_videos):
            label = int(rng.integers(1, k + 1))
            start = int(rng.integers(1, 5))
            end = start + int(rng.integers(3, 7))
            segments = [seg(label, start, end)]
            gpm = np.zeros(t)
            gpm[start:end + 1] = np.linspace(0.05, 0.95, end - start + 1)
            probs = np.full((t, k + 1), 0.04)
            for i in range(t):
                c = label if start <= i <= end else 0
                probs[i, c] = 1.0 - 0.04 * k
            outputs.append(ModelOutput(gpm=gpm, probs=probs))
            segment_lists.append(segments)
            labels.append(label)
        return outputs, segment_lists, labels

    def test_good_model_scores_high(self):
        rng = np.random.default_rng(8)
        outputs, segment_lists, labels = self._toy_split(rng)
        report = evaluate_videos("depth", outputs, segment_lists, labels,
                                 EvalSettings())
        assert report.accuracy_peak == 1.0
        assert report.accuracy_consensus == 1.0
        assert report.auc > 0.95
        assert report.jaccard_overall == 1.0
        assert report.mean_nttd is not None and report.mean_nttd < 0.9

    def test_report_files_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        outputs, segment_lists, labels = self._toy_split(rng)
        report = evaluate_videos("depth", outputs, segment_lists, labels,
                                 EvalSettings())
        traces = {f"vid{i}": (outputs[i], segment_lists[i])
                  for i in range(len(outputs))}
        emit_report([report], tmp_path, traces=traces)
        table = parse_summary(tmp_path / "metrics_summary.csv")
        assert table[("depth", "accuracy_peak")] == report.accuracy_peak
        assert table[("depth", "roc_auc")] == report.auc
        # ROC rows must come back sorted by FPR ascending.
        rows = (tmp_path / "roc_depth.csv").read_text().splitlines()[1:]
        fprs = [float(r.split(",")[1]) for r in rows]
        assert fprs == sorted(fprs)
        # Trace files carry exactly one row per frame.
        for i in range(len(outputs)):
            lines = (tmp_path / "traces" / f"vid{i}.csv").read_text().splitlines()
            assert len(lines) == 1 + len(outputs[i])

    def test_thresholded_classes_gate_on_gpm(self):
        out = ModelOutput(gpm=np.array([0.2, 0.8]),
                          probs=np.array([[0.1, 0.9], [0.1, 0.9]]))
        assert list(thresholded_classes(out, 0.5)) == [0, 1]

    def test_unwritable_report_path(self, tmp_path):
        blocker = tmp_path / "blocked"
        blocker.write_text("file, not a directory")
        rng = np.random.default_rng(10)
        outputs, segment_lists, labels = self._toy_split(rng)
        report = evaluate_videos("depth", outputs, segment_lists, labels,
                                 EvalSettings())
        with pytest.raises(DataError):
            emit_report([report], blocker / "sub")
