"""Evaluation: early-detection latency, frame rates, ROC/AUC, temporal
localization, and offline classification, plus plain-text report files.

Frame counting is inclusive everywhere, matching the inclusive annotation
convention: a segment [s, e] spans e - s + 1 frames and a trigger at frame
s has observed 1/(e - s + 1) of the gesture.

Frame-level TPR/FPR pool frames over all videos (micro-averaging), and the
report labels them as pooled rates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .detector import TriggerConfig, classify_consensus, peak_class, run_trigger
from .errors import DataError
from .model import ModelOutput
from .objectives import NO_GESTURE, Segment, frame_labels, gpm_target


def nttd(trigger_frame: int, segment: Segment) -> Optional[float]:
    """Fraction of the gesture observed before the trigger, None if the
    trigger lies outside the segment (a false positive, by definition)."""
    if trigger_frame < segment.start or trigger_frame > segment.end:
        return None
    return (trigger_frame - segment.start + 1) / segment.length


def frame_rates(predicted: np.ndarray, truth: np.ndarray
                ) -> tuple[Optional[float], Optional[float]]:
    """Frame-level (TPR, FPR).

    TPR: gesture frames predicted with their true class, over all gesture
    frames. FPR: background frames predicted as any gesture, over all
    background frames. Either rate is None when its denominator is empty.
    """
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DataError(f"prediction length {predicted.shape} != truth {truth.shape}")
    gesture = truth != NO_GESTURE
    background = ~gesture
    tpr = None
    if gesture.any():
        tpr = float(np.sum(gesture & (predicted == truth)) / np.sum(gesture))
    fpr = None
    if background.any():
        fpr = float(np.sum(background & (predicted != NO_GESTURE)) / np.sum(background))
    return tpr, fpr


def thresholded_classes(output: ModelOutput, epsilon: float) -> np.ndarray:
    """Per-frame decisions at threshold epsilon: the frame's most likely
    class where progression exceeds epsilon, background otherwise."""
    classes = output.classes.copy()
    classes[output.gpm <= epsilon] = NO_GESTURE
    return classes


def roc_points(scores: np.ndarray, positive: np.ndarray,
               grid: np.ndarray) -> list[tuple[float, float, float]]:
    """(epsilon, FPR, TPR) per grid threshold for pooled frame scores."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    points = []
    for eps in grid:
        fired = scores > eps
        tpr = float(np.sum(fired & positive) / n_pos) if n_pos else 0.0
        fpr = float(np.sum(fired & ~positive) / n_neg) if n_neg else 0.0
        points.append((float(eps), fpr, tpr))
    return points


def auc_from_points(points: Sequence[tuple[float, float, float]]) -> float:
    """Trapezoidal area under the (FPR, TPR) curve, sorted by FPR.

    The curve is anchored at its theoretical endpoints (0,0) and (1,1),
    which the threshold sweep may not reach when scores sit exactly on a
    grid boundary.
    """
    curve = sorted({(fpr, tpr) for _, fpr, tpr in points} | {(0.0, 0.0), (1.0, 1.0)})
    fprs = np.asarray([c[0] for c in curve])
    tprs = np.asarray([c[1] for c in curve])
    return float(np.trapezoid(tprs, fprs))


def segments_from_classes(classes: np.ndarray, video_id: str = "") -> list[Segment]:
    """Maximal constant-class runs of a frame classifier's output."""
    segments = []
    t = 0
    n = len(classes)
    while t < n:
        if classes[t] == NO_GESTURE:
            t += 1
            continue
        start = t
        while t + 1 < n and classes[t + 1] == classes[t]:
            t += 1
        segments.append(Segment(video_id=video_id, class_id=int(classes[start]),
                                start=start, end=t))
        t += 1
    return segments


def jaccard_for_class(predicted: Sequence[Segment], truth: Sequence[Segment],
                      class_id: int) -> Optional[float]:
    """Frame-set intersection over union for one class in one video.

    None when the class appears on neither side; 0.0 when it appears on
    exactly one.
    """
    pred_frames = set()
    for seg in predicted:
        if seg.class_id == class_id:
            pred_frames.update(seg.frames())
    true_frames = set()
    for seg in truth:
        if seg.class_id == class_id:
            true_frames.update(seg.frames())
    if not pred_frames and not true_frames:
        return None
    union = pred_frames | true_frames
    return len(pred_frames & true_frames) / len(union)


def video_jaccard(predicted: Sequence[Segment], truth: Sequence[Segment],
                  class_ids: Sequence[int]) -> Optional[float]:
    """Mean over the classes present in either segment set."""
    scores = [s for c in class_ids
              if (s := jaccard_for_class(predicted, truth, c)) is not None]
    return float(np.mean(scores)) if scores else None


def confusion_matrix(predicted: Sequence[int], truth: Sequence[int],
                     n_classes: int) -> np.ndarray:
    """Rows are true classes 0..N, columns predicted classes 0..N."""
    matrix = np.zeros((n_classes + 1, n_classes + 1), dtype=np.int64)
    for p, t in zip(predicted, truth):
        matrix[t, p] += 1
    return matrix


# ---------------------------------------------------------------------------
# Whole-split evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalSettings:
    roc_grid_points: int = 101
    operating_points: tuple = (0.25, 0.5, 0.75)
    epsilon: float = 0.5
    tau: float = 1.0
    refractory: int = 8


@dataclass
class OperatingPoint:
    nttd_bound: float
    epsilon: Optional[float]
    mean_nttd: Optional[float]
    fpr: Optional[float]
    tpr: Optional[float]


@dataclass
class ModalityReport:
    modality: str
    n_videos: int
    accuracy_peak: float
    accuracy_consensus: float
    accuracy_global_vote: float
    tau: float
    confusion: np.ndarray
    auc: float
    roc_rows: list = field(default_factory=list)        # (epsilon, fpr, tpr)
    curve_rows: list = field(default_factory=list)      # (epsilon, mean_nttd, fpr, tpr, events)
    operating_points: list = field(default_factory=list)
    mean_nttd: Optional[float] = None                   # at the configured epsilon
    jaccard_overall: Optional[float] = None
    jaccard_per_class: dict = field(default_factory=dict)
    train_accuracy: Optional[float] = None              # filled when fusion is fitted


def _sweep_row(outputs: Sequence[ModelOutput], segment_lists: Sequence[list[Segment]],
               epsilon: float, refractory: int) -> tuple[float, Optional[float],
                                                         Optional[float], Optional[float], int]:
    """Online-trigger statistics at one threshold, pooled over videos."""
    config = TriggerConfig(epsilon=epsilon, refractory=refractory)
    nttds = []
    n_events = 0
    pred_pool = []
    truth_pool = []
    for output, segments in zip(outputs, segment_lists):
        events = run_trigger(output, config)
        n_events += len(events)
        for event in events:
            for seg in segments:
                if seg.start <= event.frame <= seg.end:
                    if seg.class_id == event.class_id:
                        nttds.append(nttd(event.frame, seg))
                    break
        pred_pool.append(thresholded_classes(output, epsilon))
        truth_pool.append(frame_labels(segments, len(output)))
    tpr, fpr = frame_rates(np.concatenate(pred_pool), np.concatenate(truth_pool))
    mean_nttd = float(np.mean(nttds)) if nttds else None
    return epsilon, mean_nttd, fpr, tpr, n_events


def evaluate_videos(modality: str, outputs: Sequence[ModelOutput],
                    segment_lists: Sequence[list[Segment]], labels: Sequence[int],
                    settings: EvalSettings) -> ModalityReport:
    """All metrics for one modality over one split."""
    n_classes = outputs[0].probs.shape[1] - 1
    labels = list(labels)

    peak_preds = [peak_class(out) for out in outputs]
    consensus_preds = [classify_consensus(out, settings.tau) for out in outputs]
    global_preds = [classify_consensus(out, None) for out in outputs]
    accuracy = lambda preds: float(np.mean([p == l for p, l in zip(preds, labels)]))

    scores = np.concatenate([out.gpm for out in outputs])
    positives = np.concatenate(
        [frame_labels(segs, len(out)) != NO_GESTURE
         for out, segs in zip(outputs, segment_lists)])
    grid = np.linspace(0.0, 1.0, settings.roc_grid_points)
    roc = roc_points(scores, positives, grid)

    curve = [_sweep_row(outputs, segment_lists, float(eps), settings.refractory)
             for eps in grid]
    points = []
    for bound in settings.operating_points:
        eligible = [row for row in curve if row[1] is not None and row[1] <= bound]
        if eligible:
            chosen = max(eligible, key=lambda row: row[1])
            points.append(OperatingPoint(nttd_bound=bound, epsilon=chosen[0],
                                         mean_nttd=chosen[1], fpr=chosen[2], tpr=chosen[3]))
        else:
            points.append(OperatingPoint(nttd_bound=bound, epsilon=None,
                                         mean_nttd=None, fpr=None, tpr=None))

    default_row = _sweep_row(outputs, segment_lists, settings.epsilon, settings.refractory)

    class_ids = list(range(1, n_classes + 1))
    per_video_scores = []
    per_class_scores: dict[int, list[float]] = {c: [] for c in class_ids}
    for out, segments in zip(outputs, segment_lists):
        predicted = segments_from_classes(out.classes)
        score = video_jaccard(predicted, segments, class_ids)
        if score is not None:
            per_video_scores.append(score)
        for c in class_ids:
            s = jaccard_for_class(predicted, segments, c)
            if s is not None:
                per_class_scores[c].append(s)

    return ModalityReport(
        modality=modality,
        n_videos=len(outputs),
        accuracy_peak=accuracy(peak_preds),
        accuracy_consensus=accuracy(consensus_preds),
        accuracy_global_vote=accuracy(global_preds),
        tau=settings.tau,
        confusion=confusion_matrix(peak_preds, labels, n_classes),
        auc=auc_from_points(roc),
        roc_rows=sorted(roc, key=lambda r: (r[1], r[0])),
        curve_rows=curve,
        operating_points=points,
        mean_nttd=default_row[1],
        jaccard_overall=float(np.mean(per_video_scores)) if per_video_scores else None,
        jaccard_per_class={c: (float(np.mean(v)) if v else None)
                           for c, v in per_class_scores.items()},
    )


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return "nan"
    return f"{value:.17g}"


def summary_rows(report: ModalityReport) -> list[tuple[str, str, str]]:
    rows = [
        (report.modality, "n_videos", _fmt(report.n_videos)),
        (report.modality, "accuracy_peak", _fmt(report.accuracy_peak)),
        (report.modality, f"accuracy_consensus_tau_{report.tau:g}",
         _fmt(report.accuracy_consensus)),
        (report.modality, "accuracy_global_vote", _fmt(report.accuracy_global_vote)),
        (report.modality, "roc_auc", _fmt(report.auc)),
        (report.modality, "mean_nttd_at_default_epsilon", _fmt(report.mean_nttd)),
        (report.modality, "jaccard_overall", _fmt(report.jaccard_overall)),
    ]
    for c, score in sorted(report.jaccard_per_class.items()):
        rows.append((report.modality, f"jaccard_class_{c}", _fmt(score)))
    for pt in report.operating_points:
        tag = f"nttd_le_{pt.nttd_bound:g}"
        rows.append((report.modality, f"{tag}_epsilon", _fmt(pt.epsilon)))
        rows.append((report.modality, f"{tag}_mean_nttd", _fmt(pt.mean_nttd)))
        rows.append((report.modality, f"{tag}_fpr", _fmt(pt.fpr)))
        rows.append((report.modality, f"{tag}_tpr", _fmt(pt.tpr)))
    if report.train_accuracy is not None:
        rows.append((report.modality, "train_accuracy_peak", _fmt(report.train_accuracy)))
    return rows


def emit_report(reports: Sequence[ModalityReport], out_dir: str | Path,
                traces: Optional[dict] = None) -> None:
    """Write summary, per-modality curves, confusions, and optional traces.

    ``traces`` maps video id to (output, segments) pairs; each trace file
    carries exactly one row per frame. All files are plain comma-separated
    text with headers, values formatted to round-trip float64 exactly.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create report directory {out_dir}: {exc}") from exc

    with open(out_dir / "metrics_summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["modality", "metric", "value"])
        for report in reports:
            writer.writerows(summary_rows(report))

    for report in reports:
        with open(out_dir / f"roc_{report.modality}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epsilon", "fpr", "tpr"])
            for eps, fpr, tpr in report.roc_rows:
                writer.writerow([_fmt(eps), _fmt(fpr), _fmt(tpr)])
        with open(out_dir / f"nttd_fpr_{report.modality}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epsilon", "mean_nttd", "fpr", "tpr", "events"])
            for eps, mean_nttd, fpr, tpr, events in report.curve_rows:
                writer.writerow([_fmt(eps), _fmt(mean_nttd), _fmt(fpr), _fmt(tpr), events])
        with open(out_dir / f"confusion_{report.modality}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            k = report.confusion.shape[0]
            writer.writerow(["true_class"] + [f"pred_{c}" for c in range(k)])
            for c in range(k):
                writer.writerow([c] + [int(v) for v in report.confusion[c]])

    if traces:
        trace_dir = out_dir / "traces"
        trace_dir.mkdir(exist_ok=True)
        for video_id, (output, segments) in traces.items():
            t_len = len(output)
            target = gpm_target(segments, t_len)
            truth = frame_labels(segments, t_len)
            k = output.probs.shape[1]
            with open(trace_dir / f"{video_id}.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["frame", "gpm", "gpm_target", "pred_class", "gt_class"]
                                + [f"prob_{c}" for c in range(k)])
                for t in range(t_len):
                    writer.writerow([t, _fmt(float(output.gpm[t])), _fmt(float(target[t])),
                                     int(output.classes[t]), int(truth[t])]
                                    + [_fmt(float(p)) for p in output.probs[t]])


def parse_summary(path: str | Path) -> dict[tuple[str, str], float]:
    """Read a metrics_summary.csv back into a lookup table."""
    table = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["modality", "metric", "value"]:
            raise DataError(f"{path}: unexpected summary header {header}")
        for modality, metric, value in reader:
            table[(modality, metric)] = float(value)
    return table
