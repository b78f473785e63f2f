"""Training targets and losses.

The progression target for a frame inside a gesture is the elapsed
fraction of that gesture, (t - start) / (end - start) with inclusive
endpoints; background frames are zero. A one-frame gesture is treated as
instantaneously complete (target 1.0 at its single frame).

Losses: mean squared error on progression, frequency-weighted cross
entropy on the per-frame class distribution, combined as
``L = L_progress + lambda * L_class``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tensor as tz
from .errors import ConfigError, DataError, ShapeError
from .tensor import Tensor

NO_GESTURE = 0  # class index reserved for background frames

LOG_FLOOR = 1e-12  # probability clamp inside the cross entropy


@dataclass(frozen=True)
class Segment:
    """One strongly segmented gesture: inclusive frame range plus class."""

    video_id: str
    class_id: int   # 1..N; background is never annotated
    start: int
    end: int

    def __post_init__(self):
        if self.class_id <= NO_GESTURE:
            raise DataError(f"segment class must be a gesture class, got {self.class_id}")
        if self.start < 0 or self.end < self.start:
            raise DataError(f"bad segment frames [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def frames(self) -> range:
        return range(self.start, self.end + 1)


def validate_segments(segments: Sequence[Segment], video_length: int | None = None) -> None:
    """Check ordering, bounds, and non-overlap within one video."""
    ordered = sorted(segments, key=lambda s: s.start)
    for i, seg in enumerate(ordered):
        if video_length is not None and seg.end >= video_length:
            raise DataError(
                f"segment [{seg.start}, {seg.end}] exceeds video length {video_length}")
        if i and seg.start <= ordered[i - 1].end:
            raise DataError(
                f"overlapping segments [{ordered[i-1].start}, {ordered[i-1].end}] "
                f"and [{seg.start}, {seg.end}]")


def gpm_target(segments: Sequence[Segment], video_length: int) -> np.ndarray:
    """Per-frame progression target in [0, 1] for one video."""
    validate_segments(segments, video_length)
    target = np.zeros(video_length)
    for seg in segments:
        if seg.start == seg.end:
            target[seg.start] = 1.0
        else:
            span = seg.end - seg.start
            for t in seg.frames():
                target[t] = (t - seg.start) / span
    return target


def frame_labels(segments: Sequence[Segment], video_length: int) -> np.ndarray:
    """Per-frame class labels; background frames get NO_GESTURE."""
    validate_segments(segments, video_length)
    labels = np.full(video_length, NO_GESTURE, dtype=np.int64)
    for seg in segments:
        labels[seg.start:seg.end + 1] = seg.class_id
    return labels


def gpm_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error between progression sequences.

    Accumulates sequentially so the value is bit-identical to a scalar
    loop; sequences here are per-video (tens of frames), so speed is moot.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ShapeError(
            f"progression sequences differ in shape: {predicted.shape} vs {target.shape}")
    acc = 0.0
    for p, t in zip(predicted.ravel(), target.ravel()):
        acc += (p - t) ** 2
    return acc / predicted.size


def class_weights(counts: np.ndarray | Sequence[int]) -> np.ndarray:
    """Inverse-frequency class weights, normalized so uniform data gives 1.

    ``counts[k]`` is the number of training frames labeled k (background
    included at index NO_GESTURE). w_k = total / (K * count_k).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        missing = int(np.argmin(counts))
        raise DataError(f"class {missing} has no training frames; cannot weight it")
    total = counts.sum()
    return total / (counts.size * counts)


def class_loss(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Weighted cross entropy, -(1/T) sum w_label log p_label."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ShapeError(
            f"probabilities {probs.shape} do not align with labels {labels.shape}")
    picked = probs[np.arange(labels.size), labels]
    return float(-np.mean(weights[labels] * np.log(np.maximum(picked, LOG_FLOOR))))


def joint_loss(progress_loss: float, classification_loss: float, lam: float) -> float:
    if lam < 0:
        raise ConfigError(f"branch weight must be nonnegative, got {lam}")
    return progress_loss + lam * classification_loss


# ---------------------------------------------------------------------------
# Differentiable variants used by the trainer (same formulas on the graph)
# ---------------------------------------------------------------------------

def gpm_loss_graph(predicted: Tensor, target: np.ndarray) -> Tensor:
    diff = predicted - Tensor(target)
    return tz.mean_all(diff * diff)


def class_loss_graph(probs: Tensor, labels: np.ndarray, weights: np.ndarray) -> Tensor:
    """``probs`` is (M, K); labels and per-frame weights are gathered in."""
    picked = tz.pick_class(probs, labels)
    weighted = tz.log(picked, floor=LOG_FLOOR) * Tensor(weights[labels])
    return tz.neg(tz.mean_all(weighted))


def joint_loss_graph(progress_loss: Tensor, classification_loss: Tensor, lam: float) -> Tensor:
    if lam < 0:
        raise ConfigError(f"branch weight must be nonnegative, got {lam}")
    return progress_loss + tz.scale(classification_loss, lam)


# ---------------------------------------------------------------------------
# Annotation table
# ---------------------------------------------------------------------------

ANNOTATION_HEADER = ["video_id", "class_id", "start_frame", "end_frame"]


def write_annotations(path: str | Path, segments: Iterable[Segment]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ANNOTATION_HEADER)
        for seg in segments:
            writer.writerow([seg.video_id, seg.class_id, seg.start, seg.end])


def read_annotations(path: str | Path) -> list[Segment]:
    segments = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ANNOTATION_HEADER:
            raise DataError(f"{path}: expected header {','.join(ANNOTATION_HEADER)}")
        for row in reader:
            if len(row) != 4:
                raise DataError(f"{path}: malformed annotation row {row!r}")
            segments.append(Segment(video_id=row[0], class_id=int(row[1]),
                                    start=int(row[2]), end=int(row[3])))
    return segments


def segments_for_video(segments: Sequence[Segment], video_id: str) -> list[Segment]:
    return sorted((s for s in segments if s.video_id == video_id), key=lambda s: s.start)
