"""Inference strategies on top of per-frame model outputs.

Offline detection triggers at the peak of the progression curve; online
detection triggers when the streamed progression value crosses a
threshold. Consensus classification lets frames near the progression peak
vote. Fusion combines per-modality outputs by a convex combination whose
weights are fitted on training data by a simplex grid search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .model import GestureModel, ModelOutput, OnlineEncoder
from .objectives import NO_GESTURE


@dataclass(frozen=True)
class TriggerConfig:
    """Online trigger behaviour.

    After an emission the session stays refractory for ``refractory``
    frames and then re-arms once the progression value falls below half the
    threshold, so one gesture produces at most one event.
    """

    epsilon: float = 0.5
    refractory: int = 8

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.epsilon}")
        if self.refractory < 0:
            raise ConfigError(f"refractory length must be nonnegative, got {self.refractory}")


@dataclass
class DetectionEvent:
    """A triggered detection at one frame."""

    frame: int
    class_id: int               # never NO_GESTURE
    gpm: float
    probs: np.ndarray           # class distribution at the trigger frame
    nttd: Optional[float] = None  # filled by the evaluator


def _gesture_argmax(probs: np.ndarray) -> int:
    """Most likely gesture class, ignoring the background entry."""
    return int(np.argmax(probs[NO_GESTURE + 1:])) + NO_GESTURE + 1


def detect_offline(output: ModelOutput, noise_floor: float = 0.0) -> list[DetectionEvent]:
    """One event per candidate region, triggered at the region's peak.

    Candidate regions are maximal runs of frames whose most likely class is
    a gesture; within each run the trigger lands on the earliest frame of
    maximal progression. Runs whose peak does not exceed ``noise_floor``
    emit nothing.
    """
    classes = output.classes
    events = []
    t = 0
    n = len(output)
    while t < n:
        if classes[t] == NO_GESTURE:
            t += 1
            continue
        start = t
        while t + 1 < n and classes[t + 1] != NO_GESTURE:
            t += 1
        region = slice(start, t + 1)
        peak_rel = int(np.argmax(output.gpm[region]))
        peak = start + peak_rel
        if output.gpm[peak] > noise_floor:
            events.append(DetectionEvent(
                frame=peak, class_id=_gesture_argmax(output.probs[peak]),
                gpm=float(output.gpm[peak]), probs=output.probs[peak].copy()))
        t += 1
    return events


def peak_class(output: ModelOutput) -> int:
    """Video-level offline classification: the distribution at the peak of
    the progression curve decides (earliest frame on ties)."""
    if len(output) == 0:
        raise DataError("cannot classify an empty video")
    peak = int(np.argmax(output.gpm))
    return int(np.argmax(output.probs[peak]))


def classify_consensus(output: ModelOutput, tau: Optional[float]) -> int:
    """Classify by summing distributions over the consensus frame set.

    The consensus set holds frames whose progression exceeds ``tau`` times
    the video's maximum (with >= at tau=1, reducing to the peak frame).
    ``tau=None`` means global voting over all frames.
    """
    if len(output) == 0:
        raise DataError("cannot classify an empty video")
    if tau is None:
        votes = output.probs.sum(axis=0)
        return int(np.argmax(votes))
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"consensus ratio must lie in [0, 1], got {tau}")
    m = float(np.max(output.gpm))
    if tau == 1.0:
        mask = output.gpm >= m
    else:
        mask = output.gpm > tau * m
    votes = output.probs[mask].sum(axis=0)
    return int(np.argmax(votes))


def consensus_frames(gpm: np.ndarray, tau: float) -> np.ndarray:
    """Indices of the consensus set for a progression sequence."""
    m = float(np.max(gpm))
    mask = gpm >= m if tau == 1.0 else gpm > tau * m
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# Online triggering
# ---------------------------------------------------------------------------

class TriggerMachine:
    """Threshold trigger with refractory and re-arm hysteresis."""

    _ARMED, _REFRACTORY, _WAIT_REARM = range(3)

    def __init__(self, config: TriggerConfig):
        self.config = config
        self._state = self._ARMED
        self._count = 0

    def update(self, frame: int, gpm: float, probs: np.ndarray) -> Optional[DetectionEvent]:
        if self._state == self._REFRACTORY:
            self._count -= 1
            if self._count <= 0:
                self._state = self._WAIT_REARM
        if self._state == self._WAIT_REARM and gpm < self.config.epsilon / 2.0:
            self._state = self._ARMED
        if self._state == self._ARMED and gpm > self.config.epsilon:
            self._state = self._REFRACTORY
            self._count = self.config.refractory
            return DetectionEvent(frame=frame, class_id=_gesture_argmax(probs),
                                  gpm=float(gpm), probs=np.asarray(probs).copy())
        return None


def run_trigger(output: ModelOutput, config: TriggerConfig) -> list[DetectionEvent]:
    """Replay the online trigger over precomputed per-frame outputs.

    Streaming per-frame outputs equal whole-clip outputs, so threshold
    sweeps can reuse cached predictions instead of re-running the encoder.
    """
    machine = TriggerMachine(config)
    events = []
    for t in range(len(output)):
        event = machine.update(t, float(output.gpm[t]), output.probs[t])
        if event is not None:
            events.append(event)
    return events


class StreamSession:
    """Owns one streaming encoder plus its trigger state.

    Note the encoder's temporal lookahead: with 3x3x3 kernels the decision
    for frame t is made when frame t+3 arrives, and event frame indices
    refer to the decided frame.
    """

    def __init__(self, model: GestureModel, config: TriggerConfig):
        self.encoder = OnlineEncoder(model)
        self.machine = TriggerMachine(config)
        self.trace: list[tuple[int, float, np.ndarray]] = []

    def step(self, frame: np.ndarray) -> list[DetectionEvent]:
        """Feed one frame; returns any events finalized by it."""
        return self._consume(self.encoder.push(frame))

    def finish(self) -> list[DetectionEvent]:
        """Drain the lookahead at end of stream."""
        return self._consume(self.encoder.finish())

    def _consume(self, outputs) -> list[DetectionEvent]:
        events = []
        for t, gpm, probs in outputs:
            self.trace.append((t, gpm, probs))
            event = self.machine.update(t, gpm, probs)
            if event is not None:
                events.append(event)
        return events


# ---------------------------------------------------------------------------
# Modality fusion
# ---------------------------------------------------------------------------

def fuse(outputs: Sequence[ModelOutput], weights: Sequence[float]) -> ModelOutput:
    """Convex combination of per-modality outputs (both heads)."""
    if len(outputs) == 0:
        raise ConfigError("fusion needs at least one modality")
    if len(outputs) != len(weights):
        raise ConfigError(f"{len(outputs)} outputs but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ConfigError("fusion weights must be nonnegative with positive sum")
    w = w / w.sum()
    length = len(outputs[0])
    for out in outputs[1:]:
        if len(out) != length:
            raise ShapeError(
                f"modality outputs differ in length: {length} vs {len(out)}")
    gpm = sum(wi * out.gpm for wi, out in zip(w, outputs))
    probs = sum(wi * out.probs for wi, out in zip(w, outputs))
    return ModelOutput(gpm=gpm, probs=probs)


def _simplex_grid(parts: int, steps: int):
    """All nonnegative integer compositions of ``steps`` into ``parts``."""
    for cuts in itertools.combinations(range(steps + parts - 1), parts - 1):
        prev = -1
        comp = []
        for c in cuts:
            comp.append(c - prev - 1)
            prev = c
        comp.append(steps + parts - 2 - prev)
        yield tuple(comp)


def fit_fusion_weights(per_modality: dict[str, list[ModelOutput]],
                       labels: Sequence[int], resolution: float = 0.05) -> dict[str, float]:
    """Grid-search the weight simplex for best fused peak-frame accuracy.

    Ties prefer the point closest to uniform weights, so identical
    modalities come back uniformly weighted. Deterministic by construction.
    """
    names = list(per_modality)
    if len(names) < 2:
        raise ConfigError("fusion weight fitting needs at least two modalities")
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise DataError("cannot fit fusion weights on a single-class label set")
    n_videos = len(labels)
    for name in names:
        if len(per_modality[name]) != n_videos:
            raise ShapeError(
                f"modality {name!r} has {len(per_modality[name])} predictions "
                f"for {n_videos} labels")
    steps = int(round(1.0 / resolution))
    uniform = np.full(len(names), 1.0 / len(names))
    best = None  # (accuracy, -distance_to_uniform, weights)
    for comp in _simplex_grid(len(names), steps):
        w = np.asarray(comp, dtype=np.float64) / steps
        correct = 0
        for v in range(n_videos):
            fused = fuse([per_modality[name][v] for name in names], w)
            if peak_class(fused) == labels[v]:
                correct += 1
        accuracy = correct / n_videos
        key = (accuracy, -float(np.linalg.norm(w - uniform)))
        if best is None or key > best[0]:
            best = (key, w)
    return dict(zip(names, best[1]))
