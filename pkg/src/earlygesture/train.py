"""Training loop: augmented clips, joint loss, SGD with the step schedule.

Determinism contract: every random draw comes from a generator seeded by a
stable key (seed, purpose, epoch, index), so two runs from the same config
and seed produce bit-identical parameter trajectories.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import AugmentationConfig, CorpusReader, MODALITY_CHANNELS, prepare_training
from .errors import ConfigError, NumericError
from .model import GestureModel, ModelConfig
from .objectives import (class_loss_graph, class_weights, frame_labels,
                         gpm_loss_graph, gpm_target, joint_loss_graph)
from .optim import SgdConfig, SgdOptimizer
from . import tensor as tz


def sub_rng(*keys) -> np.random.Generator:
    """Deterministic generator from a mixed tuple of ints and strings."""
    entropy = [zlib.crc32(k.encode("utf-8")) if isinstance(k, str) else int(k) & 0xFFFFFFFF
               for k in keys]
    return np.random.default_rng(entropy)


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 30
    batch_size: int = 4
    lambda_class: float = 1.0
    target_frames: int = 16
    seed: int = 0
    optimizer: SgdConfig = field(default_factory=SgdConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be positive")
        if self.lambda_class < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lambda_class}")


@dataclass
class EpochLog:
    epoch: int
    learning_rate: float
    gpm_loss: float
    class_loss: float
    joint_loss: float
    class_head_grad_norm: float


def training_class_weights(reader: CorpusReader, n_classes: int) -> np.ndarray:
    """Inverse-frequency weights from the raw train-split frame histogram."""
    counts = np.zeros(n_classes + 1, dtype=np.int64)
    for entry in reader.entries("train"):
        segments = reader.load_video("train", entry["id"], "depth").segments
        labels = frame_labels(segments, entry["frames"])
        counts += np.bincount(labels, minlength=n_classes + 1)
    return class_weights(counts)


def train_model(reader: CorpusReader, modality: str, model: GestureModel,
                settings: TrainSettings,
                weights: Optional[np.ndarray] = None) -> tuple[SgdOptimizer, list[EpochLog]]:
    """Train in place over the corpus train split; returns optimizer + log."""
    entries = reader.entries("train")
    if not entries:
        raise ConfigError("train split is empty")
    if weights is None:
        weights = training_class_weights(reader, model.config.classes)
    optimizer = SgdOptimizer(model.parameters(), settings.optimizer)
    n_videos = len(entries)
    logs = []
    step = 0
    for epoch in range(settings.epochs):
        order = sub_rng(settings.seed, "order", epoch).permutation(n_videos)
        sums = {"gpm": 0.0, "class": 0.0, "joint": 0.0}
        head_grad_norm = 0.0
        n_batches = 0
        for lo in range(0, n_videos, settings.batch_size):
            batch_idx = order[lo:lo + settings.batch_size]
            clips, targets, labels = [], [], []
            for vi in batch_idx:
                sample = reader.load_video("train", entries[vi]["id"], modality)
                prepared = prepare_training(
                    sample, settings.augmentation,
                    sub_rng(settings.seed, "augment", epoch, int(vi)),
                    settings.target_frames)
                clips.append(prepared.frames)
                targets.append(gpm_target(prepared.segments, prepared.length))
                labels.append(frame_labels(prepared.segments, prepared.length))
            frames = np.stack(clips)
            target_arr = np.stack(targets)
            label_arr = np.concatenate(labels)

            drop_rng = sub_rng(settings.seed, "dropout", epoch, step)
            gpm, probs = model.forward(frames, training=True, rng=drop_rng)
            flat_probs = tz.reshape(probs, (label_arr.size, model.config.head_width))
            loss_gpm = gpm_loss_graph(gpm, target_arr)
            loss_class = class_loss_graph(flat_probs, label_arr, weights)
            loss = joint_loss_graph(loss_gpm, loss_class, settings.lambda_class)
            if not np.isfinite(loss.item()):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, step {step}: {loss.item()}")

            optimizer.zero_grad()
            loss.backward()
            head_w = model.param("head_class.weight").grad
            head_b = model.param("head_class.bias").grad
            norm = 0.0
            if head_w is not None:
                norm += float(np.sum(head_w ** 2))
            if head_b is not None:
                norm += float(np.sum(head_b ** 2))
            head_grad_norm = max(head_grad_norm, float(np.sqrt(norm)))
            optimizer.step(epoch)
            step += 1
            n_batches += 1
            sums["gpm"] += loss_gpm.item()
            sums["class"] += loss_class.item()
            sums["joint"] += loss.item()
        logs.append(EpochLog(
            epoch=epoch,
            learning_rate=optimizer.learning_rate(epoch),
            gpm_loss=sums["gpm"] / n_batches,
            class_loss=sums["class"] / n_batches,
            joint_loss=sums["joint"] / n_batches,
            class_head_grad_norm=head_grad_norm,
        ))
    return optimizer, logs


def write_train_log(path: str | Path, logs: list[EpochLog]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "learning_rate", "gpm_loss", "class_loss",
                         "joint_loss", "class_head_grad_norm"])
        for row in logs:
            writer.writerow([row.epoch, f"{row.learning_rate:.17g}",
                             f"{row.gpm_loss:.17g}", f"{row.class_loss:.17g}",
                             f"{row.joint_loss:.17g}", f"{row.class_head_grad_norm:.17g}"])


def build_model_config(classes: int, modality: str, preset: str, variant: str,
                       target_frames: int, crop_size: int,
                       conv_dropout: Optional[float] = None,
                       linear_dropout: Optional[float] = None) -> ModelConfig:
    """Model config for one modality; dropout defaults follow the preset."""
    if modality not in MODALITY_CHANNELS:
        raise ConfigError(f"unknown modality {modality!r}")
    channels = MODALITY_CHANNELS[modality]
    if preset == "paper":
        base = ModelConfig.paper_scale(classes, in_channels=channels, variant=variant)
    elif preset == "desk":
        base = ModelConfig.desk(classes, in_channels=channels, variant=variant)
        base = replace(base, frames=target_frames, frame_size=crop_size)
    else:
        raise ConfigError(f"unknown preset {preset!r}, expected desk or paper")
    if conv_dropout is not None:
        base = replace(base, conv_dropout=conv_dropout)
    if linear_dropout is not None:
        base = replace(base, linear_dropout=linear_dropout)
    return base
