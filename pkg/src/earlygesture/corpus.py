"""Deterministic synthetic gesture videos with exact segment annotations.

A video is a static textured background plus a bright Gaussian blob that
moves along a class-specific trajectory during each annotated segment.
The blob's position encodes the elapsed fraction of the gesture, so the
progression target is visually grounded. Optional distractor motion (a
dim wandering blob between segments) models unintentional movement.

The generator emits the depth modality; color and flow are derived
deterministically. All randomness flows from numpy generators seeded per
video, so a corpus is a pure function of (seed, settings).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .checkpoint import load_video_tensor, save_video_tensor
from .errors import ConfigError, DataError
from .objectives import (Segment, read_annotations, segments_for_video,
                         validate_segments, write_annotations)

TRAJECTORY_KINDS = ("swipe-right", "swipe-left", "swipe-up", "swipe-down",
                    "circle-cw", "circle-ccw", "tap", "hold")

MODALITIES = ("depth", "color", "flow")
MODALITY_CHANNELS = {"depth": 1, "color": 3, "flow": 2}

COLOR_GAINS = (1.0, 0.7, 0.4)     # fixed per-channel gains for colorization
FLOW_MASS_THRESHOLD = 0.15        # isolates blobs from the background texture
BACKGROUND_LEVEL = 0.03           # static texture amplitude
EDGE_GAP = 2                      # background frames enforced around segments


@dataclass(frozen=True)
class GestureSpec:
    """Recipe for one gesture class."""

    class_id: int
    kind: str
    min_frames: int = 10
    max_frames: int = 16
    radius: float = 5.0
    intensity: float = 1.0

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ConfigError(f"unknown trajectory kind {self.kind!r}")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ConfigError(
                f"bad duration range [{self.min_frames}, {self.max_frames}]")


def default_specs(n_classes: int = 8) -> tuple[GestureSpec, ...]:
    """Assign distinct trajectory kinds to class ids 1..n.

    Kind groups carry distinct blob radii so the appearance stream gets an
    early foothold, while the directional pairs (left/right, up/down,
    cw/ccw) remain separable only through motion.
    """
    if n_classes < 1 or n_classes > len(TRAJECTORY_KINDS):
        raise ConfigError(
            f"supported class counts are 1..{len(TRAJECTORY_KINDS)}, got {n_classes}")
    specs = []
    for i in range(n_classes):
        kind = TRAJECTORY_KINDS[i]
        if kind == "tap":
            specs.append(GestureSpec(i + 1, kind, min_frames=7, max_frames=10,
                                     radius=3.5))
        elif kind == "hold":
            specs.append(GestureSpec(i + 1, kind, min_frames=10, max_frames=16,
                                     radius=6.5))
        elif kind.startswith("circle"):
            specs.append(GestureSpec(i + 1, kind, min_frames=14, max_frames=20,
                                     radius=5.5))
        else:
            specs.append(GestureSpec(i + 1, kind, radius=4.5))
    return tuple(specs)


@dataclass
class VideoSample:
    """One modality of one video plus its ground-truth segments."""

    video_id: str
    frames: np.ndarray            # (C, T, H, W) float64
    segments: list[Segment]
    modality: str = "depth"
    seed: int = 0

    @property
    def length(self) -> int:
        return self.frames.shape[1]

    @property
    def primary_class(self) -> int:
        return self.segments[0].class_id if self.segments else 0


@dataclass(frozen=True)
class AugmentationConfig:
    """Per-video perturbation ranges; one uniform draw per parameter."""

    rotation_deg: float = 25.0
    spatial_scale: float = 0.2
    temporal_scale: float = 0.2
    nonlinear_warp: bool = True
    translation_frames: int = 5
    crop_size: int = 32

    @classmethod
    def identity(cls, crop_size: int = 32) -> "AugmentationConfig":
        return cls(rotation_deg=0.0, spatial_scale=0.0, temporal_scale=0.0,
                   nonlinear_warp=False, translation_frames=0, crop_size=crop_size)


@dataclass(frozen=True)
class GeneratorSettings:
    classes: int = 8
    train_videos_per_class: int = 40
    test_videos_per_class: int = 20
    height: int = 48
    width: int = 48
    min_length: int = 26
    max_length: int = 36
    distractor_rate: float = 0.2
    train_segments: tuple = (1, 2)
    test_segments: tuple = (1, 1)

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "train_videos_per_class": self.train_videos_per_class,
            "test_videos_per_class": self.test_videos_per_class,
            "height": self.height,
            "width": self.width,
            "min_length": self.min_length,
            "max_length": self.max_length,
            "distractor_rate": self.distractor_rate,
            "train_segments": list(self.train_segments),
            "test_segments": list(self.test_segments),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSettings":
        d = dict(d)
        d["train_segments"] = tuple(d.get("train_segments", (1, 3)))
        d["test_segments"] = tuple(d.get("test_segments", (1, 1)))
        return cls(**d)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _blob(height: int, width: int, cx: float, cy: float,
          radius: float, intensity: float) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return intensity * np.exp(-d2 / (2.0 * radius * radius))


def _trajectory(kind: str, rng: np.random.Generator,
                height: int, width: int):
    """Returns pos(q) -> (cx, cy) for gesture progress q in [0, 1]."""
    if kind in ("swipe-right", "swipe-left"):
        y0 = height * rng.uniform(0.35, 0.65)
        x_from, x_to = 0.15 * width, 0.85 * width
        if kind == "swipe-left":
            x_from, x_to = x_to, x_from
        return lambda q: (x_from + (x_to - x_from) * q, y0)
    if kind in ("swipe-down", "swipe-up"):
        x0 = width * rng.uniform(0.35, 0.65)
        y_from, y_to = 0.15 * height, 0.85 * height
        if kind == "swipe-up":
            y_from, y_to = y_to, y_from
        return lambda q: (x0, y_from + (y_to - y_from) * q)
    if kind in ("circle-cw", "circle-ccw"):
        cx = width / 2 + rng.uniform(-0.05, 0.05) * width
        cy = height / 2 + rng.uniform(-0.05, 0.05) * height
        r = 0.22 * min(height, width) * rng.uniform(0.85, 1.15)
        # Near-fixed phase keeps the two rotation senses separable from the
        # first few frames (down-first vs up-first in image coordinates).
        phase = rng.uniform(-0.3, 0.3)
        sign = 1.0 if kind == "circle-cw" else -1.0
        return lambda q: (cx + r * np.cos(phase + sign * 2.0 * np.pi * q),
                          cy + r * np.sin(phase + sign * 2.0 * np.pi * q))
    if kind == "tap":
        x0 = width * rng.uniform(0.35, 0.65)
        y0 = height * rng.uniform(0.25, 0.45)
        dip = 0.2 * height
        return lambda q: (x0, y0 + dip * np.sin(np.pi * q))
    # hold
    x0 = width * rng.uniform(0.35, 0.65)
    y0 = height * rng.uniform(0.55, 0.75)
    return lambda q: (x0, y0)


def _pack_segments(rng: np.random.Generator, specs_by_id: dict[int, GestureSpec],
                   primary: int, n_segments: int, length: int) -> list[tuple[int, int, int]]:
    """Choose (class_id, start, end) triples with gaps around every segment."""
    chosen = [primary]
    all_ids = sorted(specs_by_id)
    for _ in range(n_segments - 1):
        chosen.append(all_ids[rng.integers(len(all_ids))])
    durations = [int(rng.integers(specs_by_id[c].min_frames,
                                  specs_by_id[c].max_frames + 1)) for c in chosen]
    # Drop trailing extras until the layout fits, then squeeze the primary.
    while len(chosen) > 1 and sum(durations) + EDGE_GAP * (len(chosen) + 1) > length:
        chosen.pop()
        durations.pop()
    room = length - 2 * EDGE_GAP
    if len(chosen) == 1 and durations[0] > room >= specs_by_id[chosen[0]].min_frames:
        durations[0] = room
    need = sum(durations) + EDGE_GAP * (len(chosen) + 1)
    if need > length:
        raise DataError(
            f"infeasible packing: {len(chosen)} segment(s) need {need} frames, "
            f"video has {length}")
    slack = length - need
    extras = rng.multinomial(slack, np.full(len(chosen) + 1, 1.0 / (len(chosen) + 1)))
    placed = []
    cursor = EDGE_GAP + int(extras[0])
    for cls, dur, extra in zip(chosen, durations, extras[1:]):
        placed.append((cls, cursor, cursor + dur - 1))
        cursor += dur + EDGE_GAP + int(extra)
    return placed


def generate_video(video_id: str, seed: int, specs: Sequence[GestureSpec],
                   primary_class: int, segments_range: tuple, length_range: tuple,
                   height: int, width: int, distractor_rate: float) -> VideoSample:
    """Render one depth-modality video with exact annotations."""
    rng = np.random.default_rng(seed)
    specs_by_id = {s.class_id: s for s in specs}
    length = int(rng.integers(length_range[0], length_range[1] + 1))
    n_segments = int(rng.integers(segments_range[0], segments_range[1] + 1))
    placed = _pack_segments(rng, specs_by_id, primary_class, n_segments, length)

    background = rng.uniform(0.0, BACKGROUND_LEVEL, size=(height, width))
    frames = np.broadcast_to(background, (length, height, width)).copy()

    segments = []
    for cls, start, end in placed:
        spec = specs_by_id[cls]
        pos = _trajectory(spec.kind, rng, height, width)
        span = max(end - start, 1)
        for t in range(start, end + 1):
            q = (t - start) / span if end > start else 1.0
            cx, cy = pos(q)
            frames[t] += _blob(height, width, cx, cy, spec.radius, spec.intensity)
        segments.append(Segment(video_id=video_id, class_id=cls, start=start, end=end))

    if distractor_rate > 0 and rng.random() < distractor_rate:
        gaps = _background_gaps(placed, length)
        wide = [g for g in gaps if g[1] - g[0] + 1 >= 5]
        if wide:
            g0, g1 = wide[rng.integers(len(wide))]
            dur = int(min(g1 - g0 + 1, rng.integers(3, 7)))
            start = int(rng.integers(g0, g1 - dur + 2))
            cx = width * rng.uniform(0.25, 0.75)
            cy = height * rng.uniform(0.25, 0.75)
            for t in range(start, start + dur):
                cx = float(np.clip(cx + rng.normal(0.0, 1.5), 2, width - 3))
                cy = float(np.clip(cy + rng.normal(0.0, 1.5), 2, height - 3))
                frames[t] += _blob(height, width, cx, cy, radius=2.5, intensity=0.3)

    validate_segments(segments, length)
    return VideoSample(video_id=video_id, frames=frames[None], segments=segments,
                       modality="depth", seed=seed)


def _background_gaps(placed: list[tuple[int, int, int]], length: int) -> list[tuple[int, int]]:
    """Inclusive background ranges strictly between/around segments."""
    gaps = []
    cursor = 0
    for _, start, end in sorted(placed, key=lambda p: p[1]):
        if start - 1 >= cursor + 1:
            gaps.append((cursor + 1, start - 2))
        cursor = end + 1
    if length - 2 >= cursor + 1:
        gaps.append((cursor + 1, length - 2))
    return [g for g in gaps if g[1] >= g[0]]


# ---------------------------------------------------------------------------
# Derived modalities
# ---------------------------------------------------------------------------

def derive_color(sample: VideoSample) -> VideoSample:
    """Three-channel colorization with fixed gains per channel."""
    depth = sample.frames[0]
    frames = np.stack([g * depth for g in COLOR_GAINS], axis=0)
    return VideoSample(video_id=sample.video_id, frames=frames,
                       segments=list(sample.segments), modality="color", seed=sample.seed)


def derive_flow(sample: VideoSample) -> VideoSample:
    """Two-channel motion field from frame-to-frame centroid displacement.

    Each frame's blob mass (intensity above FLOW_MASS_THRESHOLD, which the
    background texture never reaches) carries the x/y displacement of its
    own centroid since the previous frame. Static content yields exactly
    zero flow; the first frame is always zero.
    """
    depth = sample.frames[0]
    t_len, height, width = depth.shape
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    flow = np.zeros((2, t_len, height, width))
    prev_centroid = None
    for t in range(t_len):
        mass = np.maximum(depth[t] - FLOW_MASS_THRESHOLD, 0.0)
        total = mass.sum()
        if total < 1e-9:
            prev_centroid = None
            continue
        centroid = (float((mass * xx).sum() / total), float((mass * yy).sum() / total))
        if prev_centroid is not None:
            flow[0, t] = mass * (centroid[0] - prev_centroid[0])
            flow[1, t] = mass * (centroid[1] - prev_centroid[1])
        prev_centroid = centroid
    return VideoSample(video_id=sample.video_id, frames=flow,
                       segments=list(sample.segments), modality="flow", seed=sample.seed)


def derive_modalities(sample: VideoSample) -> dict[str, VideoSample]:
    if sample.modality != "depth":
        raise DataError(f"modalities derive from depth, got {sample.modality}")
    return {"depth": sample, "color": derive_color(sample), "flow": derive_flow(sample)}


# ---------------------------------------------------------------------------
# Temporal index maps and annotation remapping
# ---------------------------------------------------------------------------

def nearest_index_map(length_in: int, length_out: int) -> np.ndarray:
    """Endpoint-preserving nearest-neighbour map from output to input frames.

    map(i) = rint(i * (T_in - 1) / (T_out - 1)); a single output frame maps
    to frame 0. Rounding follows numpy's rint (ties to even).
    """
    if length_out < 1:
        raise ConfigError(f"target length must be at least 1, got {length_out}")
    if length_out == 1:
        return np.zeros(1, dtype=np.int64)
    pos = np.arange(length_out) * (length_in - 1) / (length_out - 1)
    return np.rint(pos).astype(np.int64)


def remap_segments(segments: Sequence[Segment], index_map: np.ndarray,
                   input_length: int) -> list[Segment]:
    """Carry segments through a monotone output->input frame map.

    Output frames inherit the segment covering their source frame; maximal
    runs become the new segments. A segment that no output frame lands in
    is clamped to the single nearest output frame unless that frame already
    belongs to another segment, in which case it is dropped.
    """
    owner = np.full(input_length, -1, dtype=np.int64)
    ordered = sorted(segments, key=lambda s: s.start)
    for idx, seg in enumerate(ordered):
        owner[seg.start:seg.end + 1] = idx
    member = owner[index_map]
    for idx, seg in enumerate(ordered):
        if not np.any(member == idx):
            mid = (seg.start + seg.end) / 2.0
            candidate = int(np.argmin(np.abs(index_map - mid)))
            if member[candidate] == -1:
                member[candidate] = idx
    remapped = []
    t = 0
    n = member.size
    while t < n:
        if member[t] == -1:
            t += 1
            continue
        start = t
        while t + 1 < n and member[t + 1] == member[t]:
            t += 1
        src = ordered[member[start]]
        remapped.append(Segment(video_id=src.video_id, class_id=src.class_id,
                                start=start, end=t))
        t += 1
    return remapped


def subsample_nearest(sample: VideoSample, target_length: int) -> VideoSample:
    """Nearest-neighbour temporal resampling to exactly target_length frames."""
    index_map = nearest_index_map(sample.length, target_length)
    frames = sample.frames[:, index_map].copy()
    segments = remap_segments(sample.segments, index_map, sample.length)
    return VideoSample(video_id=sample.video_id, frames=frames, segments=segments,
                       modality=sample.modality, seed=sample.seed)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

def _piecewise_warp(frac: np.ndarray, knot: float, slope_ratio: float) -> np.ndarray:
    """Monotone two-segment time remap fixing 0 and 1.

    The interior knot sits at output fraction ``knot``; ``slope_ratio`` is
    the ratio of the first segment's slope to the second's.
    """
    w = slope_ratio * knot / (1.0 + (slope_ratio - 1.0) * knot)
    out = np.where(frac <= knot,
                   w * frac / knot,
                   w + (1.0 - w) * (frac - knot) / (1.0 - knot))
    return np.clip(out, 0.0, 1.0)


def _rotate_scale_frames(frames: np.ndarray, theta_deg: float,
                         scale_factor: float) -> np.ndarray:
    """Bilinear rotation+scaling about the frame center, zeros outside."""
    c, t, h, w = frames.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    theta = np.deg2rad(theta_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    dx, dy = xx - cx, yy - cy
    # Inverse map: rotate by -theta and divide by the scale.
    sx = cx + (cos_t * dx + sin_t * dy) / scale_factor
    sy = cy + (-sin_t * dx + cos_t * dy) / scale_factor
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0
    out = np.zeros_like(frames)
    flat = frames.reshape(c * t, h, w)
    res = out.reshape(c * t, h, w)
    for off_y, off_x, weight in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                                 (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        ys, xs = y0 + off_y, x0 + off_x
        valid = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        ysc = np.clip(ys, 0, h - 1)
        xsc = np.clip(xs, 0, w - 1)
        res += flat[:, ysc, xsc] * (weight * valid)
    return out


def augment(sample: VideoSample, config: AugmentationConfig,
            rng: np.random.Generator, center_crop: bool = False) -> VideoSample:
    """Apply one random draw of every enabled perturbation, then crop.

    Temporal order: scaling, nonlinear warp, translation (all folded into
    one monotone index map that annotations follow); then per-frame
    rotation+scaling; then the crop (random position, or centered when
    ``center_crop`` is set). With all ranges zero this reduces to a crop.
    """
    t_in = sample.length
    t_scale = 1.0 + rng.uniform(-config.temporal_scale, config.temporal_scale) \
        if config.temporal_scale > 0 else 1.0
    if config.nonlinear_warp:
        knot = rng.uniform(0.3, 0.7)
        slope_ratio = rng.uniform(0.8, 1.25)
    shift = int(rng.integers(-config.translation_frames, config.translation_frames + 1)) \
        if config.translation_frames > 0 else 0
    theta = rng.uniform(-config.rotation_deg, config.rotation_deg) \
        if config.rotation_deg > 0 else 0.0
    s_scale = 1.0 + rng.uniform(-config.spatial_scale, config.spatial_scale) \
        if config.spatial_scale > 0 else 1.0

    t_out = max(2, int(round(t_in * t_scale))) if t_in > 1 else t_in
    if t_out == 1:
        frac = np.zeros(1)
    else:
        frac = np.arange(t_out) / (t_out - 1)
    if config.nonlinear_warp:
        frac = _piecewise_warp(frac, knot, slope_ratio)
    base_map = np.rint(frac * (t_in - 1)).astype(np.int64)
    source = np.clip(np.arange(t_out) - shift, 0, t_out - 1)
    index_map = base_map[source]

    frames = sample.frames[:, index_map]
    segments = remap_segments(sample.segments, index_map, t_in)

    if theta != 0.0 or s_scale != 1.0:
        frames = _rotate_scale_frames(frames, theta, s_scale)

    c = config.crop_size
    _, _, h, w = frames.shape
    if c > h or c > w:
        raise DataError(f"crop size {c} larger than frame {h}x{w}")
    if center_crop:
        y0, x0 = (h - c) // 2, (w - c) // 2
    else:
        y0 = int(rng.integers(0, h - c + 1))
        x0 = int(rng.integers(0, w - c + 1))
    frames = frames[:, :, y0:y0 + c, x0:x0 + c].copy()
    return VideoSample(video_id=sample.video_id, frames=frames, segments=segments,
                       modality=sample.modality, seed=sample.seed)


def prepare_training(sample: VideoSample, aug_config: AugmentationConfig,
                     rng: np.random.Generator, target_frames: int) -> VideoSample:
    """Training view: random augmentation, then temporal subsampling."""
    return subsample_nearest(augment(sample, aug_config, rng), target_frames)


def prepare_eval(sample: VideoSample, crop_size: int, target_frames: int) -> VideoSample:
    """Inference view: center crop only, then temporal subsampling."""
    rng = np.random.default_rng(0)  # identity config draws nothing
    cropped = augment(sample, AugmentationConfig.identity(crop_size), rng, center_crop=True)
    return subsample_nearest(cropped, target_frames)


# ---------------------------------------------------------------------------
# Corpus on disk
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def _video_seed(seed: int, split_index: int, class_id: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(split_index, class_id, index))
    return int(ss.generate_state(1)[0])


def generate_split(seed: int, split: str, settings: GeneratorSettings) -> list[VideoSample]:
    """All depth-modality videos of one split, deterministic in (seed, settings)."""
    split_index = {"train": 0, "test": 1}[split]
    per_class = (settings.train_videos_per_class if split == "train"
                 else settings.test_videos_per_class)
    segments_range = (settings.train_segments if split == "train"
                      else settings.test_segments)
    specs = default_specs(settings.classes)
    videos = []
    for spec in specs:
        for index in range(per_class):
            vid = f"{split}_c{spec.class_id:02d}_v{index:03d}"
            videos.append(generate_video(
                vid, _video_seed(seed, split_index, spec.class_id, index), specs,
                primary_class=spec.class_id, segments_range=segments_range,
                length_range=(settings.min_length, settings.max_length),
                height=settings.height, width=settings.width,
                distractor_rate=settings.distractor_rate))
    return videos


def write_corpus(out_dir: str | Path, seed: int, settings: GeneratorSettings,
                 force: bool = False) -> dict:
    """Generate both splits, derive all modalities, and write everything."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise DataError(f"{out_dir} already holds a corpus; pass force to overwrite")
    manifest = {
        "seed": seed,
        "generator": settings.to_dict(),
        "modalities": list(MODALITIES),
        "split_entropy": {"train": [seed, 0], "test": [seed, 1]},
        "splits": {},
        "files": [],
    }
    for split in ("train", "test"):
        split_dir = out_dir / split
        split_dir.mkdir(parents=True, exist_ok=True)
        videos = generate_split(seed, split, settings)
        entries = []
        all_segments = []
        for depth in videos:
            all_segments.extend(depth.segments)
            per_modality = derive_modalities(depth)
            files = {}
            for modality, sample in per_modality.items():
                rel = f"{split}/{sample.video_id}_{modality}.tensor"
                save_video_tensor(out_dir / rel, modality, sample.frames)
                files[modality] = rel
                manifest["files"].append(rel)
            entries.append({
                "id": depth.video_id,
                "class": depth.primary_class,
                "frames": depth.length,
                "height": depth.frames.shape[2],
                "width": depth.frames.shape[3],
                "seed": depth.seed,
                "files": files,
            })
        write_annotations(split_dir / "annotations.csv", all_segments)
        manifest["files"].append(f"{split}/annotations.csv")
        manifest["splits"][split] = entries
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


class CorpusReader:
    """Random access to a corpus directory written by ``write_corpus``."""

    def __init__(self, corpus_dir: str | Path):
        self.root = Path(corpus_dir)
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.exists():
            raise DataError(f"no corpus manifest at {manifest_path}")
        with open(manifest_path) as f:
            self.manifest = json.load(f)
        self._annotations: dict[str, list[Segment]] = {}

    @property
    def settings(self) -> GeneratorSettings:
        return GeneratorSettings.from_dict(self.manifest["generator"])

    def entries(self, split: str) -> list[dict]:
        if split not in self.manifest["splits"]:
            raise DataError(f"corpus has no split {split!r}")
        return self.manifest["splits"][split]

    def _split_annotations(self, split: str) -> list[Segment]:
        if split not in self._annotations:
            self._annotations[split] = read_annotations(self.root / split / "annotations.csv")
        return self._annotations[split]

    def load_video(self, split: str, video_id: str, modality: str) -> VideoSample:
        entry = next((e for e in self.entries(split) if e["id"] == video_id), None)
        if entry is None:
            raise DataError(f"video {video_id!r} not in split {split!r}")
        if modality not in entry["files"]:
            raise DataError(f"video {video_id!r} has no {modality!r} modality")
        name, frames = load_video_tensor(self.root / entry["files"][modality])
        segments = segments_for_video(self._split_annotations(split), video_id)
        return VideoSample(video_id=video_id, frames=frames, segments=segments,
                           modality=modality, seed=entry["seed"])

    def iter_split(self, split: str, modality: str):
        for entry in self.entries(split):
            yield self.load_video(split, entry["id"], modality)
