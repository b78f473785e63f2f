"""Branched spatiotemporal network: 3D conv encoder feeding a recurrent
unit, with a progression-regression head and a frame classification head.

Three architecture variants share one parameterization scheme:

    3dcnn-gru     full model (default)
    3dcnn-linear  recurrent unit replaced by a per-frame linear map
    2dcnn-gru     conv kernels restricted to 1x3x3 (no temporal support)

Spatial max pooling halves H and W after every conv block while the
temporal extent is preserved end to end, so outputs stay frame-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import tensor as tz
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import CheckpointError, ConfigError, ShapeError
from .tensor import Tensor

VARIANTS = ("3dcnn-gru", "3dcnn-linear", "2dcnn-gru")

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    classes: int                       # gesture classes; head width is classes + 1
    in_channels: int = 1
    conv_channels: tuple = (8, 16, 32)
    linear_units: int = 64
    recurrent_units: int = 32
    frame_size: int = 32               # H = W after cropping
    frames: int = 16                   # nominal clip length T
    conv_dropout: float = 0.1
    linear_dropout: float = 0.85
    variant: str = "3dcnn-gru"
    preset: str = "desk"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, pick one of {VARIANTS}")
        if self.classes < 1:
            raise ConfigError(f"need at least one gesture class, got {self.classes}")
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be positive, got {self.in_channels}")

    @property
    def head_width(self) -> int:
        return self.classes + 1

    @property
    def temporal_kernel(self) -> int:
        return 1 if self.variant == "2dcnn-gru" else 3

    @property
    def pool_factor(self) -> int:
        return 2 ** len(self.conv_channels)

    @classmethod
    def desk(cls, classes: int, in_channels: int = 1, variant: str = "3dcnn-gru") -> "ModelConfig":
        """Default desk-scale preset: trains in minutes on one CPU core.

        Linear dropout is calibrated down to 0.25 at this width: dropping
        85% of a 64-unit layer keeps ~10 units and stalls optimization,
        whereas the full-scale 2048-unit layers keep ~300 under 0.85. The
        paper-scale preset keeps the published probability.
        """
        return cls(classes=classes, in_channels=in_channels, variant=variant,
                   linear_dropout=0.25)

    @classmethod
    def paper_scale(cls, classes: int, in_channels: int = 1,
                    variant: str = "3dcnn-gru") -> "ModelConfig":
        """Full-scale preset: 2048-unit linear layers, 1024 recurrent units,
        112x112 crops, 80-frame clips, published dropout probabilities.
        Conv widths (64, 128, 256) are this implementation's reading of the
        published figure."""
        return cls(classes=classes, in_channels=in_channels,
                   conv_channels=(64, 128, 256), linear_units=2048,
                   recurrent_units=1024, frame_size=112, frames=80,
                   conv_dropout=0.1, linear_dropout=0.85,
                   variant=variant, preset="paper")

    def to_dict(self) -> dict:
        return {
            "classes": self.classes,
            "in_channels": self.in_channels,
            "conv_channels": list(self.conv_channels),
            "linear_units": self.linear_units,
            "recurrent_units": self.recurrent_units,
            "frame_size": self.frame_size,
            "frames": self.frames,
            "conv_dropout": self.conv_dropout,
            "linear_dropout": self.linear_dropout,
            "variant": self.variant,
            "preset": self.preset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_channels"] = tuple(d["conv_channels"])
        return cls(**d)


@dataclass
class GruState:
    """One step of the recurrent unit; gates are kept for inspection."""

    hidden: Tensor      # f_t, shape (batch, units)
    update: Tensor      # z_t
    reset: Tensor       # r_t
    candidate: Tensor   # s_t
    inputs: Tensor      # g_t as fed to the step


def gru_step(g_t: Tensor, f_prev: Tensor, u_z: Tensor, u_r: Tensor, u_h: Tensor,
             w_z: Tensor, w_r: Tensor, w_h: Tensor) -> GruState:
    """One bias-free recurrent step.

        z = sigmoid(g U_z + f W_z)
        r = sigmoid(g U_r + f W_r)
        s = tanh(g U_h + (f * r) W_h)
        f' = (1 - z) * s + z * f
    """
    if g_t.shape[1] != u_z.shape[0]:
        raise ShapeError(
            f"recurrent input width {g_t.shape[1]} does not match weight rows {u_z.shape[0]}")
    z = tz.sigmoid(tz.matmul(g_t, u_z) + tz.matmul(f_prev, w_z))
    r = tz.sigmoid(tz.matmul(g_t, u_r) + tz.matmul(f_prev, w_r))
    s = tz.tanh(tz.matmul(g_t, u_h) + tz.matmul(f_prev * r, w_h))
    one_minus_z = tz.shift(tz.neg(z), 1.0)
    f_t = one_minus_z * s + z * f_prev
    return GruState(hidden=f_t, update=z, reset=r, candidate=s, inputs=g_t)


@dataclass
class ModelOutput:
    """Per-frame predictions for one video."""

    gpm: np.ndarray     # (T,) progression in [0, 1]
    probs: np.ndarray   # (T, classes + 1) per-frame distributions

    @property
    def classes(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    def __len__(self) -> int:
        return self.gpm.shape[0]


def _uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class GestureModel:
    """Owns the parameter tensors and wires the forward graph."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        kt = config.temporal_kernel
        p: dict[str, Tensor] = {}
        b: dict[str, np.ndarray] = {}

        prev = config.in_channels
        for i, width in enumerate(config.conv_channels, start=1):
            fan_in = prev * kt * 9
            p[f"conv{i}.kernel"] = Tensor(
                _uniform_init(rng, (width, prev, kt, 3, 3), fan_in), requires_grad=True)
            p[f"conv{i}.bias"] = Tensor(_uniform_init(rng, (width,), fan_in), requires_grad=True)
            p[f"conv{i}.scale"] = Tensor(np.ones(width), requires_grad=True)
            p[f"conv{i}.shift"] = Tensor(np.zeros(width), requires_grad=True)
            b[f"conv{i}.running_mean"] = np.zeros(width)
            b[f"conv{i}.running_var"] = np.ones(width)
            prev = width

        side = config.frame_size // config.pool_factor
        if side < 1 or config.frame_size % config.pool_factor:
            raise ConfigError(
                f"frame size {config.frame_size} incompatible with {len(config.conv_channels)} "
                f"pooling stages (needs a multiple of {config.pool_factor})")
        flat = prev * side * side
        lu = config.linear_units
        p["linear1.weight"] = Tensor(_uniform_init(rng, (flat, lu), flat), requires_grad=True)
        p["linear1.bias"] = Tensor(_uniform_init(rng, (lu,), flat), requires_grad=True)
        p["linear2.weight"] = Tensor(_uniform_init(rng, (lu, lu), lu), requires_grad=True)
        p["linear2.bias"] = Tensor(_uniform_init(rng, (lu,), lu), requires_grad=True)

        ru = config.recurrent_units
        if config.variant == "3dcnn-linear":
            p["aggregator.weight"] = Tensor(_uniform_init(rng, (lu, ru), lu), requires_grad=True)
            p["aggregator.bias"] = Tensor(_uniform_init(rng, (ru,), lu), requires_grad=True)
        else:
            for gate in ("z", "r", "h"):
                p[f"gru.u_{gate}"] = Tensor(_uniform_init(rng, (lu, ru), lu), requires_grad=True)
                p[f"gru.w_{gate}"] = Tensor(_uniform_init(rng, (ru, ru), ru), requires_grad=True)

        p["head_gpm.weight"] = Tensor(_uniform_init(rng, (ru, 1), ru), requires_grad=True)
        p["head_gpm.bias"] = Tensor(_uniform_init(rng, (1,), ru), requires_grad=True)
        p["head_class.weight"] = Tensor(
            _uniform_init(rng, (ru, config.head_width), ru), requires_grad=True)
        p["head_class.bias"] = Tensor(
            _uniform_init(rng, (config.head_width,), ru), requires_grad=True)

        self._params = p
        self._bn_stats = b
        self.flat_features = flat

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        return self._params

    def bn_stats(self) -> dict[str, np.ndarray]:
        return self._bn_stats

    def param(self, name: str) -> Tensor:
        return self._params[name]

    # -- forward ------------------------------------------------------------

    def _validate_input(self, shape: tuple) -> None:
        if len(shape) != 5:
            raise ShapeError(f"expected N,C,T,H,W input, got shape {shape}")
        n, c, t, h, w = shape
        if c != self.config.in_channels:
            raise ShapeError(
                f"input has {c} channels, model expects {self.config.in_channels}")
        if t < 1:
            raise ShapeError("need at least one frame")
        pf = self.config.pool_factor
        if h % pf or w % pf or h // pf < 1 or w // pf < 1:
            raise ShapeError(
                f"spatial extents {h}x{w} incompatible with the pooling stack; "
                f"both must be positive multiples of {pf}")

    def _conv_stack(self, x: Tensor, training: bool, rng) -> Tensor:
        cfg = self.config
        kt = cfg.temporal_kernel
        out = x
        for i in range(1, len(cfg.conv_channels) + 1):
            out = tz.conv3d(out, self._params[f"conv{i}.kernel"],
                            self._params[f"conv{i}.bias"], padding=(kt // 2, 1, 1))
            out = tz.batchnorm(out, self._params[f"conv{i}.scale"],
                               self._params[f"conv{i}.shift"],
                               self._bn_stats[f"conv{i}.running_mean"],
                               self._bn_stats[f"conv{i}.running_var"],
                               training=training, momentum=BN_MOMENTUM, eps=BN_EPS)
            out = tz.relu(out)
            if training and cfg.conv_dropout > 0:
                out = tz.dropout(out, cfg.conv_dropout, rng, training=True, volumetric=True)
            out = tz.maxpool3d_spatial(out)
        return out

    def _frame_features(self, flat: Tensor, training: bool, rng) -> Tensor:
        """Two linear layers with ReLU and dropout on (M, flat) frames."""
        cfg = self.config
        out = tz.relu(tz.matmul(flat, self._params["linear1.weight"])
                      + self._params["linear1.bias"])
        if training and cfg.linear_dropout > 0:
            out = tz.dropout(out, cfg.linear_dropout, rng, training=True)
        out = tz.relu(tz.matmul(out, self._params["linear2.weight"])
                      + self._params["linear2.bias"])
        if training and cfg.linear_dropout > 0:
            out = tz.dropout(out, cfg.linear_dropout, rng, training=True)
        return out

    def _gru_step(self, g_t: Tensor, f_prev: Tensor) -> GruState:
        p = self._params
        return gru_step(g_t, f_prev, p["gru.u_z"], p["gru.u_r"], p["gru.u_h"],
                        p["gru.w_z"], p["gru.w_r"], p["gru.w_h"])

    def _aggregate(self, feats: Tensor, n: int, t: int) -> Tensor:
        """Temporal aggregation: recurrent loop or per-frame linear map.

        ``feats`` is (n*t, linear_units); returns (n*t, recurrent_units).
        """
        if self.config.variant == "3dcnn-linear":
            return tz.relu(tz.matmul(feats, self._params["aggregator.weight"])
                           + self._params["aggregator.bias"])
        seq = tz.reshape(feats, (n, t, self.config.linear_units))
        hidden = Tensor(np.zeros((n, self.config.recurrent_units)))
        states = []
        for step in range(t):
            state = self._gru_step(tz.take_frame(seq, step, axis=1), hidden)
            hidden = state.hidden
            states.append(hidden)
        stacked = tz.stack(states, axis=1)
        return tz.reshape(stacked, (n * t, self.config.recurrent_units))

    def _heads(self, encoded: Tensor) -> tuple[Tensor, Tensor]:
        """Progression scalar and class distribution per frame row."""
        p = self._params
        gpm = tz.sigmoid(tz.matmul(encoded, p["head_gpm.weight"]) + p["head_gpm.bias"])
        logits = tz.matmul(encoded, p["head_class.weight"]) + p["head_class.bias"]
        return gpm, tz.softmax(logits, axis=-1)

    def forward(self, frames, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> tuple[Tensor, Tensor]:
        """Run a batch of clips; returns (gpm (N,T), probs (N,T,K)) tensors."""
        x = frames if isinstance(frames, Tensor) else Tensor(frames)
        self._validate_input(x.shape)
        if training and rng is None:
            raise ConfigError("training-mode forward needs a random generator for dropout")
        n, _, t, _, _ = x.shape
        conv_out = self._conv_stack(x, training, rng)
        per_frame = tz.transpose(conv_out, (0, 2, 1, 3, 4))
        flat = tz.reshape(per_frame, (n * t, self.flat_features))
        feats = self._frame_features(flat, training, rng)
        encoded = self._aggregate(feats, n, t)
        gpm, probs = self._heads(encoded)
        gpm = tz.reshape(gpm, (n, t))
        probs = tz.reshape(probs, (n, t, self.config.head_width))
        return gpm, probs

    def predict(self, video: np.ndarray) -> ModelOutput:
        """Eval-mode forward for one (C, T, H, W) video."""
        gpm, probs = self.forward(video[None], training=False)
        return ModelOutput(gpm=gpm.data[0].copy(), probs=probs.data[0].copy())

    # -- persistence ----------------------------------------------------------

    def to_checkpoint(self, optimizer_state: Optional[dict] = None) -> Checkpoint:
        optimizer = None
        if optimizer_state is not None:
            optimizer = {
                "scalars": {"config": optimizer_state["config"],
                            "step_count": optimizer_state["step_count"]},
                "velocity": optimizer_state["velocity"],
            }
        return Checkpoint(
            config=self.config.to_dict(),
            params={name: p.data.copy() for name, p in self._params.items()},
            bn_stats={name: arr.copy() for name, arr in self._bn_stats.items()},
            optimizer=optimizer,
        )

    def save(self, path: str | Path, optimizer_state: Optional[dict] = None) -> None:
        save_checkpoint(path, self.to_checkpoint(optimizer_state))

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint,
                        expect_classes: Optional[int] = None) -> "GestureModel":
        config = ModelConfig.from_dict(ckpt.config)
        if expect_classes is not None and config.classes != expect_classes:
            raise CheckpointError(
                f"checkpoint was trained for {config.classes} gesture classes, "
                f"caller expects {expect_classes}")
        model = cls(config, seed=0)
        for name, p in model._params.items():
            if name not in ckpt.params:
                raise CheckpointError(f"checkpoint is missing parameter {name}")
            stored = ckpt.params[name]
            if stored.shape != p.data.shape:
                raise CheckpointError(
                    f"parameter {name} has shape {stored.shape} in the checkpoint "
                    f"but the config implies {p.data.shape}")
            p.data = stored.copy()
        for name, arr in model._bn_stats.items():
            if name not in ckpt.bn_stats:
                raise CheckpointError(f"checkpoint is missing batch-norm stats {name}")
            if ckpt.bn_stats[name].shape != arr.shape:
                raise CheckpointError(
                    f"batch-norm stats {name} have shape {ckpt.bn_stats[name].shape}, "
                    f"config implies {arr.shape}")
            model._bn_stats[name] = ckpt.bn_stats[name].copy()
        return model

    @classmethod
    def load(cls, path: str | Path, expect_classes: Optional[int] = None) -> "GestureModel":
        return cls.from_checkpoint(load_checkpoint(path), expect_classes=expect_classes)


def inflate_checkpoint(ckpt: Checkpoint, target_channels: int) -> Checkpoint:
    """Adapt a single-channel checkpoint to a multi-channel first layer.

    The first conv kernel is replicated across ``target_channels`` input
    channels and divided by that count, so feeding channel-replicated input
    reproduces the source activations. Everything else is copied; optimizer
    state is dropped (fine-tuning restarts it).
    """
    if target_channels not in (2, 3):
        raise ConfigError(f"target_channels must be 2 or 3, got {target_channels}")
    config = ModelConfig.from_dict(ckpt.config)
    if config.in_channels != 1:
        raise ConfigError(
            f"weight inflation needs a single-channel source, got {config.in_channels}")
    kernel = ckpt.params["conv1.kernel"]
    inflated = np.repeat(kernel / target_channels, target_channels, axis=1)
    params = {name: arr.copy() for name, arr in ckpt.params.items()}
    params["conv1.kernel"] = inflated
    new_config = ModelConfig.from_dict({**ckpt.config, "in_channels": target_channels})
    return Checkpoint(
        config=new_config.to_dict(),
        params=params,
        bn_stats={name: arr.copy() for name, arr in ckpt.bn_stats.items()},
        optimizer=None,
    )


# ---------------------------------------------------------------------------
# Streaming (frame-by-frame) evaluation
# ---------------------------------------------------------------------------

class _OnlineConvBlock:
    """Feeds single time columns through one conv block.

    Temporal kernels of extent 3 give the block a one-frame lookahead: the
    output column for time t emerges when the column for time t+1 arrives.
    ``flush`` supplies the trailing zero pad and may be called once.
    """

    def __init__(self, model: GestureModel, index: int):
        cfg = model.config
        self.kernel = model.param(f"conv{index}.kernel").data
        self.bias = model.param(f"conv{index}.bias").data
        self.scale = model.param(f"conv{index}.scale").data
        self.shift = model.param(f"conv{index}.shift").data
        self.mean = model.bn_stats()[f"conv{index}.running_mean"]
        self.var = model.bn_stats()[f"conv{index}.running_var"]
        self.kt = cfg.temporal_kernel
        self.prev2: Optional[np.ndarray] = None
        self.prev1: Optional[np.ndarray] = None
        self.count = 0

    def _process(self, window: np.ndarray) -> np.ndarray:
        col = tz._conv3d_raw(window, self.kernel, self.bias, (0, 1, 1))
        view = (1, -1, 1, 1, 1)
        inv_std = 1.0 / np.sqrt(self.var + BN_EPS)
        xhat = (col - self.mean.reshape(view)) * inv_std.reshape(view)
        col = xhat * self.scale.reshape(view) + self.shift.reshape(view)
        col = col * (col > 0)
        n, c, t, h, w = col.shape
        grouped = (col.reshape(n, c, t, h // 2, 2, w // 2, 2)
                   .transpose(0, 1, 2, 3, 5, 4, 6)
                   .reshape(n, c, t, h // 2, w // 2, 4))
        return grouped.max(axis=-1)

    def push(self, col: np.ndarray) -> Optional[np.ndarray]:
        if self.kt == 1:
            return self._process(col)
        self.count += 1
        if self.count == 1:
            self.prev2 = np.zeros_like(col)
            self.prev1 = col
            return None
        window = np.concatenate([self.prev2, self.prev1, col], axis=2)
        self.prev2, self.prev1 = self.prev1, col
        return self._process(window)

    def flush(self) -> Optional[np.ndarray]:
        if self.kt == 1 or self.count == 0:
            return None
        window = np.concatenate([self.prev2, self.prev1, np.zeros_like(self.prev1)], axis=2)
        return self._process(window)


class OnlineEncoder:
    """Streams frames through the encoder, carrying recurrent state.

    The 3D conv stack is not temporally causal (each 3x3x3 layer looks one
    frame ahead), so with the default variant the output for frame t is
    emitted when frame t+3 arrives; ``finish`` drains the remainder using
    the same zero padding as a whole-clip forward. Outputs therefore match
    the whole-clip eval-mode forward frame for frame.
    """

    def __init__(self, model: GestureModel):
        self.model = model
        self.blocks = [_OnlineConvBlock(model, i + 1)
                       for i in range(len(model.config.conv_channels))]
        self.hidden = Tensor(np.zeros((1, model.config.recurrent_units)))
        self.out_time = 0
        self.frames_seen = 0
        self._finished = False

    @property
    def lookahead(self) -> int:
        return sum(b.kt // 2 for b in self.blocks)

    def _through_blocks(self, col: np.ndarray, start: int) -> Optional[np.ndarray]:
        for block in self.blocks[start:]:
            out = block.push(col)
            if out is None:
                return None
            col = out
        return col

    def _emit(self, conv_col: np.ndarray) -> tuple[int, float, np.ndarray]:
        feats_flat = conv_col.transpose(0, 2, 1, 3, 4).reshape(1, self.model.flat_features)
        feats = self.model._frame_features(Tensor(feats_flat), training=False, rng=None)
        if self.model.config.variant == "3dcnn-linear":
            encoded = tz.relu(tz.matmul(feats, self.model.param("aggregator.weight"))
                              + self.model.param("aggregator.bias"))
        else:
            state = self.model._gru_step(feats, self.hidden)
            self.hidden = state.hidden
            encoded = state.hidden
        gpm, probs = self.model._heads(encoded)
        t = self.out_time
        self.out_time += 1
        return t, float(gpm.data[0, 0]), probs.data[0].copy()

    def push(self, frame: np.ndarray) -> list[tuple[int, float, np.ndarray]]:
        """Feed one (C, H, W) frame; returns finalized (t, gpm, probs) tuples."""
        if self._finished:
            raise ShapeError("encoder already finished; start a new session")
        cfg = self.model.config
        expected = (cfg.in_channels, frame.shape[-2], frame.shape[-1])
        if frame.shape != expected or frame.shape[-2] % cfg.pool_factor \
                or frame.shape[-1] % cfg.pool_factor:
            raise ShapeError(
                f"frame shape {frame.shape} incompatible with model input "
                f"({cfg.in_channels} channels, spatial multiples of {cfg.pool_factor})")
        self.frames_seen += 1
        col = frame[None, :, None, :, :].astype(np.float64)
        out = self._through_blocks(col, 0)
        return [self._emit(out)] if out is not None else []

    def finish(self) -> list[tuple[int, float, np.ndarray]]:
        """Drain the lookahead buffers with trailing zero padding."""
        if self._finished:
            return []
        self._finished = True
        emitted = []
        for i, block in enumerate(self.blocks):
            col = block.flush()
            if col is None:
                continue
            col = self._through_blocks(col, i + 1)
            if col is not None:
                emitted.append(self._emit(col))
        return emitted
