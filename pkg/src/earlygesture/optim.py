"""Stochastic gradient descent with momentum, weight decay, value clipping,
and a step-schedule on the learning rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor import Tensor


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.005
    clip_low: float = -10.0
    clip_high: float = 10.0
    decay_factor: float = 0.1
    decay_interval: int = 20  # epochs between learning-rate drops

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.clip_low >= self.clip_high:
            raise ConfigError(f"bad clip bounds ({self.clip_low}, {self.clip_high})")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "clip_low": self.clip_low,
            "clip_high": self.clip_high,
            "decay_factor": self.decay_factor,
            "decay_interval": self.decay_interval,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SgdConfig":
        return cls(**d)


class SgdOptimizer:
    """Updates a named set of parameter tensors in place.

    Per component: the raw gradient is clipped to [clip_low, clip_high],
    weight decay is added, the momentum buffer is advanced, and the
    parameter moves against the buffer scaled by the scheduled learning
    rate.
    """

    def __init__(self, params: dict[str, Tensor], config: SgdConfig):
        self.params = params
        self.config = config
        self.velocity = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.step_count = 0

    def learning_rate(self, epoch: int) -> float:
        c = self.config
        drops = epoch // c.decay_interval if c.decay_interval > 0 else 0
        return c.learning_rate * (c.decay_factor ** drops)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, epoch: int = 0) -> None:
        c = self.config
        lr = self.learning_rate(epoch)
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = np.clip(p.grad, c.clip_low, c.clip_high)
            g = g + c.weight_decay * p.data
            v = self.velocity[name]
            v *= c.momentum
            v += g
            p.data -= lr * v
        self.step_count += 1

    def state_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "step_count": self.step_count,
            "velocity": {name: v.copy() for name, v in self.velocity.items()},
        }

    def load_state(self, state: dict) -> None:
        self.config = SgdConfig.from_dict(state["config"])
        self.step_count = int(state["step_count"])
        for name, v in state["velocity"].items():
            if name in self.velocity:
                if self.velocity[name].shape != v.shape:
                    raise ConfigError(
                        f"momentum buffer {name} has shape {v.shape}, "
                        f"parameter expects {self.velocity[name].shape}")
                self.velocity[name] = v.astype(np.float64).copy()
