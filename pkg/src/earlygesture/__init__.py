"""Early and online gesture detection with progression modelling,
trained end to end on a synthetic gesture corpus at desk scale."""

from .errors import (CheckpointError, ConfigError, DataError, GestureError,
                     NumericError, ShapeError)
from .model import GestureModel, ModelConfig, ModelOutput, inflate_checkpoint
from .objectives import Segment, gpm_target, frame_labels
from .tensor import Tensor

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ConfigError", "DataError", "GestureError",
    "NumericError", "ShapeError", "GestureModel", "ModelConfig",
    "ModelOutput", "inflate_checkpoint", "Segment", "gpm_target",
    "frame_labels", "Tensor",
]
