"""Dense float64 tensors with reverse-mode differentiation.

Implements exactly the operations the gesture network needs: elementwise
arithmetic, matmul, activations, softmax, volumetric/plain dropout, 3D
convolution, spatial max pooling, and batch normalization. Every operation
records a backward closure; calling ``backward()`` on a scalar result fills
the ``grad`` buffers of all reachable tensors.

Everything runs in 64-bit floats. Speed is a secondary concern; the heavy
operations still route their contractions through BLAS via ``einsum``.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError

Array = np.ndarray
BackwardFn = Callable[[Array], tuple]


class Tensor:
    """A numpy float64 array plus an optional gradient buffer.

    Tensors created by operations keep references to their parents so a
    backward pass can run in reverse topological order. Leaf tensors meant
    to be trained are created with ``requires_grad=True``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[Array] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[BackwardFn] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode pass from a scalar result."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g

    # Small amount of operator sugar so model code stays readable.
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _make(data: Array, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum gradient over axes that were broadcast in the forward pass."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python constant."""
    return _make(a.data * c, (a,), lambda g: (g * c,))


def shift(a: Tensor, c: float) -> Tensor:
    """Add a python constant."""
    return _make(a.data + c, (a,), lambda g: (g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _make(data, (a, b), backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    data = a.data.reshape(shape)
    return _make(data, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inverse = tuple(np.argsort(axes))
    data = a.data.transpose(axes)
    return _make(data, (a,), lambda g: (g.transpose(inverse),))


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        slices = np.moveaxis(g, axis, 0)
        return tuple(np.ascontiguousarray(slices[i]) for i in range(len(tensors)))

    return _make(data, tuple(tensors), backward)


def take_frame(a: Tensor, index: int, axis: int = 1) -> Tensor:
    """Select one index along ``axis``, dropping that axis."""
    data = np.take(a.data, index, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        sel = [slice(None)] * a.ndim
        sel[axis] = index
        full[tuple(sel)] = g
        return (full,)

    return _make(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - inner),)

    return _make(y, (a,), backward)


def log(a: Tensor, floor: float = 1e-12) -> Tensor:
    """Natural log with the argument clamped at ``floor`` (gradient is zero
    below the clamp)."""
    clamped = np.maximum(a.data, floor)
    mask = a.data > floor
    return _make(np.log(clamped), (a,), lambda g: (g * mask / clamped,))


def sum_all(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())
    return _make(data, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    data = np.asarray(a.data.mean())
    return _make(data, (a,), lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def pick_class(probs: Tensor, labels: Array) -> Tensor:
    """Gather ``probs[i, labels[i]]`` for a 2D probability tensor."""
    if probs.ndim != 2:
        raise ShapeError(f"pick_class needs a 2D tensor, got {probs.shape}")
    rows = np.arange(probs.shape[0])
    labels = np.asarray(labels, dtype=np.intp)
    data = probs.data[rows, labels]

    def backward(g):
        full = np.zeros_like(probs.data)
        full[rows, labels] = g
        return (full,)

    return _make(data, (probs,), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator, training: bool,
            volumetric: bool = False) -> Tensor:
    """Inverted dropout; the volumetric variant zeroes whole feature maps.

    Identity in eval mode. Kept units are scaled by 1/(1-p) so eval needs
    no rescaling.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if volumetric:
        if a.ndim != 5:
            raise ShapeError(f"volumetric dropout needs a 5D tensor, got {a.shape}")
        keep = rng.random(a.shape[:2]) >= p
        mask = keep.reshape(a.shape[:2] + (1, 1, 1)) / (1.0 - p)
    else:
        mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# Convolution, pooling, normalization
# ---------------------------------------------------------------------------

def _im2col(x: Array, ksp: tuple, padding: tuple) -> Array:
    """Contiguous (N*To*Ho*Wo, C*kt*kh*kw) window matrix of a padded input."""
    pt, ph, pw = padding
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    windows = sliding_window_view(xp, ksp, axis=(2, 3, 4))
    n, c, to, ho, wo = windows.shape[:5]
    cols = windows.transpose(0, 2, 3, 4, 1, 5, 6, 7)
    return np.ascontiguousarray(cols).reshape(n * to * ho * wo, c * ksp[0] * ksp[1] * ksp[2])


def _conv3d_raw(x: Array, kernel: Array, bias: Array, padding: tuple,
                return_cols: bool = False):
    """Cross-correlation via one GEMM on the window matrix."""
    n, _, t, h, w = x.shape
    o = kernel.shape[0]
    pt, ph, pw = padding
    to = t + 2 * pt - kernel.shape[2] + 1
    ho = h + 2 * ph - kernel.shape[3] + 1
    wo = w + 2 * pw - kernel.shape[4] + 1
    cols = _im2col(x, kernel.shape[2:], padding)
    out_mat = cols @ kernel.reshape(o, -1).T
    out = out_mat.reshape(n, to, ho, wo, o).transpose(0, 4, 1, 2, 3)
    out = out + bias.reshape(1, -1, 1, 1, 1)
    return (out, cols) if return_cols else out


def conv3d(x: Tensor, kernel: Tensor, bias: Tensor, padding: tuple) -> Tensor:
    """3D cross-correlation over an N,C,T,H,W tensor.

    ``padding`` gives the symmetric zero pad per (T, H, W) axis. Output
    extent per axis is ``in + 2*pad - k + 1``.
    """
    if x.ndim != 5 or kernel.ndim != 5:
        raise ShapeError(f"conv3d needs 5D input and kernel, got {x.shape} and {kernel.shape}")
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError(
            f"conv3d channel mismatch: input {x.shape} has {x.shape[1]} channels, "
            f"kernel {kernel.shape} expects {kernel.shape[1]}")
    pt, ph, pw = padding
    for ext, pad, k in zip(x.shape[2:], padding, kernel.shape[2:]):
        if ext + 2 * pad < k:
            raise ShapeError(
                f"conv3d input {x.shape} too small for kernel {kernel.shape} with padding {padding}")
    needs_grad = x.requires_grad or kernel.requires_grad or bias.requires_grad
    if not needs_grad:
        return _make(_conv3d_raw(x.data, kernel.data, bias.data, padding), (), None)
    data, cols = _conv3d_raw(x.data, kernel.data, bias.data, padding, return_cols=True)
    ksp = kernel.shape[2:]
    o = kernel.shape[0]
    in_shape = x.shape

    def backward(g):
        gb = g.sum(axis=(0, 2, 3, 4))
        g_mat = g.transpose(0, 2, 3, 4, 1).reshape(-1, o)
        gk = (g_mat.T @ cols).reshape(kernel.shape)
        # Gradient w.r.t. input: push the output gradient back through the
        # window matrix (one GEMM), then scatter the columns onto the
        # padded input positions.
        gcols = g_mat @ kernel.data.reshape(o, -1)
        gx = _col2im_add(gcols, in_shape, g.shape, ksp, padding)
        return gx, gk, gb

    return _make(data, (x, kernel, bias), backward)


def _col2im_add(gcols: Array, in_shape: tuple, out_shape: tuple,
                ksp: tuple, padding: tuple) -> Array:
    """Scatter window-matrix gradients back onto the (unpadded) input."""
    n, c, t, h, w = in_shape
    to, ho, wo = out_shape[2:]
    pt, ph, pw = padding
    # One contiguous transpose up front keeps the 27 accumulations sequential.
    grid = np.ascontiguousarray(
        gcols.reshape(n, to, ho, wo, c, *ksp).transpose(0, 4, 5, 6, 7, 1, 2, 3))
    padded = np.zeros((n, c, t + 2 * pt, h + 2 * ph, w + 2 * pw))
    for i in range(ksp[0]):
        for j in range(ksp[1]):
            for k in range(ksp[2]):
                padded[:, :, i:i + to, j:j + ho, k:k + wo] += grid[:, :, i, j, k]
    return padded[:, :, pt:pt + t, ph:ph + h, pw:pw + w].copy()


def maxpool3d_spatial(x: Tensor) -> Tensor:
    """Max over 1x2x2 windows; halves H and W, keeps T.

    The backward pass routes the gradient to the first maximal element of
    each window in scan order (row-major over the 2x2 window).
    """
    if x.ndim != 5:
        raise ShapeError(f"maxpool3d_spatial needs a 5D tensor, got {x.shape}")
    n, c, t, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool3d_spatial needs even H and W, got {x.shape}")
    windowed = x.data.reshape(n, c, t, h // 2, 2, w // 2, 2)
    data = windowed.max(axis=(4, 6))

    def backward(g):
        # Group each 2x2 window as a trailing axis of 4 in scan order
        # (0,0),(0,1),(1,0),(1,1); route to the first maximal element.
        grouped = (windowed.transpose(0, 1, 2, 3, 5, 4, 6)
                   .reshape(n, c, t, h // 2, w // 2, 4))
        is_max = grouped == data[..., None]
        first = is_max & (np.cumsum(is_max, axis=-1) == 1)
        gg = first * g[..., None]
        gx = (gg.reshape(n, c, t, h // 2, w // 2, 2, 2)
              .transpose(0, 1, 2, 3, 5, 4, 6)
              .reshape(n, c, t, h, w))
        return (gx,)

    return _make(data, (x,), backward)


def batchnorm(x: Tensor, bn_scale: Tensor, bn_shift: Tensor,
              running_mean: Array, running_var: Array,
              training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel batch normalization over N,T,H,W of a 5D tensor.

    Training mode normalizes by the batch statistics and updates the
    running buffers in place with an exponential moving average; eval mode
    normalizes by the running buffers.
    """
    if x.ndim != 5:
        raise ShapeError(f"batchnorm needs a 5D tensor, got {x.shape}")
    axes = (0, 2, 3, 4)
    view = (1, -1, 1, 1, 1)
    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(view)) * inv_std.reshape(view)
    data = xhat * bn_scale.data.reshape(view) + bn_shift.data.reshape(view)
    m = x.size // x.shape[1]

    def backward(g):
        g_shift = g.sum(axis=axes)
        g_scale = (g * xhat).sum(axis=axes)
        gxhat = g * bn_scale.data.reshape(view)
        if training:
            # Statistics depend on x, so the usual three-term formula applies.
            gx = (inv_std.reshape(view) / m) * (
                m * gxhat
                - gxhat.sum(axis=axes).reshape(view)
                - xhat * (gxhat * xhat).sum(axis=axes).reshape(view))
        else:
            gx = gxhat * inv_std.reshape(view)
        return gx, g_scale, g_shift

    return _make(data, (x, bn_scale, bn_shift), backward)
