"""Primitive numeric operators on 4-D feature maps.

Every operator is a pure function of its inputs (identical inputs give
bit-identical outputs) and registers an analytic gradient rule on the
output node. Spatial padding is zero-padding everywhere; all convolution
kernels are odd-sized squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, make_node, require_4d


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass
class ConvParams:
    """Weights of one zero-padded square convolution.

    weight: (out_ch, in_ch, k, k); bias: (out_ch,); odd k only.
    Output spatial size is floor((H + 2*pad - k) / stride) + 1.
    """

    weight: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weight.ndim != 4:
            raise ShapeError(f"conv weight must be 4-D, got {self.weight.shape}")
        oc, ic, kh, kw = self.weight.shape
        if kh != kw:
            raise ShapeError(f"conv kernel must be square, got {kh}x{kw}")
        if kh % 2 == 0:
            raise ShapeError(f"conv kernel size must be odd, got {kh}")
        if self.bias.shape != (oc,):
            raise ShapeError(f"conv bias must have shape ({oc},), got "
                             f"{self.bias.shape}")
        if self.stride < 1:
            raise ShapeError(f"conv stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ShapeError(f"conv padding must be >= 0, got {self.padding}")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    def tensors(self) -> tuple[Tensor, Tensor]:
        return self.weight, self.bias


def init_conv_params(rng: np.random.Generator, in_ch: int, out_ch: int,
                     k: int = 3, stride: int = 1, padding: int | None = None,
                     dtype=np.float32, gain: float = 1.0) -> ConvParams:
    """Zero-mean uniform fan-in initialization with zero bias.

    gain=1 keeps kernel-logit encoders near-uniform after softmax; relu
    chains need gain ~ sqrt(6) to preserve activation scale with depth.
    """
    if padding is None:
        padding = k // 2
    bound = gain / np.sqrt(in_ch * k * k)
    weight = rng.uniform(-bound, bound, size=(out_ch, in_ch, k, k))
    params = ConvParams(
        weight=Tensor(weight.astype(dtype), requires_grad=True),
        bias=Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True),
        stride=stride,
        padding=padding,
    )
    return params


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _pad_spatial(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    out[:, :, pad:pad + h, pad:pad + w] = x
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not match")


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """(n, c, h, w) -> (n, c*k*k, oh*ow) patch matrix, zero-padded."""
    n, c, _, _ = x.shape
    padded = _pad_spatial(x, pad)
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    n_, c_, oh, ow, _, _ = windows.shape
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, oh * ow)
    return np.ascontiguousarray(cols)


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """Zero-padded strided cross-correlation with per-channel bias."""
    n, c, h, w = require_4d(x, "conv2d input")
    if c != params.in_channels:
        raise ShapeError(f"conv2d: input has {c} channels but weight expects "
                         f"{params.in_channels}")
    k, stride, pad = params.kernel_size, params.stride, params.padding
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: spatial dims {h}x{w} too small for k={k}, "
                         f"stride={stride}, pad={pad}")

    weight, bias = params.weight, params.bias
    w2 = weight.data.reshape(params.out_channels, -1)
    cols = _im2col(x.data, k, stride, pad)
    out_flat = np.matmul(w2, cols)                       # (n, oc, oh*ow)
    out = out_flat.reshape(n, params.out_channels, oh, ow) \
        + bias.data[None, :, None, None]

    def backward(g: np.ndarray) -> None:
        g_flat = g.reshape(n, params.out_channels, oh * ow)
        if bias.requires_grad:
            bias.accumulate_grad(g_flat.sum(axis=(0, 2)))
        if weight.requires_grad:
            gw2 = np.tensordot(g_flat, cols, axes=([0, 2], [0, 2]))
            weight.accumulate_grad(gw2.reshape(weight.shape))
        if x.requires_grad:
            gcols = np.matmul(w2.T, g_flat)              # (n, c*k*k, oh*ow)
            gcols = gcols.reshape(n, c, k, k, oh, ow)
            gp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
            for u in range(k):
                for v in range(k):
                    gp[:, :, u:u + stride * oh:stride,
                       v:v + stride * ow:stride] += gcols[:, :, u, v]
            gx = gp[:, :, pad:pad + h, pad:pad + w] if pad else gp
            x.accumulate_grad(gx)

    return make_node(out, (x, weight, bias), "conv2d", backward)


# ---------------------------------------------------------------------------
# per-position kernel normalization
# ---------------------------------------------------------------------------

def softmax_per_position(mask: Tensor) -> Tensor:
    """Exp-normalize the channel vector at every spatial position.

    The channel count must be a perfect square (a flattened k x k filter).
    Each position's channels sum to 1 afterwards.
    """
    _, c, _, _ = require_4d(mask, "softmax_per_position input")
    k = int(round(np.sqrt(c)))
    if k * k != c:
        raise ShapeError(f"softmax_per_position: channel count {c} is not a "
                         f"perfect square")
    shifted = mask.data - mask.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        if mask.requires_grad:
            dot = (g * y).sum(axis=1, keepdims=True)
            mask.accumulate_grad(y * (g - dot))

    return make_node(y, (mask,), "softmax_per_position", backward)


# ---------------------------------------------------------------------------
# rearrangement and resampling
# ---------------------------------------------------------------------------

def _shuffle_raw(x: np.ndarray, s: int) -> np.ndarray:
    n, cs2, h, w = x.shape
    c = cs2 // (s * s)
    y = x.reshape(n, c, s, s, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, c, h * s, w * s))


def _unshuffle_raw(x: np.ndarray, s: int) -> np.ndarray:
    n, c, hs, ws = x.shape
    h, w = hs // s, ws // s
    y = x.reshape(n, c, h, s, w, s).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(y.reshape(n, c * s * s, h, w))


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """Rearrange s*s channel groups into an s-times larger spatial grid.

    out(n, c, s*y+dy, s*x+dx) = in(n, c*s*s + dy*s + dx, y, x); bijective,
    no value is created or lost.
    """
    _, c, _, _ = require_4d(x, "pixel_shuffle input")
    if s < 1:
        raise ShapeError(f"pixel_shuffle: factor must be >= 1, got {s}")
    if c % (s * s) != 0:
        raise ShapeError(f"pixel_shuffle: channel count {c} not divisible "
                         f"by {s}*{s}")
    out = _shuffle_raw(x.data, s)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(_unshuffle_raw(g, s))

    return make_node(out, (x,), "pixel_shuffle", backward)


def pixel_unshuffle(x: Tensor, s: int) -> Tensor:
    """Exact inverse of :func:`pixel_shuffle`."""
    _, _, h, w = require_4d(x, "pixel_unshuffle input")
    if s < 1:
        raise ShapeError(f"pixel_unshuffle: factor must be >= 1, got {s}")
    if h % s != 0 or w % s != 0:
        raise ShapeError(f"pixel_unshuffle: spatial dims {h}x{w} not "
                         f"divisible by {s}")
    out = _unshuffle_raw(x.data, s)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(_shuffle_raw(g, s))

    return make_node(out, (x,), "pixel_unshuffle", backward)


def unfold_neighborhood(x: Tensor, k: int) -> Tensor:
    """Stack each position's zero-padded k x k neighborhood into channels.

    Output channel c*k*k + u*k + v at (y, x) holds input channel c at
    (y+u-k//2, x+v-k//2), zero outside the image.
    """
    n, c, h, w = require_4d(x, "unfold input")
    if k % 2 == 0 or k < 1:
        raise ShapeError(f"unfold: window size must be odd, got {k}")
    pad = k // 2
    padded = _pad_spatial(x.data, pad)
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))
    out = np.ascontiguousarray(
        windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, h, w))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            gr = g.reshape(n, c, k, k, h, w)
            gp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
            for u in range(k):
                for v in range(k):
                    gp[:, :, u:u + h, v:v + w] += gr[:, :, u, v]
            x.accumulate_grad(gp[:, :, pad:pad + h, pad:pad + w])

    return make_node(out, (x,), "unfold_neighborhood", backward)


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    """out(n, c, y, x) = in(n, c, y // factor, x // factor)."""
    require_4d(x, "nearest_upsample input")
    if factor < 1:
        raise ShapeError(f"nearest_upsample: factor must be >= 1, got {factor}")
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            n, c, hs, ws = g.shape
            h, w = hs // factor, ws // factor
            x.accumulate_grad(
                g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)))

    return make_node(out, (x,), "nearest_upsample", backward)


def avg_pool_to(x: Tensor, target_h: int, target_w: int) -> Tensor:
    """Non-overlapping block mean down to (target_h, target_w)."""
    n, c, h, w = require_4d(x, "avg_pool_to input")
    if target_h < 1 or target_w < 1:
        raise ShapeError(f"avg_pool_to: target dims must be >= 1, got "
                         f"{target_h}x{target_w}")
    if h % target_h != 0 or w % target_w != 0:
        raise ShapeError(f"avg_pool_to: input dims {h}x{w} not divisible by "
                         f"target {target_h}x{target_w}")
    bh, bw = h // target_h, w // target_w
    blocks = x.data.reshape(n, c, target_h, bh, target_w, bw)
    out = blocks.mean(axis=(3, 5))

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            spread = np.broadcast_to(
                g[:, :, :, None, :, None] / (bh * bw),
                (n, c, target_h, bh, target_w, bw))
            x.accumulate_grad(spread.reshape(n, c, h, w))

    return make_node(out, (x,), "avg_pool_to", backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over all spatial positions, kept as a (n, c, 1, 1) map."""
    return avg_pool_to(x, 1, 1)


# ---------------------------------------------------------------------------
# activations and elementwise arithmetic
# ---------------------------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g * y * (1.0 - y))

    return make_node(y, (x,), "sigmoid", backward)


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            # subgradient 0 at the kink (left limit)
            x.accumulate_grad(g * (x.data > 0))

    return make_node(y, (x,), "relu", backward)


def hardswish(x: Tensor) -> Tensor:
    """x * clamp(x + 3, 0, 6) / 6."""
    d = x.data
    y = d * np.clip(d + 3.0, 0.0, 6.0) / 6.0

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            # piecewise slope with left-limit values at the kinks
            slope = np.where(d <= -3.0, 0.0,
                             np.where(d <= 3.0, (2.0 * d + 3.0) / 6.0, 1.0))
            x.accumulate_grad(g * slope.astype(d.dtype))

    return make_node(y, (x,), "hardswish", backward)


def _elementwise(a: Tensor, b: Tensor, op: str) -> Tensor:
    _binary_shapes(a, b, op)
    if op == "add":
        out = a.data + b.data
    elif op == "sub":
        out = a.data - b.data
    else:
        out = a.data * b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            ga = g if op != "mul" else g * b.data
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            if op == "add":
                gb = g
            elif op == "sub":
                gb = -g
            else:
                gb = g * a.data
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return make_node(out, (a, b), op, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum (numpy broadcasting rules)."""
    return _elementwise(a, b, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference."""
    return _elementwise(a, b, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (broadcast) product."""
    return _elementwise(a, b, "mul")


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar."""
    out = x.data * factor

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(g * factor)

    return make_node(out, (x,), "scale", backward)


def sum_all(x: Tensor) -> Tensor:
    """Reduce every element to one scalar."""
    out = np.array(x.data.sum(), dtype=x.dtype)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.data, float(g)))

    return make_node(out, (x,), "sum_all", backward)


def concat_channels(parts: list[Tensor]) -> Tensor:
    """Concatenate feature maps along the channel axis."""
    if not parts:
        raise ShapeError("concat_channels: need at least one tensor")
    n, _, h, w = require_4d(parts[0], "concat input")
    for t in parts[1:]:
        tn, _, th, tw = require_4d(t, "concat input")
        if (tn, th, tw) != (n, h, w):
            raise ShapeError(f"concat_channels: incompatible shapes "
                             f"{parts[0].shape} vs {t.shape}")
    out = np.concatenate([t.data for t in parts], axis=1)
    splits = np.cumsum([t.shape[1] for t in parts])[:-1]

    def backward(g: np.ndarray) -> None:
        pieces = np.split(g, splits, axis=1)
        for t, piece in zip(parts, pieces):
            if t.requires_grad:
                t.accumulate_grad(piece)

    return make_node(out, tuple(parts), "concat_channels", backward)


# ---------------------------------------------------------------------------
# classifier head
# ---------------------------------------------------------------------------

def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """logits = x @ weight.T + bias for pooled (n, c, 1, 1) features."""
    n, c, h, w = require_4d(x, "fully_connected input")
    if (h, w) != (1, 1):
        raise ShapeError(f"fully_connected: expected pooled (n, c, 1, 1) "
                         f"input, got spatial {h}x{w}")
    if weight.ndim != 2 or weight.shape[1] != c:
        raise ShapeError(f"fully_connected: weight {weight.shape} does not "
                         f"match {c} input channels")
    classes = weight.shape[0]
    if bias.shape != (classes,):
        raise ShapeError(f"fully_connected: bias {bias.shape} does not match "
                         f"{classes} classes")
    flat = x.data.reshape(n, c)
    out = flat @ weight.data.T + bias.data[None, :]

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.accumulate_grad((g @ weight.data).reshape(n, c, 1, 1))
        if weight.requires_grad:
            weight.accumulate_grad(g.T @ flat)
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))

    return make_node(out, (x, weight, bias), "fully_connected", backward)
