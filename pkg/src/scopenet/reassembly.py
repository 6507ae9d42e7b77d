"""Content-adaptive filtering core: per-position kernels over neighborhoods.

Each spatial position carries its own normalized k x k kernel (one kernel
shared by all channels at that position). The output at (y, x) is the
convex combination of the zero-padded local neighborhood weighted by that
position's kernel. Kernel channels are ordered row-major: channel u*k+v
is tap (u, v).

Two forward paths implement the same contract: a naive per-position
reference (`reassemble_naive`) and a vectorized path (`reassemble_tiled`)
that accumulates one whole tap plane at a time. Both walk the taps in
identical row-major order, so they agree to within elementwise rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, make_node, require_4d
from . import ops


@dataclass
class KernelField:
    """A bank of per-position filters: tensor shape (n, k*k, h, w).

    When `normalized`, every position's k*k slice is non-negative and sums
    to one; only normalized fields may drive reassembly.
    """

    tensor: Tensor
    k: int
    normalized: bool = False

    def __post_init__(self):
        _, c, _, _ = require_4d(self.tensor, "kernel field")
        if self.k % 2 == 0 or self.k < 1:
            raise ShapeError(f"kernel field window must be odd, got {self.k}")
        if c != self.k * self.k:
            raise ShapeError(f"kernel field with k={self.k} needs {self.k**2} "
                             f"channels, got {c}")


def normalize_kernels(mask: Tensor, k: int) -> KernelField:
    """Softmax-normalize a raw mask into a convex per-position kernel field."""
    field = KernelField(ops.softmax_per_position(mask), k=k, normalized=True)
    return field


# ---------------------------------------------------------------------------
# raw ndarray kernels (forward/backward) shared by both public paths
# ---------------------------------------------------------------------------

def _check_pair(features: np.ndarray, kernels: np.ndarray, k: int) -> None:
    if features.ndim != 4 or kernels.ndim != 4:
        raise ShapeError("reassemble expects 4-D features and kernels")
    n, _, h, w = features.shape
    kn, kc, kh, kw = kernels.shape
    if kc != k * k:
        raise ShapeError(f"kernel field has {kc} channels, expected {k * k}")
    if (kn, kh, kw) != (n, h, w):
        raise ShapeError(f"kernel field grid {kn}x{kh}x{kw} does not match "
                         f"features {n}x{h}x{w}")


def reassemble_tiled(features: np.ndarray, kernels: np.ndarray,
                     k: int) -> np.ndarray:
    """Vectorized path: accumulate one k x k tap plane at a time.

    Tap order is row-major (u outer, v inner), matching the naive path, so
    per-element rounding sequences coincide.
    """
    _check_pair(features, kernels, k)
    n, c, h, w = features.shape
    pad = k // 2
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=features.dtype)
    padded[:, :, pad:pad + h, pad:pad + w] = features
    out = np.zeros((n, c, h, w), dtype=features.dtype)
    tmp = np.empty_like(out)
    for u in range(k):
        for v in range(k):
            np.multiply(kernels[:, u * k + v, None, :, :],
                        padded[:, :, u:u + h, v:v + w], out=tmp)
            out += tmp
    return out


def reassemble_naive(features: np.ndarray, kernels: np.ndarray,
                     k: int) -> np.ndarray:
    """Reference path: walk every output position and its window explicitly."""
    _check_pair(features, kernels, k)
    n, c, h, w = features.shape
    pad = k // 2
    out = np.zeros((n, c, h, w), dtype=features.dtype)
    for b in range(n):
        for y in range(h):
            for x in range(w):
                acc = np.zeros(c, dtype=features.dtype)
                for u in range(k):
                    yy = y + u - pad
                    if yy < 0 or yy >= h:
                        continue
                    for v in range(k):
                        xx = x + v - pad
                        if xx < 0 or xx >= w:
                            continue
                        acc = acc + kernels[b, u * k + v, y, x] \
                            * features[b, :, yy, xx]
                out[b, :, y, x] = acc
    return out


def reassemble_backward(grad_out: np.ndarray, features: np.ndarray,
                        kernels: np.ndarray, k: int
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Analytic adjoint: gradients for both the features and the kernels.

    grad_features scatters each weighted output gradient back onto the
    neighbors it read; grad_kernels collects, per tap, the channel-summed
    product of the output gradient with the neighbor values.
    """
    _check_pair(features, kernels, k)
    if grad_out.shape != features.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match "
                         f"features {features.shape}")
    n, c, h, w = features.shape
    pad = k // 2
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=features.dtype)
    padded[:, :, pad:pad + h, pad:pad + w] = features
    grad_padded = np.zeros_like(padded)
    grad_kernels = np.empty_like(kernels)
    tmp = np.empty((n, c, h, w), dtype=features.dtype)
    for u in range(k):
        for v in range(k):
            np.multiply(kernels[:, u * k + v, None, :, :], grad_out, out=tmp)
            grad_padded[:, :, u:u + h, v:v + w] += tmp
            np.multiply(grad_out, padded[:, :, u:u + h, v:v + w], out=tmp)
            tmp.sum(axis=1, out=grad_kernels[:, u * k + v])
    grad_features = grad_padded[:, :, pad:pad + h, pad:pad + w]
    return grad_features, grad_kernels


# ---------------------------------------------------------------------------
# graph operators
# ---------------------------------------------------------------------------

def reassemble(features: Tensor, kernels: KernelField) -> Tensor:
    """Filter every position with its own normalized kernel.

    out(n, c, y, x) = sum_uv kernels(n, u*k+v, y, x)
                             * features(n, c, y+u-k//2, x+v-k//2)
    with zero padding; the kernel at a position applies to all channels.
    """
    if not kernels.normalized:
        raise ShapeError("reassemble requires a normalized kernel field")
    kt = kernels.tensor
    k = kernels.k
    out = reassemble_tiled(features.data, kt.data, k)

    def backward(g: np.ndarray) -> None:
        gf, gk = reassemble_backward(g, features.data, kt.data, k)
        if features.requires_grad:
            features.accumulate_grad(gf)
        if kt.requires_grad:
            kt.accumulate_grad(gk)

    return make_node(out, (features, kt), "reassemble", backward)


def reassemble_vector(mask_field: Tensor, kernels: KernelField) -> Tensor:
    """Reassemble a per-position vector field (same kernel-sharing contract).

    Identical math to :func:`reassemble` with the channel axis carrying a
    d-vector per position instead of feature channels; exposed separately
    because the refinement pipeline filters mask fields with it.
    """
    return reassemble(mask_field, kernels)
