"""Detail extraction: predict a per-position smoothing kernel from the
feature map itself, smooth with it, and amplify the residual.

The residual between a feature map and its content-adaptively smoothed
version concentrates at edges and textures; adding it back sharpens the
subtle structure. The whole stage is one encoder convolution, a softmax
kernel normalization, one reassembly, and elementwise arithmetic, so it
stays differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ops
from .reassembly import normalize_kernels, reassemble
from .tensor import ShapeError, Tensor, require_4d


@dataclass
class SdeParams:
    """One 3x3 encoder that maps C' channels to k*k kernel logits."""

    encoder: ops.ConvParams
    k: int = 3

    def __post_init__(self):
        if self.k % 2 == 0 or self.k < 1:
            raise ShapeError(f"detail window size must be odd, got {self.k}")
        if self.encoder.out_channels != self.k * self.k:
            raise ShapeError(
                f"detail encoder must emit {self.k**2} channels for k="
                f"{self.k}, got {self.encoder.out_channels}")

    def tensors(self) -> tuple[Tensor, ...]:
        return self.encoder.tensors()


def init_sde_params(rng: np.random.Generator, channels: int, k: int = 3,
                    dtype=np.float32) -> SdeParams:
    """Uniform fan-in weights, zero bias: initial kernels are near-uniform,
    so the stage starts as a mild unsharp mask."""
    encoder = ops.init_conv_params(rng, channels, k * k, k=3, padding=1,
                                   dtype=dtype)
    return SdeParams(encoder=encoder, k=k)


class SdeMaps(NamedTuple):
    smooth: Tensor
    detail: Tensor
    enhanced: Tensor


def sde_decompose(f_prime: Tensor, params: SdeParams) -> SdeMaps:
    """Run the stage and keep the intermediate maps.

    smooth   = reassemble(f', softmax(encoder(f')))
    detail   = f' - smooth
    enhanced = 2*f' - smooth   (committed expression order: the identity
                                enhanced == 2*f' - smooth is exact)
    """
    _, c, _, _ = require_4d(f_prime, "detail-stage input")
    if c != params.encoder.in_channels:
        raise ShapeError(f"detail-stage input has {c} channels but encoder "
                         f"expects {params.encoder.in_channels}")
    mask = ops.conv2d(f_prime, params.encoder)
    field = normalize_kernels(mask, params.k)
    smooth = reassemble(f_prime, field)
    detail = ops.sub(f_prime, smooth)
    enhanced = ops.sub(ops.scale(f_prime, 2.0), smooth)
    return SdeMaps(smooth=smooth, detail=detail, enhanced=enhanced)


def sde_forward(f_prime: Tensor, params: SdeParams) -> Tensor:
    """Detail-enhanced features, same shape as the input."""
    return sde_decompose(f_prime, params).enhanced
