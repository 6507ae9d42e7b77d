"""Semantic refinement: upsample the next (coarser) stage under guidance
of the current detail-enhanced stage.

The coarse map proposes per-position kernels at low resolution (shuffled
up to full resolution); the fine map proposes guidance kernels. Guidance
reassembles the upsampled proposals, the two logit fields are fused by
addition, and the normalized fused kernels filter the nearest-upsampled
coarse features into a structure-aware high-resolution map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .reassembly import normalize_kernels, reassemble, reassemble_vector
from .tensor import ShapeError, Tensor, require_4d


@dataclass
class SsrParams:
    """Encoders for one refinement stage.

    lp_encoder:    C' -> k*k*s*s logits on the coarse grid (pre-shuffle)
    guide_encoder: C' -> k*k guidance logits on the fine grid
    """

    lp_encoder: ops.ConvParams
    guide_encoder: ops.ConvParams
    k: int
    s: int = 2

    def __post_init__(self):
        if self.k % 2 == 0 or self.k < 1:
            raise ShapeError(f"refinement window must be odd, got {self.k}")
        if self.s != 2:
            raise ShapeError(f"refinement scale factor is fixed to 2, got "
                             f"{self.s}")
        want_lp = self.k * self.k * self.s * self.s
        if self.lp_encoder.out_channels != want_lp:
            raise ShapeError(f"coarse encoder must emit {want_lp} channels, "
                             f"got {self.lp_encoder.out_channels}")
        if self.guide_encoder.out_channels != self.k * self.k:
            raise ShapeError(f"guide encoder must emit {self.k**2} channels, "
                             f"got {self.guide_encoder.out_channels}")

    def tensors(self) -> tuple[Tensor, ...]:
        return self.lp_encoder.tensors() + self.guide_encoder.tensors()


def init_ssr_params(rng: np.random.Generator, channels: int, k: int,
                    s: int = 2, dtype=np.float32) -> SsrParams:
    lp = ops.init_conv_params(rng, channels, k * k * s * s, k=3, padding=1,
                              dtype=dtype)
    guide = ops.init_conv_params(rng, channels, k * k, k=3, padding=1,
                                 dtype=dtype)
    return SsrParams(lp_encoder=lp, guide_encoder=guide, k=k, s=s)


def ssr_forward(enhanced_hi: Tensor, f_lo: Tensor, params: SsrParams) -> Tensor:
    """Refine the coarse map up to the fine grid.

    Steps:
      1. coarse kernel logits on the low-res grid, pixel-shuffled up
      2. guidance logits from the fine map, softmax-normalized
      3. guided reassembly of the shuffled coarse logits (cross term)
      4. fused logits = guidance + cross, softmax-normalized
      5. nearest-upsample the coarse features, reassemble with the fused
         kernels
    Output matches `enhanced_hi` spatially with the same channel count.
    """
    n, c, h, w = require_4d(enhanced_hi, "refinement fine input")
    ln, lc, lh, lw = require_4d(f_lo, "refinement coarse input")
    if h % 2 != 0 or w % 2 != 0:
        raise ShapeError(f"refinement needs even fine dims, got {h}x{w}")
    if (ln, lc) != (n, c):
        raise ShapeError(f"coarse input {f_lo.shape} does not match fine "
                         f"input {enhanced_hi.shape} in batch/channels")
    if (lh, lw) != (h // 2, w // 2):
        raise ShapeError(f"coarse dims {lh}x{lw} must be exactly half of "
                         f"fine dims {h}x{w}")
    if c != params.guide_encoder.in_channels:
        raise ShapeError(f"refinement input has {c} channels but encoders "
                         f"expect {params.guide_encoder.in_channels}")

    k, s = params.k, params.s
    lp_logits = ops.conv2d(f_lo, params.lp_encoder)
    lp_up = ops.pixel_shuffle(lp_logits, s)

    guide_logits = ops.conv2d(enhanced_hi, params.guide_encoder)
    guide_field = normalize_kernels(guide_logits, k)

    cross = reassemble_vector(lp_up, guide_field)
    fused_logits = ops.add(guide_logits, cross)
    fused_field = normalize_kernels(fused_logits, k)

    coarse_up = ops.nearest_upsample(f_lo, s)
    return reassemble(coarse_up, fused_field)
