"""End-to-end model: pyramid backbone, channel compression, the cascaded
detail/refinement engine, spatial attention gating, and the classifier.

The backbone is a small four-stage convolutional pyramid with overall
strides 4/8/16/32 (a stand-in producing the standard stage geometry).
Every stage is compressed to a common width C' by 1x1 convolutions; the
cascade enhances stages 1..3, refines each next stage under that
guidance, concatenates adjacent pairs, pools everything to stage-4
resolution, and fuses with a 1x1 convolution. A single-channel sigmoid
gate derived from the compressed deepest stage scales the aggregate
before pooling and classification.

Ablation wiring (each a strict subset of the next):
    baseline  (a): compressed stage 4 straight into the classifier head
    sde       (b): detail-enhanced branches only, fused
    sde_ssr   (c): detail + refinement branches, fused
    full      (d): (c) plus the attention gate
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .sde import SdeParams, init_sde_params, sde_forward
from .ssr import SsrParams, init_ssr_params, ssr_forward
from .tensor import ConfigError, ShapeError, Tensor, require_4d

VARIANTS = ("baseline", "sde", "sde_ssr", "full")
_VARIANT_ALIASES = {"a": "baseline", "b": "sde", "c": "sde_ssr", "d": "full"}


def canonical_variant(name: str) -> str:
    v = _VARIANT_ALIASES.get(name.strip().lower(), name.strip().lower())
    if v not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; expected one of "
                          f"{VARIANTS} or aliases a-d")
    return v


@dataclass
class BackboneConfig:
    """Four-stage pyramid; stage i halves the previous stage's dims."""

    stage_channels: tuple[int, int, int, int] = (32, 64, 128, 256)
    blocks_per_stage: int = 1

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        if len(self.stage_channels) != 4:
            raise ConfigError(f"backbone needs exactly 4 stage channel "
                              f"counts, got {self.stage_channels}")
        if any(c < 1 for c in self.stage_channels):
            raise ConfigError(f"stage channels must be >= 1, got "
                              f"{self.stage_channels}")
        if self.blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage must be >= 1, got "
                              f"{self.blocks_per_stage}")


@dataclass
class NetworkConfig:
    num_classes: int
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    c_prime: int = 64
    k_h: int = 3
    k_l: tuple[int, int, int] = (5, 7, 9)
    variant: str = "full"

    def __post_init__(self):
        self.variant = canonical_variant(self.variant)
        self.k_l = tuple(int(k) for k in self.k_l)
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got "
                              f"{self.num_classes}")
        if self.c_prime < 2:
            raise ConfigError(f"c_prime must be >= 2, got {self.c_prime}")
        if len(self.k_l) != 3:
            raise ConfigError(f"k_l schedule needs 3 window sizes, got "
                              f"{self.k_l}")
        for k in (self.k_h, *self.k_l):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel window sizes must be odd, got {k}")


class ScopeNetwork:
    """Parameter container plus the forward wiring for every variant.

    All modules are constructed for every variant (with per-module RNG
    streams, so a given seed yields identical shared initializations across
    variants); the variant only selects which ones the forward pass uses.
    Unused parameters therefore receive zero gradient.
    """

    def __init__(self, config: NetworkConfig, seed: int = 0,
                 dtype=np.float32):
        self.config = config
        self.dtype = dtype
        cp = config.c_prime
        chans = config.backbone.stage_channels

        streams = np.random.SeedSequence(seed).spawn(7)
        rng_bb, rng_comp, rng_sde, rng_ssr, rng_fuse, rng_agfs, rng_cls = (
            np.random.default_rng(s) for s in streams)

        def conv(rng, ic, oc, k=3, stride=1, pad=None, gain=1.0):
            return ops.init_conv_params(rng, ic, oc, k=k, stride=stride,
                                        padding=pad, dtype=dtype, gain=gain)

        relu_gain = float(np.sqrt(6.0))  # keeps relu-chain activations scaled

        # backbone: stride-4 stem into stage 1, stride-2 between stages
        self.stem = [conv(rng_bb, 3, chans[0], stride=2, gain=relu_gain),
                     conv(rng_bb, chans[0], chans[0], stride=2,
                          gain=relu_gain)]
        self.downs = [conv(rng_bb, chans[i], chans[i + 1], stride=2,
                           gain=relu_gain) for i in range(3)]
        self.blocks = [[conv(rng_bb, chans[i], chans[i], gain=relu_gain)
                        for _ in range(config.backbone.blocks_per_stage)]
                       for i in range(4)]

        self.compressors = [conv(rng_comp, chans[i], cp, k=1, pad=0,
                                 gain=float(np.sqrt(3.0)))
                            for i in range(4)]
        self.sde = [init_sde_params(rng_sde, cp, k=config.k_h, dtype=dtype)
                    for _ in range(3)]
        self.ssr = [init_ssr_params(rng_ssr, cp, k=config.k_l[i], dtype=dtype)
                    for i in range(3)]

        fusion_width = 4 * cp if config.variant == "sde" else 7 * cp
        self.fusion = conv(rng_fuse, fusion_width, cp, k=1, pad=0,
                           gain=float(np.sqrt(3.0)))

        mid = max(1, cp // 2)
        self.agfs_conv1 = conv(rng_agfs, cp, mid, k=1, pad=0, gain=relu_gain)
        self.agfs_conv2 = conv(rng_agfs, mid, 1, k=1, pad=0,
                               gain=float(np.sqrt(3.0)))

        bound = 1.0 / np.sqrt(cp)
        self.classifier_weight = Tensor(
            rng_cls.uniform(-bound, bound,
                            size=(config.num_classes, cp)).astype(dtype),
            requires_grad=True)
        self.classifier_bias = Tensor(
            np.zeros(config.num_classes, dtype=dtype), requires_grad=True)

    # -- parameter registry -------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}

        def put(prefix: str, conv: ops.ConvParams) -> None:
            params[f"{prefix}.weight"] = conv.weight
            params[f"{prefix}.bias"] = conv.bias

        put("backbone.stem1", self.stem[0])
        put("backbone.stem2", self.stem[1])
        for i in range(4):
            for j, block in enumerate(self.blocks[i], start=1):
                put(f"backbone.stage{i + 1}.block{j}", block)
            if i < 3:
                put(f"backbone.stage{i + 2}.down", self.downs[i])
        for i in range(4):
            put(f"compressor{i + 1}", self.compressors[i])
        for i in range(3):
            put(f"sde{i + 1}.encoder", self.sde[i].encoder)
        for i in range(3):
            put(f"ssr{i + 1}.lp_encoder", self.ssr[i].lp_encoder)
            put(f"ssr{i + 1}.guide_encoder", self.ssr[i].guide_encoder)
        put("fusion", self.fusion)
        put("agfs.conv1", self.agfs_conv1)
        put("agfs.conv2", self.agfs_conv2)
        params["classifier.weight"] = self.classifier_weight
        params["classifier.bias"] = self.classifier_bias
        return params

    def used_parameter_names(self) -> list[str]:
        """Names of parameters the configured variant's forward touches."""
        variant = self.config.variant
        names = [n for n in self.parameters() if n.startswith("backbone.")]
        if variant == "baseline":
            names += ["compressor4.weight", "compressor4.bias"]
        else:
            names += [f"compressor{i}.{p}" for i in range(1, 5)
                      for p in ("weight", "bias")]
            names += [f"sde{i}.encoder.{p}" for i in range(1, 4)
                      for p in ("weight", "bias")]
            if variant in ("sde_ssr", "full"):
                names += [f"ssr{i}.{enc}.{p}" for i in range(1, 4)
                          for enc in ("lp_encoder", "guide_encoder")
                          for p in ("weight", "bias")]
            names += ["fusion.weight", "fusion.bias"]
            if variant == "full":
                names += [f"agfs.{c}.{p}" for c in ("conv1", "conv2")
                          for p in ("weight", "bias")]
        names += ["classifier.weight", "classifier.bias"]
        return names

    def used_parameter_count(self) -> int:
        params = self.parameters()
        return sum(params[n].size for n in self.used_parameter_names())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    # -- serialization --------------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        """Install a (possibly 4-dim-padded) snapshot into the parameters."""
        params = self.parameters()
        for name, p in params.items():
            if name not in state:
                raise ConfigError(f"checkpoint is missing parameter {name!r}")
            arr = np.asarray(state[name])
            if arr.size != p.data.size:
                raise ConfigError(
                    f"checkpoint parameter {name!r} has {arr.size} values, "
                    f"model expects {p.data.size}")
            p.data = np.ascontiguousarray(
                arr.reshape(p.data.shape), dtype=p.data.dtype)

    # -- forward pieces -----------------------------------------------------
    def backbone_forward(self, image: Tensor) -> tuple[Tensor, ...]:
        """Stage features with channels C_i at strides 4/8/16/32."""
        _, c, h, w = require_4d(image, "backbone input")
        if c != 3:
            raise ShapeError(f"backbone expects 3 input channels, got {c}")
        if h % 32 != 0 or w % 32 != 0:
            raise ShapeError(f"backbone input dims must be divisible by 32, "
                             f"got {h}x{w}")
        x = ops.relu(ops.conv2d(image, self.stem[0]))
        x = ops.relu(ops.conv2d(x, self.stem[1]))
        feats = []
        for i in range(4):
            if i > 0:
                x = ops.relu(ops.conv2d(x, self.downs[i - 1]))
            for block in self.blocks[i]:
                x = ops.relu(ops.conv2d(x, block))
            feats.append(x)
        return tuple(feats)

    def compress(self, feats: tuple[Tensor, ...]) -> list[Tensor]:
        return [ops.conv2d(f, comp)
                for f, comp in zip(feats, self.compressors)]

    def scope_cascade(self, f_primes: list[Tensor]) -> Tensor:
        """Detail/refinement branches pooled to stage 4 and fused to C'."""
        return self._aggregate(f_primes, use_ssr=True)

    def _aggregate(self, f_primes: list[Tensor], use_ssr: bool) -> Tensor:
        _, _, h4, w4 = f_primes[3].shape
        pooled = []
        for i in range(3):
            enhanced = sde_forward(f_primes[i], self.sde[i])
            if use_ssr:
                refined = ssr_forward(enhanced, f_primes[i + 1], self.ssr[i])
                branch = ops.concat_channels([enhanced, refined])
            else:
                branch = enhanced
            pooled.append(ops.avg_pool_to(branch, h4, w4))
        stacked = ops.concat_channels(pooled + [f_primes[3]])
        return ops.conv2d(stacked, self.fusion)

    def agfs(self, f_agg: Tensor, f_prime4: Tensor) -> Tensor:
        """Scale aggregated features by a single-channel spatial gate."""
        if f_agg.shape[2:] != f_prime4.shape[2:]:
            raise ShapeError(f"attention input {f_prime4.shape} does not "
                             f"match aggregate {f_agg.shape} spatially")
        hidden = ops.hardswish(ops.conv2d(f_prime4, self.agfs_conv1))
        attn = ops.sigmoid(ops.conv2d(hidden, self.agfs_conv2))
        return ops.mul(f_agg, attn)

    def attention_map(self, f_prime4: Tensor) -> Tensor:
        hidden = ops.hardswish(ops.conv2d(f_prime4, self.agfs_conv1))
        return ops.sigmoid(ops.conv2d(hidden, self.agfs_conv2))

    def classify(self, f_final: Tensor) -> Tensor:
        pooled = ops.global_avg_pool(f_final)
        return ops.fully_connected(pooled, self.classifier_weight,
                                   self.classifier_bias)

    def forward(self, image: Tensor) -> Tensor:
        """Image batch (n, 3, H, W) -> logits (n, num_classes)."""
        variant = self.config.variant
        feats = self.backbone_forward(image)
        if variant == "baseline":
            f_final = ops.conv2d(feats[3], self.compressors[3])
            return self.classify(f_final)
        f_primes = self.compress(feats)
        f_agg = self._aggregate(f_primes, use_ssr=variant != "sde")
        if variant == "full":
            f_final = self.agfs(f_agg, f_primes[3])
        else:
            f_final = f_agg
        return self.classify(f_final)
