"""Content-adaptive spatial filtering operators with CPU autodiff.

The package provides per-position kernel prediction and reassembly
(detail extraction and semantic-guided upsampling), a four-stage toy
pyramid network assembling them, a deterministic synthetic fine-grained
dataset, and a training/evaluation/benchmark harness. Everything runs on
numpy in single or double precision; double precision exists so gradient
checks are meaningful.
"""

from . import ops
from .autodiff import Tape, backward, grad_map, gradcheck, zero_grads
from .data import Sample, SyntheticSpec, TextureParams, augment, \
    canonical_spec, generate_dataset, load_image, save_image
from .network import BackboneConfig, NetworkConfig, ScopeNetwork
from .ops import ConvParams
from .reassembly import KernelField, normalize_kernels, reassemble, \
    reassemble_backward, reassemble_naive, reassemble_tiled, reassemble_vector
from .sde import SdeParams, init_sde_params, sde_decompose, sde_forward
from .ssr import SsrParams, init_ssr_params, ssr_forward
from .tensor import ConfigError, ScopeError, ShapeError, Tensor
from .training import TrainConfig, TrainResult, cross_entropy, evaluate, \
    evaluate_model, lr_at, sgd_momentum_step, train

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig", "ConfigError", "ConvParams", "KernelField",
    "NetworkConfig", "Sample", "ScopeError", "ScopeNetwork", "SdeParams",
    "ShapeError", "SsrParams", "SyntheticSpec", "Tape", "Tensor",
    "TextureParams", "TrainConfig", "TrainResult", "augment", "backward",
    "canonical_spec", "cross_entropy", "evaluate", "evaluate_model",
    "generate_dataset", "grad_map", "gradcheck", "init_sde_params",
    "init_ssr_params", "load_image", "lr_at", "normalize_kernels", "ops",
    "reassemble", "reassemble_backward", "reassemble_naive",
    "reassemble_tiled", "reassemble_vector", "save_image", "sde_decompose",
    "sde_forward", "sgd_momentum_step", "ssr_forward", "train",
    "zero_grads",
]
