"""Named double-precision gradient checks for every differentiable piece.

Each check builds small float64 inputs with a pinned seed and compares
analytic gradients against central finite differences. The CLI runs these
and fails if any error exceeds 1e-4; the test suite asserts tighter
per-op bounds (linear operators are exact up to rounding).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import ops
from .autodiff import gradcheck
from .network import BackboneConfig, NetworkConfig, ScopeNetwork
from .reassembly import KernelField, reassemble, reassemble_vector
from .sde import init_sde_params, sde_forward
from .ssr import init_ssr_params, ssr_forward
from .tensor import ConfigError, Tensor, make_node
from .training import cross_entropy

FAIL_THRESHOLD = 1e-4


def _t(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _conv(rng: np.random.Generator, ic: int, oc: int, k: int = 3,
          stride: int = 1) -> ops.ConvParams:
    return ops.init_conv_params(rng, ic, oc, k=k, stride=stride,
                                dtype=np.float64)


def _away_from_kinks(rng: np.random.Generator, shape, kinks, margin=0.05):
    """Random values nudged outside +-margin of each non-smooth point."""
    x = rng.standard_normal(shape) * 2.0
    for kink in kinks:
        near = np.abs(x - kink) < margin
        x = np.where(near, kink + margin * np.sign(x - kink + 1e-12) * 2, x)
    return Tensor(x, requires_grad=True)


def _check_conv2d(rng):
    x = _t(rng, 2, 3, 6, 6)
    params = _conv(rng, 3, 4)
    return gradcheck(lambda *a: ops.conv2d(x, params),
                     [x, params.weight, params.bias], rng=rng)


def _check_conv2d_strided(rng):
    x = _t(rng, 1, 2, 7, 7)
    params = _conv(rng, 2, 3, stride=2)
    return gradcheck(lambda *a: ops.conv2d(x, params),
                     [x, params.weight, params.bias], rng=rng)


def _check_softmax(rng):
    x = _t(rng, 2, 9, 4, 4)
    return gradcheck(lambda a: ops.softmax_per_position(a), [x], rng=rng)


def _check_pixel_shuffle(rng):
    x = _t(rng, 2, 8, 3, 3)
    return gradcheck(lambda a: ops.pixel_shuffle(a, 2), [x], rng=rng)


def _check_pixel_unshuffle(rng):
    x = _t(rng, 2, 2, 6, 6)
    return gradcheck(lambda a: ops.pixel_unshuffle(a, 2), [x], rng=rng)


def _check_unfold(rng):
    x = _t(rng, 2, 3, 5, 5)
    return gradcheck(lambda a: ops.unfold_neighborhood(a, 3), [x], rng=rng)


def _check_nearest_upsample(rng):
    x = _t(rng, 2, 3, 3, 3)
    return gradcheck(lambda a: ops.nearest_upsample(a, 2), [x], rng=rng)


def _check_avg_pool(rng):
    x = _t(rng, 2, 3, 6, 6)
    return gradcheck(lambda a: ops.avg_pool_to(a, 3, 2), [x], rng=rng)


def _check_global_avg_pool(rng):
    x = _t(rng, 2, 4, 4, 4)
    return gradcheck(lambda a: ops.global_avg_pool(a), [x], rng=rng)


def _check_sigmoid(rng):
    x = _t(rng, 2, 3, 4, 4)
    return gradcheck(lambda a: ops.sigmoid(a), [x], rng=rng)


def _check_relu(rng):
    x = _away_from_kinks(rng, (2, 3, 4, 4), kinks=(0.0,))
    return gradcheck(lambda a: ops.relu(a), [x], rng=rng)


def _check_hardswish(rng):
    x = _away_from_kinks(rng, (2, 3, 4, 4), kinks=(-3.0, 3.0))
    return gradcheck(lambda a: ops.hardswish(a), [x], rng=rng)


def _check_elementwise(rng):
    a = _t(rng, 2, 3, 4, 4)
    b = _t(rng, 2, 3, 4, 4)
    return gradcheck(lambda u, v: ops.add(ops.mul(u, v), ops.sub(u, v)),
                     [a, b], rng=rng)


def _check_mul_broadcast(rng):
    a = _t(rng, 2, 4, 3, 3)
    gate = _t(rng, 2, 1, 3, 3)
    return gradcheck(lambda u, v: ops.mul(u, v), [a, gate], rng=rng)


def _check_concat(rng):
    a = _t(rng, 2, 2, 3, 3)
    b = _t(rng, 2, 3, 3, 3)
    return gradcheck(lambda u, v: ops.concat_channels([u, v]), [a, b],
                     rng=rng)


def _check_fully_connected(rng):
    x = _t(rng, 3, 5, 1, 1)
    w = _t(rng, 4, 5)
    b = _t(rng, 4)
    return gradcheck(lambda *a: ops.fully_connected(x, w, b), [x, w, b],
                     rng=rng)


def _check_reassemble(rng):
    feats = _t(rng, 1, 3, 5, 5)
    logits = _t(rng, 1, 9, 5, 5)

    def closure(*a):
        field = KernelField(ops.softmax_per_position(logits), k=3,
                            normalized=True)
        return reassemble(feats, field)

    return gradcheck(closure, [feats, logits], rng=rng)


def _check_reassemble_vector(rng):
    masks = _t(rng, 1, 9, 4, 4)
    logits = _t(rng, 1, 9, 4, 4)

    def closure(*a):
        field = KernelField(ops.softmax_per_position(logits), k=3,
                            normalized=True)
        return reassemble_vector(masks, field)

    return gradcheck(closure, [masks, logits], rng=rng)


def _check_cross_entropy(rng):
    logits = _t(rng, 4, 5)
    labels = np.array([0, 2, 4, 1])
    return gradcheck(lambda a: cross_entropy(a, labels), [logits], rng=rng)


def _check_sde_module(rng):
    x = _t(rng, 1, 4, 6, 6)
    params = init_sde_params(rng, 4, k=3, dtype=np.float64)
    return gradcheck(lambda *a: sde_forward(x, params),
                     [x, *params.tensors()], rng=rng)


def _check_ssr_module(rng):
    hi = _t(rng, 1, 3, 6, 6)
    lo = _t(rng, 1, 3, 3, 3)
    params = init_ssr_params(rng, 3, k=3, dtype=np.float64)
    return gradcheck(lambda *a: ssr_forward(hi, lo, params),
                     [hi, lo, *params.tensors()], rng=rng)


def _check_network_micro(rng):
    config = NetworkConfig(
        num_classes=3,
        backbone=BackboneConfig(stage_channels=(4, 4, 4, 4)),
        c_prime=4, k_h=3, k_l=(3, 3, 3), variant="full")
    net = ScopeNetwork(config, seed=7, dtype=np.float64)
    image = _t(rng, 1, 3, 32, 32)
    params = list(net.parameters().values())
    # scaling the output keeps the difference-quotient noise below the
    # 1e-8 denominator floor, so exactly-zero gradients (dead relu units)
    # do not register as false mismatches
    return gradcheck(lambda *a: ops.scale(net.forward(image), 0.01),
                     [image, *params], rng=rng, max_elements_per_input=12)


_CHECKS: list[tuple[str, str, object]] = [
    ("conv2d", "sde", _check_conv2d),
    ("conv2d_strided", "network", _check_conv2d_strided),
    ("softmax_per_position", "sde", _check_softmax),
    ("pixel_shuffle", "ssr", _check_pixel_shuffle),
    ("pixel_unshuffle", "ssr", _check_pixel_unshuffle),
    ("unfold_neighborhood", "ssr", _check_unfold),
    ("nearest_upsample", "ssr", _check_nearest_upsample),
    ("avg_pool_to", "network", _check_avg_pool),
    ("global_avg_pool", "network", _check_global_avg_pool),
    ("sigmoid", "network", _check_sigmoid),
    ("relu", "network", _check_relu),
    ("hardswish", "network", _check_hardswish),
    ("add_sub_mul", "network", _check_elementwise),
    ("mul_broadcast", "network", _check_mul_broadcast),
    ("concat_channels", "network", _check_concat),
    ("fully_connected", "network", _check_fully_connected),
    ("reassemble", "sde", _check_reassemble),
    ("reassemble_vector", "ssr", _check_reassemble_vector),
    ("cross_entropy", "network", _check_cross_entropy),
    ("sde_forward", "sde", _check_sde_module),
    ("ssr_forward", "ssr", _check_ssr_module),
    ("network_forward", "network", _check_network_micro),
]

MODULES = ("all", "sde", "ssr", "network")


@contextmanager
def corrupted_backward(op_name: str | None):
    """Test-harness hook: install a deliberately wrong gradient rule."""
    if op_name is None:
        yield
        return
    if op_name != "sigmoid":
        raise ConfigError(f"no corruption hook for op {op_name!r}")
    original = ops.sigmoid

    def bad_sigmoid(x: Tensor) -> Tensor:
        y = 1.0 / (1.0 + np.exp(-x.data))

        def backward(g: np.ndarray) -> None:
            if x.requires_grad:
                x.accumulate_grad(1.5 * g * y * (1.0 - y))  # wrong on purpose

        return make_node(y, (x,), "sigmoid", backward)

    ops.sigmoid = bad_sigmoid
    try:
        yield
    finally:
        ops.sigmoid = original


def run_checks(module: str = "all",
               corrupt_op: str | None = None) -> dict[str, float]:
    """Run the suite for one module group; returns name -> max rel error."""
    if module not in MODULES:
        raise ConfigError(f"unknown gradcheck module {module!r}; expected "
                          f"one of {MODULES}")
    results: dict[str, float] = {}
    with corrupted_backward(corrupt_op):
        for name, group, fn in _CHECKS:
            if module != "all" and group != module:
                continue
            rng = np.random.default_rng(2024)
            results[name] = float(fn(rng))
    return results
