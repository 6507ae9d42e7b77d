"""Command-line surface: filtering demo, data generation, training,
evaluation, gradient checking, and the naive-vs-tiled benchmark.

Exit codes: 0 success, 1 assertion/check failure, 2 usage or input error.
Every command accepts --seed and --deterministic; all code paths use
fixed reduction orders, so outputs are byte-reproducible for a seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import checks, scpt
from .config import parse_config_file, render_config
from .data import (DataError, SyntheticSpec, default_textures,
                   generate_dataset, load_image, load_manifest_dataset,
                   save_image, write_dataset)
from .ops import ConvParams
from .reassembly import reassemble_naive, reassemble_tiled
from .sde import SdeParams, init_sde_params, sde_decompose
from .tensor import ConfigError, ScopeError, Tensor
from .training import evaluate, train


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="seed for any randomized choices (default 0; for "
                          "train, overrides the config seed)")
    sub.add_argument("--deterministic", action="store_true",
                     help="require byte-reproducible outputs (reduction "
                          "orders are always fixed; this asserts the mode)")


# ---------------------------------------------------------------------------
# demo-sde
# ---------------------------------------------------------------------------

def _demo_encoder(args, channels: int) -> SdeParams:
    if args.weights:
        tensors = scpt.load_tensors(args.weights)
        try:
            weight = tensors["sde1.encoder.weight"]
            bias = tensors["sde1.encoder.bias"]
        except KeyError as exc:
            raise ConfigError(f"{args.weights}: missing sde1.encoder.* "
                              f"parameters") from exc
        out_ch = weight.shape[0]
        k = int(round(np.sqrt(out_ch)))
        if k * k != out_ch:
            raise ConfigError(f"{args.weights}: encoder emits {out_ch} "
                              f"channels, not a square kernel")
        if weight.shape[1] != channels:
            raise ConfigError(f"{args.weights}: encoder expects "
                              f"{weight.shape[1]} input channels, image has "
                              f"{channels}")
        params = SdeParams(
            encoder=ConvParams(weight=Tensor(weight.astype(np.float32)),
                               bias=Tensor(bias.reshape(out_ch)
                                           .astype(np.float32)),
                               padding=weight.shape[2] // 2),
            k=k)
        return params
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    return init_sde_params(rng, channels, k=args.k)


def cmd_demo_sde(args) -> int:
    image = load_image(args.image)
    params = _demo_encoder(args, image.shape[1])
    maps = sde_decompose(image, params)

    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    def clipped(t: Tensor) -> Tensor:
        return Tensor(np.clip(t.data, 0.0, 1.0))

    detail = maps.detail.data
    peak = float(np.abs(detail).max())
    if peak > 0:
        # zero residual renders mid-gray
        shown = detail / (2.0 * peak) + 0.5
    else:
        shown = np.full_like(detail, 0.5)

    save_image(f"{prefix}_smooth.ppm", clipped(maps.smooth))
    save_image(f"{prefix}_detail.ppm", Tensor(shown))
    save_image(f"{prefix}_enhanced.ppm", clipped(maps.enhanced))
    print(f"wrote {prefix}_smooth.ppm, {prefix}_detail.ppm, "
          f"{prefix}_enhanced.ppm (k={params.k})")
    return 0


# ---------------------------------------------------------------------------
# gen-data / train / eval
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    spec = SyntheticSpec(
        num_classes=args.classes,
        train_per_class=args.train_per_class,
        val_per_class=args.val_per_class,
        image_size=args.size,
        textures=default_textures(args.classes, amplitude=args.amplitude),
        noise_sigma=args.noise,
        seed=args.seed if args.seed is not None else 0)
    train_manifest, val_manifest = write_dataset(spec, args.out)
    print(f"wrote {train_manifest} ({spec.num_classes * spec.train_per_class}"
          f" samples) and {val_manifest} "
          f"({spec.num_classes * spec.val_per_class} samples)")
    return 0


def cmd_train(args) -> int:
    run = parse_config_file(args.config)
    if args.seed is not None:
        run.train.seed = args.seed
    if args.deterministic:
        run.train.deterministic = True
    if run.data_dir is not None:
        train_set = load_manifest_dataset(run.data_dir / "train.tsv")
        val_set = load_manifest_dataset(run.data_dir / "val.tsv")
    else:
        train_set, val_set = generate_dataset(run.synthetic)
    out_dir = run.out_dir if run.out_dir is not None else Path("run")
    result = train(run.network, run.train, train_set, val_set,
                   out_dir=out_dir, sidecar_text=render_config(run))
    sys.stdout.write(result.metrics_text())
    print(f"best: epoch {result.best_epoch}, "
          f"val_acc = {result.best_val_acc:.6f}")
    print(f"checkpoint: {result.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    acc = evaluate(args.checkpoint, args.data)
    print(f"val_acc = {acc:.6f}")
    return 0


# ---------------------------------------------------------------------------
# gradcheck / bench
# ---------------------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    results = checks.run_checks(args.module, corrupt_op=args.corrupt_op)
    failed = False
    for name, err in results.items():
        status = "ok" if err <= checks.FAIL_THRESHOLD else "FAIL"
        print(f"{name:24s} max_rel_err = {err:.3e}  {status}")
        failed = failed or err > checks.FAIL_THRESHOLD
    if failed:
        print(f"gradcheck FAILED (threshold {checks.FAIL_THRESHOLD:g})",
              file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed "
          f"(threshold {checks.FAIL_THRESHOLD:g})")
    return 0


def _parse_shape(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"--shape needs n,c,h,w, got {text!r}")
    try:
        n, c, h, w = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--shape needs integers, got {text!r}") from exc
    return n, c, h, w


def cmd_bench(args) -> int:
    n, c, h, w = _parse_shape(args.shape)
    k = args.k
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    feats = rng.standard_normal((n, c, h, w)).astype(np.float32)
    logits = rng.standard_normal((n, k * k, h, w)).astype(np.float32)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    kernels = e / e.sum(axis=1, keepdims=True)

    ref = reassemble_naive(feats, kernels, k)
    fast = reassemble_tiled(feats, kernels, k)
    max_dev = float(np.abs(ref - fast).max())
    if max_dev > 1e-5:
        print(f"agreement check failed: max deviation {max_dev:.3e} > 1e-5",
              file=sys.stderr)
        return 1

    def median_time(fn) -> float:
        times = []
        for _ in range(args.iters):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        return float(np.median(times))

    t_naive = median_time(lambda: reassemble_naive(feats, kernels, k))
    t_tiled = median_time(lambda: reassemble_tiled(feats, kernels, k))
    ratio = t_naive / t_tiled if t_tiled > 0 else float("inf")
    print(f"shape=({n},{c},{h},{w}) k={k} iters={args.iters}")
    print(f"agreement max deviation: {max_dev:.3e}")
    print(f"naive  median: {t_naive * 1e3:9.3f} ms")
    print(f"tiled  median: {t_tiled * 1e3:9.3f} ms")
    print(f"speedup: {ratio:.1f}x")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scopenet",
        description="content-adaptive filtering demos, training, and checks")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("demo-sde", help="dump smooth/detail/enhanced maps "
                                         "for an image")
    p.add_argument("--image", required=True, help="input PPM (P6) image")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--weights", default=None,
                   help="SCPT checkpoint with sde1.encoder.* (3-channel)")
    p.add_argument("--k", type=int, default=3, help="detail window size")
    _common_flags(p)
    p.set_defaults(func=cmd_demo_sde)

    p = subs.add_parser("gen-data", help="write a synthetic dataset + "
                                         "manifests")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--train-per-class", type=int, default=64)
    p.add_argument("--val-per-class", type=int, default=32)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--amplitude", type=float, default=0.12)
    _common_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = subs.add_parser("train", help="train a variant from a config file")
    p.add_argument("--config", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="score a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="manifest .tsv path")
    _common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("gradcheck", help="run the double-precision "
                                          "gradient suite")
    p.add_argument("--module", default="all", choices=checks.MODULES)
    p.add_argument("--corrupt-op", default=None,
                   help="test-harness hook: install a wrong gradient rule")
    _common_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = subs.add_parser("bench", help="time naive vs tiled reassembly")
    p.add_argument("--shape", default="1,64,64,64", help="n,c,h,w")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--iters", type=int, default=5)
    _common_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError, scpt.ContainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
