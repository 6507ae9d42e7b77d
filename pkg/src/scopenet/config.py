"""Plain-text key-value run configuration.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines
ignored. Unknown keys are rejected by name. The same format is written as
the checkpoint sidecar so evaluation can rebuild the architecture.

Documented keys:
  network:  variant, stage_channels, blocks_per_stage, c_prime, k_h, k_l,
            num_classes, agfs
  training: epochs, warmup_epochs, base_lr, momentum, batch_size, seed,
            schedule, augment, deterministic
  data:     data_dir (manifest directory from gen-data) or the synthetic
            keys train_per_class, val_per_class, image_size, noise_sigma,
            texture_amplitude, data_seed
  output:   out_dir
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .data import SyntheticSpec, default_textures
from .network import BackboneConfig, NetworkConfig
from .tensor import ConfigError
from .training import TrainConfig

_INT_KEYS = {"blocks_per_stage", "c_prime", "k_h", "num_classes", "epochs",
             "warmup_epochs", "batch_size", "seed", "train_per_class",
             "val_per_class", "image_size", "data_seed"}
_FLOAT_KEYS = {"base_lr", "momentum", "noise_sigma", "texture_amplitude",
               "clip_grad_norm"}
_BOOL_KEYS = {"agfs", "augment", "deterministic"}
_LIST_KEYS = {"stage_channels", "k_l"}
_STR_KEYS = {"variant", "schedule", "data_dir", "out_dir"}
ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _LIST_KEYS | _STR_KEYS

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


@dataclass
class RunSpec:
    network: NetworkConfig
    train: TrainConfig
    synthetic: SyntheticSpec
    data_dir: Path | None = None
    out_dir: Path | None = None


def _parse_value(key: str, raw: str, source: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if key in _LIST_KEYS:
            return tuple(int(part) for part in raw.split(","))
        return raw
    except ValueError as exc:
        raise ConfigError(f"{source}: bad value {raw!r} for key "
                          f"{key!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> RunSpec:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key "
                              f"{key!r}")
        values[key] = _parse_value(key, raw, f"{source}:{lineno}")
    return build_run_spec(values)


def parse_config_file(path: str | Path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def build_run_spec(values: dict[str, object]) -> RunSpec:
    def take(key: str, default):
        return values.get(key, default)

    variant = str(take("variant", "full"))
    if not bool(take("agfs", True)):
        # the gate is the only difference between the top two variants
        from .network import canonical_variant

        if canonical_variant(variant) == "full":
            variant = "sde_ssr"

    backbone = BackboneConfig(
        stage_channels=take("stage_channels", (32, 64, 128, 256)),
        blocks_per_stage=int(take("blocks_per_stage", 1)))
    network = NetworkConfig(
        num_classes=int(take("num_classes", 8)),
        backbone=backbone,
        c_prime=int(take("c_prime", 64)),
        k_h=int(take("k_h", 3)),
        k_l=take("k_l", (5, 7, 9)),
        variant=variant)
    train = TrainConfig(
        epochs=int(take("epochs", 50)),
        warmup_epochs=int(take("warmup_epochs", 5)),
        base_lr=float(take("base_lr", 0.05)),
        momentum=float(take("momentum", 0.9)),
        batch_size=int(take("batch_size", 8)),
        seed=int(take("seed", 0)),
        schedule=str(take("schedule", "cosine")),
        augment=bool(take("augment", True)),
        deterministic=bool(take("deterministic", True)),
        clip_grad_norm=float(take("clip_grad_norm", 1.0)))
    amplitude = float(take("texture_amplitude", 0.12))
    num_classes = network.num_classes
    synthetic = SyntheticSpec(
        num_classes=num_classes,
        train_per_class=int(take("train_per_class", 64)),
        val_per_class=int(take("val_per_class", 32)),
        image_size=int(take("image_size", 64)),
        textures=default_textures(num_classes, amplitude=amplitude),
        noise_sigma=float(take("noise_sigma", 0.02)),
        seed=int(take("data_seed", take("seed", 0))))
    data_dir = values.get("data_dir")
    out_dir = values.get("out_dir")
    return RunSpec(network=network, train=train, synthetic=synthetic,
                   data_dir=Path(str(data_dir)) if data_dir else None,
                   out_dir=Path(str(out_dir)) if out_dir else None)


def render_config(run: RunSpec) -> str:
    """Serialize a run back to config text (usable as a sidecar)."""
    net, tr, syn = run.network, run.train, run.synthetic
    amplitude = syn.textures[0].amplitude if syn.textures else 0.12
    lines = [
        f"variant = {net.variant}",
        f"stage_channels = {','.join(str(c) for c in net.backbone.stage_channels)}",
        f"blocks_per_stage = {net.backbone.blocks_per_stage}",
        f"c_prime = {net.c_prime}",
        f"k_h = {net.k_h}",
        f"k_l = {','.join(str(k) for k in net.k_l)}",
        f"num_classes = {net.num_classes}",
        f"epochs = {tr.epochs}",
        f"warmup_epochs = {tr.warmup_epochs}",
        f"base_lr = {tr.base_lr}",
        f"momentum = {tr.momentum}",
        f"batch_size = {tr.batch_size}",
        f"seed = {tr.seed}",
        f"schedule = {tr.schedule}",
        f"augment = {'on' if tr.augment else 'off'}",
        f"deterministic = {'on' if tr.deterministic else 'off'}",
        f"clip_grad_norm = {tr.clip_grad_norm}",
        f"train_per_class = {syn.train_per_class}",
        f"val_per_class = {syn.val_per_class}",
        f"image_size = {syn.image_size}",
        f"noise_sigma = {syn.noise_sigma}",
        f"texture_amplitude = {amplitude}",
        f"data_seed = {syn.seed}",
    ]
    if run.data_dir is not None:
        lines.append(f"data_dir = {run.data_dir}")
    return "\n".join(lines) + "\n"
