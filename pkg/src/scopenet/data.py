"""Deterministic synthetic fine-grained dataset, image I/O, augmentation.

Every class shares the same global structure (an elliptical body over a
smooth background); classes differ only in a subtle striped micro-edge
texture inside the body (frequency, orientation, amplitude). Pose,
brightness, stripe phase, and noise vary per sample independently of the
class, so the only reliable class signal is high-frequency. Generation is
a pure function of (spec, class, index).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .tensor import ConfigError, ScopeError, Tensor


class DataError(ScopeError):
    """Raised for unreadable or malformed image/manifest files."""


@dataclass(frozen=True)
class TextureParams:
    """Class-specific stripe texture: cycles/image, radians, 0..1 strength."""

    frequency: float
    orientation: float
    amplitude: float


@dataclass
class SyntheticSpec:
    num_classes: int = 8
    train_per_class: int = 64
    val_per_class: int = 32
    image_size: int = 64
    textures: tuple[TextureParams, ...] = ()
    shape_center: tuple[float, float] = (0.5, 0.52)
    shape_axes: tuple[float, float] = (0.34, 0.26)
    noise_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got "
                              f"{self.num_classes}")
        if not self.textures:
            self.textures = default_textures(self.num_classes)
        if len(self.textures) != self.num_classes:
            raise ConfigError(f"{len(self.textures)} texture param sets for "
                              f"{self.num_classes} classes")
        freqs = [t.frequency for t in self.textures]
        identical = len(set(self.textures)) == 1
        if not identical:
            for i in range(len(freqs)):
                for j in range(i + 1, len(freqs)):
                    if abs(freqs[i] - freqs[j]) < 1.0:
                        raise ConfigError(
                            f"class stripe frequencies must differ by >= 1 "
                            f"cycle (classes {i} and {j}: {freqs[i]} vs "
                            f"{freqs[j]})")


def default_textures(num_classes: int,
                     amplitude: float = 0.12) -> tuple[TextureParams, ...]:
    """Frequencies 3, 4, ... (pairwise >= 1 cycle apart), fanned orientations."""
    return tuple(
        TextureParams(frequency=3.0 + c,
                      orientation=np.pi * c / num_classes + np.pi / 8.0,
                      amplitude=amplitude)
        for c in range(num_classes))


def canonical_spec(seed: int = 0) -> SyntheticSpec:
    """The 8-class spec used by the acceptance ablation."""
    return SyntheticSpec(seed=seed)


@dataclass
class Sample:
    image: Tensor          # (1, 3, S, S), values in [0, 1]
    label: int


_CHANNEL_GAINS = np.array([1.0, 0.96, 0.92], dtype=np.float64)


def generate_sample(spec: SyntheticSpec, cls: int, index: int) -> Sample:
    """Render one sample; deterministic in (spec.seed, cls, index)."""
    if not 0 <= cls < spec.num_classes:
        raise ConfigError(f"class {cls} out of range for "
                          f"{spec.num_classes}-class spec")
    rng = np.random.default_rng([spec.seed, cls, index])
    s = spec.image_size
    tex = spec.textures[cls]

    yy, xx = np.meshgrid(np.arange(s) / s, np.arange(s) / s, indexing="ij")

    # class-independent nuisances; the contrast jitter keeps per-image
    # texture energy uninformative so the cue is the stripe geometry
    cx = spec.shape_center[0] + rng.uniform(-0.04, 0.04)
    cy = spec.shape_center[1] + rng.uniform(-0.04, 0.04)
    ax = spec.shape_axes[0] * (1.0 + rng.uniform(-0.08, 0.08))
    ay = spec.shape_axes[1] * (1.0 + rng.uniform(-0.08, 0.08))
    phase = rng.uniform(0.0, 1.0)
    brightness = rng.uniform(-0.04, 0.04)
    contrast = rng.uniform(0.7, 1.3)

    background = 0.35 + 0.18 * yy + brightness
    body = 0.58 + brightness
    mask = (((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2) <= 1.0

    u = xx * np.cos(tex.orientation) + yy * np.sin(tex.orientation)
    stripes = np.sign(np.sin(2.0 * np.pi * (tex.frequency * u + phase)))
    texture = tex.amplitude * contrast * stripes

    gray = np.where(mask, body + texture, background)
    img = gray[None, :, :] * _CHANNEL_GAINS[:, None, None]
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    return Sample(image=Tensor(img[None]), label=cls)


def generate_dataset(spec: SyntheticSpec) -> tuple[list[Sample], list[Sample]]:
    """Balanced train/val splits, disjoint by index range, seed-deterministic."""
    train = [generate_sample(spec, cls, idx)
             for cls in range(spec.num_classes)
             for idx in range(spec.train_per_class)]
    val = [generate_sample(spec, cls, spec.train_per_class + idx)
           for cls in range(spec.num_classes)
           for idx in range(spec.val_per_class)]
    return train, val


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Spatial Gaussian blur of an (n, c, h, w) array; identity as sigma->0."""
    if sigma <= 0:
        return image
    return ndimage.gaussian_filter(image, sigma=(0, 0, sigma, sigma))


def augment(sample: Sample, rng: np.random.Generator,
            crop_pad: int = 4) -> Sample:
    """Horizontal flip (p=0.5), Gaussian blur (p=0.3, sigma in [0.1, 1]),
    then zero-pad and random-crop back to the original size."""
    img = sample.image.data
    if rng.random() < 0.5:
        img = img[:, :, :, ::-1]
    if rng.random() < 0.3:
        img = gaussian_blur(img, rng.uniform(0.1, 1.0))
    _, _, h, w = img.shape
    padded = np.zeros((1, 3, h + 2 * crop_pad, w + 2 * crop_pad),
                      dtype=img.dtype)
    padded[:, :, crop_pad:crop_pad + h, crop_pad:crop_pad + w] = img
    dy = int(rng.integers(0, 2 * crop_pad + 1))
    dx = int(rng.integers(0, 2 * crop_pad + 1))
    img = padded[:, :, dy:dy + h, dx:dx + w]
    return Sample(image=Tensor(np.ascontiguousarray(img)),
                  label=sample.label)


# ---------------------------------------------------------------------------
# PPM (P6) image files
# ---------------------------------------------------------------------------

def save_image(path: str | Path, image: Tensor) -> None:
    """Write a (1, 3, h, w) tensor in [0, 1] as binary PPM (P6)."""
    arr = image.data
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[1] != 3:
        raise DataError(f"save_image expects a (1, 3, h, w) tensor, got "
                        f"{arr.shape}")
    _, _, h, w = arr.shape
    rgb = np.clip(np.rint(arr[0] * 255.0), 0, 255).astype(np.uint8)
    payload = rgb.transpose(1, 2, 0).tobytes()  # row-major, interleaved RGB
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + payload)


def _read_token(blob: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(blob):
        if blob[pos:pos + 1].isspace():
            pos += 1
        elif blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(blob) and not blob[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise DataError("truncated PPM header")
    return blob[start:pos], pos


def load_image(path: str | Path) -> Tensor:
    """Read a binary PPM (P6) into a (1, 3, h, w) tensor in [0, 1]."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    try:
        magic, pos = _read_token(blob, 0)
        if magic != b"P6":
            raise DataError(f"{path}: unsupported image format "
                            f"{magic!r} (need binary PPM 'P6')")
        wtok, pos = _read_token(blob, pos)
        htok, pos = _read_token(blob, pos)
        mtok, pos = _read_token(blob, pos)
        w, h, maxval = int(wtok), int(htok), int(mtok)
    except (ValueError, DataError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit PPM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    need = w * h * 3
    payload = blob[pos:pos + need]
    if len(payload) != need:
        raise DataError(f"{path}: truncated pixel data "
                        f"({len(payload)} of {need} bytes)")
    rgb = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    img = (rgb.transpose(2, 0, 1).astype(np.float32) / 255.0)[None]
    return Tensor(img)


# ---------------------------------------------------------------------------
# manifests and on-disk datasets
# ---------------------------------------------------------------------------

def write_manifest(path: str | Path,
                   entries: list[tuple[str, int]]) -> None:
    lines = [f"{rel}\t{label}\n" for rel, label in entries]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path: str | Path) -> list[tuple[Path, int]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'path<TAB>label'")
        try:
            label = int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad label {parts[1]!r}") from exc
        entries.append((path.parent / parts[0], label))
    return entries


def load_manifest_dataset(path: str | Path) -> list[Sample]:
    return [Sample(image=load_image(p), label=label)
            for p, label in read_manifest(path)]


def write_dataset(spec: SyntheticSpec, out_dir: str | Path
                  ) -> tuple[Path, Path]:
    """Render the spec to PPM files plus train/val manifests."""
    out = Path(out_dir)
    manifests = []
    for split, samples in zip(("train", "val"), generate_dataset(spec)):
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        counters: dict[int, int] = {}
        for sample in samples:
            idx = counters.get(sample.label, 0)
            counters[sample.label] = idx + 1
            rel = f"{split}/class{sample.label:02d}_{idx:04d}.ppm"
            save_image(out / rel, sample.image)
            entries.append((rel, sample.label))
        manifest = out / f"{split}.tsv"
        write_manifest(manifest, entries)
        manifests.append(manifest)
    return manifests[0], manifests[1]
