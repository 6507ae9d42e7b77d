"""Loss, optimizer, schedule, metrics, and checkpointing.

The loop is single-writer and deterministic: one seeded generator drives
shuffling and augmentation in a fixed order, reductions never reorder, so
two runs with the same seed produce byte-identical metrics and
checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scpt
from .autodiff import backward, zero_grads
from .data import Sample, augment, load_manifest_dataset
from .network import NetworkConfig, ScopeNetwork
from .tensor import ConfigError, ShapeError, Tensor, make_node


@dataclass
class TrainConfig:
    epochs: int = 50
    warmup_epochs: int = 5
    base_lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 8
    seed: int = 0
    schedule: str = "cosine"      # "cosine" | "constant" after warm-up
    augment: bool = True
    deterministic: bool = True
    clip_grad_norm: float = 1.0   # 0 disables; guards against the rare
                                  # loss spike that kills relu stages

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError(f"warmup_epochs must satisfy 0 <= warmup < "
                              f"epochs, got {self.warmup_epochs} of "
                              f"{self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got "
                              f"{self.batch_size}")
        if self.schedule not in ("cosine", "constant"):
            raise ConfigError(f"schedule must be 'cosine' or 'constant', "
                              f"got {self.schedule!r}")


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy, stabilized by max subtraction."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects (n, classes) logits, got "
                         f"{logits.shape}")
    labels = np.asarray(labels)
    n, classes = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch "
                         f"size {n}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ShapeError(f"label out of range [0, {classes}): "
                         f"{int(labels.min())}..{int(labels.max())}")
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    rows = np.arange(n)
    loss = -logp[rows, labels].mean()
    probs = np.exp(logp)

    def backward_rule(g: np.ndarray) -> None:
        if logits.requires_grad:
            grad = probs.copy()
            grad[rows, labels] -= 1.0
            logits.accumulate_grad(grad * (float(g) / n))

    out = np.array(loss, dtype=z.dtype)
    return make_node(out, (logits,), "cross_entropy", backward_rule)


# ---------------------------------------------------------------------------
# optimizer and schedule
# ---------------------------------------------------------------------------

def sgd_momentum_step(theta: np.ndarray, grad: np.ndarray,
                      velocity: np.ndarray, lr: float,
                      momentum: float) -> None:
    """Momentum-buffer update, in place: v = mu*v + g; theta -= lr*v."""
    if theta.shape != grad.shape or theta.shape != velocity.shape:
        raise ShapeError(f"optimizer shapes disagree: theta {theta.shape}, "
                         f"grad {grad.shape}, velocity {velocity.shape}")
    velocity *= momentum
    velocity += grad
    theta -= lr * velocity


class SgdMomentum:
    """Momentum SGD over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], momentum: float = 0.9):
        self.params = params
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data)
                         for name, p in params.items()}

    def step(self, lr: float) -> None:
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            sgd_momentum_step(p.data, grad, self.velocity[name], lr,
                              self.momentum)


def clip_gradients(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm. No-op when max_norm <= 0.
    """
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= np.asarray(factor, dtype=p.grad.dtype)
    return norm


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Linear ramp to base_lr over the warm-up, then cosine decay to 0."""
    if epoch < config.warmup_epochs:
        return config.base_lr * (epoch + 1) / config.warmup_epochs
    if config.schedule == "constant":
        return config.base_lr
    span = config.epochs - config.warmup_epochs
    t = (epoch - config.warmup_epochs) / span
    return config.base_lr * 0.5 * (1.0 + np.cos(np.pi * t))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _batched(samples: list[Sample], batch_size: int):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        images = Tensor(np.concatenate([s.image.data for s in chunk]))
        labels = np.array([s.label for s in chunk], dtype=np.int64)
        yield images, labels


def evaluate_model(net: ScopeNetwork, dataset: list[Sample],
                   batch_size: int = 8) -> float:
    """Top-1 accuracy; argmax breaks exact ties toward the lowest index."""
    correct = 0
    for images, labels in _batched(dataset, batch_size):
        logits = net.forward(images)
        pred = np.argmax(logits.data, axis=1)
        correct += int((pred == labels).sum())
    return correct / len(dataset)


def evaluate(checkpoint: str | Path, dataset: list[Sample] | str | Path,
             batch_size: int = 8) -> float:
    """Load a checkpoint (with its sidecar config) and score a dataset."""
    net = load_checkpoint(checkpoint)
    if not isinstance(dataset, list):
        dataset = load_manifest_dataset(dataset)
    return evaluate_model(net, dataset, batch_size=batch_size)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, net: ScopeNetwork,
                    sidecar_text: str) -> Path:
    """Write parameters to SCPT and the architecture config alongside."""
    path = Path(path)
    scpt.save_tensors(path, net.state_dict())
    path.with_suffix(".config").write_text(sidecar_text, encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> ScopeNetwork:
    path = Path(path)
    sidecar = path.with_suffix(".config")
    if not sidecar.exists():
        raise ConfigError(f"checkpoint sidecar config {sidecar} not found")
    from . import config as config_mod  # deferred: config imports this module

    run = config_mod.parse_config_text(sidecar.read_text(encoding="utf-8"),
                                       source=str(sidecar))
    net = ScopeNetwork(run.network, seed=run.train.seed)
    net.load_state(scpt.load_tensors(path))
    return net


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    history: list[tuple[int, float, float]]   # (epoch, train_loss, val_acc)
    best_epoch: int
    best_val_acc: float
    checkpoint: Path | None = None
    metrics_path: Path | None = None

    def metrics_text(self) -> str:
        return "".join(f"{e}\t{loss:.6f}\t{acc:.6f}\n"
                       for e, loss, acc in self.history)


def train(net_config: NetworkConfig, train_config: TrainConfig,
          train_set: list[Sample], val_set: list[Sample],
          out_dir: str | Path | None = None,
          sidecar_text: str = "") -> TrainResult:
    """Train a network variant; record per-epoch loss and validation top-1.

    The best-validation parameter snapshot is kept (earliest epoch wins on
    ties) and written to ``out_dir/best.scpt`` with a sidecar config copy
    when an output directory is given.
    """
    rng = np.random.default_rng(train_config.seed)
    net = ScopeNetwork(net_config, seed=train_config.seed)
    params = net.parameters()
    opt = SgdMomentum(params, momentum=train_config.momentum)

    n = len(train_set)
    history: list[tuple[int, float, float]] = []
    best_acc = -1.0
    best_epoch = -1
    best_state = net.state_dict()

    for epoch in range(train_config.epochs):
        lr = lr_at(epoch, train_config)
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, train_config.batch_size):
            chunk = [train_set[i] for i in order[start:start +
                                                 train_config.batch_size]]
            if train_config.augment:
                chunk = [augment(s, rng) for s in chunk]
            images = Tensor(np.concatenate([s.image.data for s in chunk]))
            labels = np.array([s.label for s in chunk], dtype=np.int64)
            zero_grads(params.values())
            loss = cross_entropy(net.forward(images), labels)
            backward(loss)
            clip_gradients(params, train_config.clip_grad_norm)
            opt.step(lr)
            total_loss += loss.item() * len(chunk)
        train_loss = total_loss / n
        val_acc = evaluate_model(net, val_set,
                                 batch_size=train_config.batch_size)
        history.append((epoch, train_loss, val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_state = net.state_dict()

    result = TrainResult(history=history, best_epoch=best_epoch,
                         best_val_acc=best_acc)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        net.load_state(best_state)
        result.checkpoint = save_checkpoint(out / "best.scpt", net,
                                            sidecar_text)
        result.metrics_path = out / "metrics.tsv"
        result.metrics_path.write_text(result.metrics_text(),
                                       encoding="utf-8")
    return result
