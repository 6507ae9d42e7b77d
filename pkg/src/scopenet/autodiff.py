"""Reverse-mode differentiation over the recorded operator graph.

A forward pass builds the tape implicitly: every operator output keeps
references to its parents and a closure implementing the analytic
gradient rule. :func:`backward` linearizes that graph once (reverse
topological order) and replays the rules, accumulating into ``.grad``.
The tape is rebuilt on every forward pass, so data-dependent kernels
need no special casing.

:func:`gradcheck` validates any differentiable closure against central
finite differences and is the oracle behind the gradient test suite.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .tensor import ScopeError, ShapeError, Tensor


class Tape:
    """Reverse topological linearization of the graph below a loss node."""

    def __init__(self, loss: Tensor):
        if loss.data.size != 1:
            raise ShapeError(
                f"backward needs a scalar loss, got shape {loss.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        # Iterative DFS: deep cascades overflow Python's recursion limit.
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.loss = loss
        self.nodes = order  # parents always precede consumers

    def run(self) -> None:
        loss = self.loss
        if loss._backward_ran:
            raise ScopeError(
                "backward already ran for this graph; rebuild the forward "
                "pass (or clear gradients and reset) before differentiating "
                "again")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        loss._backward_ran = True


def backward(loss: Tensor) -> None:
    """Differentiate a scalar loss through the recorded graph.

    Gradients accumulate additively across fan-out. Raises if the loss is
    not scalar or if backward already ran on this graph.
    """
    Tape(loss).run()


def zero_grads(params: Iterable[Tensor]) -> None:
    """Reset parameter gradients to zeros (unreached params stay zero)."""
    for p in params:
        p.zero_grad()


def grad_map(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Snapshot gradients by name, substituting zeros where None."""
    return {
        name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }


def gradcheck(op_closure: Callable[..., Tensor],
              inputs: Sequence[Tensor],
              epsilon: float = 1e-5,
              rng: np.random.Generator | None = None,
              max_elements_per_input: int | None = None) -> float:
    """Compare analytic gradients of ``op_closure`` with central differences.

    The closure maps the given tensors to an output of any shape; a fixed
    random cotangent turns it into a scalar so one backward pass yields all
    analytic gradients. Inputs should be float64 for the comparison to be
    meaningful.

    Returns the max over checked elements of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    Reports only; callers assert on the returned value.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for t in inputs:
        t.requires_grad = True
        t.grad = None

    out = op_closure(*inputs)
    cotangent = rng.standard_normal(out.shape).astype(out.dtype)

    def scalar_loss() -> float:
        value = op_closure(*inputs)
        return float(np.sum(value.data * cotangent))

    from . import ops  # local import: ops depends on tensor, not on us

    loss = ops.sum_all(ops.mul(out, Tensor(cotangent)))
    backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in inputs]

    worst = 0.0
    for t, ana in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elements_per_input is not None and flat.size > max_elements_per_input:
            idx = rng.choice(flat.size, size=max_elements_per_input,
                             replace=False)
        ana_flat = ana.reshape(-1)
        for i in idx:
            saved = flat[i]
            flat[i] = saved + epsilon
            hi = scalar_loss()
            flat[i] = saved - epsilon
            lo = scalar_loss()
            flat[i] = saved
            numeric = (hi - lo) / (2.0 * epsilon)
            denom = max(abs(ana_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ana_flat[i] - numeric) / denom)
    return worst
