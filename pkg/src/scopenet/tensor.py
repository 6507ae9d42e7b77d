"""Dense 4-D tensor container with reverse-mode gradient tracking.

The library currency is a batch x channel x row x col array wrapped in
:class:`Tensor`. Feature maps are strictly 4-D; auxiliary values (logits,
biases, scalar losses) ride in the same class with their natural rank,
and the 4-D invariants are enforced by the operators that require them.

Gradient tracking is define-by-run: each operator attaches a closure that
propagates the output gradient to its parents. `scopenet.autodiff` walks
the recorded graph in reverse topological order.
"""

from __future__ import annotations

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)


class ScopeError(Exception):
    """Base class for all library errors."""


class ShapeError(ScopeError, ValueError):
    """A tensor dimension violates an operator contract."""


class ConfigError(ScopeError, ValueError):
    """A configuration value or file is invalid."""


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff.

    Attributes:
        data: contiguous row-major ndarray, float32 or float64.
        grad: accumulated gradient (same shape as data) or None.
        requires_grad: whether backward should reach this node.
    """

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents",
                 "_op", "_backward_ran")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not arr.flags["C_CONTIGUOUS"]:
            # note: np.ascontiguousarray would promote 0-d scalars to (1,)
            arr = np.ascontiguousarray(arr)
        if arr.dtype not in FLOAT_DTYPES:
            if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_:
                arr = arr.astype(np.float32)
            else:
                raise TypeError(
                    f"tensor dtype must be float32 or float64, got {arr.dtype}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()
        self._op = ""
        self._backward_ran = False

    # -- structural properties -------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{tag})"

    # -- graph helpers ----------------------------------------------------
    def detach(self) -> "Tensor":
        """Cut the node out of the graph; gradients stop here."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Run reverse-mode differentiation from this (scalar) node."""
        from . import autodiff

        autodiff.backward(self)


def require_4d(t: Tensor, name: str) -> tuple[int, int, int, int]:
    """Validate the batch x channel x row x col layout; return the dims."""
    if t.ndim != 4:
        raise ShapeError(f"{name} must be 4-D (n, c, h, w), got {t.ndim}-D "
                         f"shape {t.shape}")
    return t.shape  # type: ignore[return-value]


def make_node(data: np.ndarray, parents: tuple[Tensor, ...], op: str,
              backward) -> Tensor:
    """Wrap an op result; attach the gradient rule if any parent needs it."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._op = op
        out._backward = backward
    return out
