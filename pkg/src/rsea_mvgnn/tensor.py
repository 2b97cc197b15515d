"""Dense float64 tensors with tape-based reverse-mode differentiation.

Design constraints, chosen for auditability over generality:

* float64 everywhere (digamma differences of nearby arguments would
  drown in float32 rounding);
* elementwise ops require equal shapes, a 0-d scalar operand, or a
  broadcast over a single leading axis (``(N, D) op (D,)``);
* a single module-level tape records ops in execution order whenever
  grad mode is on and an input requires gradients; ``backward`` replays
  the subgraph reachable from the loss in exact reverse order and
  consumes those entries.

Tensors are immutable after construction; parameter ``grad`` buffers
are the only mutation point and accumulate across backward calls until
``zero_grad``.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from . import special
from .errors import BackwardError, DomainError, NonFiniteError, ShapeError


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_entry")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor construction: input contains NaN/Inf")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._entry: int | None = None  # sequence id of the producing tape entry

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Internal fast path: arr is a fresh float64 result already checked.
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.grad = None
        t._entry = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; all routed through the module-level ops
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, idx): return getitem(self, idx)


class Tape:
    """Ordered record of executed ops; single-use per forward pass."""

    def __init__(self):
        self._entries: dict[int, tuple[Tensor, Callable[[np.ndarray], None], tuple[int, ...]]] = {}
        self._seq = 0

    def record(self, out: Tensor, inputs: Sequence[Tensor],
               backward_fn: Callable[[np.ndarray], None]) -> int:
        parents = tuple(t._entry for t in inputs if t._entry is not None)
        self._seq += 1
        self._entries[self._seq] = (out, backward_fn, parents)
        return self._seq

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def run_backward(self, loss: Tensor) -> None:
        if loss.data.shape != ():
            raise BackwardError(f"backward: loss must be a scalar, got shape {loss.data.shape}")
        if loss._entry is None or loss._entry not in self._entries:
            if loss._entry is not None:
                raise BackwardError("backward: tape already consumed; rerun the forward pass")
            raise BackwardError("backward: loss has no recorded operations (empty tape)")
        # Collect the subgraph reachable from the loss.
        reachable: set[int] = set()
        stack = [loss._entry]
        while stack:
            seq = stack.pop()
            if seq in reachable or seq not in self._entries:
                continue
            reachable.add(seq)
            stack.extend(self._entries[seq][2])
        loss.accumulate_grad(np.ones((), dtype=np.float64))
        # Consumers have higher sequence ids than producers, so descending
        # sequence order is exact reverse execution order.
        for seq in sorted(reachable, reverse=True):
            out, fn, _ = self._entries.pop(seq)
            if out.grad is not None:
                fn(out.grad)


_TAPE = Tape()
_GRAD_ENABLED = True


def active_tape() -> Tape:
    return _TAPE


def reset_tape() -> None:
    _TAPE.clear()


@contextlib.contextmanager
def no_grad():
    """Disable tape recording within the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def backward(loss: Tensor) -> None:
    """Populate ``grad`` of every parameter contributing to the scalar loss."""
    _TAPE.run_backward(loss)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _result(op: str, arr: np.ndarray) -> Tensor:
    # Inputs are finite by construction, so checking the output is enough
    # to keep the all-finite invariant (and catches overflow).
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{op}: produced non-finite values")
    return Tensor._wrap(np.asarray(arr, dtype=np.float64))


def _record(out: Tensor, inputs: Sequence[Tensor],
            backward_fn: Callable[[np.ndarray], None]) -> Tensor:
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._entry = _TAPE.record(out, inputs, backward_fn)
    return out


def _broadcast_reducers(op: str, a: Tensor, b: Tensor):
    """Validate an elementwise pairing and return grad reducers per operand.

    Allowed: equal shapes, a 0-d scalar operand, or one operand matching
    the other's trailing shape (broadcast over one leading axis).
    """
    sa, sb = a.data.shape, b.data.shape
    ident = lambda g: g

    def reducer(shape_small, shape_big):
        if shape_small == ():
            return lambda g: np.sum(g).reshape(())
        return lambda g: np.sum(g, axis=0)

    if sa == sb:
        return ident, ident
    if sa == ():
        return reducer(sa, sb), ident
    if sb == ():
        return ident, reducer(sb, sa)
    if len(sa) == len(sb) + 1 and sa[1:] == sb:
        return ident, reducer(sb, sa)
    if len(sb) == len(sa) + 1 and sb[1:] == sa:
        return reducer(sa, sb), ident
    raise ShapeError(f"{op}: shapes {sa} and {sb} do not conform")


def _binary(op: str, a, b, forward, da, db) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    red_a, red_b = _broadcast_reducers(op, a, b)
    out = _result(op, forward(a.data, b.data))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(red_a(da(g, a.data, b.data)))
        if b.requires_grad:
            b.accumulate_grad(red_b(db(g, a.data, b.data)))

    return _record(out, (a, b), bwd)


def add(a, b) -> Tensor:
    return _binary("add", a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary("mul", a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    b_t = _as_tensor(b)
    if np.any(b_t.data == 0.0):
        raise DomainError("div: division by zero")
    return _binary("div", a, b_t, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    out = _result("neg", -a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(-g)

    return _record(out, (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expects 2-d operands, got {a.shape} and {b.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    out = _result("matmul", a.data @ b.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _record(out, (a, b), bwd)


def transpose(a, axis0: int = 0, axis1: int = 1) -> Tensor:
    a = _as_tensor(a)
    if max(axis0, axis1) >= a.data.ndim:
        raise ShapeError(f"transpose: axes ({axis0},{axis1}) out of range for shape {a.shape}")
    out = _result("transpose", np.swapaxes(a.data, axis0, axis1).copy())

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(np.swapaxes(g, axis0, axis1))

    return _record(out, (a,), bwd)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = _result("relu", np.maximum(a.data, 0.0))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * (a.data > 0.0))

    return _record(out, (a,), bwd)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Stable in both tails.
    pos = x >= 0
    z = np.empty_like(x)
    z[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    z[~pos] = ex / (1.0 + ex)
    return z


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = _sigmoid(np.atleast_1d(a.data)).reshape(a.data.shape)
    out = _result("sigmoid", s)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * s * (1.0 - s))

    return _record(out, (a,), bwd)


def softplus(a) -> Tensor:
    """log(1 + exp(x)) in the overflow-free form max(x,0) + log1p(exp(-|x|))."""
    a = _as_tensor(a)
    x = a.data
    out = _result("softplus", np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))

    def bwd(g):
        if a.requires_grad:
            s = _sigmoid(np.atleast_1d(x)).reshape(x.shape)
            a.accumulate_grad(g * s)

    return _record(out, (a,), bwd)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = _result("exp", np.exp(a.data))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * out.data)

    return _record(out, (a,), bwd)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log: argument must be strictly positive")
    out = _result("log", np.log(a.data))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g / a.data)

    return _record(out, (a,), bwd)


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data < 0.0):
        raise DomainError("sqrt: argument must be non-negative")
    out = _result("sqrt", np.sqrt(a.data))

    def bwd(g):
        if a.requires_grad:
            # Subgradient 0 at the origin keeps zero-norm regularizers finite.
            denom = 2.0 * out.data
            safe = np.where(denom == 0.0, 1.0, denom)
            a.accumulate_grad(np.where(denom == 0.0, 0.0, g / safe))

    return _record(out, (a,), bwd)


def digamma(a) -> Tensor:
    """Elementwise digamma; adjoint uses trigamma."""
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("digamma: argument must be strictly positive")
    out = _result("digamma", special.digamma_array(a.data))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * special.trigamma_array(a.data))

    return _record(out, (a,), bwd)


def _restore(g: np.ndarray, shape: tuple[int, ...], axis: int | None) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    return np.broadcast_to(np.expand_dims(g, axis), shape).copy()


def sum_(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    if axis is not None and axis >= a.data.ndim:
        raise ShapeError(f"sum: axis {axis} out of range for shape {a.shape}")
    out = _result("sum", np.sum(a.data, axis=axis))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_restore(g, a.data.shape, axis))

    return _record(out, (a,), bwd)


def mean(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    if axis is not None and axis >= a.data.ndim:
        raise ShapeError(f"mean: axis {axis} out of range for shape {a.shape}")
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise ShapeError("mean: cannot average over an empty axis")
    out = _result("mean", np.mean(a.data, axis=axis))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_restore(g, a.data.shape, axis) / n)

    return _record(out, (a,), bwd)


def variance(a, axis: int | None = None) -> Tensor:
    """Population variance, composed from primitive ops (differentiable)."""
    a = _as_tensor(a)
    if axis is None or a.data.ndim == 1:
        centered = sub(a, mean(a))
        return mean(mul(centered, centered))
    if a.data.ndim == 2 and axis == 1:
        # Row means broadcast over the leading axis after a transpose.
        m = mean(a, axis=1)
        centered = sub(transpose(a), m)
        return mean(mul(centered, centered), axis=0)
    if a.data.ndim == 2 and axis == 0:
        m = mean(a, axis=0)
        centered = sub(a, m)
        return mean(mul(centered, centered), axis=0)
    raise ShapeError(f"variance: unsupported axis {axis} for shape {a.shape}")


def getitem(a, idx) -> Tensor:
    a = _as_tensor(a)
    try:
        piece = a.data[idx]
    except IndexError as e:
        raise ShapeError(f"getitem: index {idx!r} invalid for shape {a.shape}") from e
    out = _result("getitem", np.array(piece, dtype=np.float64))

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a.accumulate_grad(full)

    return _record(out, (a,), bwd)
