"""Tape-based reverse-mode automatic differentiation over dense numpy arrays.

Only the handful of primitives the projection / dot-product / inverse
projection networks need are provided. Operations executed inside an active
:class:`Tape` are recorded when at least one operand is tracked (it, or
something it was computed from, has ``requires_grad``); :func:`backward`
replays the record in reverse.

Typical use::

    with Tape() as tape:
        loss = rmse(pred, target)
    backward(tape, loss)
    for p in params:
        adam_step(p, lr=1e-3)
        p.zero_grad()
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError, TapeError

DEFAULT_DTYPE = np.float32

_state = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_state, "tape", None)


class Tensor:
    """Dense real array with a same-shaped gradient buffer.

    The leading axes may carry a batch; layer math only cares about the
    trailing ``(rows, cols)`` pair.
    """

    __slots__ = ("values", "_grad", "requires_grad", "tracked", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(values, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.values: np.ndarray = arr
        self._grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tracked = requires_grad
        self.name = name

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None or self._grad.shape != self.values.shape:
            self._grad = np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = np.array(value, dtype=self.values.dtype).reshape(self.values.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[-2] if self.values.ndim >= 2 else 1

    @property
    def cols(self) -> int:
        return self.values.shape[-1] if self.values.ndim >= 1 else 1

    @property
    def dtype(self):
        return self.values.dtype

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad.fill(0)

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # Operator sugar over the functional primitives.
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else shift(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else shift(self, -other)

    def __rsub__(self, other):
        return shift(neg(self), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)


class Parameter(Tensor):
    """Trainable tensor carrying its own ADAM moment estimates."""

    __slots__ = ("adam_m", "adam_v", "step_count")

    def __init__(self, values, name: str | None = None, dtype=None):
        super().__init__(values, requires_grad=True, name=name, dtype=dtype)
        self.adam_m = np.zeros_like(self.values)
        self.adam_v = np.zeros_like(self.values)
        self.step_count = 0

    @property
    def tensor(self) -> "Parameter":
        return self

    def reset_moments(self) -> None:
        self.adam_m.fill(0)
        self.adam_v.fill(0)
        self.step_count = 0


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered log of primitive operations applied during a forward pass.

    Use as a context manager; the tape is active for the current thread only,
    so tapes opened on different threads never see each other's operations.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self._index: dict[int, int] = {}
        self._previous: Tape | None = None

    def __enter__(self) -> "Tape":
        self._previous = _active_tape()
        _state.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _state.tape = self._previous
        self._previous = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], grad_fn) -> None:
        self._index[id(out)] = len(self.records)
        self.records.append(_Record(out, inputs, grad_fn))

    def contains(self, t: Tensor) -> bool:
        idx = self._index.get(id(t))
        return idx is not None and self.records[idx].out is t


class no_grad:
    """Suspend recording on the current thread."""

    def __enter__(self):
        self._previous = _active_tape()
        _state.tape = None
        return self

    def __exit__(self, *exc):
        _state.tape = self._previous


def _result(values: np.ndarray, inputs: tuple[Tensor, ...], grad_fn) -> Tensor:
    out = Tensor(values)
    tape = _active_tape()
    if tape is not None and any(t.tracked for t in inputs):
        out.tracked = True
        tape.record(out, inputs, grad_fn)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --- primitives -----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum. Shapes must match up to leading/singleton broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _result(a.values + b.values, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _result(a.values - b.values, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product."""
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape(a, b, "hadamard")
    av, bv = a.values, b.values
    return _result(
        av * bv,
        (a, b),
        lambda g: (
            _unbroadcast(g * bv, av.shape) if a.tracked else None,
            _unbroadcast(g * av, bv.shape) if b.tracked else None,
        ),
    )


hadamard = mul


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply every entry by the scalar ``c``."""
    a = _as_tensor(a)
    c = a.values.dtype.type(c)
    return _result(a.values * c, (a,), lambda g: (g * c,))


def shift(a: Tensor, c: float) -> Tensor:
    """Add the scalar ``c`` to every entry."""
    a = _as_tensor(a)
    c = a.values.dtype.type(c)
    return _result(a.values + c, (a,), lambda g: (g,))


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.values)
    return _result(y, (a,), lambda g: (g * (1 - y * y),))


def square(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    av = a.values
    return _result(av * av, (a,), lambda g: (2 * g * av,))


def sqrt(a: Tensor) -> Tensor:
    """Square root; the derivative at 0 is taken as 0 (subgradient) to keep losses finite."""
    a = _as_tensor(a)
    y = np.sqrt(a.values)

    def grad_fn(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(y > 0, 0.5 / y, 0.0).astype(y.dtype)
        return (g * d,)

    return _result(y, (a,), grad_fn)


def sum_all(a: Tensor) -> Tensor:
    """Sum of every entry, as a 1x1 tensor."""
    a = _as_tensor(a)
    shape = a.shape
    total = a.values.sum(dtype=a.values.dtype).reshape(1, 1)
    return _result(total, (a,), lambda g: (np.broadcast_to(g.reshape(()), shape),))


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.values.size
    return scale(sum_all(a), 1.0 / n)


def sum_rows(a: Tensor) -> Tensor:
    """Row-wise reduction over the last axis: ``(..., r, c) -> (..., r)``."""
    a = _as_tensor(a)
    shape = a.shape
    return _result(a.values.sum(axis=-1), (a,), lambda g: (np.broadcast_to(g[..., None], shape),))


def project_outer(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Outer-product projection ``out[..., i, j] = x[..., i] * w[j] + b[j]``."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if w.shape != b.shape or w.values.ndim != 1:
        raise ShapeError(f"projection: weight {w.shape} and bias {b.shape} must be equal-length vectors")
    xv, wv = x.values, w.values
    out = xv[..., :, None] * wv + b.values

    def grad_fn(g):
        gx = (g * wv).sum(axis=-1) if x.tracked else None
        gw = (g * xv[..., :, None]).reshape(-1, wv.shape[0]).sum(axis=0) if w.tracked else None
        gb = g.reshape(-1, wv.shape[0]).sum(axis=0) if b.tracked else None
        return gx, gw, gb

    return _result(out, (x, w, b), grad_fn)


def affine_tanh(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused ``tanh(x * w + b)`` (Hadamard). Same result and gradient as the
    three-primitive composition, one tape record."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    _broadcast_shape(x, w, "hadamard")
    _broadcast_shape(x, b, "add")
    xv, wv = x.values, w.values
    y = np.tanh(xv * wv + b.values)

    def grad_fn(g):
        gz = g * (1 - y * y)
        return (
            _unbroadcast(gz * wv, xv.shape) if x.tracked else None,
            _unbroadcast(gz * xv, wv.shape) if w.tracked else None,
            _unbroadcast(gz, b.shape) if b.tracked else None,
        )

    return _result(y, (x, w, b), grad_fn)


def detach(a: Tensor) -> Tensor:
    """Copy of ``a`` that gradients never flow through."""
    return Tensor(a.values.copy())


# --- backward pass ----------------------------------------------------------


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable ``requires_grad`` leaf."""
    if loss.values.size != 1:
        raise ShapeError(f"backward needs a 1x1 loss, got shape {loss.shape}")
    if not tape.contains(loss):
        raise TapeError("loss tensor was not produced under this tape")
    stop = tape._index[id(loss)]
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for rec in reversed(tape.records[: stop + 1]):
        g = pending.pop(id(rec.out), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.grad_fn(g)):
            if gi is None or not inp.tracked:
                continue
            if inp.requires_grad:
                inp.grad += gi
            else:
                key = id(inp)
                prev = pending.get(key)
                pending[key] = gi if prev is None else prev + gi


# --- optimizer --------------------------------------------------------------


def adam_step(p: Parameter, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected ADAM update of ``p`` from its current ``grad``.

    The gradient buffer is left as-is; callers zero it.
    """
    g = p.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in parameter {p.name or '<unnamed>'}")
    p.step_count += 1
    t = p.step_count
    p.adam_m *= beta1
    p.adam_m += (1 - beta1) * g
    p.adam_v *= beta2
    p.adam_v += (1 - beta2) * (g * g)
    m_hat = p.adam_m / (1 - beta1**t)
    v_hat = p.adam_v / (1 - beta2**t)
    p.values -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.values.dtype)


class Adam:
    """Applies :func:`adam_step` to a fixed group of parameters."""

    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def step(self) -> None:
        for p in self.params:
            adam_step(p, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
