"""Dense float64 tensors with reverse-mode automatic differentiation.

Define-by-run: every operation records its parents and a backward closure
on the result tensor, so each forward pass builds a fresh tape (sentence
lengths differ per example and the graph shape follows the data).
``backward`` walks the reachable graph in reverse topological order and
accumulates gradients additively across fan-out.

Broadcasting is deliberately narrow: binary elementwise ops accept equal
shapes, or a 2-D left operand with a row-vector right operand (bias add,
row-wise gating). Everything else must match exactly.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(ValueError):
    """Non-finite values where finite ones are required."""


class Tensor:
    """A dense float64 array plus optional gradient and tape linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        # ascontiguousarray would promote 0-d to shape (1,); keep scalars 0-d.
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 0:
            arr = np.ascontiguousarray(arr)
            if min(arr.shape) == 0:
                raise ShapeError(f"zero-size dimension in shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # Thin operator sugar; the module-level functions are the real API.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64), requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=np.float64), requires_grad)


def uniform(shape, lo: float, hi: float, rng: np.random.Generator,
            requires_grad: bool = True) -> Tensor:
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], op: str,
            backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative DFS; LSTM chains exceed the default recursion limit.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from a scalar loss."""
    if loss.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise binaries

def _row_broadcastable(a: Tensor, b: Tensor) -> bool:
    if a.ndim != 2:
        return False
    n = a.shape[1]
    return b.shape == (n,) or b.shape == (1, n)


def _binary_mode(a: Tensor, b: Tensor, op: str) -> str:
    if a.shape == b.shape:
        return "same"
    if _row_broadcastable(a, b):
        return "row"
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not match "
                     "(only matrix-with-row-vector broadcast is supported)")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return g.sum(axis=0).reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b, "add")

    def back(g):
        _accum(a, g)
        _accum(b, g if mode == "same" else _reduce_to(g, b.shape))

    return _result(a.data + b.data, (a, b), "add", back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b, "sub")

    def back(g):
        _accum(a, g)
        _accum(b, -g if mode == "same" else _reduce_to(-g, b.shape))

    return _result(a.data - b.data, (a, b), "sub", back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b, "mul")

    def back(g):
        _accum(a, g * b.data)
        gb = g * a.data
        _accum(b, gb if mode == "same" else _reduce_to(gb, b.shape))

    return _result(a.data * b.data, (a, b), "mul", back)


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)

    def back(g):
        _accum(x, c * g)

    return _result(c * x.data, (x,), "scale", back)


# ---------------------------------------------------------------------------
# elementwise unaries

def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)

    def back(g):
        _accum(x, (1.0 - y * y) * g)

    return _result(y, (x,), "tanh", back)


def _sigmoid_stable(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid_stable(x.data)

    def back(g):
        _accum(x, y * (1.0 - y) * g)

    return _result(y, (x,), "sigmoid", back)


def absval(x) -> Tensor:
    # Subgradient 0 at the kink, matching the usual convention.
    x = as_tensor(x)

    def back(g):
        _accum(x, np.sign(x.data) * g)

    return _result(np.abs(x.data), (x,), "abs", back)


_POINTWISE_UNARY = {"tanh": tanh, "sigmoid": sigmoid, "abs": absval}
_POINTWISE_BINARY = {"mul": mul, "add": add, "sub": sub}


def pointwise(x, fn: str, other=None) -> Tensor:
    """Dispatch by name over {tanh, sigmoid, abs} and {mul, add, sub}."""
    if fn in _POINTWISE_UNARY:
        if other is not None:
            raise ValueError(f"pointwise {fn} is unary")
        return _POINTWISE_UNARY[fn](x)
    if fn in _POINTWISE_BINARY:
        if other is None:
            raise ValueError(f"pointwise {fn} needs a second operand")
        return _POINTWISE_BINARY[fn](x, other)
    raise ValueError(f"unknown pointwise fn {fn!r}")


# ---------------------------------------------------------------------------
# matmul and structure ops

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), "matmul", back)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects 2-D, got {x.shape}")

    def back(g):
        _accum(x, np.ascontiguousarray(g.T))

    return _result(np.ascontiguousarray(x.data.T), (x,), "transpose", back)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.data.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")

    def back(g):
        _accum(x, g.reshape(x.shape))

    return _result(x.data.reshape(shape), (x,), "reshape", back)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_cols of nothing")
    if any(p.ndim != 2 for p in parts) or len({p.shape[0] for p in parts}) != 1:
        raise ShapeError(f"concat_cols: bad shapes {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[:, lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=1),
                   tuple(parts), "concat_cols", back)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_rows of nothing")
    if any(p.ndim != 2 for p in parts) or len({p.shape[1] for p in parts}) != 1:
        raise ShapeError(f"concat_rows: bad shapes {[p.shape for p in parts]}")
    heights = [p.shape[0] for p in parts]
    offsets = np.cumsum([0] + heights)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[lo:hi, :])

    return _result(np.concatenate([p.data for p in parts], axis=0),
                   tuple(parts), "concat_rows", back)


def gather_rows(x, ids: Iterable[int]) -> Tensor:
    """Row gather; backward scatters additively, so repeated ids accumulate."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"gather_rows expects 2-D, got {x.shape}")
    idx = np.asarray(list(ids), dtype=np.intp)
    if idx.size == 0:
        raise ShapeError("gather_rows with no indices")
    if idx.min() < 0 or idx.max() >= x.shape[0]:
        raise IndexError(f"row id out of range [0, {x.shape[0]}): {idx.tolist()}")

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            _accum(x, gx)

    return _result(x.data[idx], (x,), "gather_rows", back)


def take(x, flat_ids: Iterable[int]) -> Tensor:
    """Pick elements by flat (row-major) index into a 1-D result."""
    x = as_tensor(x)
    idx = np.asarray(list(flat_ids), dtype=np.intp)
    if idx.size == 0:
        raise ShapeError("take with no indices")
    if idx.min() < 0 or idx.max() >= x.data.size:
        raise IndexError(f"flat id out of range [0, {x.data.size}): {idx.tolist()}")

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx.reshape(-1), idx, g)
            _accum(x, gx)

    return _result(x.data.reshape(-1)[idx], (x,), "take", back)


def slice_cols(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2 or not (0 <= start < stop <= x.shape[1]):
        raise ShapeError(f"slice_cols [{start}:{stop}] invalid for shape {x.shape}")

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[:, start:stop] = g
            _accum(x, gx)

    return _result(np.ascontiguousarray(x.data[:, start:stop]), (x,), "slice_cols", back)


# ---------------------------------------------------------------------------
# softmax and reductions

def row_softmax(x) -> Tensor:
    """Softmax along each row, stabilized by max-subtraction."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"row_softmax expects 2-D, got {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("row_softmax: non-finite input")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        _accum(x, y * (g - dot))

    return _result(y, (x,), "row_softmax", back)


def log_softmax_row(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"log_softmax_row expects 2-D, got {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericError("log_softmax_row: non-finite input")
    m = x.data.max(axis=1, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + m
    y = x.data - lse

    def back(g):
        soft = np.exp(y)
        _accum(x, g - soft * g.sum(axis=1, keepdims=True))

    return _result(y, (x,), "log_softmax_row", back)


def mean_rows(x) -> Tensor:
    """Average over the row index: [m, n] -> [n]."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"mean_rows expects a non-empty 2-D tensor, got {x.shape}")
    m = x.shape[0]

    def back(g):
        _accum(x, np.broadcast_to(g / m, x.shape).copy())

    return _result(x.data.mean(axis=0), (x,), "mean_rows", back)


def sum_rows(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"sum_rows expects a non-empty 2-D tensor, got {x.shape}")

    def back(g):
        _accum(x, np.broadcast_to(g, x.shape).copy())

    return _result(x.data.sum(axis=0), (x,), "sum_rows", back)


def max_rows(x) -> Tensor:
    """Column-wise max over rows; gradient flows to the first argmax row."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"max_rows expects a non-empty 2-D tensor, got {x.shape}")
    arg = x.data.argmax(axis=0)
    cols = np.arange(x.shape[1])

    def back(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            gx[arg, cols] = g
            _accum(x, gx)

    return _result(x.data[arg, cols], (x,), "max_rows", back)


def logsumexp_row(x) -> Tensor:
    """Per-row log-sum-exp with max-shift; a 1-D input reduces to a scalar."""
    x = as_tensor(x)
    if x.ndim == 1:
        m = x.data.max()
        out = m + np.log(np.exp(x.data - m).sum())

        def back1(g):
            _accum(x, np.exp(x.data - out) * g)

        return _result(np.float64(out), (x,), "logsumexp_row", back1)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ShapeError(f"logsumexp_row expects 1-D or 2-D, got {x.shape}")
    m = x.data.max(axis=1, keepdims=True)
    out = (m + np.log(np.exp(x.data - m).sum(axis=1, keepdims=True))).reshape(-1)

    def back(g):
        _accum(x, np.exp(x.data - out[:, None]) * g[:, None])

    return _result(out, (x,), "logsumexp_row", back)


def sum_all(x) -> Tensor:
    x = as_tensor(x)

    def back(g):
        _accum(x, np.full_like(x.data, float(g)))

    return _result(np.float64(x.data.sum()), (x,), "sum_all", back)


_REDUCE = {"mean_rows": mean_rows, "sum_rows": sum_rows, "logsumexp_row": logsumexp_row}


def reduce(x, kind: str) -> Tensor:
    """Dispatch by name over {mean_rows, sum_rows, logsumexp_row}."""
    if kind not in _REDUCE:
        raise ValueError(f"unknown reduce kind {kind!r}")
    return _REDUCE[kind](x)


# ---------------------------------------------------------------------------
# gradient checking

def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor],
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must rebuild its forward pass from the current parameter values on
    every call. Error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    maximized over every entry of every parameter.
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    loss = f()
    if loss.shape != ():
        raise ShapeError(f"grad_check needs a scalar function, got shape {loss.shape}")
    zero_grads(params)
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = f().item()
            flat[i] = keep - eps
            down = f().item()
            flat[i] = keep
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(ga_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ga_flat[i] - numeric) / denom)
    return worst
