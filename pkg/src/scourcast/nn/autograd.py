"""Minimal reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps an ndarray plus the closure that routes its output
gradient to its parents. Calling ``backward()`` on a scalar runs the
tape in reverse topological order. Only the primitives needed by the
forecasting models live here: elementwise arithmetic, a dense map,
activations, concat/slice/reshape, axis reductions, a 1-D convolution,
and the squared-error loss.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import EmptyMask, NonFiniteGradient, ShapeMismatch

Array = np.ndarray


def _as_array(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """Node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 parents: tuple["Tensor", ...] = (),
                 backward: Callable[[Array], None] | None = None):
        self.data = _as_array(data)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed: Array | None = None) -> None:
        """Propagate gradients from this node to all graph leaves."""
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without seed needs a scalar output")
            seed = np.ones_like(self.data)
        order = _topo_order(self)
        self._accumulate(np.broadcast_to(seed, self.data.shape))
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            if not np.all(np.isfinite(node.grad)):
                raise NonFiniteGradient("non-finite gradient encountered")
            node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"


def _topo_order(root: Tensor) -> list[Tensor]:
    """Reverse topological order (root first), iterative DFS."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    order.reverse()
    return order


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _make(data: Array, parents: tuple[Tensor, ...],
          backward: Callable[[Array], None]) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs,
                  parents=parents if needs else (),
                  backward=backward if needs else None)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


# --- elementwise arithmetic --------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def scale(a: Tensor, factor: Array | float) -> Tensor:
    """Multiply by a constant array or scalar (no gradient to the factor)."""
    f = np.asarray(factor, dtype=np.float64)
    out_data = a.data * f

    def backward(g: Array) -> None:
        a._accumulate(_unbroadcast(g * f, a.shape))

    return _make(out_data, (a,), backward)


def square(a: Tensor) -> Tensor:
    out_data = a.data * a.data

    def backward(g: Array) -> None:
        a._accumulate(g * (2.0 * a.data))

    return _make(out_data, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g: Array) -> None:
        a._accumulate(g * (0.5 / out_data))

    return _make(out_data, (a,), backward)


# --- activations -------------------------------------------------------------

def _sigmoid_stable(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_data = _sigmoid_stable(a.data)

    def backward(g: Array) -> None:
        a._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g: Array) -> None:
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def backward(g: Array) -> None:
        a._accumulate(g * (a.data > 0.0))

    return _make(out_data, (a,), backward)


# --- linear map ----------------------------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight.T + bias for x [batch, n_in], weight [n_out, n_in]."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ShapeMismatch("linear expects 2-D input and weight")
    if x.data.shape[1] != weight.data.shape[1]:
        raise ShapeMismatch(
            f"linear: input width {x.data.shape[1]} != weight fan-in {weight.data.shape[1]}")
    out_data = x.data @ weight.data.T
    if bias is not None:
        if bias.data.shape != (weight.data.shape[0],):
            raise ShapeMismatch("linear: bias shape disagrees with weight fan-out")
        out_data = out_data + bias.data

    def backward(g: Array) -> None:
        if x.requires_grad:
            x._accumulate(g @ weight.data)
        if weight.requires_grad:
            weight._accumulate(g.T @ x.data)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=0))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out_data, parents, backward)


# --- shape manipulation ----------------------------------------------------------

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward(g: Array) -> None:
        a._accumulate(g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accumulate(g[tuple(idx)])

    return _make(out_data, tuple(parts), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx_t = tuple(idx)
    out_data = a.data[idx_t]

    def backward(g: Array) -> None:
        full = np.zeros_like(a.data)
        full[idx_t] = g
        a._accumulate(full)

    return _make(out_data, (a,), backward)


def take_last_axis(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather columns of the last axis (channel selection)."""
    idx = np.asarray(indices, dtype=np.intp)
    out_data = np.take(a.data, idx, axis=-1)

    def backward(g: Array) -> None:
        full = np.zeros_like(a.data)
        np.add.at(full, (..., idx), g)
        a._accumulate(full)

    return _make(out_data, (a,), backward)


# --- reductions ------------------------------------------------------------------

def mean_all(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.mean())

    def backward(g: Array) -> None:
        a._accumulate(np.full(a.shape, float(g) / a.data.size))

    return _make(out_data, (a,), backward)


def mean_axes(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Mean over the given axes, keeping them as size-1 dims."""
    out_data = a.data.mean(axis=axes, keepdims=True)
    count = a.data.size // out_data.size

    def backward(g: Array) -> None:
        a._accumulate(np.broadcast_to(g / count, a.shape).copy())

    return _make(out_data, (a,), backward)


# --- 1-D convolution ---------------------------------------------------------------

def conv1d(x: Tensor, filters: Tensor, bias: Tensor | None,
           left_pad: int, right_pad: int, dilation: int = 1,
           stride: int = 1) -> Tensor:
    """Temporal convolution of x [B, l, n] with filters [F, k, n].

    Zero-pads ``left_pad``/``right_pad`` steps along time; taps are
    spaced ``dilation`` steps apart. Output is [B, l_out, F] with
    l_out = (l_padded - span) // stride + 1, span = (k-1)*dilation + 1.
    """
    B, l, n = x.data.shape
    F, k, nf = filters.data.shape
    if nf != n:
        raise ShapeMismatch(f"conv1d: filter channels {nf} != input channels {n}")
    span = (k - 1) * dilation + 1
    lp = l + left_pad + right_pad
    if lp < span:
        raise ShapeMismatch(f"conv1d: padded length {lp} < filter span {span}")
    l_out = (lp - span) // stride + 1

    padded = np.zeros((B, lp, n))
    padded[:, left_pad:left_pad + l, :] = x.data
    out_data = np.zeros((B, l_out, F))
    last = (l_out - 1) * stride + 1
    for j in range(k):
        seg = padded[:, j * dilation:j * dilation + last:stride, :]
        out_data += np.tensordot(seg, filters.data[:, j, :], axes=([2], [1]))
    if bias is not None:
        out_data += bias.data

    def backward(g: Array) -> None:
        if filters.requires_grad:
            gf = np.empty_like(filters.data)
            for j in range(k):
                seg = padded[:, j * dilation:j * dilation + last:stride, :]
                gf[:, j, :] = np.tensordot(g, seg, axes=([0, 1], [0, 1]))
            filters._accumulate(gf)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 1)))
        if x.requires_grad:
            gp = np.zeros_like(padded)
            for j in range(k):
                gp[:, j * dilation:j * dilation + last:stride, :] += (
                    g @ filters.data[:, j, :])
            x._accumulate(gp[:, left_pad:left_pad + l, :])

    parents = (x, filters) if bias is None else (x, filters, bias)
    return _make(out_data, parents, backward)


# --- loss / metric ---------------------------------------------------------------

def mse_loss(pred: Tensor, target: Tensor, channel_mask: Sequence[int]) -> Tensor:
    """Mean squared error over the selected target channels.

    Both operands are [S, w_out, C]; the mean runs over samples, steps
    and the masked channels, so a singleton mask reproduces the
    per-channel training loss exactly.
    """
    if pred.shape != target.shape:
        raise ShapeMismatch(f"mse_loss: {pred.shape} vs {target.shape}")
    if len(channel_mask) == 0:
        raise EmptyMask("mse_loss needs at least one channel")
    p = take_last_axis(pred, channel_mask)
    t = take_last_axis(target, channel_mask)
    return mean_all(square(sub(p, t)))


def mae_metric(pred: Array, target: Array, channel_mask: Sequence[int]) -> float:
    """Mean absolute error over the selected channels (no gradient)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"mae_metric: {pred.shape} vs {target.shape}")
    if len(channel_mask) == 0:
        raise EmptyMask("mae_metric needs at least one channel")
    idx = np.asarray(channel_mask, dtype=np.intp)
    diff = np.take(pred, idx, axis=-1) - np.take(target, idx, axis=-1)
    return float(np.abs(diff).mean())
