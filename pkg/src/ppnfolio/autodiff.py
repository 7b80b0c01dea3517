"""Minimal reverse-mode automatic differentiation.

Covers exactly what the policy network and its reward need: elementwise
arithmetic, reductions, slicing and concatenation, plus fused layers
(dilated causal convolution, correlational convolution, LSTM, softmax,
dropout) with hand-written backward passes.

Tensors wrap float64 numpy arrays. Operations executed while a :class:`Tape`
is active are recorded in creation order; :meth:`Tape.backward` walks the
record in reverse, so every node's gradient is complete before it is
propagated to its parents.

Layer ops accept an optional leading batch axis: feature maps are
``(m, k, C)`` or ``(B, m, k, C)``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError

_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Tensor, parents: tuple, backward: Callable):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Records operations in execution order.

    Use as a context manager::

        with Tape() as tape:
            loss = f(params)
        grads = tape.backward(loss, params)
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def backward(self, root: Tensor, params: Sequence[Tensor] | None = None) -> list[np.ndarray] | None:
        """Propagate d(root)/d(.) to every recorded input.

        Leaf tensors with ``requires_grad`` receive ``.grad``. If ``params`` is
        given, their gradients are returned in order (zeros for parameters the
        root does not depend on).
        """
        if root.data.size != 1:
            raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            parent_grads = node.backward(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not isinstance(parent, Tensor) or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        # whatever is left belongs to leaves
        leaves = {}
        for node in self.nodes:
            for parent in node.parents:
                if isinstance(parent, Tensor) and parent.requires_grad and id(parent) in grads:
                    leaves[id(parent)] = parent
        if id(root) in grads and root.requires_grad:
            leaves[id(root)] = root
        for key, leaf in leaves.items():
            leaf.grad = grads[key]
        if params is None:
            return None
        return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


def backward(tape: Tape, root: Tensor, params: Sequence[Tensor] | None = None):
    return tape.backward(root, params)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data: np.ndarray, parents: tuple, backward_fn: Callable) -> Tensor:
    needs = any(isinstance(p, Tensor) and p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs and _ACTIVE:
        _ACTIVE[-1].nodes.append(_Node(out, parents, backward_fn))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and reductions
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def back(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _record(out, (a, b), back)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _record(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _record(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record(out, (a,), lambda g: (g * out,))


def tabs(a) -> Tensor:
    # subgradient sign(0) = 0 at kinks
    a = as_tensor(a)
    return _record(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), back)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul shapes {a.shape} @ {b.shape}")
    return _record(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def index(a, idx) -> Tensor:
    a = as_tensor(a)

    def back(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record(a.data[idx], (a,), back)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat of nothing")
    out = np.concatenate([t.data for t in ts], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(ts)))

    return _record(out, tuple(ts), back)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _record(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.shape[axis] == 0:
        raise ContractError("softmax over an empty axis")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _record(out, (a,), back)


def dropout(a, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: kept units scaled by 1/(1-rate) in training, identity otherwise."""
    a = as_tensor(a)
    if not train or rate == 0.0:
        return a
    if rng is None:
        raise ContractError("dropout in training mode needs a generator")
    keep = 1.0 - rate
    mask = (rng.random(a.shape, dtype=np.float32) < keep) / keep
    return _record(a.data * mask, (a,), lambda g: (g * mask,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

def dilated_causal_conv(x, weight, bias=None, dilation: int = 1) -> Tensor:
    """Causal convolution along the time axis, shared across assets.

    ``x`` is ``(..., m, k, Cin)``, ``weight`` is ``(Cout, Cin, K)``. Tap ``j``
    reads lag ``(K-1-j)*dilation``, so the last tap is the current step. The
    sequence is left-padded with ``(K-1)*dilation`` zeros.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    cout, cin, ksize = weight.shape
    if x.ndim < 3 or x.shape[-1] != cin:
        raise ContractError(f"dilated_causal_conv: input {x.shape} vs weight {weight.shape}")
    lead, k = x.shape[:-2], x.shape[-2]
    pad = (ksize - 1) * dilation
    flat = x.data.reshape(-1, k, cin)
    xp = np.concatenate([np.zeros((flat.shape[0], pad, cin)), flat], axis=1)
    cols = np.concatenate([xp[:, j * dilation: j * dilation + k, :] for j in range(ksize)], axis=-1)
    wmat = weight.data.transpose(2, 1, 0).reshape(ksize * cin, cout)
    out = cols @ wmat
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def back(g):
        g2 = g.reshape(-1, k, cout)
        dw = cols.reshape(-1, ksize * cin).T @ g2.reshape(-1, cout)
        dweight = dw.reshape(ksize, cin, cout).transpose(2, 1, 0)
        dcols = g2 @ wmat.T
        dxp = np.zeros_like(xp)
        for j in range(ksize):
            dxp[:, j * dilation: j * dilation + k, :] += dcols[:, :, j * cin:(j + 1) * cin]
        dx = dxp[:, pad:, :].reshape(x.shape)
        grads = (dx, dweight)
        if bias is not None:
            grads = grads + (g2.reshape(-1, cout).sum(axis=0),)
        return grads

    return _record(out.reshape(lead + (k, cout)), parents, back)


def correlational_conv(x, weight, bias=None) -> Tensor:
    """Convolution across the asset axis at every time step, SAME zero padding.

    ``x`` is ``(..., m, k, Cin)``, ``weight`` is ``(Cout, Cin, m)``; output keeps
    the asset and time extents of the input.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    cout, cin, height = weight.shape
    if x.ndim < 3 or x.shape[-1] != cin or x.shape[-3] != height:
        raise ContractError(f"correlational_conv: input {x.shape} vs weight {weight.shape}")
    m, k = x.shape[-3], x.shape[-2]
    lead = x.shape[:-3]
    top = (height - 1) // 2
    bottom = height - 1 - top
    flat = x.data.reshape((-1, m, k, cin))
    n = flat.shape[0]
    xp = np.concatenate([np.zeros((n, top, k, cin)), flat, np.zeros((n, bottom, k, cin))], axis=1)
    cols = np.concatenate([xp[:, j: j + m] for j in range(height)], axis=-1)
    wmat = weight.data.transpose(2, 1, 0).reshape(height * cin, cout)
    out = cols @ wmat
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def back(g):
        g2 = g.reshape(n, m, k, cout)
        dw = cols.reshape(-1, height * cin).T @ g2.reshape(-1, cout)
        dweight = dw.reshape(height, cin, cout).transpose(2, 1, 0)
        dcols = g2 @ wmat.T
        dxp = np.zeros_like(xp)
        for j in range(height):
            dxp[:, j: j + m] += dcols[..., j * cin:(j + 1) * cin]
        dx = dxp[:, top: top + m].reshape(x.shape)
        grads = (dx, dweight)
        if bias is not None:
            grads = grads + (g2.reshape(-1, cout).sum(axis=0),)
        return grads

    return _record(out.reshape(lead + (m, k, cout)), parents, back)


def temporal_valid_conv(x, weight, bias=None) -> Tensor:
    """[1 x k] VALID convolution collapsing the time axis: ``(..., m, k, Cin) -> (..., m, Cout)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    cout, cin, k = weight.shape
    if x.ndim < 3 or x.shape[-2:] != (k, cin):
        raise ContractError(f"temporal_valid_conv: input {x.shape} vs weight {weight.shape}")
    lead = x.shape[:-2]
    flat = x.data.reshape(-1, k * cin)
    wmat = weight.data.transpose(2, 1, 0).reshape(k * cin, cout)
    out = flat @ wmat
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def back(g):
        g2 = g.reshape(-1, cout)
        dweight = (flat.T @ g2).reshape(k, cin, cout).transpose(2, 1, 0)
        grads = ((g2 @ wmat.T).reshape(x.shape), dweight)
        if bias is not None:
            grads = grads + (g2.sum(axis=0),)
        return grads

    return _record(out.reshape(lead + (cout,)), parents, back)


def conv_1x1(x, weight, bias=None) -> Tensor:
    """Pointwise channel mixing: ``(..., C) -> (..., Cout)`` with ``weight`` ``(Cout, C)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    cout, cin = weight.shape
    if x.shape[-1] != cin:
        raise ContractError(f"conv_1x1: input {x.shape} vs weight {weight.shape}")
    flat = x.data.reshape(-1, cin)
    out = flat @ weight.data.T
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def back(g):
        g2 = g.reshape(-1, cout)
        grads = ((g2 @ weight.data).reshape(x.shape), g2.T @ flat)
        if bias is not None:
            grads = grads + (g2.sum(axis=0),)
        return grads

    return _record(out.reshape(x.shape[:-1] + (cout,)), parents, back)


def lstm(x, w_input, w_hidden, bias) -> Tensor:
    """Single-layer LSTM over the time axis, zero initial state.

    ``x`` is ``(..., k, D)``; ``w_input`` ``(D, 4H)``, ``w_hidden`` ``(H, 4H)``,
    ``bias`` ``(4H,)`` with gate blocks ordered input, forget, output, candidate.
    Returns the final hidden state ``(..., H)``.
    """
    x, w_input, w_hidden, bias = (as_tensor(t) for t in (x, w_input, w_hidden, bias))
    d, four_h = w_input.shape
    h_size = four_h // 4
    if x.shape[-1] != d or w_hidden.shape != (h_size, four_h) or bias.shape != (four_h,):
        raise ContractError(f"lstm: input {x.shape}, w_input {w_input.shape}, w_hidden {w_hidden.shape}")
    lead, k = x.shape[:-2], x.shape[-2]
    xs = x.data.reshape(-1, k, d)
    n = xs.shape[0]
    xproj = xs @ w_input.data + bias.data
    h = np.zeros((n, h_size))
    c = np.zeros((n, h_size))
    hs, cs, gates = [h], [c], []
    wh = w_hidden.data
    for t in range(k):
        z = xproj[:, t] + h @ wh
        i = _sigmoid(z[:, :h_size])
        f = _sigmoid(z[:, h_size:2 * h_size])
        o = _sigmoid(z[:, 2 * h_size:3 * h_size])
        gg = np.tanh(z[:, 3 * h_size:])
        c = f * c + i * gg
        h = o * np.tanh(c)
        gates.append((i, f, o, gg))
        hs.append(h)
        cs.append(c)

    def back(g):
        dh = g.reshape(n, h_size)
        dc = np.zeros((n, h_size))
        dz_all = np.empty((n, k, four_h))
        dwh = np.zeros_like(wh)
        for t in reversed(range(k)):
            i, f, o, gg = gates[t]
            tc = np.tanh(cs[t + 1])
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * gg
            dg = dc * i
            df = dc * cs[t]
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - gg * gg)], axis=1)
            dz_all[:, t] = dz
            dwh += hs[t].T @ dz
            dh = dz @ wh.T
            dc = dc * f
        dz_flat = dz_all.reshape(-1, four_h)
        dx = (dz_flat @ w_input.data.T).reshape(x.shape)
        dwi = xs.reshape(-1, d).T @ dz_flat
        return dx, dwi, dwh, dz_flat.sum(axis=0)

    return _record(h.reshape(lead + (h_size,)), (x, w_input, w_hidden, bias), back)
