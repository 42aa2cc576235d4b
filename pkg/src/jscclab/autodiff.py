"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Supports exactly the operations the convolutional autoencoder in this
package needs: elementwise arithmetic with numpy-style broadcasting,
matmul, strided conv2d, pixel shuffle, a handful of activations,
reductions, reshape/concat, and custom-gradient nodes (used by the
straight-through quantizer). Forward values are float64.
"""

from __future__ import annotations

import struct
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense float64 array plus an optional backpropagation record."""

    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward_fn: Callable[[np.ndarray], tuple] | None = None, name: str = ""):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    # ----- graph traversal -----

    def _toposort(self) -> list["Tensor"]:
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self):
        """Backpropagate from a scalar tensor, filling .grad on every
        reachable tensor that requires a gradient.

        Calling backward a second time without zero_grad() on the leaves
        raises: accumulation across calls is not supported.
        """
        if self.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {self.shape}")
        order = self._toposort()
        for node in order:
            if node.requires_grad and not node.parents and node.grad is not None:
                raise RuntimeError(
                    "backward called with stale gradients; call zero_grad() on "
                    "parameters between backward passes")
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None or not node.requires_grad:
                continue
            if not node.parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            node.grad = g
            if node.backward_fn is None:
                continue
            parent_grads = node.backward_fn(g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.shape:
                    raise ShapeError(
                        f"backward rule produced gradient of shape {pg.shape} "
                        f"for parent of shape {p.shape}")
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    def zero_grad(self):
        self.grad = None

    # ----- operator sugar -----

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# ----- elementwise arithmetic (numpy broadcasting; backward unbroadcasts) -----

def _binary(a, b, op: str, fwd, bwd):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc
    return Tensor(out, parents=(a, b),
                  backward_fn=lambda g: bwd(g, a, b))


def add(a, b) -> Tensor:
    return _binary(a, b, "add", np.add,
                   lambda g, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    return _binary(a, b, "sub", np.subtract,
                   lambda g, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    return _binary(a, b, "mul", np.multiply,
                   lambda g, a, b: (_unbroadcast(g * b.data, a.shape),
                                    _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    return _binary(a, b, "div", np.divide,
                   lambda g, a, b: (_unbroadcast(g / b.data, a.shape),
                                    _unbroadcast(-g * a.data / b.data ** 2, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return Tensor(a.data @ b.data, parents=(a, b),
                  backward_fn=lambda g: (g @ b.data.T, a.data.T @ g))


# ----- activations and pointwise functions -----

def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor(x.data * mask, parents=(x,), backward_fn=lambda g: (g * mask,))


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Parametric leaky ReLU with a scalar learnable negative slope."""
    x, slope = as_tensor(x), as_tensor(slope)
    if slope.size != 1:
        raise ShapeError(f"prelu: slope must be scalar, got shape {slope.shape}")
    pos = x.data > 0
    s = float(slope.data.reshape(()))
    out = np.where(pos, x.data, s * x.data)

    def bwd(g):
        gx = np.where(pos, g, s * g)
        gs = np.sum(g * np.where(pos, 0.0, x.data)).reshape(slope.shape)
        return gx, gs

    return Tensor(out, parents=(x, slope), backward_fn=bwd)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign for overflow safety
    out = np.where(x.data >= 0,
                   1.0 / (1.0 + np.exp(-np.clip(x.data, 0, None))),
                   np.exp(np.clip(x.data, None, 0)) / (1.0 + np.exp(np.clip(x.data, None, 0))))
    return Tensor(out, parents=(x,), backward_fn=lambda g: (g * out * (1.0 - out),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return Tensor(out, parents=(x,), backward_fn=lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.log(x.data), parents=(x,), backward_fn=lambda g: (g / x.data,))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return Tensor(out, parents=(x,), backward_fn=lambda g: (g * 0.5 / out,))


def square(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.data ** 2, parents=(x,), backward_fn=lambda g: (2.0 * g * x.data,))


# ----- reductions and shape ops -----

def _reduce(x, np_fn, axis, keepdims, grad_scale):
    x = as_tensor(x)
    out = np_fn(x.data, axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy() * grad_scale(x),)

    return Tensor(out, parents=(x,), backward_fn=bwd)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    return _reduce(x, np.sum, axis, keepdims, lambda x: 1.0)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in ax]))
    return _reduce(x, np.mean, axis, keepdims, lambda x: 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    if int(np.prod(shape)) != x.size and -1 not in shape:
        raise ShapeError(f"reshape: cannot view shape {x.shape} as {tuple(shape)}")
    out = x.data.reshape(shape)
    return Tensor(out, parents=(x,), backward_fn=lambda g: (g.reshape(x.shape),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, parents=tuple(tensors), backward_fn=bwd)


# ----- convolution and pixel shuffle (NCHW) -----

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    b, c, h, w = x.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    shp = (b, c, kh, kw, ho, wo)
    strides = (xp.strides[0], xp.strides[1],
               xp.strides[2], xp.strides[3],
               xp.strides[2] * stride, xp.strides[3] * stride)
    cols = np.lib.stride_tricks.as_strided(xp, shape=shp, strides=strides)
    return cols.reshape(b, c * kh * kw, ho * wo), ho, wo


def _col2im(cols: np.ndarray, x_shape, kh, kw, stride, pad, ho, wo):
    b, c, h, w = x_shape
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    cols = cols.reshape(b, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, pad: int | None = None) -> Tensor:
    """2-D convolution, NCHW layout, zero padding, stride 1 or 2."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input/weight, got {x.shape} and {weight.shape}")
    co, ci, kh, kw = weight.shape
    if x.shape[1] != ci:
        raise ShapeError(f"conv2d: input channels {x.shape[1]} != weight channels {ci}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: stride must be 1 or 2, got {stride}")
    if pad is None:
        pad = kh // 2
    cols, ho, wo = _im2col(x.data, kh, kw, stride, pad)
    wmat = weight.data.reshape(co, -1)
    out = np.einsum("of,bfp->bop", wmat, cols).reshape(-1, co, ho, wo)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (co,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({co},)")
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def bwd(g):
        gmat = g.reshape(g.shape[0], co, -1)
        gw = np.einsum("bop,bfp->of", gmat, cols).reshape(weight.shape)
        gcols = np.einsum("of,bop->bfp", wmat, gmat)
        gx = _col2im(gcols, x.shape, kh, kw, stride, pad, ho, wo)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return Tensor(out, parents=tuple(parents), backward_fn=bwd)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(B, C*r*r, H, W) -> (B, C, H*r, W*r)."""
    x = as_tensor(x)
    b, crr, h, w = x.shape
    if crr % (r * r):
        raise ShapeError(f"pixel_shuffle: channels {crr} not divisible by {r * r}")
    c = crr // (r * r)
    out = (x.data.reshape(b, c, r, r, h, w)
           .transpose(0, 1, 4, 2, 5, 3)
           .reshape(b, c, h * r, w * r))

    def bwd(g):
        gx = (g.reshape(b, c, h, r, w, r)
              .transpose(0, 1, 3, 5, 2, 4)
              .reshape(b, crr, h, w))
        return (gx,)

    return Tensor(out, parents=(x,), backward_fn=bwd)


# ----- custom-gradient node -----

def custom_node(parents: Sequence[Tensor], forward_value: np.ndarray,
                backward_rule: Callable[[np.ndarray], tuple]) -> Tensor:
    """A graph node whose forward value and backward rule are supplied
    by the caller. The straight-through quantizer is built on this:
    forward emits the hard symbols, backward applies the soft Jacobian.
    """
    return Tensor(forward_value, parents=tuple(parents), backward_fn=backward_rule)


# ----- numerical gradient oracle -----

def numerical_grad(fn: Callable[[np.ndarray], float], x: np.ndarray,
                   eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = fn(x)
        flat[i] = old - eps
        fm = fn(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * eps)
    return g


# ----- parameter container serialization -----

_MAGIC = b"JSCQ"
_VERSION = 1


def save_parameters(params: dict[str, Tensor] | dict[str, np.ndarray]) -> bytes:
    """Serialize named arrays: magic, version, then per entry
    name-length + name + rank + dims (u32 LE) + raw float64 LE values.
    """
    out = [_MAGIC, struct.pack("<I", _VERSION), struct.pack("<I", len(params))]
    for name, t in params.items():
        arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
        nb = name.encode("utf-8")
        out.append(struct.pack("<I", len(nb)))
        out.append(nb)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.astype("<f8").tobytes())
    return b"".join(out)


def load_parameters(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != _MAGIC:
        raise ValueError("bad magic bytes in parameter container")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    off = 12
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(dims)
        off += 8 * n
        params[name] = arr.copy()
    return params
