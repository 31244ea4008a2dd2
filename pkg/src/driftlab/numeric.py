"""Dense-tensor ops with reverse-mode gradients, Adam, and checkpoints.

Just enough of an autograd engine for the predictors in this package: a
Tensor records its parents and a backward closure; calling backward() on a
scalar walks the graph once in reverse topological order. Storage is f32
during training; tests build f64 graphs for trustworthy finite-difference
checks (dtype follows the arrays you put in).

A graph is consumed by backward(); touching it again raises GraphReuseError
rather than silently accumulating into stale gradients.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ConfigError, DataFormatError, GraphReuseError, NumericDivergenceError
from .util import atomic_write_bytes, atomic_write_text

CHECKPOINT_FORMAT_VERSION = 1


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcasting introduced or stretched."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    def _as_operand(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        # plain scalars/arrays join the graph as constants in our dtype
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- elementwise binary ops (numpy broadcasting, gradients unbroadcast) --

    def __add__(self, other):
        other = self._as_operand(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def bw(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        out._backward = bw
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._as_operand(other)
        out = Tensor(self.data - other.data, _parents=(self, other))

        def bw(g):
            return _unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)

        out._backward = bw
        return out

    def __rsub__(self, other):
        return self._as_operand(other) - self

    def __mul__(self, other):
        other = self._as_operand(other)
        out = Tensor(self.data * other.data, _parents=(self, other))
        a, b = self.data, other.data

        def bw(g):
            return _unbroadcast(g * b, self.shape), _unbroadcast(g * a, other.shape)

        out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._as_operand(other)
        out = Tensor(self.data / other.data, _parents=(self, other))
        a, b = self.data, other.data

        def bw(g):
            return (
                _unbroadcast(g / b, self.shape),
                _unbroadcast(-g * a / (b * b), other.shape),
            )

        out._backward = bw
        return out

    def __rtruediv__(self, other):
        return self._as_operand(other) / self

    def __neg__(self):
        out = Tensor(-self.data, _parents=(self,))
        out._backward = lambda g: (-g,)
        return out

    def pow(self, exponent: float) -> "Tensor":
        """Elementwise power with a constant exponent."""
        out = Tensor(self.data**exponent, _parents=(self,))
        a = self.data

        def bw(g):
            return (g * exponent * a ** (exponent - 1.0),)

        out._backward = bw
        return out

    def sqrt(self) -> "Tensor":
        return self.pow(0.5)

    # -- linear algebra --

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._as_operand(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ConfigError("matmul supports 2-D operands only")
        out = Tensor(self.data @ other.data, _parents=(self, other))
        a, b = self.data, other.data

        def bw(g):
            return g @ b.T, a.T @ g

        out._backward = bw
        return out

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ConfigError("transpose expects a 2-D tensor")
        out = Tensor(self.data.T, _parents=(self,))
        out._backward = lambda g: (g.T,)
        return out

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def reshape(self, *shape) -> "Tensor":
        old = self.shape
        out = Tensor(self.data.reshape(*shape), _parents=(self,))
        out._backward = lambda g: (g.reshape(old),)
        return out

    def narrow(self, axis: int, start: int, size: int) -> "Tensor":
        """Contiguous slice along one axis (used for attention heads)."""
        idx = [slice(None)] * self.data.ndim
        idx[axis] = slice(start, start + size)
        idx = tuple(idx)
        out = Tensor(self.data[idx], _parents=(self,))
        shape = self.shape

        def bw(g):
            full = np.zeros(shape, dtype=g.dtype)
            full[idx] = g
            return (full,)

        out._backward = bw
        return out

    # -- nonlinearities & reductions --

    def relu(self) -> "Tensor":
        out = Tensor(np.maximum(self.data, 0), _parents=(self,))
        mask = self.data > 0

        def bw(g):
            return (g * mask,)

        out._backward = bw
        return out

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=axis, keepdims=True)
        out = Tensor(s, _parents=(self,))

        def bw(g):
            dot = (g * s).sum(axis=axis, keepdims=True)
            return ((g - dot) * s,)

        out._backward = bw
        return out

    def log_softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        y = shifted - lse
        out = Tensor(y, _parents=(self,))
        sm = np.exp(y)

        def bw(g):
            return (g - sm * g.sum(axis=axis, keepdims=True),)

        out._backward = bw
        return out

    def layer_norm(self, eps: float = 1e-5) -> "Tensor":
        """Normalize the last axis to zero mean, unit variance (no affine)."""
        x = self.data
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        y = xc * inv
        out = Tensor(y, _parents=(self,))
        n = x.shape[-1]

        def bw(g):
            gy_mean = g.mean(axis=-1, keepdims=True)
            gyy_mean = (g * y).mean(axis=-1, keepdims=True)
            return ((g - gy_mean - y * gyy_mean) * inv,)

        out._backward = bw
        return out

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,))
        shape = self.shape

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        out._backward = bw
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def pick_cols(self, cols) -> "Tensor":
        """out[i] = self[i, cols[i]] - the gather used by cross-entropy."""
        cols = np.asarray(cols, dtype=np.int64)
        rows = np.arange(self.data.shape[0])
        out = Tensor(self.data[rows, cols], _parents=(self,))
        shape = self.shape

        def bw(g):
            full = np.zeros(shape, dtype=g.dtype)
            np.add.at(full, (rows, cols), g)
            return (full,)

        out._backward = bw
        return out

    # -- autodiff driver --

    def backward(self):
        if self.data.size != 1:
            raise ConfigError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, children_done = stack.pop()
            if children_done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            # leaves (parameters, constants) survive across graphs; only
            # interior nodes are single-use
            if node._consumed and node._parents:
                raise GraphReuseError(
                    "this graph was already consumed by backward(); rebuild the forward pass"
                )
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        for t in topo:
            t.grad = None
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._parents:
                t._consumed = True
            if t._backward is None or t.grad is None:
                continue
            grads = t._backward(t.grad)
            for parent, g in zip(t._parents, grads):
                if not parent.requires_grad and parent._backward is None:
                    continue  # constant leaf: skip the accumulation
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=parent.data.dtype, copy=True)
                else:
                    parent.grad += g


def concat(tensors, axis: int = 1) -> Tensor:
    """Concatenate along an axis; gradient splits back to the parts."""
    parts = list(tensors)
    out = Tensor(np.concatenate([t.data for t in parts], axis=axis), _parents=tuple(parts))
    sizes = [t.data.shape[axis] for t in parts]

    def bw(g):
        grads = []
        start = 0
        for size in sizes:
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + size)
            grads.append(g[tuple(idx)])
            start += size
        return tuple(grads)

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# parameters and Adam
# ---------------------------------------------------------------------------


class ParamStore:
    """Named parameter tensors with stable order plus Adam moment buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, array) -> Tensor:
        if name in self._params:
            raise ConfigError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(array), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name) -> bool:
        return name in self._params

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def snapshot(self) -> dict:
        return {k: t.data.copy() for k, t in self._params.items()}

    def restore(self, snap: dict):
        for k, arr in snap.items():
            self._params[k].data[...] = arr

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        """One Adam update with bias correction over every parameter.

        Parameters with no gradient this step are treated as zero-gradient
        (their moments decay, the values stay put when moments are zero).
        """
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for name, p in self._params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.isfinite(g).all():
                raise NumericDivergenceError(f"non-finite gradient in {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + eps)
            p.data -= (lr * update).astype(p.data.dtype, copy=False)


def warmup_lr(epoch: int, peak_lr: float, warmup_epochs: int) -> float:
    """Linear ramp 0 -> peak over the first warmup_epochs epochs, then flat."""
    if warmup_epochs <= 0:
        return peak_lr
    return peak_lr * min(1.0, (epoch + 1) / warmup_epochs)


# ---------------------------------------------------------------------------
# transformer building blocks (set attention: no positional encoding)
# ---------------------------------------------------------------------------


def init_linear(store: ParamStore, name: str, fan_in: int, fan_out: int, rng, bias: bool = True):
    bound = 1.0 / np.sqrt(fan_in)
    store.add(name + ".w", rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(np.float32))
    if bias:
        store.add(name + ".b", np.zeros(fan_out, dtype=np.float32))


def linear(store: ParamStore, name: str, x: Tensor) -> Tensor:
    y = x @ store[name + ".w"]
    if name + ".b" in store:
        y = y + store[name + ".b"]
    return y


def init_attention(store: ParamStore, prefix: str, dim: int, rng):
    for part in ("q", "k", "v", "o"):
        init_linear(store, f"{prefix}.{part}", dim, dim, rng)


def attention(store: ParamStore, prefix: str, x: Tensor, n_heads: int) -> Tensor:
    """Multi-head scaled dot-product self-attention over a set of S rows.

    No positional encoding: the rows are a set, and the whole block is
    permutation-equivariant.
    """
    dim = x.shape[-1]
    if dim % n_heads != 0:
        raise ConfigError(f"model dim {dim} not divisible by n_heads {n_heads}")
    dh = dim // n_heads
    q = linear(store, f"{prefix}.q", x)
    k = linear(store, f"{prefix}.k", x)
    v = linear(store, f"{prefix}.v", x)
    scale = 1.0 / np.sqrt(dh)
    heads = []
    for h in range(n_heads):
        qh = q.narrow(1, h * dh, dh)
        kh = k.narrow(1, h * dh, dh)
        vh = v.narrow(1, h * dh, dh)
        att = (qh @ kh.T) * scale
        heads.append(att.softmax(axis=-1) @ vh)
    merged = heads[0] if n_heads == 1 else concat(heads, axis=1)
    return linear(store, f"{prefix}.o", merged)


def init_transformer_layer(store: ParamStore, prefix: str, dim: int, rng, ff_mult: int = 4):
    store.add(f"{prefix}.ln1.g", np.ones(dim, dtype=np.float32))
    store.add(f"{prefix}.ln1.b", np.zeros(dim, dtype=np.float32))
    init_attention(store, f"{prefix}.attn", dim, rng)
    store.add(f"{prefix}.ln2.g", np.ones(dim, dtype=np.float32))
    store.add(f"{prefix}.ln2.b", np.zeros(dim, dtype=np.float32))
    init_linear(store, f"{prefix}.ff1", dim, ff_mult * dim, rng)
    init_linear(store, f"{prefix}.ff2", ff_mult * dim, dim, rng)


def transformer_layer(store: ParamStore, prefix: str, x: Tensor, n_heads: int) -> Tensor:
    """Pre-layer-norm block: x + Attn(LN(x)), then x + FF(LN(x))."""
    h = x.layer_norm() * store[f"{prefix}.ln1.g"] + store[f"{prefix}.ln1.b"]
    x = x + attention(store, f"{prefix}.attn", h, n_heads)
    h = x.layer_norm() * store[f"{prefix}.ln2.g"] + store[f"{prefix}.ln2.b"]
    return x + linear(store, f"{prefix}.ff2", linear(store, f"{prefix}.ff1", h).relu())


# ---------------------------------------------------------------------------
# checkpoints: manifest.json + params.bin (LE f32, manifest order) + config.json
# ---------------------------------------------------------------------------


def save_checkpoint(store: ParamStore, directory, config: dict):
    os.makedirs(directory, exist_ok=True)
    manifest = {"format_version": CHECKPOINT_FORMAT_VERSION, "tensors": []}
    blobs = []
    offset = 0
    for name, t in store.items():
        raw = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
        manifest["tensors"].append(
            {
                "name": name,
                "shape": list(t.data.shape),
                "offset": offset,
                "nbytes": len(raw),
                "dtype": "<f4",
            }
        )
        blobs.append(raw)
        offset += len(raw)
    atomic_write_bytes(os.path.join(directory, "params.bin"), b"".join(blobs))
    atomic_write_text(os.path.join(directory, "manifest.json"), json.dumps(manifest, indent=1) + "\n")
    atomic_write_text(os.path.join(directory, "config.json"), json.dumps(config, indent=1, sort_keys=True) + "\n")


def load_checkpoint(directory):
    """Returns (ParamStore, config dict)."""
    try:
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as f:
            manifest = json.load(f)
        with open(os.path.join(directory, "config.json"), encoding="utf-8") as f:
            config = json.load(f)
        with open(os.path.join(directory, "params.bin"), "rb") as f:
            blob = f.read()
    except FileNotFoundError as exc:
        raise DataFormatError(f"incomplete checkpoint in {directory}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"corrupt checkpoint metadata in {directory}: {exc}") from exc
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise DataFormatError(f"unsupported checkpoint format: {manifest.get('format_version')}")
    store = ParamStore()
    for entry in manifest["tensors"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(blob):
            raise DataFormatError(f"checkpoint blob too short for tensor {entry['name']!r}")
        arr = np.frombuffer(blob[start : start + n], dtype=entry["dtype"]).reshape(entry["shape"])
        store.add(entry["name"], arr.astype(np.float32))
    return store, config
