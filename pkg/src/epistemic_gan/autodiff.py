"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op that touches a tensor requiring gradients records its inputs and a
backward closure on the output. Tensors carry a global creation counter, so
sorting the reachable nodes by that counter recovers execution order, which is
a valid topological order of the graph.
"""

from __future__ import annotations

import itertools
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

_counter = itertools.count()
_grad_enabled = True

MAGIC = "EGAN1"


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextmanager
def frozen(params: Iterable["Tensor"]):
    """Temporarily stop gradient accumulation into ``params``."""
    params = list(params)
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad = f


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_seq", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._seq = next(_counter)
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        backward(self)

    # operator sugar
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

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def _wants(t: Tensor) -> bool:
    return t.requires_grad


# --- elementwise binary -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def bw(g):
        if _wants(a):
            a._accumulate(_unbroadcast(g, a.shape))
        if _wants(b):
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def bw(g):
        if _wants(a):
            a._accumulate(_unbroadcast(g, a.shape))
        if _wants(b):
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def bw(g):
        if _wants(a):
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if _wants(b):
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data

    def bw(g):
        if _wants(a):
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if _wants(b):
            b._accumulate(_unbroadcast(-g * out / b.data, b.shape))

    return _make(out, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: a._accumulate(-g))


# --- linear algebra and shape ---------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if _wants(a):
            a._accumulate(g @ b.data.T)
        if _wants(b):
            b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bw)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    return _make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), bw)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if a.data.size == 0:
        raise ValueError("mean of an empty tensor")
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(a.shape)))


def broadcast(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        data = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ValueError(f"broadcast: cannot broadcast {a.shape} to {shape}") from None
    return _make(data.copy(), (a,), lambda g: a._accumulate(_unbroadcast(g, a.shape)))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in ts], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def bw(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if _wants(t):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _make(data, ts, bw)


def slice_(a, index) -> Tensor:
    a = as_tensor(a)

    idx = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (slice, int, type(Ellipsis), type(None))) for i in idx)

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        a._accumulate(full)

    return _make(a.data[index], (a,), bw)


# --- elementwise unary ----------------------------------------------------------------


def max_with_scalar(a, floor: float = 0.0) -> Tensor:
    """max(a, floor) with subgradient 0 exactly at the kink."""
    a = as_tensor(a)
    active = a.data > floor
    return _make(np.where(active, a.data, floor), (a,), lambda g: a._accumulate(g * active))


def relu(a) -> Tensor:
    return max_with_scalar(a, 0.0)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * scale, (a,), lambda g: a._accumulate(g * scale))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only strictly inside the range."""
    a = as_tensor(a)
    inside = (a.data > lo) & (a.data < hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: a._accumulate(g * inside))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * (1.0 - out * out)))


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = stable_sigmoid(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * out * (1.0 - out)))


def softplus_np(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus(a) -> Tensor:
    a = as_tensor(a)
    out = softplus_np(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * stable_sigmoid(a.data)))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: a._accumulate(g / a.data))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: a._accumulate(g * out))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: a._accumulate(2.0 * g * a.data))


def custom_op(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Register a hand-written op: ``backward_fn(g)`` must accumulate into ``parents``."""
    return _make(np.asarray(data, dtype=np.float64), parents, backward_fn)


def straight_through(sample: np.ndarray, surrogate: Tensor) -> Tensor:
    """Forward value ``sample``; backward routes gradients to ``surrogate`` unchanged."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != surrogate.shape:
        raise ValueError(f"straight_through: shapes {sample.shape} and {surrogate.shape} differ")
    return _make(sample.copy(), (surrogate,), lambda g: surrogate._accumulate(g))


# --- backward pass -----------------------------------------------------------------------


def _reachable(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._seq, reverse=True)
    return nodes


def backward(root: Tensor):
    """Populate ``.grad`` on every tensor that contributes to the scalar ``root``.

    Gradients add into existing ``.grad`` arrays on leaves, so call
    ``zero_grad`` between independent passes.
    """
    if root.data.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    nodes = _reachable(root)
    interior = [t for t in nodes if t._backward is not None]
    for t in interior:
        t.grad = None
    root._accumulate(np.ones_like(root.data))
    for t in interior:
        if t.grad is not None:
            t._backward(t.grad)
    # interior grads are scratch space; drop them so the graph can be freed
    for t in interior:
        if t is not root:
            t.grad = None
        t._backward = None
        t._parents = ()


# --- parameters and optimisation ---------------------------------------------------------


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


@dataclass
class OptimConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class Adam:
    params: list[Tensor]
    config: OptimConfig = field(default_factory=OptimConfig)
    step_count: int = 0

    def __post_init__(self):
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        """One in-place Adam update; clears gradients afterwards."""
        missing = [p.name or str(i) for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise ValueError(f"no gradient for parameter(s): {', '.join(missing)}")
        c = self.config
        self.step_count += 1
        bc1 = 1.0 - c.beta1**self.step_count
        bc2 = 1.0 - c.beta2**self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p.data -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)
            p.grad = None


# --- checkpoint files -----------------------------------------------------------------------


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    """Write ``<path>`` (text manifest) and ``<path>.bin`` (raw little-endian float64).

    The manifest's first line is the magic string; the rest is JSON with each
    array's name, shape and byte offset into the blob.
    """
    path = Path(path)
    blob_path = path.with_name(path.name + ".bin")
    entries = []
    offset = 0
    with open(blob_path, "wb") as fh:
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(a.tobytes())
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += a.nbytes
    manifest = {"blob": blob_path.name, "dtype": "<f8", "tensors": entries, "meta": meta or {}}
    path.write_text(MAGIC + "\n" + json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    text = path.read_text()
    head, _, body = text.partition("\n")
    if head.strip() != MAGIC:
        raise ValueError(f"{path}: not a checkpoint manifest (missing {MAGIC} header)")
    manifest = json.loads(body)
    raw = (path.parent / manifest["blob"]).read_bytes()
    arrays = {}
    for e in manifest["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=e["offset"])
        arrays[e["name"]] = a.reshape(e["shape"]).astype(np.float64)
    return arrays, manifest["meta"]
