"""Minimal reverse-mode differentiation on numpy arrays.

Every operation appends its result to a :class:`Tape`; ``backward`` walks
the tape in reverse creation order, which is a valid topological order.
Leaves created with :meth:`Tape.param` accumulate their adjoints into the
gradient buffers of a :class:`ParamStore`; constants never receive
gradients, which is how sampled Gumbel and channel noise are frozen.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np


class Tape:
    def __init__(self):
        self.nodes: list[Tensor] = []

    def __len__(self):
        return len(self.nodes)

    def param(self, store: "ParamStore", name: str) -> "Tensor":
        t = Tensor(store.params[name], self, requires_grad=True)
        t.param = (store, name)
        self.nodes.append(t)
        return t

    def const(self, value) -> "Tensor":
        t = Tensor(np.asarray(value, dtype=np.float64), self)
        self.nodes.append(t)
        return t


class Tensor:
    __slots__ = ("data", "tape", "parents", "grad_fn", "requires_grad", "param")

    def __init__(self, data, tape: Tape, parents=(), grad_fn=None, requires_grad=False):
        self.data = data
        self.tape = tape
        self.parents = parents
        self.grad_fn = grad_fn
        self.requires_grad = requires_grad
        self.param = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -_lift(self.tape, other))

    def __rsub__(self, other):
        return add(_lift(self.tape, other), -self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_lift(self.tape, other), self)

    def __neg__(self):
        return _node(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        return matmul(self, _lift(self.tape, other))

    def __rmatmul__(self, other):
        return matmul(_lift(self.tape, other), self)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def _lift(tape: Tape, x) -> Tensor:
    return x if isinstance(x, Tensor) else tape.const(x)


def _node(data, parents: tuple, grad_fn) -> Tensor:
    tape = parents[0].tape
    req = any(p.requires_grad for p in parents)
    t = Tensor(data, tape, parents, grad_fn if req else None, req)
    tape.nodes.append(t)
    return t


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b) -> Tensor:
    b = _lift(a.tape, b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a: Tensor, b) -> Tensor:
    b = _lift(a.tape, b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a: Tensor, b) -> Tensor:
    b = _lift(a.tape, b)
    out = a.data / b.data
    return _node(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return _node(a.data @ b.data, (a, b),
                 lambda g: (_unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape),
                            _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape)))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g / (2.0 * out),))


def square(a: Tensor) -> Tensor:
    return _node(a.data ** 2, (a,), lambda g: (2.0 * g * a.data,))


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def grad(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(out, (a,), grad)


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return sum_(a, axis, keepdims) * (1.0 / count)


def reshape(a: Tensor, shape) -> Tensor:
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def getitem(a: Tensor, key) -> Tensor:
    def grad(g):
        out = np.zeros_like(a.data)
        np.add.at(out, key, g)
        return (out,)

    return _node(a.data[key], (a,), grad)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts),
                 lambda g: tuple(np.split(g, splits, axis=axis)))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(x)
    out = e / e.sum(axis=axis, keepdims=True)
    return _node(out, (a,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data - a.data.max(axis=axis, keepdims=True)
    out = x - np.log(np.exp(x).sum(axis=axis, keepdims=True))
    p = np.exp(out)
    return _node(out, (a,), lambda g: (g - p * g.sum(axis=axis, keepdims=True),))


def floor_renorm(a: Tensor, floor: float, axis: int = -1) -> Tensor:
    """``max(p, floor)`` renormalized along ``axis``; entries below the floor get no gradient."""
    mask = a.data > floor
    f = np.maximum(a.data, floor)
    s = f.sum(axis=axis, keepdims=True)
    out = f / s
    return _node(out, (a,),
                 lambda g: (mask * (g - (g * out).sum(axis=axis, keepdims=True)) / s,))


def straight_through(soft: Tensor, hard: np.ndarray) -> Tensor:
    """Forward value ``hard``, gradient routed unchanged into ``soft``."""
    return _node(np.asarray(hard, dtype=np.float64).copy(), (soft,), lambda g: (g,))


def backward(tape: Tape, loss: Tensor | None = None, upstream: float = 1.0) -> None:
    """Accumulate d(upstream * loss)/d(param) into the parameter stores on ``tape``.

    Gradient buffers are added to, never overwritten; call
    :meth:`ParamStore.zero_grad` between independent backward passes.
    """
    if not tape.nodes:
        raise RuntimeError("backward called before any forward pass")
    loss = tape.nodes[-1] if loss is None else loss
    if loss.data.size != 1:
        raise ValueError("backward needs a scalar loss")
    adj = {id(loss): np.full(loss.shape, float(upstream))}
    for node in reversed(tape.nodes):
        g = adj.pop(id(node), None)
        if g is None or not node.requires_grad:
            continue
        if node.param is not None:
            store, name = node.param
            store.grads[name] += g
        if node.grad_fn is None:
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            adj[key] = adj[key] + pg if key in adj else pg


class ParamStore:
    """Named trainable arrays with gradient buffers and Adam state."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.counts: dict[str, int] = {}
        self.step = 0

    def add(self, name: str, value) -> None:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)
        self.counts[name] = 0

    def names(self, prefix: str = "") -> list[str]:
        return [k for k in self.params if k.startswith(prefix)]

    def zero_grad(self, names: Iterable[str] | None = None) -> None:
        for k in self.params if names is None else names:
            self.grads[k].fill(0.0)

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for k, p in self.params.items():
            out.add(k, p)
            out.m[k] = self.m[k].copy()
            out.v[k] = self.v[k].copy()
            out.counts[k] = self.counts[k]
        out.step = self.step
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params.values()])


@dataclass(frozen=True)
class MLPSpec:
    """Dense network: ``widths[0]`` inputs, one affine layer per following width."""

    widths: tuple[int, ...]
    activations: tuple[str, ...] = ()
    head: str = "linear"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"invalid layer widths {widths}")
        object.__setattr__(self, "widths", widths)
        acts = tuple(self.activations) or ("relu",) * (len(widths) - 2) + ("linear",)
        if len(acts) != len(widths) - 1:
            raise ValueError("need one activation per layer")
        bad = set(acts) - {"relu", "linear"}
        if bad:
            raise ValueError(f"unknown activations {sorted(bad)}")
        if self.head not in ("logits", "linear"):
            raise ValueError(f"unknown head {self.head!r}")
        object.__setattr__(self, "activations", acts)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


def init_mlp(store: ParamStore, spec: MLPSpec, prefix: str, rng: np.random.Generator) -> None:
    """Glorot-uniform weights, zero biases."""
    for i, (fi, fo) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        bound = math.sqrt(6.0 / (fi + fo))
        store.add(f"{prefix}{i}.W", rng.uniform(-bound, bound, size=(fi, fo)))
        store.add(f"{prefix}{i}.b", np.zeros(fo))


def mlp_forward(store: ParamStore, spec: MLPSpec, x, tape: Tape | None = None,
                prefix: str = "") -> tuple[Tensor, Tape]:
    tape = Tape() if tape is None else tape
    h = x if isinstance(x, Tensor) else tape.const(x)
    if h.shape[-1] != spec.widths[0]:
        raise ValueError(f"input width {h.shape[-1]} does not match {spec.widths[0]}")
    for i, act in enumerate(spec.activations):
        h = h @ tape.param(store, f"{prefix}{i}.W") + tape.param(store, f"{prefix}{i}.b")
        if act == "relu":
            h = relu(h)
    return h, tape


class NonFiniteGradient(FloatingPointError):
    pass


def adam_step(store: ParamStore, lr: float, names: Iterable[str] | None = None,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, then zero the updated gradients."""
    names = list(store.params if names is None else names)
    bad = [k for k in names if not np.all(np.isfinite(store.grads[k]))]
    if bad:
        raise NonFiniteGradient(f"non-finite gradient in {', '.join(bad)}")
    for k in names:
        g = store.grads[k]
        store.counts[k] += 1
        t = store.counts[k]
        store.m[k] = beta1 * store.m[k] + (1 - beta1) * g
        store.v[k] = beta2 * store.v[k] + (1 - beta2) * g * g
        mhat = store.m[k] / (1 - beta1 ** t)
        vhat = store.v[k] / (1 - beta2 ** t)
        store.params[k] -= lr * mhat / (np.sqrt(vhat) + eps)
        g.fill(0.0)
    store.step += 1


def cosine_lr(t: float, lr0: float = 5e-4, lr_min: float = 1e-6, horizon: float = 300) -> float:
    """Cosine annealing from ``lr0`` at t=0 down to ``lr_min`` at t=horizon."""
    t = min(max(float(t), 0.0), float(horizon))
    w = 0.5 * (1.0 + math.cos(math.pi * t / horizon))
    return lr_min * (1.0 - w) + lr0 * w


# -- finite-difference checking --------------------------------------------

@dataclass
class GradCheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_err: np.ndarray
    tol: float
    names: list[str] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return float(self.rel_err.max()) if self.rel_err.size else 0.0

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.rel_err < self.tol)) if self.rel_err.size else 1.0


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradcheck(loss_fn: Callable[[ParamStore], tuple[Tensor, Tape]], store: ParamStore,
              names: Iterable[str] | None = None, h: float = 1e-4, tol: float = 1e-4,
              floor: float = 1e-6) -> GradCheckReport:
    """Compare backprop gradients of ``loss_fn`` with central differences."""
    names = list(store.params if names is None else names)
    store.zero_grad()
    loss, tape = loss_fn(store)
    backward(tape, loss)
    analytic = np.concatenate([store.grads[k].ravel() for k in names])
    numeric = []
    for k in names:
        p = store.params[k]
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = float(loss_fn(store)[0].data)
            flat[i] = old - h
            down = float(loss_fn(store)[0].data)
            flat[i] = old
            numeric.append((up - down) / (2 * h))
    store.zero_grad()
    numeric = np.array(numeric)
    return GradCheckReport(analytic, numeric, relative_error(analytic, numeric, floor), tol, names)


# -- checkpoint files ------------------------------------------------------

CHECKPOINT_MAGIC = b"JCMP"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(store: ParamStore, path) -> None:
    """Write parameters as a JCMP file (little-endian float64 arrays keyed by name)."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<HI", CHECKPOINT_VERSION, len(store.params)))
    for name, arr in store.params.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != CHECKPOINT_MAGIC:
        raise CheckpointError("bad checkpoint magic")
    version, count = struct.unpack("<HI", take(6))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise CheckpointError("trailing bytes in checkpoint")
    return out


def restore_params(store: ParamStore, arrays: dict[str, np.ndarray]) -> None:
    missing = set(store.params) - set(arrays)
    if missing:
        raise CheckpointError(f"checkpoint lacks {sorted(missing)}")
    for k in store.params:
        if arrays[k].shape != store.params[k].shape:
            raise CheckpointError(f"shape mismatch for {k}")
        store.params[k][...] = arrays[k]
