"""
Dense-array reverse-mode automatic differentiation on top of numpy.

A ``Tensor`` is one node of the computation graph: it caches its output
array, keeps references to its parents and a closure that maps the
output gradient to parent gradients. ``backward`` walks the graph in
reverse topological order and accumulates gradients into the leaves.
Learnable arrays live in a ``ParamStore`` shared by the tokenizer, the
scheduling networks and the denoiser.
"""

import hashlib
import json
import logging
import os
from abc import ABC, abstractmethod
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from pipeline_errors import CheckpointError, InputDomainError

logger = logging.getLogger(__name__)

DTYPE = np.float64
BLOB_DTYPE = "<f8"
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "values.bin"

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    """Computation-graph node: op tag, parents, cached output and gradient."""

    __array_priority__ = 100

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[Callable[[np.ndarray], Tuple]] = None,
        op: str = "const",
    ):
        self.value = np.asarray(value, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.grad: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def backward(self) -> None:
        backward(self)

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


class Parameter(Tensor):
    """Named learnable array; ``trainable`` doubles as ``requires_grad``."""

    def __init__(self, name: str, value, trainable: bool = True):
        super().__init__(value, requires_grad=trainable, op="param")
        self.name = name

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, flag: bool) -> None:
        self.requires_grad = flag
        if not flag:
            self.grad = None


def lift(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    requires_grad = any(p.requires_grad for p in parents)
    if not requires_grad:
        return Tensor(value, op=op)
    return Tensor(value, True, tuple(parents), backward_fn, op)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise InputDomainError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible"
        ) from None


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a), lift(b)
    _broadcast_check(a, b, "add")
    return _node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a), lift(b)
    _broadcast_check(a, b, "sub")
    return _node(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a), lift(b)
    _broadcast_check(a, b, "mul")
    return _node(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.shape),
            _unbroadcast(g * a.value, b.shape),
        ),
        "mul",
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = lift(a), lift(b)
    _broadcast_check(a, b, "div")
    return _node(
        a.value / b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * a.value / (b.value * b.value), b.shape),
        ),
        "div",
    )


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = lift(a)
    return _node(
        a.value**exponent,
        (a,),
        lambda g: (g * exponent * a.value ** (exponent - 1),),
        "pow",
    )


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product; ``a`` may carry leading batch axes, ``b`` is at least 2-D."""
    a, b = lift(a), lift(b)
    if b.ndim < 2 or a.ndim < 1 or a.shape[-1] != b.shape[-2]:
        raise InputDomainError(f"matmul: shapes {a.shape} and {b.shape} do not align")

    def backward_fn(g):
        if a.ndim == 1:
            return g @ b.value.T, np.outer(a.value, g)
        grad_a = _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape)
        grad_b = _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape)
        return grad_a, grad_b

    return _node(a.value @ b.value, (a, b), backward_fn, "matmul")


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = [lift(t) for t in tensors]
    try:
        value = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError:
        raise InputDomainError(
            f"concat: shapes {[p.shape for p in parts]} do not match along axis {axis}"
        ) from None
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(value, parts, backward_fn, "concat")


def sigmoid(a: ArrayLike) -> Tensor:
    a = lift(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def relu(a: ArrayLike) -> Tensor:
    a = lift(a)
    active = a.value > 0
    return _node(np.where(active, a.value, 0.0), (a,), lambda g: (g * active,), "relu")


def softplus(a: ArrayLike) -> Tensor:
    a = lift(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _node(np.logaddexp(0.0, a.value), (a,), lambda g: (g * s,), "softplus")


def exp(a: ArrayLike) -> Tensor:
    a = lift(a)
    e = np.exp(a.value)
    return _node(e, (a,), lambda g: (g * e,), "exp")


def log(a: ArrayLike) -> Tensor:
    a = lift(a)
    return _node(np.log(a.value), (a,), lambda g: (g / a.value,), "log")


def sqrt(a: ArrayLike) -> Tensor:
    a = lift(a)
    r = np.sqrt(a.value)
    return _node(r, (a,), lambda g: (g * 0.5 / r,), "sqrt")


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = lift(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _node(s, (a,), backward_fn, "softmax")


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = lift(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    s = np.exp(out)

    def backward_fn(g):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return _node(out, (a,), backward_fn, "log_softmax")


def tsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = lift(a)

    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(a.value.sum(axis=axis, keepdims=keepdims), (a,), backward_fn, "sum")


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = lift(a)
    if axis is None:
        count = a.value.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / max(count, 1))


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = lift(a)
    return _node(
        a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape"
    )


def transpose(a: ArrayLike, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    a = lift(a)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _node(
        np.transpose(a.value, axes),
        (a,),
        lambda g: (np.transpose(g, inverse),),
        "transpose",
    )


def index(a: ArrayLike, key) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate gradients."""
    a = lift(a)

    def backward_fn(g):
        grad = np.zeros_like(a.value)
        np.add.at(grad, key, g)
        return (grad,)

    return _node(a.value[key], (a,), backward_fn, "index")


def clip(a: ArrayLike, low: float, high: float) -> Tensor:
    a = lift(a)
    inside = (a.value >= low) & (a.value <= high)
    return _node(
        np.clip(a.value, low, high), (a,), lambda g: (g * inside,), "clip"
    )


def stop_gradient(a: ArrayLike) -> Tensor:
    """Identity on values; nothing flows back through it."""
    return Tensor(lift(a).value.copy(), op="stop_gradient")


def straight_through(soft: Tensor, hard_value: np.ndarray) -> Tensor:
    """Forward value ``hard_value``; the gradient is passed to ``soft`` unchanged."""
    if soft.shape != np.shape(hard_value):
        raise InputDomainError(
            f"straight_through: shapes {soft.shape} and {np.shape(hard_value)} differ"
        )
    return _node(hard_value, (soft,), lambda g: (g,), "straight_through")


def cosine_similarity(a: ArrayLike, b: ArrayLike, axis: int = -1, eps: float = 0.0) -> Tensor:
    """Cosine of the angle along ``axis``; ``eps`` is added to each norm."""
    a, b = lift(a), lift(b)
    _broadcast_check(a, b, "cosine_similarity")
    dot = tsum(a * b, axis=axis)
    norm_a = sqrt(tsum(a * a, axis=axis)) + eps
    norm_b = sqrt(tsum(b * b, axis=axis)) + eps
    return dot / (norm_a * norm_b)


def one_hot(indices, depth: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros(indices.shape + (depth,), dtype=DTYPE)
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    u = np.clip(u, np.finfo(DTYPE).tiny, 1.0 - np.finfo(DTYPE).epsneg)
    return -np.log(-np.log(u))


def gumbel_softmax(
    logits: ArrayLike,
    temperature: float,
    rng: Optional[np.random.Generator] = None,
    hard: bool = False,
    noise: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Relaxed one-hot sample along the last axis.

    Args:
        logits: Unnormalized log-probabilities.
        temperature: Positive relaxation temperature.
        rng: Generator for the Gumbel draw (ignored when ``noise`` is given).
        hard: Straight-through variant: exact one-hot forward value,
            gradient of the relaxed sample backward.
        noise: Pre-drawn Gumbel noise, for reproducing a draw.

    Raises:
        InputDomainError: On a non-positive temperature or non-finite logits.
    """
    if not temperature > 0:
        raise InputDomainError(f"gumbel_softmax temperature must be > 0, got {temperature}")
    logits = lift(logits)
    if not np.all(np.isfinite(logits.value)):
        raise InputDomainError("gumbel_softmax received non-finite logits")
    if noise is None:
        if rng is None:
            raise InputDomainError("gumbel_softmax needs an rng or a noise draw")
        noise = gumbel_noise(logits.shape, rng)
    soft = softmax((logits + noise) * (1.0 / temperature), axis=-1)
    if not hard:
        return soft
    return straight_through(soft, one_hot(np.argmax(soft.value, axis=-1), logits.shape[-1]))


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into the ``grad`` of every leaf requiring it."""
    if loss.value.size != 1:
        raise InputDomainError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator derived by hashing ``(seed, purpose)``."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class ParamStore:
    """Named learnable arrays with gradients and trainable flags."""

    def __init__(self):
        self._entries: Dict[str, Parameter] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self._entries[name]
        except KeyError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> List[str]:
        return list(self._entries)

    def add(self, name: str, value, trainable: bool = True) -> Parameter:
        if name in self._entries:
            raise InputDomainError(f"parameter {name!r} already registered")
        param = Parameter(name, np.array(value, dtype=DTYPE), trainable)
        self._entries[name] = param
        return param

    def create(
        self,
        name: str,
        shape: Tuple[int, ...],
        rng: np.random.Generator,
        init: str = "glorot",
        scale: float = 1.0,
    ) -> Parameter:
        if init == "zeros":
            value = np.zeros(shape)
        elif init == "normal":
            value = rng.normal(0.0, scale, size=shape)
        elif init == "glorot":
            fan_in = shape[0] if len(shape) > 1 else 1
            fan_out = shape[-1]
            limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
            value = rng.uniform(-limit, limit, size=shape)
        else:
            raise InputDomainError(f"unknown initializer {init!r}")
        return self.add(name, value)

    def parameters(self, prefix: str = "", trainable_only: bool = False) -> List[Parameter]:
        return [
            p
            for name, p in self._entries.items()
            if name.startswith(prefix) and (p.trainable or not trainable_only)
        ]

    def zero_grad(self) -> None:
        for param in self._entries.values():
            param.grad = None

    def freeze(self, prefix: str = "") -> None:
        for param in self.parameters(prefix):
            param.trainable = False

    def unfreeze(self, prefix: str = "") -> None:
        for param in self.parameters(prefix):
            param.trainable = True

    @property
    def frozen(self) -> bool:
        return all(not p.trainable for p in self._entries.values())

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self._entries):
            digest.update(name.encode("utf-8"))
            digest.update(self._entries[name].value.astype(BLOB_DTYPE).tobytes())
        return digest.hexdigest()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._entries.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        for name, value in snapshot.items():
            self[name].value = value.copy()

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p.value)) for p in self._entries.values())


class Optimizer(ABC):
    """Abstract base class for parameter update rules."""

    def __init__(self, store: ParamStore, lr: float):
        if lr <= 0:
            raise InputDomainError(f"learning rate must be > 0, got {lr}")
        self.store = store
        self.lr = lr

    @abstractmethod
    def step(self) -> None:
        """Apply one update from the accumulated gradients, then zero them."""
        pass


class SGDOptimizer(Optimizer):
    """Plain gradient step ``p <- p - lr * grad``."""

    def step(self) -> None:
        for param in self.store.parameters(trainable_only=True):
            if param.grad is not None:
                param.value = param.value - self.lr * param.grad
        self.store.zero_grad()


class AdamOptimizer(Optimizer):
    """Adam with bias-corrected moment estimates."""

    def __init__(
        self,
        store: ParamStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        super().__init__(store, lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for param in self.store.parameters(trainable_only=True):
            if param.grad is None:
                continue
            m = self._m.get(param.name, np.zeros_like(param.value))
            v = self._v.get(param.name, np.zeros_like(param.value))
            m = self.beta1 * m + (1.0 - self.beta1) * param.grad
            v = self.beta2 * v + (1.0 - self.beta2) * param.grad * param.grad
            self._m[param.name], self._v[param.name] = m, v
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.value = param.value - self.lr * update
        self.store.zero_grad()


class Dense:
    """Affine map ``x @ W + b`` registered in a parameter store."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        bias: bool = True,
    ):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = store.create(f"{name}/weight", (in_dim, out_dim), rng)
        self.bias = store.create(f"{name}/bias", (out_dim,), rng, init="zeros") if bias else None

    def __call__(self, x: ArrayLike) -> Tensor:
        x = lift(x)
        if x.shape[-1] != self.in_dim:
            raise InputDomainError(
                f"dense layer {self.weight.name}: expected input width {self.in_dim}, "
                f"got shape {x.shape}"
            )
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class MLP:
    """Two affine maps with a ReLU in between."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_dim: int,
        hidden_dim: int,
        out_dim: int,
        rng: np.random.Generator,
    ):
        self.first = Dense(store, f"{name}/0", in_dim, hidden_dim, rng)
        self.second = Dense(store, f"{name}/1", hidden_dim, out_dim, rng)

    def __call__(self, x: ArrayLike) -> Tensor:
        return self.second(relu(self.first(x)))


def save_checkpoint(
    store: ParamStore, directory: str, metadata: Optional[Dict] = None
) -> None:
    """
    Write a checkpoint directory: ``manifest.json`` plus one raw blob.

    Args:
        store: Parameters to save.
        directory: Target directory, created when missing.
        metadata: JSON-serializable model description stored in the manifest.
    """
    os.makedirs(directory, exist_ok=True)
    entries = []
    offset = 0
    with open(os.path.join(directory, BLOB_NAME), "wb") as blob:
        for param in store:
            raw = param.value.astype(BLOB_DTYPE).tobytes()
            entries.append(
                {
                    "name": param.name,
                    "shape": list(param.value.shape),
                    "dtype": BLOB_DTYPE,
                    "offset": offset,
                }
            )
            blob.write(raw)
            offset += len(raw)
    manifest = {
        "blob": BLOB_NAME,
        "frozen": store.frozen,
        "metadata": metadata or {},
        "entries": entries,
    }
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    logger.info(f"Saved {len(entries)} parameters ({offset} bytes) to {directory}")


def read_manifest(directory: str) -> Dict:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint manifest not found at {path}")
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def load_checkpoint(store: ParamStore, directory: str) -> Dict:
    """
    Load values into an already-built store, validating names and shapes.

    Returns:
        The metadata object stored with the checkpoint.

    Raises:
        CheckpointError: If the directory is missing or does not match ``store``.
    """
    manifest = read_manifest(directory)
    entries = {entry["name"]: entry for entry in manifest["entries"]}
    if set(entries) != set(store.names()):
        missing = sorted(set(store.names()) - set(entries))
        extra = sorted(set(entries) - set(store.names()))
        raise CheckpointError(
            f"checkpoint {directory} does not match model: missing {missing}, unexpected {extra}"
        )
    with open(os.path.join(directory, manifest["blob"]), "rb") as handle:
        blob = handle.read()
    for name, entry in entries.items():
        param = store[name]
        shape = tuple(entry["shape"])
        if shape != param.shape:
            raise CheckpointError(
                f"parameter {name}: checkpoint shape {shape} != model shape {param.shape}"
            )
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(blob, dtype=entry["dtype"], count=count, offset=entry["offset"])
        param.value = values.astype(DTYPE).reshape(shape)
    if manifest.get("frozen"):
        store.freeze()
    logger.info(f"Loaded {len(entries)} parameters from {directory}")
    return manifest.get("metadata", {})
