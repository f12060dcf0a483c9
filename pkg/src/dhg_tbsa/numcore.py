"""Small dense autodiff core: tensors, a compute tape, Adam, clipping, dropout.

Everything runs in float64. A ``Tape`` records each primitive as it is
evaluated; ``Tape.backward`` walks the records in reverse and accumulates
gradients into every tensor with ``requires_grad``.
"""
from __future__ import annotations

import json
import math
import struct
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True).reshape(self.value.shape)
        else:
            self.grad += g

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"


def Parameter(value, name: str | None = None) -> Tensor:
    return Tensor(value, requires_grad=True, name=name)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Tape:
    """Records primitives in evaluation order (which is a topological order).

    ``Tape(record=False)`` evaluates without recording anything (inference).
    """

    def __init__(self, record: bool = True):
        self.record = record
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable[[np.ndarray], None]]] = []

    def __len__(self) -> int:
        return len(self.records)

    def _emit(self, value, parents: Sequence[Tensor], backward) -> Tensor:
        out = Tensor(value, requires_grad=self.record and any(p.requires_grad for p in parents))
        if out.requires_grad:
            self.records.append((out, tuple(parents), backward))
        return out

    @staticmethod
    def const(value) -> Tensor:
        return Tensor(value)

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

        def back(g):
            if a.requires_grad:
                a._accumulate(g @ b.value.T)
            if b.requires_grad:
                b._accumulate(a.value.T @ g)

        return self._emit(a.value @ b.value, (a, b), back)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            value = a.value + b.value
        except ValueError:
            raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

        def back(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))

        return self._emit(value, (a, b), back)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            value = a.value - b.value
        except ValueError:
            raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}") from None

        def back(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(-_unbroadcast(g, b.shape))

        return self._emit(value, (a, b), back)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise product with numpy broadcasting."""
        try:
            value = a.value * b.value
        except ValueError:
            raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

        def back(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.value, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.value, b.shape))

        return self._emit(value, (a, b), back)

    def scale(self, a: Tensor, c: float) -> Tensor:
        def back(g):
            a._accumulate(g * c)

        return self._emit(a.value * c, (a,), back)

    def sigmoid(self, a: Tensor) -> Tensor:
        s = _stable_sigmoid(a.value)

        def back(g):
            a._accumulate(g * s * (1.0 - s))

        return self._emit(s, (a,), back)

    def tanh(self, a: Tensor) -> Tensor:
        t = np.tanh(a.value)

        def back(g):
            a._accumulate(g * (1.0 - t * t))

        return self._emit(t, (a,), back)

    def softmax(self, a: Tensor) -> Tensor:
        """Softmax over the last axis."""
        p = _softmax_rows(a.value)

        def back(g):
            a._accumulate(p * (g - (g * p).sum(axis=-1, keepdims=True)))

        return self._emit(p, (a,), back)

    def log_softmax(self, a: Tensor) -> Tensor:
        shifted = a.value - a.value.max(axis=-1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        out = shifted - logz
        p = np.exp(out)

        def back(g):
            a._accumulate(g - p * g.sum(axis=-1, keepdims=True))

        return self._emit(out, (a,), back)

    def inner(self, a: Tensor, b: Tensor) -> Tensor:
        """Row-wise inner products: ``a @ b.T`` for matrices, a scalar for vectors."""
        if a.value.ndim == 1 and b.value.ndim == 1:
            if a.shape != b.shape:
                raise ShapeError(f"inner: incompatible shapes {a.shape} and {b.shape}")

            def back_vec(g):
                if a.requires_grad:
                    a._accumulate(g * b.value)
                if b.requires_grad:
                    b._accumulate(g * a.value)

            return self._emit(np.dot(a.value, b.value), (a, b), back_vec)
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[1]:
            raise ShapeError(f"inner: incompatible shapes {a.shape} and {b.shape}")

        def back(g):
            if a.requires_grad:
                a._accumulate(g @ b.value)
            if b.requires_grad:
                b._accumulate(g.T @ a.value)

        return self._emit(a.value @ b.value.T, (a, b), back)

    def concat(self, parts: Sequence[Tensor], axis: int = -1) -> Tensor:
        try:
            value = np.concatenate([p.value for p in parts], axis=axis)
        except ValueError:
            shapes = [p.shape for p in parts]
            raise ShapeError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
        bounds = np.cumsum([p.value.shape[axis] for p in parts])[:-1]

        def back(g):
            for p, piece in zip(parts, np.split(g, bounds, axis=axis)):
                if p.requires_grad:
                    p._accumulate(piece)

        return self._emit(value, tuple(parts), back)

    def mean(self, a: Tensor, axis: int | None = None) -> Tensor:
        value = a.value.mean(axis=axis)
        count = a.value.size if axis is None else a.value.shape[axis]

        def back(g):
            g = g if axis is None else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g / count, a.shape))

        return self._emit(value, (a,), back)

    def sum(self, a: Tensor, axis: int | None = None) -> Tensor:
        value = a.value.sum(axis=axis)

        def back(g):
            g = g if axis is None else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape))

        return self._emit(value, (a,), back)

    def rows(self, a: Tensor, index) -> Tensor:
        """Gather rows (embedding lookup); repeated indices accumulate."""
        index = np.asarray(index, dtype=np.int64)
        value = a.value[index]

        def back(g):
            full = np.zeros_like(a.value)
            np.add.at(full, index, g)
            a._accumulate(full)

        return self._emit(value, (a,), back)

    def cols(self, a: Tensor, start: int, stop: int) -> Tensor:
        def back(g):
            full = np.zeros_like(a.value)
            full[..., start:stop] = g
            a._accumulate(full)

        return self._emit(a.value[..., start:stop], (a,), back)

    def reshape(self, a: Tensor, shape: tuple[int, ...]) -> Tensor:
        def back(g):
            a._accumulate(g.reshape(a.shape))

        return self._emit(a.value.reshape(shape), (a,), back)

    def pick(self, a: Tensor, index) -> Tensor:
        """Fancy-index ``a[index]`` with gradient scattered back."""
        value = a.value[index]

        def back(g):
            full = np.zeros_like(a.value)
            np.add.at(full, index, g)
            a._accumulate(full)

        return self._emit(value, (a,), back)

    def custom(self, value, parents: Sequence[Tensor], backward) -> Tensor:
        """Register an op whose backward maps the output grad to one grad per parent."""

        def back(g):
            for p, pg in zip(parents, backward(g)):
                if p.requires_grad and pg is not None:
                    p._accumulate(pg)

        return self._emit(value, tuple(parents), back)

    # -- reverse sweep -------------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        if loss.value.size != 1:
            raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for out, _parents, back in reversed(self.records):
            if out.grad is not None:
                back(out.grad)
                out.grad = None
        self.records.clear()


def dropout(tape: Tape, t: Tensor, rate: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity in eval mode or when ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return t
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(t.shape) >= rate) / (1.0 - rate)
    return tape.mul(t, Tensor(mask))


class Adam:
    """Adam with bias correction; the defaults are the usual published ones."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        if all(p.grad is None for p in self.params):
            raise ValueError("adam_step called with no gradients populated")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None


def global_grad_norm(params: Iterable[Tensor]) -> float:
    return math.sqrt(sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None))


def clip_global_norm(params: Sequence[Tensor], max_norm: float = 1.0) -> float:
    """Rescale all grads so their joint L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


def grad_check(f: Callable[[Tape], Tensor], params: Sequence[Tensor], eps: float = 1e-5,
               max_coords: int = 200, seed: int = 0, per_tensor: bool = False):
    """Compare reverse-mode gradients of ``f`` against central differences.

    ``f`` builds its loss on the tape it is given and must be deterministic.
    The relative error of a coordinate is
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``; the max over
    sampled coordinates is returned (a dict per tensor name if ``per_tensor``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    tape = Tape()
    loss = f(tape)
    tape.backward(loss)
    analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for k, (p, ga) in enumerate(zip(params, analytic)):
        flat = p.value.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else np.sort(rng.choice(n, max_coords, replace=False))
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = float(f(Tape(record=False)).value)
            flat[c] = orig - eps
            down = float(f(Tape(record=False)).value)
            flat[c] = orig
            num = (up - down) / (2 * eps)
            a = float(ga.reshape(-1)[c])
            worst = max(worst, abs(a - num) / max(1e-8, abs(a) + abs(num)))
        errors[p.name or f"param{k}"] = worst
    if per_tensor:
        return errors
    return max(errors.values(), default=0.0)


# -- checkpoint container ---------------------------------------------------

MAGIC = b"DHGCKPT\x00"
FORMAT_VERSION = 1


def save_container(path, params: dict[str, np.ndarray], meta: dict) -> None:
    """Write named float64 arrays plus JSON metadata; output is byte-deterministic."""
    entries = []
    offset = 0
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = json.dumps({"version": FORMAT_VERSION, "params": entries, "meta": meta},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_container(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    version, hlen = struct.unpack_from("<II", blob, pos)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    header = json.loads(blob[pos: pos + hlen].decode("utf-8"))
    data = blob[pos + hlen:]
    params = {}
    for e in header["params"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=e["offset"])
        params[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return params, header["meta"]
