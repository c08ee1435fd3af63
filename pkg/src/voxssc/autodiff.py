"""Reverse-mode automatic differentiation over numpy arrays.

A `Tape` records every operation as it is executed; `backward` walks the
records in reverse and accumulates vector-Jacobian products.  Only the ops
this pipeline needs are provided, all in 64-bit arithmetic.  Scalars used
inside formulas (e.g. `1 - z`) and plain numpy arrays are treated as
constants and captured by the backward closures rather than recorded.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolationError


class Var:
    """One recorded value on a tape."""

    __slots__ = ("value", "grad", "parents", "vjp", "param", "tape")

    def __init__(self, value, tape, parents=(), vjp=None, param=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents: tuple["Var", ...] = parents
        self.vjp: Callable | None = vjp
        self.param: Parameter | None = param
        self.tape: Tape = tape
        tape._nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    # -- operator sugar; non-Var operands are constants -------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return add(self, mul_const(other, -1.0))
        return add_const(self, -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        return add_const(mul_const(self, -1.0), other)

    def __mul__(self, other):
        if isinstance(other, Var):
            return mul(self, other)
        return mul_const(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul_const(self, -1.0)


class Parameter:
    """A named trainable array with a same-shape gradient slot."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def leaf(self, tape: "Tape") -> Var:
        return Var(self.value, tape, param=self)


class ParameterStore:
    """Insertion-ordered collection of parameters."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise ContractViolationError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def names(self) -> list[str]:
        return list(self._params)

    def num_values(self) -> int:
        return sum(p.value.size for p in self)

    def zero_grad(self):
        for p in self:
            p.grad[...] = 0.0

    def state(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self}

    def load_state(self, state: dict[str, np.ndarray]):
        for p in self:
            src = state[p.name]
            if src.shape != p.value.shape:
                raise ContractViolationError(
                    f"checkpoint shape {src.shape} != parameter {p.name} shape {p.value.shape}"
                )
            p.value[...] = src


class Tape:
    """Topologically ordered record of operations."""

    def __init__(self):
        self._nodes: list[Var] = []

    def const(self, value) -> Var:
        return Var(value, self)

    def backward(self, loss: Var):
        backward(self, loss)


def backward(tape: Tape, loss: Var) -> None:
    """Populate parameter gradients for every leaf reachable from `loss`.

    Unreachable parameters keep whatever gradient they already hold
    (zero after `zero_grad`).  Raises on a non-scalar loss node.
    """
    if loss.tape is not tape:
        raise ContractViolationError("loss node was not recorded on this tape")
    if loss.value.ndim != 0:
        raise ContractViolationError(f"loss must be scalar, got shape {loss.value.shape}")
    for node in tape._nodes:
        node.grad = None
    loss.grad = np.ones(())
    for node in reversed(tape._nodes):
        if node.grad is None:
            continue
        if node.param is not None:
            node.param.grad += node.grad
        if node.vjp is None:
            continue
        contribs = node.vjp(node.grad)
        for parent, contrib in zip(node.parents, contribs):
            if contrib is None:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad += contrib


def sgd_step(params: ParameterStore, lr: float) -> None:
    """In-place p <- p - lr * grad, then zero the gradients."""
    if lr <= 0:
        raise ContractViolationError("learning rate must be positive")
    for p in params:
        p.value -= lr * p.grad
        p.grad[...] = 0.0


def poly_lr(lr0: float, step: int, total_steps: int, power: float = 0.9) -> float:
    """Polynomial decay schedule: lr0 * (1 - step/total)^power."""
    frac = min(max(step / max(total_steps, 1), 0.0), 1.0)
    return lr0 * (1.0 - frac) ** power


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: Var, b) -> Var:
    if not isinstance(b, Var):
        return add_const(a, b)
    value = a.value + b.value
    return Var(
        value,
        a.tape,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def add_const(a: Var, c) -> Var:
    c = np.asarray(c, dtype=np.float64)
    return Var(a.value + c, a.tape, (a,), lambda g: (_unbroadcast(g, a.value.shape),))


def mul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return Var(
        av * bv,
        a.tape,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def mul_const(a: Var, c) -> Var:
    c = np.asarray(c, dtype=np.float64)
    return Var(a.value * c, a.tape, (a,), lambda g: (_unbroadcast(g * c, a.value.shape),))


def matmul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return Var(av @ bv, a.tape, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sigmoid(a: Var) -> Var:
    x = a.value
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return Var(s, a.tape, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Var) -> Var:
    t = np.tanh(a.value)
    return Var(t, a.tape, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a: Var) -> Var:
    e = np.exp(a.value)
    return Var(e, a.tape, (a,), lambda g: (g * e,))


def log(a: Var) -> Var:
    v = a.value
    return Var(np.log(v), a.tape, (a,), lambda g: (g / v,))


def square(a: Var) -> Var:
    v = a.value
    return Var(v * v, a.tape, (a,), lambda g: (2.0 * g * v,))


def vsum(a: Var, axis=None, keepdims: bool = False) -> Var:
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.value.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.value.shape).copy(),)

    return Var(value, a.tape, (a,), vjp)


def vmean(a: Var, axis=None) -> Var:
    if axis is None:
        n = a.value.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.value.shape[ax] for ax in axis]))
    else:
        n = a.value.shape[axis]
    return mul_const(vsum(a, axis=axis), 1.0 / n)


def reshape(a: Var, shape) -> Var:
    old = a.value.shape
    return Var(a.value.reshape(shape), a.tape, (a,), lambda g: (g.reshape(old),))


def concat(parts: Sequence[Var], axis: int = -1) -> Var:
    value = np.concatenate([p.value for p in parts], axis=axis)
    sizes = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    return Var(
        value,
        parts[0].tape,
        tuple(parts),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def gather_rows(a: Var, idx: np.ndarray) -> Var:
    """Select rows of a 2D (or 1D) array; duplicates allowed."""
    idx = np.asarray(idx, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return Var(a.value[idx], a.tape, (a,), vjp)


def take_per_row(a: Var, col_idx: np.ndarray) -> Var:
    """a[i, col_idx[i]] for each row i of a 2D array."""
    n = a.value.shape[0]
    rows = np.arange(n)
    col_idx = np.asarray(col_idx, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(a.value)
        out[rows, col_idx] = g
        return (out,)

    return Var(a.value[rows, col_idx], a.tape, (a,), vjp)


def scatter_rows_set(base: Var, idx: np.ndarray, rows: Var) -> Var:
    """Copy of `base` with rows at `idx` replaced by `rows` (idx unique).

    Rows not in `idx` keep their exact bit patterns from `base`.
    """
    idx = np.asarray(idx, dtype=np.int64)
    value = base.value.copy()
    value[idx] = rows.value

    def vjp(g):
        g_base = g.copy()
        g_base[idx] = 0.0
        return (g_base, g[idx])

    return Var(value, base.tape, (base, rows), vjp)


def logsumexp_rows(a: Var) -> Var:
    """Row-wise log-sum-exp of a 2D array, numerically stabilized."""
    m = a.value.max(axis=1, keepdims=True)  # constant shift; cancels in the gradient
    shifted = add_const(a, -m)
    return add_const(log(vsum(exp(shifted), axis=1)), m[:, 0])


def softmax_rows(a: Var) -> Var:
    m = a.value.max(axis=-1, keepdims=True)
    e = exp(add_const(a, -m))
    denom = vsum(e, axis=-1, keepdims=True)
    return mul(e, power_const(denom, -1.0))


def clip(a: Var, lo: float, hi: float) -> Var:
    """Clamp values; gradients are zero where the clamp is active."""
    inside = (a.value >= lo) & (a.value <= hi)
    return Var(np.clip(a.value, lo, hi), a.tape, (a,), lambda g: (g * inside,))


def take_channel(a: Var, c: int) -> Var:
    """Select one index of the last axis."""

    def vjp(g):
        out = np.zeros_like(a.value)
        out[..., c] = g
        return (out,)

    return Var(a.value[..., c], a.tape, (a,), vjp)


def power_const(a: Var, p: float) -> Var:
    v = a.value
    out = v**p
    return Var(out, a.tape, (a,), lambda g: (g * p * v ** (p - 1.0),))


def dropout(a: Var, rate: float, rng: np.random.Generator) -> Var:
    """Inverted dropout: kept units are scaled by 1/(1-rate)."""
    keep = (rng.random(a.value.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return mul_const(a, keep)
