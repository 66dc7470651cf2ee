"""Dense 2-D tensors with reverse-mode automatic differentiation.

Every differentiable operation used by the model lives here. Tensors wrap a
2-D float64 numpy array; operations record their inputs and a gradient
closure, and ``backward`` on a scalar loss accumulates gradients in reverse
topological order. Repeated backward calls accumulate; callers that step an
optimizer reset gradients between steps.
"""

from __future__ import annotations

import warnings

import numpy as np

LOG_FLOOR = 1e-12

_warned_zero_norm = False


class ShapeError(ValueError):
    """Raised when an operation receives incompatible tensor shapes."""


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D; got array of shape {arr.shape}")
    return arr


class Tensor:
    """A rows x cols array node in a computation graph.

    ``requires_grad`` leaves collect gradients; results of operations on
    them propagate the flag. Constants (requires_grad=False) never receive
    a gradient and keep ``grad`` as None.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, values, requires_grad: bool = False):
        self.values = _as_matrix(values)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable requires_grad tensor.

        Only defined for scalar (1x1) tensors. Gradients add onto whatever is
        already stored, so call ``zero_grad`` on parameters between steps.
        """
        if self.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _toposort(self)
        local: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in order:
            g = local.pop(id(node), None)
            if g is None:
                continue
            _accumulate(node, g)
            if node._grad_fn is None:
                continue
            for parent, pgrad in zip(node._parents, node._grad_fn(g)):
                if pgrad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in local:
                    local[key] = local[key] + pgrad
                else:
                    local[key] = pgrad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar over the module-level primitives.
    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def _toposort(root: Tensor) -> list[Tensor]:
    """Reverse topological order (root first), iterative DFS."""
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
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))
    order.reverse()
    return order


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _result(values: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    out = Tensor(values, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _check(cond: bool, op: str, *shapes) -> None:
    if not cond:
        raise ShapeError(f"{op}: incompatible shapes {' and '.join(str(s) for s in shapes)}")


def _reduce_to(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    return grad.sum(axis=0, keepdims=True)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check(a.cols == b.rows, "matmul", a.shape, b.shape)
    av, bv = a.values, b.values

    def grad_fn(g):
        return g @ bv.T, av.T @ g

    return _result(av @ bv, (a, b), grad_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; a (1, C) row operand broadcasts over rows."""
    ok = a.shape == b.shape or (
        a.cols == b.cols and 1 in (a.rows, b.rows)
    )
    _check(ok, "add", a.shape, b.shape)

    def grad_fn(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _result(a.values + b.values, (a, b), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product with the same row broadcasting as add."""
    ok = a.shape == b.shape or (
        a.cols == b.cols and 1 in (a.rows, b.rows)
    )
    _check(ok, "mul", a.shape, b.shape)
    av, bv = a.values, b.values

    def grad_fn(g):
        return _reduce_to(g * bv, a.shape), _reduce_to(g * av, b.shape)

    return _result(av * bv, (a, b), grad_fn)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, "div", a.shape, b.shape)
    av, bv = a.values, b.values

    def grad_fn(g):
        return g / bv, -g * av / (bv * bv)

    return _result(av / bv, (a, b), grad_fn)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def grad_fn(g):
        return (g * c,)

    return _result(a.values * c, (a,), grad_fn)


def transpose(a: Tensor) -> Tensor:
    def grad_fn(g):
        return (g.T,)

    return _result(a.values.T, (a,), grad_fn)


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_cols: empty input list")
    rows = parts[0].rows
    _check(all(p.rows == rows for p in parts), "concat_cols", *[p.shape for p in parts])
    widths = [p.cols for p in parts]

    def grad_fn(g):
        grads = []
        start = 0
        for w in widths:
            grads.append(g[:, start : start + w])
            start += w
        return grads

    return _result(np.concatenate([p.values for p in parts], axis=1), tuple(parts), grad_fn)


def relu(a: Tensor) -> Tensor:
    pos = a.values > 0

    def grad_fn(g):
        return (g * pos,)

    return _result(np.maximum(a.values, 0.0), (a,), grad_fn)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    factor = np.where(a.values > 0, 1.0, slope)

    def grad_fn(g):
        return (g * factor,)

    return _result(a.values * factor, (a,), grad_fn)


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.values)

    def grad_fn(g):
        return (g * y,)

    return _result(y, (a,), grad_fn)


def log(a: Tensor) -> Tensor:
    """Natural log, clamped below at log(LOG_FLOOR); flat gradient in the clamp."""
    clamped = a.values > LOG_FLOOR
    safe = np.maximum(a.values, LOG_FLOOR)

    def grad_fn(g):
        return (g * clamped / safe,)

    return _result(np.log(safe), (a,), grad_fn)


def row_softmax(a: Tensor) -> Tensor:
    """Softmax along each row (over columns)."""
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _result(y, (a,), grad_fn)


def col_softmax(a: Tensor) -> Tensor:
    """Softmax along each column (over rows)."""
    shifted = a.values - a.values.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=0, keepdims=True)

    def grad_fn(g):
        return (y * (g - (g * y).sum(axis=0, keepdims=True)),)

    return _result(y, (a,), grad_fn)


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalization with learnable per-feature gain and shift.

    Variance is stabilized with eps, so zero-variance rows are safe.
    """
    _check(x.rows >= 1 and x.cols >= 1, "layer_norm", x.shape)
    _check(gain.shape == (1, x.cols) and shift.shape == (1, x.cols),
           "layer_norm", x.shape, gain.shape, shift.shape)
    xv = x.values
    mean = xv.mean(axis=1, keepdims=True)
    var = xv.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    normed = (xv - mean) * inv
    gv = gain.values

    def grad_fn(g):
        gn = g * gv
        gx = inv * (
            gn
            - gn.mean(axis=1, keepdims=True)
            - normed * (gn * normed).mean(axis=1, keepdims=True)
        )
        ggain = (g * normed).sum(axis=0, keepdims=True)
        gshift = g.sum(axis=0, keepdims=True)
        return gx, ggain, gshift

    return _result(normed * gv + shift.values, (x, gain, shift), grad_fn)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-rate) so eval is the identity.

    Eval mode returns the input tensor unchanged and draws no randomness.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def grad_fn(g):
        return (g * keep,)

    return _result(x.values * keep, (x,), grad_fn)


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosine similarity between rows of a (N x d) and b (M x d).

    A zero-norm row has all its similarities defined as 0 (warned once per
    process) and contributes no gradient.
    """
    global _warned_zero_norm
    _check(a.cols == b.cols, "cosine_rows", a.shape, b.shape)
    na = np.linalg.norm(a.values, axis=1, keepdims=True)
    nb = np.linalg.norm(b.values, axis=1, keepdims=True)
    if (not _warned_zero_norm) and (np.any(na == 0) or np.any(nb == 0)):
        warnings.warn("cosine_rows: zero-norm row, its similarities are 0", RuntimeWarning)
        _warned_zero_norm = True
    inv_a = np.where(na > 0, 1.0 / np.where(na > 0, na, 1.0), 0.0)
    inv_b = np.where(nb > 0, 1.0 / np.where(nb > 0, nb, 1.0), 0.0)
    an = a.values * inv_a
    bn = b.values * inv_b
    sims = an @ bn.T

    def grad_fn(g):
        ga = (g @ bn - (g * sims).sum(axis=1, keepdims=True) * an) * inv_a
        gb = (g.T @ an - (g * sims).sum(axis=0).reshape(-1, 1) * bn) * inv_b
        return ga, gb

    return _result(sims, (a, b), grad_fn)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape

    def grad_fn(g):
        return (np.full(shape, g[0, 0]),)

    return _result(np.array([[a.values.sum()]]), (a,), grad_fn)


def mean_all(a: Tensor) -> Tensor:
    shape = a.shape
    n = a.values.size

    def grad_fn(g):
        return (np.full(shape, g[0, 0] / n),)

    return _result(np.array([[a.values.mean()]]), (a,), grad_fn)


def row_sum(a: Tensor) -> Tensor:
    """Sum over columns, N x C -> N x 1."""
    cols = a.cols

    def grad_fn(g):
        return (np.repeat(g, cols, axis=1),)

    return _result(a.values.sum(axis=1, keepdims=True), (a,), grad_fn)


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def uniform_parameter(fan_in: int, fan_out: int, rng: np.random.Generator) -> Tensor:
    """Trainable fan_in x fan_out matrix, uniform in +-1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(fan_in)
    return parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)))


def finite_difference_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar-valued f at x, entry by entry."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        hi = f(x)
        x[idx] = orig - h
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * h)
        it.iternext()
    return grad
