"""Minimal reverse-mode autodiff on numpy arrays.

A Tensor wraps an ndarray plus an optional gradient; operations build a DAG
by remembering their parents and a closure that maps the upstream gradient to
parent gradients. Tensor.backward() runs the closures in reverse topological
order, accumulating additively. Ops that fuse a whole layer (softmax,
layer_norm, batch_norm, cross_entropy) carry closed-form backward rules so
the graph stays small and fast.

Only what the transformer needs is implemented; there is no broadcasting
matmul beyond stacked batches times shared 2-D weights, and no in-place ops.
"""

from __future__ import annotations

import numpy as np

from .errors import GraphCycle, LabelOutOfRange, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = tuple(parents) if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ShapeMismatch("backward() needs a scalar loss")
        order = _toposort(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _toposort(root):
    """Reverse topological order via iterative DFS; detects cycles defensively."""
    WHITE, GRAY, BLACK = 0, 1, 2
    state = {}
    order = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            state[id(node)] = BLACK
            order.append(node)
            continue
        mark = state.get(id(node), WHITE)
        if mark == BLACK:
            continue
        if mark == GRAY:
            raise GraphCycle("autodiff graph contains a cycle")
        state[id(node)] = GRAY
        stack.append((node, True))
        for parent in node._parents:
            if state.get(id(parent), WHITE) == WHITE:
                stack.append((parent, False))
            elif state.get(id(parent)) == GRAY:
                raise GraphCycle("autodiff graph contains a cycle")
    order.reverse()
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out_data, parents=(a, b), backward=backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return Tensor(out_data, parents=(a, b), backward=backward)


def scale(a, s: float):
    a = as_tensor(a)
    s = float(s)

    def backward(g):
        return (g * s,)

    return Tensor(a.data * s, parents=(a,), backward=backward)


def linear(x, W, b=None):
    """x @ W (+ b) where x is (..., m) and W is (m, k)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.data.shape[-1] != W.data.shape[0]:
        raise ShapeMismatch(f"linear: {x.data.shape} @ {W.data.shape}")
    out_data = x.data @ W.data
    if b is not None:
        b = as_tensor(b)
        out_data = out_data + b.data

    m, k = W.data.shape

    def backward(g):
        gx = g @ W.data.T
        gW = x.data.reshape(-1, m).T @ g.reshape(-1, k)
        if b is None:
            return gx, gW
        gb = g.reshape(-1, k).sum(axis=0)
        return gx, gW, gb

    parents = (x, W) if b is None else (x, W, b)
    return Tensor(out_data, parents=parents, backward=backward)


def bmm(a, b, transpose_b=False):
    """Stacked matmul with identical leading dims: (..., n, m) @ (..., m, k)."""
    a, b = as_tensor(a), as_tensor(b)
    bd = np.swapaxes(b.data, -1, -2) if transpose_b else b.data
    if a.data.shape[:-2] != b.data.shape[:-2] or a.data.shape[-1] != bd.shape[-2]:
        raise ShapeMismatch(f"bmm: {a.data.shape} @ {b.data.shape} (transpose_b={transpose_b})")
    out_data = a.data @ bd

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        if transpose_b:
            gb = np.swapaxes(gb, -1, -2)
        return ga, gb

    return Tensor(out_data, parents=(a, b), backward=backward)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape

    def backward(g):
        return (g.reshape(old),)

    return Tensor(a.data.reshape(shape), parents=(a,), backward=backward)


def transpose(a, axes):
    a = as_tensor(a)
    inverse = np.argsort(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return Tensor(a.data.transpose(axes), parents=(a,), backward=backward)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor(a.data * mask, parents=(a,), backward=backward)


def mean_over_axis(a, axis):
    a = as_tensor(a)
    n = a.data.shape[axis]
    out_data = a.data.mean(axis=axis)

    def backward(g):
        return (np.repeat(np.expand_dims(g / n, axis), n, axis=axis),)

    return Tensor(out_data, parents=(a,), backward=backward)


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return Tensor(y, parents=(a,), backward=backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalise the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        axes = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return Tensor(out_data, parents=(x, gamma, beta), backward=backward)


def batch_norm_train(x, gamma, beta, eps=1e-5):
    """Per-feature normalisation over every axis except the last.

    Returns (out, batch_mean, batch_var); the caller owns the running-stat
    update. Variance is the biased estimator, both here and in the stats
    handed back.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = tuple(range(x.data.ndim - 1))
    mean = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=axes)
        m2 = (dxhat * xhat).mean(axis=axes)
        gx = inv * (dxhat - m1 - xhat * m2)
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    out = Tensor(out_data, parents=(x, gamma, beta), backward=backward)
    return out, mean, var


def batch_norm_eval(x, gamma, beta, running_mean, running_var, eps=1e-5):
    """Fixed affine map using running statistics."""
    x = as_tensor(x)
    inv = 1.0 / np.sqrt(running_var + eps)
    shift = Tensor(-running_mean * inv)
    scale_const = Tensor(inv)
    xhat = add(mul(x, scale_const), shift)
    return add(mul(xhat, gamma), beta)


def dropout(x, p: float, rng: np.random.Generator):
    """Inverted dropout; scales kept activations by 1/(1-p) at train time."""
    x = as_tensor(x)
    if p <= 0.0:
        return x
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)

    def backward(g):
        return (g * mask,)

    return Tensor(x.data * mask, parents=(x,), backward=backward)


def cross_entropy(logits, labels):
    """Mean negative log-softmax at the label, with max-shift stability."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    n, k = logits.data.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"labels shape {labels.shape} for {n} rows")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logprobs = shifted - logsumexp
    loss = -logprobs[np.arange(n), labels].mean()

    def backward(g):
        probs = np.exp(logprobs)
        probs[np.arange(n), labels] -= 1.0
        return (g * probs / n,)

    return Tensor(loss, parents=(logits,), backward=backward)
