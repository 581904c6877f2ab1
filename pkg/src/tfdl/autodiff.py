"""Array-valued automatic differentiation on float64 numpy arrays.

Two evaluation modes share one set of primitives:

* ``Dual`` — forward mode. Carries (primal, tangent) pairs and propagates
  exact directional derivatives through every operation.
* ``Var``  — reverse mode. Records a tape of parent links and vector-Jacobian
  products; ``backward()`` accumulates gradients by reverse topological order.

Plain ndarrays mix freely with either type and are treated as constants,
which is how stop-gradient and frozen-module semantics are expressed: a
branch evaluated on raw arrays simply never enters the tape.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual", "Var", "sin", "cos", "exp", "log", "sqrt", "tanh", "relu",
    "silu", "softmax", "vsum", "vmean", "reshape", "swap_last", "take_rows",
    "cat", "primal",
]


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    nd = len(shape)
    while g.ndim > nd:
        g = g.sum(axis=0)
    axes = tuple(i for i in range(nd) if shape[i] == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _swap(x):
    return np.swapaxes(x, -1, -2)


def _sigmoid(x):
    # tanh form avoids overflow warnings at large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(z, axis):
    m = z - z.max(axis=axis, keepdims=True)
    e = np.exp(m)
    return e / e.sum(axis=axis, keepdims=True)


class Dual:
    """Forward-mode dual array: primal ``p`` and tangent ``t`` of equal shape."""

    __slots__ = ("p", "t")
    __array_ufunc__ = None  # keep numpy from absorbing us in mixed expressions

    def __init__(self, primal, tangent=None):
        self.p = np.asarray(primal, dtype=np.float64)
        if tangent is None:
            self.t = np.zeros_like(self.p)
        else:
            t = np.asarray(tangent, dtype=np.float64)
            self.t = np.broadcast_to(t, self.p.shape) if t.shape != self.p.shape else t

    # -- arithmetic --------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.p + o.p, self.t + o.t)
        return Dual(self.p + o, self.t)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.p - o.p, self.t - o.t)
        return Dual(self.p - o, self.t)

    def __rsub__(self, o):
        return Dual(o - self.p, -self.t)

    def __neg__(self):
        return Dual(-self.p, -self.t)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.p * o.p, self.t * o.p + self.p * o.t)
        return Dual(self.p * o, self.t * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            inv = 1.0 / o.p
            return Dual(self.p * inv, (self.t - self.p * inv * o.t) * inv)
        return Dual(self.p / o, self.t / o)

    def __rtruediv__(self, o):
        inv = 1.0 / self.p
        return Dual(o * inv, -o * inv * inv * self.t)

    def __pow__(self, k):
        return Dual(self.p ** k, k * self.p ** (k - 1.0) * self.t)

    def __matmul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.p @ o.p, self.t @ o.p + self.p @ o.t)
        return Dual(self.p @ o, self.t @ o)

    def __rmatmul__(self, o):
        return Dual(o @ self.p, o @ self.t)

    # -- elementwise -------------------------------------------------------
    def sin(self):
        return Dual(np.sin(self.p), np.cos(self.p) * self.t)

    def cos(self):
        return Dual(np.cos(self.p), -np.sin(self.p) * self.t)

    def exp(self):
        e = np.exp(self.p)
        return Dual(e, e * self.t)

    def log(self):
        return Dual(np.log(self.p), self.t / self.p)

    def sqrt(self):
        r = np.sqrt(self.p)
        return Dual(r, 0.5 * self.t / r)

    def tanh(self):
        y = np.tanh(self.p)
        return Dual(y, (1.0 - y * y) * self.t)

    def relu(self):
        m = self.p > 0
        return Dual(np.where(m, self.p, 0.0), np.where(m, self.t, 0.0))

    def silu(self):
        s = _sigmoid(self.p)
        return Dual(self.p * s, s * (1.0 + self.p * (1.0 - s)) * self.t)

    def softmax(self, axis=-1):
        s = _softmax(self.p, axis)
        st = s * self.t
        return Dual(s, st - s * st.sum(axis=axis, keepdims=True))

    # -- shape -------------------------------------------------------------
    def reshape(self, shape):
        return Dual(self.p.reshape(shape), np.ascontiguousarray(self.t).reshape(shape))

    def swap_last(self):
        return Dual(_swap(self.p), _swap(self.t))

    def take_rows(self, idx):
        return Dual(self.p[idx], self.t[idx])

    def sum(self, axis=None, keepdims=False):
        return Dual(self.p.sum(axis=axis, keepdims=keepdims),
                    np.ascontiguousarray(self.t).sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.p.mean(axis=axis, keepdims=keepdims),
                    np.ascontiguousarray(self.t).mean(axis=axis, keepdims=keepdims))


class Var:
    """Reverse-mode tape node holding value ``v`` and accumulated ``grad``."""

    __slots__ = ("v", "grad", "_parents", "_vjp")
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None):
        self.v = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    # -- arithmetic --------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Var):
            sa, sb = self.v.shape, o.v.shape
            return Var(self.v + o.v, (self, o),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))
        out = self.v + o
        sa = self.v.shape
        return Var(out, (self,), lambda g: (_unbroadcast(g, sa),))

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Var):
            sa, sb = self.v.shape, o.v.shape
            return Var(self.v - o.v, (self, o),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))
        sa = self.v.shape
        return Var(self.v - o, (self,), lambda g: (_unbroadcast(g, sa),))

    def __rsub__(self, o):
        sa = self.v.shape
        return Var(o - self.v, (self,), lambda g: (_unbroadcast(-g, sa),))

    def __neg__(self):
        return Var(-self.v, (self,), lambda g: (-g,))

    def __mul__(self, o):
        if isinstance(o, Var):
            a, b = self.v, o.v
            return Var(a * b, (self, o),
                       lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)))
        a = self.v
        return Var(a * o, (self,), lambda g: (_unbroadcast(g * o, a.shape),))

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Var):
            a, b = self.v, o.v
            return Var(a / b, (self, o),
                       lambda g: (_unbroadcast(g / b, a.shape),
                                  _unbroadcast(-g * a / (b * b), b.shape)))
        a = self.v
        return Var(a / o, (self,), lambda g: (_unbroadcast(g / o, a.shape),))

    def __rtruediv__(self, o):
        a = self.v
        return Var(o / a, (self,), lambda g: (_unbroadcast(-g * o / (a * a), a.shape),))

    def __pow__(self, k):
        a = self.v
        return Var(a ** k, (self,), lambda g: (g * k * a ** (k - 1.0),))

    def __matmul__(self, o):
        if isinstance(o, Var):
            a, b = self.v, o.v
            return Var(a @ b, (self, o),
                       lambda g: (_unbroadcast(g @ _swap(b), a.shape),
                                  _unbroadcast(_swap(a) @ g, b.shape)))
        a = self.v
        return Var(a @ o, (self,), lambda g: (_unbroadcast(g @ _swap(o), a.shape),))

    def __rmatmul__(self, o):
        a = self.v
        return Var(o @ a, (self,), lambda g: (_unbroadcast(_swap(o) @ g, a.shape),))

    # -- elementwise -------------------------------------------------------
    def sin(self):
        a = self.v
        return Var(np.sin(a), (self,), lambda g: (g * np.cos(a),))

    def cos(self):
        a = self.v
        return Var(np.cos(a), (self,), lambda g: (-g * np.sin(a),))

    def exp(self):
        e = np.exp(self.v)
        return Var(e, (self,), lambda g: (g * e,))

    def log(self):
        a = self.v
        return Var(np.log(a), (self,), lambda g: (g / a,))

    def sqrt(self):
        r = np.sqrt(self.v)
        return Var(r, (self,), lambda g: (0.5 * g / r,))

    def tanh(self):
        y = np.tanh(self.v)
        return Var(y, (self,), lambda g: (g * (1.0 - y * y),))

    def relu(self):
        m = self.v > 0
        return Var(np.where(m, self.v, 0.0), (self,), lambda g: (np.where(m, g, 0.0),))

    def silu(self):
        a = self.v
        s = _sigmoid(a)
        return Var(a * s, (self,), lambda g: (g * s * (1.0 + a * (1.0 - s)),))

    def softmax(self, axis=-1):
        s = _softmax(self.v, axis)

        def vjp(g):
            sg = s * g
            return (sg - s * sg.sum(axis=axis, keepdims=True),)

        return Var(s, (self,), vjp)

    # -- shape -------------------------------------------------------------
    def reshape(self, shape):
        orig = self.v.shape
        return Var(self.v.reshape(shape), (self,),
                   lambda g: (g.reshape(orig),))

    def swap_last(self):
        return Var(_swap(self.v), (self,), lambda g: (_swap(g),))

    def take_rows(self, idx):
        shape = self.v.shape

        def vjp(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        return Var(self.v[idx], (self,), vjp)

    def sum(self, axis=None, keepdims=False):
        shape = self.v.shape
        out = self.v.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Var(out, (self,), vjp)

    def mean(self, axis=None, keepdims=False):
        shape = self.v.shape
        n = self.v.size if axis is None else np.prod([shape[a] for a in np.atleast_1d(axis)])
        out = self.v.mean(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / n, shape),)

        return Var(out, (self,), vjp)

    # -- reverse pass ------------------------------------------------------
    def backward(self, seed=None):
        """Accumulate gradients of this (scalar) node into the tape."""
        if seed is None:
            if self.v.size != 1:
                raise ValueError("backward() without seed requires a scalar node")
            seed = np.ones_like(self.v)
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for p, g in zip(node._parents, node._vjp(node.grad)):
                if g is None:
                    continue
                p.grad = g if p.grad is None else p.grad + g


# -- generic dispatch (ndarray constants pass through untouched) ------------

def primal(x):
    """Underlying primal value of any of the three array kinds."""
    if isinstance(x, Dual):
        return x.p
    if isinstance(x, Var):
        return x.v
    return np.asarray(x)


def _dispatch(x, name, *args, **kw):
    if isinstance(x, (Dual, Var)):
        return getattr(x, name)(*args, **kw)
    return getattr(np, name)(x, *args, **kw)


def sin(x):
    return _dispatch(x, "sin")


def cos(x):
    return _dispatch(x, "cos")


def exp(x):
    return _dispatch(x, "exp")


def log(x):
    return _dispatch(x, "log")


def sqrt(x):
    return _dispatch(x, "sqrt")


def tanh(x):
    return _dispatch(x, "tanh")


def relu(x):
    if isinstance(x, (Dual, Var)):
        return x.relu()
    return np.maximum(x, 0.0)


def silu(x):
    if isinstance(x, (Dual, Var)):
        return x.silu()
    return x * _sigmoid(x)


def softmax(x, axis=-1):
    if isinstance(x, (Dual, Var)):
        return x.softmax(axis=axis)
    return _softmax(x, axis)


def vsum(x, axis=None, keepdims=False):
    if isinstance(x, (Dual, Var)):
        return x.sum(axis=axis, keepdims=keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def vmean(x, axis=None, keepdims=False):
    if isinstance(x, (Dual, Var)):
        return x.mean(axis=axis, keepdims=keepdims)
    return np.mean(x, axis=axis, keepdims=keepdims)


def reshape(x, shape):
    if isinstance(x, (Dual, Var)):
        return x.reshape(shape)
    return np.reshape(x, shape)


def swap_last(x):
    if isinstance(x, (Dual, Var)):
        return x.swap_last()
    return _swap(x)


def take_rows(table, idx):
    if isinstance(table, (Dual, Var)):
        return table.take_rows(idx)
    return table[idx]


def cat(xs, axis=-1):
    if any(isinstance(x, Var) for x in xs):
        vs = [x if isinstance(x, Var) else Var(np.asarray(x)) for x in xs]
        vals = [v.v for v in vs]
        sizes = [v.shape[axis] for v in vals]
        splits = np.cumsum(sizes)[:-1]

        def vjp(g):
            return tuple(np.split(g, splits, axis=axis))

        return Var(np.concatenate(vals, axis=axis), tuple(vs), vjp)
    if any(isinstance(x, Dual) for x in xs):
        ds = [x if isinstance(x, Dual) else Dual(np.asarray(x)) for x in xs]
        return Dual(np.concatenate([d.p for d in ds], axis=axis),
                    np.concatenate([np.broadcast_to(d.t, d.p.shape) for d in ds], axis=axis))
    return np.concatenate(xs, axis=axis)
