"""Expression graph behind ``AnalyticField``.

Leaves hold small sympy expressions; interior nodes record the arithmetic
applied to them. A node can be evaluated on any coordinate arrays (lattice
offsets are threaded through shift nodes) and differentiated exactly: each
node type carries its own partial rule, so composite fields never expand
into large symbolic expressions.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import sympy as sp

from .errors import DerivativeError, ShapeError

_MODULES = [
    {"sech": lambda z: 1.0 / np.cosh(z), "csch": lambda z: 1.0 / np.sinh(z)},
    "numpy",
]


class EvalContext:
    """Base coordinates for one evaluation plus a memo keyed by (node, offset)."""

    def __init__(self, lattice, continuous, shape):
        self.lattice = list(lattice)
        self.continuous = list(continuous)
        self.shape = tuple(shape)
        self.memo = {}


def _lift(a: np.ndarray, shape: tuple, target: tuple, base_ndim: int) -> np.ndarray:
    if shape == target or shape or not target:
        return a
    return a.reshape(a.shape[:base_ndim] + (1,) * len(target))


class Node:
    shape: tuple = ()

    @cached_property
    def deps(self) -> frozenset:
        raise NotImplementedError

    def eval(self, ctx: EvalContext, offset: tuple) -> np.ndarray:
        key = (id(self), offset)
        hit = ctx.memo.get(key)
        if hit is None:
            hit = ctx.memo[key] = self._eval(ctx, offset)
        return hit

    def _eval(self, ctx, offset):
        raise NotImplementedError

    @cached_property
    def _partials(self) -> dict:
        return {}

    def partial(self, name: str, index: int) -> "Node":
        if name not in self.deps:
            return zero(self.shape)
        out = self._partials.get(name)
        if out is None:
            out = self._partials[name] = self._partial(name, index)
        return out

    def _partial(self, name, index):
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def constant_value(self):
        return None


class Leaf(Node):
    def __init__(self, expr, symbols: tuple):
        if isinstance(expr, sp.MatrixBase):
            self.shape = tuple(expr.shape)
            expr = sp.ImmutableMatrix(expr)
        self.expr = expr
        self.symbols = symbols

    def entries(self):
        return list(self.expr) if self.shape else [self.expr]

    @cached_property
    def deps(self):
        return frozenset(s.name for s in self.expr.free_symbols)

    @cached_property
    def _const(self):
        if self.deps:
            return None
        vals = np.array([complex(e) for e in self.entries()])
        return vals.reshape(self.shape) if self.shape else vals[0]

    def constant_value(self):
        return self._const

    @property
    def is_zero(self) -> bool:
        return not self.deps and all(e == 0 for e in self.entries())

    @cached_property
    def _funcs(self):
        return [sp.lambdify(self.symbols, e, modules=_MODULES) for e in self.entries()]

    def _eval(self, ctx, offset):
        base = ctx.shape
        if self._const is not None:
            return np.broadcast_to(np.asarray(self._const, dtype=complex), base + self.shape)
        args = [lat + off for lat, off in zip(ctx.lattice, offset)] + ctx.continuous
        parts = [np.broadcast_to(np.asarray(f(*args), dtype=complex), base) for f in self._funcs]
        if not self.shape:
            return parts[0]
        return np.stack(parts, axis=-1).reshape(base + self.shape)

    def _partial(self, name, index):
        sym = next(s for s in self.symbols if s.name == name)
        out = sp.diff(self.expr, sym)
        if out.has(sp.Derivative):
            raise DerivativeError(f"no exact partial rule for {self.expr}")
        return Leaf(out, self.symbols)


def zero(shape: tuple) -> Leaf:
    return Leaf(sp.ImmutableMatrix.zeros(*shape) if shape else sp.Integer(0), ())


def constant(value, symbols=()) -> Leaf:
    return Leaf(value, symbols)


def _result_shape(op: str, sa: tuple, sb: tuple) -> tuple:
    if op in ("add", "sub"):
        if sa != sb:
            raise ShapeError(f"cannot {op} shapes {sa} and {sb}")
        return sa
    if op == "mul":
        if sa and sb and sa != sb:
            raise ShapeError(f"pointwise product of shapes {sa} and {sb}")
        return sa or sb
    if op == "matmul":
        if len(sa) != 2 or len(sb) != 2 or sa[1] != sb[0]:
            raise ShapeError(f"matrix product of shapes {sa} and {sb}")
        return (sa[0], sb[1])
    if op == "div":
        if sb:
            raise ShapeError("divisor must be scalar")
        return sa
    raise ShapeError(f"unknown operation {op!r}")


class Binary(Node):
    def __init__(self, op, a, b, shape):
        self.op, self.a, self.b, self.shape = op, a, b, shape

    @cached_property
    def deps(self):
        return self.a.deps | self.b.deps

    def _eval(self, ctx, offset):
        nb = len(ctx.shape)
        va = _lift(self.a.eval(ctx, offset), self.a.shape, self.shape, nb)
        vb = _lift(self.b.eval(ctx, offset), self.b.shape, self.shape, nb)
        if self.op == "add":
            return va + vb
        if self.op == "sub":
            return va - vb
        if self.op == "mul":
            return va * vb
        if self.op == "matmul":
            return va @ vb
        with np.errstate(all="ignore"):
            return va / vb

    def _partial(self, name, index):
        a, b = self.a, self.b
        da, db = a.partial(name, index), b.partial(name, index)
        if self.op in ("add", "sub"):
            return binary(self.op, da, db)
        if self.op in ("mul", "matmul"):
            return binary("add", binary(self.op, da, b), binary(self.op, a, db))
        num = binary("sub", binary("mul", da, b), binary("mul", a, db))
        return binary("div", num, binary("mul", b, b))


def binary(op: str, a: Node, b: Node) -> Node:
    shape = _result_shape(op, a.shape, b.shape)
    if op == "add":
        if a.is_zero:
            return b
        if b.is_zero:
            return a
    elif op == "sub":
        if a is b:
            return zero(shape)
        if b.is_zero:
            return a
        if a.is_zero:
            return unary("neg", b)
    elif op in ("mul", "matmul"):
        if a.is_zero or b.is_zero:
            return zero(shape)
    elif op == "div" and a.is_zero:
        return zero(shape)
    ca, cb = a.constant_value(), b.constant_value()
    if ca is not None and cb is not None:
        return constant(_fold(op, ca, cb, a.shape, b.shape, shape))
    return Binary(op, a, b, shape)


def _fold(op, ca, cb, sa, sb, shape):
    ca, cb = np.asarray(ca), np.asarray(cb)
    if op == "add":
        v = ca + cb
    elif op == "sub":
        v = ca - cb
    elif op == "mul":
        v = ca * cb
    elif op == "matmul":
        v = ca @ cb
    else:
        v = ca / cb
    return sp.ImmutableMatrix(v.tolist()) if shape else sp.sympify(complex(v))


_UNARY = {
    "neg": np.negative,
    "conj": np.conj,
    "abs": np.abs,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "log": np.log,
}


class Unary(Node):
    def __init__(self, kind, a, item=None):
        self.kind, self.a, self.item = kind, a, item
        self.shape = () if kind == "item" else a.shape

    @cached_property
    def deps(self):
        return self.a.deps

    def _eval(self, ctx, offset):
        v = self.a.eval(ctx, offset)
        if self.kind == "item":
            return v[(...,) + self.item]
        with np.errstate(all="ignore"):
            return _UNARY[self.kind](v)

    def _partial(self, name, index):
        a = self.a
        da = a.partial(name, index)
        k = self.kind
        if k in ("neg", "conj"):
            return unary(k, da)
        if k == "item":
            return unary("item", da, self.item)
        if k == "exp":
            return binary("mul", self, da)
        if k == "sin":
            return binary("mul", unary("cos", a), da)
        if k == "cos":
            return unary("neg", binary("mul", unary("sin", a), da))
        if k == "log":
            return binary("div", da, a)
        raise DerivativeError(f"no exact partial rule through '{k}'")


def unary(kind: str, a: Node, item=None) -> Node:
    if kind == "item" and not a.shape:
        raise ShapeError("scalar fields have no entries")
    if kind in ("exp", "sin", "cos", "log") and a.shape:
        raise ShapeError(f"'{kind}' applies to scalar fields")
    c = a.constant_value()
    if c is not None:
        if kind == "item":
            return constant(sp.sympify(complex(np.asarray(c)[item])))
        with np.errstate(all="raise"):
            v = _UNARY[kind](np.asarray(c, dtype=complex))
        return constant(sp.ImmutableMatrix(v.tolist()) if a.shape else sp.sympify(complex(v)))
    if kind == "neg" and isinstance(a, Unary) and a.kind == "neg":
        return a.a
    return Unary(kind, a, item)


class Shift(Node):
    def __init__(self, a, mu, steps, name):
        self.a, self.mu, self.steps, self.name = a, mu, steps, name
        self.shape = a.shape

    @cached_property
    def deps(self):
        return self.a.deps

    def _eval(self, ctx, offset):
        off = list(offset)
        off[self.mu] += self.steps
        return self.a.eval(ctx, tuple(off))

    def _partial(self, name, index):
        return shift(self.a.partial(name, index), self.mu, self.steps, self.name)


def shift(a: Node, mu: int, steps: int, name: str) -> Node:
    if name not in a.deps or steps == 0:
        return a
    if isinstance(a, Shift) and a.mu == mu:
        return shift(a.a, mu, a.steps + steps, name)
    return Shift(a, mu, steps, name)


class Stack(Node):
    """Matrix assembled from scalar nodes (row-major)."""

    def __init__(self, entries, nrows, ncols):
        self.entries, self.shape = list(entries), (nrows, ncols)

    @cached_property
    def deps(self):
        return frozenset().union(*(e.deps for e in self.entries))

    def _eval(self, ctx, offset):
        parts = [np.broadcast_to(e.eval(ctx, offset), ctx.shape) for e in self.entries]
        return np.stack(parts, axis=-1).reshape(ctx.shape + self.shape)

    def _partial(self, name, index):
        return stack([e.partial(name, index) for e in self.entries], *self.shape)

    def constant_value(self):
        vals = [e.constant_value() for e in self.entries]
        if any(v is None for v in vals):
            return None
        return np.array(vals, dtype=complex).reshape(self.shape)


def stack(entries, nrows, ncols) -> Node:
    node = Stack(entries, nrows, ncols)
    c = node.constant_value()
    if c is not None:
        return constant(sp.ImmutableMatrix(c.tolist()))
    return node


class VStack(Node):
    """Rows of equal width stacked into a matrix."""

    def __init__(self, rows):
        self.rows = list(rows)
        self.shape = (sum(r.shape[0] for r in self.rows), self.rows[0].shape[1])

    @cached_property
    def deps(self):
        return frozenset().union(*(r.deps for r in self.rows))

    def _eval(self, ctx, offset):
        parts = [np.broadcast_to(r.eval(ctx, offset), ctx.shape + r.shape) for r in self.rows]
        return np.concatenate(parts, axis=-2)

    def _partial(self, name, index):
        return vstack([r.partial(name, index) for r in self.rows])

    def constant_value(self):
        vals = [r.constant_value() for r in self.rows]
        if any(v is None for v in vals):
            return None
        return np.concatenate([np.asarray(v, dtype=complex) for v in vals], axis=0)


def vstack(rows) -> Node:
    if any(len(r.shape) != 2 or r.shape[1] != rows[0].shape[1] for r in rows):
        raise ShapeError("vstack needs matrices of equal width")
    node = VStack(rows)
    c = node.constant_value()
    if c is not None:
        return constant(sp.ImmutableMatrix(c.tolist()))
    return node


class TrigSum(Node):
    """``sum_k c_k exp(i w_k . (n, x))`` with complex coefficients ``c_k``.

    ``coeffs`` has shape ``(K,) + shape`` and ``freqs`` shape ``(K, p + q)``.
    """

    def __init__(self, coeffs, freqs, names):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.freqs = np.asarray(freqs, dtype=float)
        if self.freqs.ndim != 2 or self.freqs.shape != (self.coeffs.shape[0], len(names)):
            raise ShapeError("frequency table must be (terms, p + q)")
        if self.coeffs.ndim not in (1, 3):
            raise ShapeError("coefficients must be scalar or matrix per term")
        self.names = tuple(names)
        self.shape = self.coeffs.shape[1:]

    @cached_property
    def deps(self):
        return frozenset(n for n, col in zip(self.names, self.freqs.T) if np.any(col))

    def _eval(self, ctx, offset):
        coords = [lat + off for lat, off in zip(ctx.lattice, offset)] + ctx.continuous
        base = ctx.shape
        phase = sum(
            np.multiply.outer(np.broadcast_to(c, base), w) for c, w in zip(coords, self.freqs.T)
        )
        waves = np.exp(1j * phase)
        return np.tensordot(waves, self.coeffs, axes=([-1], [0]))

    def _partial(self, name, index):
        k = self.names.index(name)
        scale = 1j * self.freqs[:, k].reshape((-1,) + (1,) * len(self.shape))
        return TrigSum(self.coeffs * scale, self.freqs, self.names)
