"""Complex scalar and matrix fields on a :class:`~curvkit.domain.Domain`.

Two backends share one interface:

* ``AnalyticField`` wraps a sympy expression (or immutable matrix) in the
  domain's symbols. Shifts are substitutions and partials are exact.
* ``GridField`` wraps a sample array over ``region x continuous grid``.
  Lattice shifts and differences are exact; partials use second-order
  central differences (second-order one-sided at the edges) unless the
  field carries an exact first-derivative array ("jet") for that direction.

Every field records the lattice sub-box (``region``) on which it may be
evaluated. Shifts shrink it; binary operations intersect it. Grid fields
also count, per continuous direction, how many edge layers have been
touched by one-sided stencils (``margins``); norms skip those layers.

Fields are immutable. All operations return new fields.
"""

from __future__ import annotations

from functools import cached_property
from numbers import Number
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .domain import Domain, Point, Region, intersect_regions, region_size
from . import analytic as ag
from .errors import DerivativeError, NumericalError, RegionError, ShapeError


def _shift_region(domain: Domain, region: Region, mu: int, steps: int) -> Region:
    lo, hi = region[mu]
    elo, ehi = domain.lattice_extents[mu]
    nlo, nhi = max(lo - steps, elo), min(hi - steps, ehi)
    if nhi < nlo:
        raise RegionError(f"shift by {steps} in direction {mu} leaves an empty region")
    return region[:mu] + ((nlo, nhi),) + region[mu + 1 :]


def _check_direction(count: int, index: int, kind: str) -> None:
    if not 0 <= index < count:
        raise ShapeError(f"{kind} direction {index} out of range (have {count})")


class Field:
    """Common interface of both backends."""

    domain: Domain
    region: Region
    shape: tuple[int, ...]

    # ---------------------------------------------------------------- builders
    @staticmethod
    def analytic(domain: Domain, expr, region: Region | None = None) -> "AnalyticField":
        """Wrap a sympy expression, a nested list/matrix of them, or a callable of the symbols."""
        if callable(expr) and not isinstance(expr, sp.Basic):
            expr = expr(*domain.symbols)
        return AnalyticField(domain, _sympify(expr), region)

    @staticmethod
    def trig_polynomial(domain: Domain, coeffs, freqs, region: Region | None = None) -> "AnalyticField":
        """``sum_k coeffs[k] * exp(i freqs[k] . (n, x))``, exact under shifts and partials."""
        names = domain.lattice_names + domain.continuous_names
        return AnalyticField(domain, ag.TrigSum(coeffs, freqs, names), region)

    @staticmethod
    def constant(domain: Domain, value, region: Region | None = None) -> "AnalyticField":
        return AnalyticField(domain, _sympify(value), region)

    @staticmethod
    def from_samples(
        domain: Domain,
        data,
        region: Region | None = None,
        jets: Sequence[np.ndarray | None] | None = None,
    ) -> "GridField":
        return GridField(domain, np.asarray(data, dtype=complex), region, jets)

    @staticmethod
    def from_function(
        domain: Domain,
        fn: Callable,
        shape: tuple[int, ...] = (),
        region: Region | None = None,
        jets: Sequence[Callable | None] | None = None,
    ) -> "GridField":
        """Sample ``fn(*lattice_coords, *continuous_coords)`` on the grid.

        Coordinates arrive as broadcastable arrays (one axis each). ``jets``
        optionally supplies exact partials in the same calling convention.
        """
        region = domain.full_region if region is None else tuple(region)
        coords = _coordinate_arrays(domain, region)
        full = domain.sample_shape(region) + tuple(shape)

        def sample(f):
            out = np.asarray(f(*coords), dtype=complex)
            if shape and out.ndim == len(shape):
                out = out.reshape((1,) * len(coords) + out.shape)
            return np.array(np.broadcast_to(out, full))

        jet_arrays = None
        if jets is not None:
            jet_arrays = [None if j is None else sample(j) for j in jets]
        return GridField(domain, sample(fn), region, jet_arrays)

    @staticmethod
    def from_entries(rows: Sequence[Sequence["Field | Number"]]) -> "Field":
        """Assemble a matrix field from scalar entries (fields or numbers)."""
        flat = [e for row in rows for e in row]
        ncols = len(rows[0])
        if any(len(r) != ncols for r in rows):
            raise ShapeError("ragged entry rows")
        fields = [e for e in flat if isinstance(e, Field)]
        if not fields:
            raise ShapeError("from_entries needs at least one Field entry to fix the domain")
        domain = fields[0].domain
        for f in fields:
            _same_domain(domain, f.domain)
            if f.shape != ():
                raise ShapeError("from_entries takes scalar entries")
        region = fields[0].region
        for f in fields[1:]:
            region = intersect_regions(region, f.region)
        if all(isinstance(f, AnalyticField) for f in fields):
            nodes = [e.node if isinstance(e, Field) else ag.constant(_sympify(e)) for e in flat]
            return AnalyticField(domain, ag.stack(nodes, len(rows), ncols), region)
        want_jets = any(isinstance(f, GridField) and f.has_jets for f in fields)
        grids = [
            _as_grid(e, domain, region, want_jets)
            if isinstance(e, Field)
            else _as_grid(Field.constant(domain, e, region), domain, region, want_jets)
            for e in flat
        ]
        data = np.stack([g.data for g in grids], axis=-1)
        data = data.reshape(data.shape[:-1] + (len(rows), ncols))
        jets = []
        for i in range(domain.q):
            parts = [g.jets[i] for g in grids]
            if any(part is None for part in parts):
                jets.append(None)
            else:
                j = np.stack(parts, axis=-1)
                jets.append(j.reshape(j.shape[:-1] + (len(rows), ncols)))
        margins = tuple(max(g.margins[i] for g in grids) for i in range(domain.q))
        return GridField(domain, data, region, jets, margins)

    # ------------------------------------------------------------ inspection
    @property
    def is_matrix(self) -> bool:
        return len(self.shape) == 2

    def region_points(self) -> int:
        return region_size(self.region)

    def values(self) -> np.ndarray:
        raise NotImplementedError

    def interior_values(self) -> np.ndarray:
        return self.values()

    def max_abs(self) -> float:
        v = self.interior_values()
        return float(np.max(np.abs(v))) if v.size else 0.0

    def l2(self) -> float:
        v = self.interior_values()
        return float(np.sqrt(np.sum(np.abs(v) ** 2) * self.domain.cell_volume()))

    def _check_point(self, point: Point) -> None:
        if not self.domain.contains(point, self.region):
            raise RegionError(f"point {point} is outside the valid region {self.region}")

    # ---------------------------------------------------------- conversions
    def to_grid(self, with_jets: bool = False) -> "GridField":
        raise NotImplementedError

    def restrict(self, region: Region) -> "Field":
        raise NotImplementedError

    # ------------------------------------------------------------ operators
    def shift(self, mu: int, steps: int = 1) -> "Field":
        raise NotImplementedError

    def delta(self, mu: int) -> "Field":
        return self.shift(mu) - self

    def partial(self, i: int) -> "Field":
        raise NotImplementedError

    def conj(self) -> "Field":
        raise NotImplementedError

    def abs(self) -> "Field":
        raise NotImplementedError

    def exp(self) -> "Field":
        return self._elementwise("exp")

    def sin(self) -> "Field":
        return self._elementwise("sin")

    def cos(self) -> "Field":
        return self._elementwise("cos")

    def log(self) -> "Field":
        return self._elementwise("log")

    def __getitem__(self, index: tuple[int, int]) -> "Field":
        raise NotImplementedError

    def __add__(self, other):
        return _binary(self, other, "add")

    def __radd__(self, other):
        return _binary(other, self, "add")

    def __sub__(self, other):
        return _binary(self, other, "sub")

    def __rsub__(self, other):
        return _binary(other, self, "sub")

    def __mul__(self, other):
        return _binary(self, other, "mul")

    def __rmul__(self, other):
        return _binary(other, self, "mul")

    def __matmul__(self, other):
        return _binary(self, other, "matmul")

    def __rmatmul__(self, other):
        return _binary(other, self, "matmul")

    def __truediv__(self, other):
        return _binary(self, other, "div")

    def __rtruediv__(self, other):
        return _binary(other, self, "div")

    def __neg__(self):
        return _binary(self, -1, "mul")

    def is_exact_zero(self) -> bool:
        raise NotImplementedError


# ====================================================================== analytic


def _sympify(value):
    if isinstance(value, (sp.MatrixBase, list, tuple, np.ndarray)):
        m = sp.ImmutableMatrix(sp.Matrix(value))
        if m.shape[0] == 0:
            raise ShapeError("empty matrix")
        return m
    return sp.sympify(value)


def _coordinate_arrays(domain: Domain, region: Region) -> list[np.ndarray]:
    ndim = domain.p + domain.q
    coords = []
    for k, (lo, hi) in enumerate(region):
        shape = [1] * ndim
        shape[k] = hi - lo + 1
        coords.append(np.arange(lo, hi + 1).reshape(shape))
    for i, g in enumerate(domain.grids):
        shape = [1] * ndim
        shape[domain.p + i] = g.size
        coords.append(g.reshape(shape))
    return coords


class AnalyticField(Field):
    """Closed-form field backed by an expression graph.

    Leaves are sympy expressions in the domain's symbols; arithmetic builds
    graph nodes instead of expanding symbolically. Shifts move the lattice
    argument and partials follow exact rules node by node.
    """

    def __init__(self, domain: Domain, expr, region: Region | None = None):
        self.domain = domain
        self.region = domain.full_region if region is None else tuple(tuple(r) for r in region)
        if isinstance(expr, ag.Node):
            node = expr
        else:
            if isinstance(expr, sp.MatrixBase) and len(expr.shape) != 2:
                raise ShapeError("matrix fields must be two-dimensional")
            unknown = expr.free_symbols - set(domain.symbols)
            if unknown:
                raise ShapeError(f"expression uses symbols outside the domain: {sorted(map(str, unknown))}")
            node = ag.Leaf(expr, domain.symbols)
        self.node = node
        self.shape = node.shape

    @property
    def expr(self):
        """The sympy expression, available for fields that are a single leaf."""
        if not isinstance(self.node, ag.Leaf):
            raise AttributeError("composite analytic field has no single expression")
        return self.node.expr

    @property
    def is_constant(self) -> bool:
        return self.node.constant_value() is not None

    def _evaluate(self, region: Region, continuous=None) -> np.ndarray:
        d = self.domain
        if continuous is None:
            coords = _coordinate_arrays(d, region)
            lattice, cont = coords[: d.p], coords[d.p :]
            base = d.sample_shape(region)
        else:
            lattice = [np.array(lo) for lo, _ in region]
            cont = [np.array(x, dtype=float) for x in continuous]
            base = ()
        ctx = ag.EvalContext(lattice, cont, base)
        out = np.array(self.node.eval(ctx, (0,) * d.p), dtype=complex)
        if not np.all(np.isfinite(out)):
            raise NumericalError("analytic field evaluates to non-finite values on its region")
        return out

    @cached_property
    def _values(self) -> np.ndarray:
        out = self._evaluate(self.region)
        out.setflags(write=False)
        return out

    def values(self) -> np.ndarray:
        return self._values

    def at(self, point: Point):
        self._check_point(point)
        region = tuple((n, n) for n in point.lattice)
        v = self._evaluate(region, point.continuous)
        return v if self.shape else complex(v)

    def to_grid(self, with_jets: bool = False) -> "GridField":
        jets = None
        if with_jets:
            jets = [self.partial(i).values() for i in range(self.domain.q)]
        return GridField(self.domain, self.values(), self.region, jets)

    def restrict(self, region: Region) -> "AnalyticField":
        region = intersect_regions(self.region, region)
        if region == self.region:
            return self
        return AnalyticField(self.domain, self.node, region)

    def shift(self, mu: int, steps: int = 1) -> "AnalyticField":
        _check_direction(self.domain.p, mu, "lattice")
        region = _shift_region(self.domain, self.region, mu, steps)
        name = self.domain.lattice_names[mu]
        return AnalyticField(self.domain, ag.shift(self.node, mu, steps, name), region)

    def partial(self, i: int) -> "AnalyticField":
        _check_direction(self.domain.q, i, "continuous")
        name = self.domain.continuous_names[i]
        return AnalyticField(self.domain, self.node.partial(name, i), self.region)

    def conj(self) -> "AnalyticField":
        return AnalyticField(self.domain, ag.unary("conj", self.node), self.region)

    def abs(self) -> "AnalyticField":
        return AnalyticField(self.domain, ag.unary("abs", self.node), self.region)

    def _elementwise(self, name: str) -> "AnalyticField":
        return AnalyticField(self.domain, ag.unary(name, self.node), self.region)

    def __getitem__(self, index):
        if not self.shape:
            raise ShapeError("scalar fields have no entries")
        return AnalyticField(self.domain, ag.unary("item", self.node, tuple(index)), self.region)

    def is_exact_zero(self) -> bool:
        return self.node.is_zero

    def __repr__(self):
        return f"AnalyticField({type(self.node).__name__}, shape={self.shape}, region={self.region})"


# ========================================================================= grid


class GridField(Field):
    """Sampled field over ``region x continuous grid``."""

    def __init__(
        self,
        domain: Domain,
        data: np.ndarray,
        region: Region | None = None,
        jets: Sequence[np.ndarray | None] | None = None,
        margins: Sequence[int] | None = None,
    ):
        self.domain = domain
        self.region = domain.full_region if region is None else tuple(tuple(r) for r in region)
        for (lo, hi), (elo, ehi) in zip(self.region, domain.lattice_extents):
            if lo < elo or hi > ehi or hi < lo:
                raise RegionError(f"region {self.region} not inside the domain extents")
        base = domain.sample_shape(self.region)
        data = np.asarray(data, dtype=complex)
        if data.shape[: len(base)] != base or data.ndim - len(base) not in (0, 2):
            raise ShapeError(f"sample array of shape {data.shape} does not fit region grid {base}")
        if not np.all(np.isfinite(data)):
            raise NumericalError("grid field contains non-finite samples")
        self.shape = data.shape[len(base) :]
        self.data = data
        self.data.setflags(write=False)
        if jets is None:
            jets = [None] * domain.q
        if len(jets) != domain.q:
            raise ShapeError(f"expected {domain.q} jets, got {len(jets)}")
        checked = []
        for j in jets:
            if j is not None:
                j = np.asarray(j, dtype=complex)
                if j.shape != data.shape:
                    raise ShapeError("jet shape must match the sample shape")
                if not np.all(np.isfinite(j)):
                    raise NumericalError("grid field jet contains non-finite samples")
                j.setflags(write=False)
            checked.append(j)
        self.jets = tuple(checked)
        self.margins = tuple(margins) if margins is not None else (0,) * domain.q

    @property
    def has_jets(self) -> bool:
        return any(j is not None for j in self.jets)

    def values(self) -> np.ndarray:
        return self.data

    def interior_values(self) -> np.ndarray:
        index = [slice(None)] * self.domain.p
        for m, size in zip(self.margins, self.domain.continuous_sizes):
            if 2 * m >= size:
                raise RegionError("stencil margins consume the whole continuous grid")
            index.append(slice(m, size - m))
        return self.data[tuple(index)]

    def at(self, point: Point):
        self._check_point(point)
        idx = tuple(n - lo for n, (lo, _) in zip(point.lattice, self.region))
        idx += tuple(self.domain.node_index(i, x) for i, x in enumerate(point.continuous))
        v = self.data[idx]
        return v.copy() if self.shape else complex(v)

    def to_grid(self, with_jets: bool = False) -> "GridField":
        return self

    def _slice_to(self, region: Region) -> tuple:
        return tuple(slice(nlo - lo, nhi - lo + 1) for (nlo, nhi), (lo, _) in zip(region, self.region))

    def _map_linear(self, fn, region: Region | None = None, margins=None) -> "GridField":
        jets = [None if j is None else fn(j) for j in self.jets]
        return GridField(
            self.domain, fn(self.data), region or self.region, jets, margins or self.margins
        )

    def restrict(self, region: Region) -> "GridField":
        region = intersect_regions(self.region, region)
        if region == self.region:
            return self
        sl = self._slice_to(region)
        return self._map_linear(lambda a: a[sl], region)

    def shift(self, mu: int, steps: int = 1) -> "GridField":
        _check_direction(self.domain.p, mu, "lattice")
        region = _shift_region(self.domain, self.region, mu, steps)
        sl = list(self._slice_to(region))
        (nlo, nhi), (lo, _) = region[mu], self.region[mu]
        sl[mu] = slice(nlo + steps - lo, nhi + steps - lo + 1)
        sl = tuple(sl)
        return self._map_linear(lambda a: a[sl], region)

    def partial(self, i: int) -> "GridField":
        _check_direction(self.domain.q, i, "continuous")
        if self.jets[i] is not None:
            return GridField(self.domain, self.jets[i], self.region, None, self.margins)
        if self.domain.continuous_sizes[i] < 3:
            raise DerivativeError(
                f"need at least 3 samples in direction {self.domain.continuous_names[i]} for a stencil"
            )
        axis = self.domain.p + i
        d = np.gradient(self.data, self.domain.spacings[i], axis=axis, edge_order=2)
        margins = list(self.margins)
        margins[i] += 1
        return GridField(self.domain, d, self.region, None, margins)

    def conj(self) -> "GridField":
        return self._map_linear(np.conj)

    def abs(self) -> "GridField":
        return GridField(self.domain, np.abs(self.data), self.region, None, self.margins)

    def _elementwise(self, name: str) -> "GridField":
        v = self.data
        fn, dfn = {
            "exp": (np.exp, np.exp),
            "sin": (np.sin, np.cos),
            "cos": (np.cos, lambda z: -np.sin(z)),
            "log": (np.log, lambda z: 1.0 / z),
        }[name]
        with np.errstate(all="ignore"):
            out = fn(v)
            jets = [None if j is None else dfn(v) * j for j in self.jets]
        return GridField(self.domain, out, self.region, jets, self.margins)

    def __getitem__(self, index):
        if not self.shape:
            raise ShapeError("scalar fields have no entries")
        r, c = index
        return self._map_linear(lambda a: a[..., r, c])

    def is_exact_zero(self) -> bool:
        return not np.any(self.data)

    def __repr__(self):
        return f"GridField(shape={self.shape}, region={self.region}, margins={self.margins})"


# ================================================================ binary ops


def _same_domain(a: Domain, b: Domain) -> None:
    if a is not b and a != b:
        raise ShapeError("fields live on different domains")


def _as_grid(f: Field, domain: Domain, region: Region, with_jets: bool) -> GridField:
    f = f.restrict(region)
    if isinstance(f, AnalyticField) and f.is_constant:
        value = np.asarray(f.node.constant_value(), dtype=complex)
        full = domain.sample_shape(region) + f.shape
        data = np.broadcast_to(value, full)
        jets = [np.zeros(full, complex) for _ in range(domain.q)] if with_jets else None
        return GridField(domain, data.copy(), region, jets)
    return f.to_grid(with_jets=with_jets)


def _lift(a: np.ndarray, shape: tuple, target: tuple) -> np.ndarray:
    if shape == target or not target or shape:
        return a
    return a.reshape(a.shape + (1,) * len(target))


def _grid_binary(a: GridField, b: GridField, op: str, shape: tuple) -> GridField:
    va, vb = _lift(a.data, a.shape, shape), _lift(b.data, b.shape, shape)

    def lift(j, s):
        return None if j is None else _lift(j, s, shape)

    with np.errstate(all="ignore"):
        if op == "add":
            val = va + vb
            jet = lambda da, db: da + db
        elif op == "sub":
            val = va - vb
            jet = lambda da, db: da - db
        elif op == "mul":
            val = va * vb
            jet = lambda da, db: da * vb + va * db
        elif op == "matmul":
            val = va @ vb
            jet = lambda da, db: da @ vb + va @ db
        else:
            val = va / vb
            jet = lambda da, db: (da * vb - va * db) / vb**2
        jets = []
        for ja, jb in zip(a.jets, b.jets):
            if ja is None or jb is None:
                jets.append(None)
            else:
                jets.append(jet(lift(ja, a.shape), lift(jb, b.shape)))
    if not np.all(np.isfinite(val)):
        raise NumericalError(f"non-finite values produced by '{op}'")
    margins = tuple(max(x, y) for x, y in zip(a.margins, b.margins))
    return GridField(a.domain, val, a.region, jets, margins)


def _binary(a, b, op: str) -> Field:
    if not isinstance(a, Field):
        a = Field.constant(b.domain, a, b.region)
    if not isinstance(b, Field):
        b = Field.constant(a.domain, b, a.region)
    _same_domain(a.domain, b.domain)
    shape = ag._result_shape(op, a.shape, b.shape)
    region = intersect_regions(a.region, b.region)
    if isinstance(a, AnalyticField) and isinstance(b, AnalyticField):
        return AnalyticField(a.domain, ag.binary(op, a.node, b.node), region)
    want_jets = any(isinstance(f, GridField) and f.has_jets for f in (a, b))
    ga = _as_grid(a, a.domain, region, want_jets)
    gb = _as_grid(b, a.domain, region, want_jets)
    return _grid_binary(ga, gb, op, shape)


# ======================================================= module-level operations


def shift(f: Field, mu: int, steps: int = 1) -> Field:
    """``E_mu`` (or ``E_mu^steps``): evaluate ``f`` at ``n + steps * e_mu``."""
    return f.shift(mu, steps)


def delta(f: Field, mu: int) -> Field:
    """Forward difference ``E_mu f - f``."""
    return f.delta(mu)


def partial(f: Field, i: int) -> Field:
    return f.partial(i)


_COMBINE = {
    "add": lambda fs: _fold(fs, lambda a, b: a + b),
    "pointwise-mul": lambda fs: _fold(fs, lambda a, b: a * b),
    "matrix-mul": lambda fs: _fold(fs, lambda a, b: a @ b),
    "conjugate": lambda fs: _single(fs).conj(),
    "norm-entrywise": lambda fs: _single(fs).abs(),
}


def _fold(fields, fn):
    fields = list(fields)
    if not fields:
        raise ShapeError("combine needs at least one field")
    out = fields[0]
    for f in fields[1:]:
        out = fn(out, f)
    return out


def _single(fields):
    fields = list(fields)
    if len(fields) != 1:
        raise ShapeError("unary combine takes exactly one field")
    return fields[0]


def combine(fields: Sequence[Field], op: str, scalar: complex | None = None) -> Field:
    """Pointwise arithmetic by name.

    ``op`` is one of ``add``, ``scalar-mul`` (needs ``scalar``),
    ``pointwise-mul``, ``matrix-mul`` (ordered, left to right),
    ``conjugate`` and ``norm-entrywise``.
    """
    if op == "scalar-mul":
        if scalar is None:
            raise ShapeError("scalar-mul needs a scalar")
        return _single(fields) * scalar
    try:
        return _COMBINE[op](fields)
    except KeyError:
        raise ShapeError(f"unknown combine op {op!r}") from None
