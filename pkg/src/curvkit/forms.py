"""Graded forms over the semi-discrete box.

A :class:`Form` of degree ``r`` is a finite sum ``sum_IJ f_IJ dn^I ^ dx^J``
with every coefficient stored to the *left* of its basis wedge. Moving a
``dn^mu`` leftwards past a function shifts it (``dn^mu f = (E_mu f) dn^mu``);
``dx^i`` commutes with functions. Coefficients may be scalar, matrix or
row-vector fields as long as the shapes in one form agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .domain import Domain, Region, intersect_regions
from .errors import NotClosedError, ShapeError
from .field import Field, GridField

CLOSED_TOLERANCE = 1e-10


@dataclass(frozen=True, order=True)
class BasisWedge:
    """``dn^I ^ dx^J`` with strictly increasing 0-based index tuples."""

    lattice: tuple[int, ...] = ()
    continuous: tuple[int, ...] = ()

    def __post_init__(self):
        for idx in (self.lattice, self.continuous):
            if any(b <= a for a, b in zip(idx, idx[1:])) or any(i < 0 for i in idx):
                raise ShapeError(f"basis indices must be strictly increasing and >= 0: {idx}")

    @property
    def degree(self) -> int:
        return len(self.lattice) + len(self.continuous)

    def label(self, domain: Domain | None = None) -> str:
        if not self.degree:
            return "1"
        ln = domain.lattice_names if domain else [f"n{k + 1}" for k in range(max(self.lattice, default=0) + 1)]
        cn = domain.continuous_names if domain else [f"x{k + 1}" for k in range(max(self.continuous, default=0) + 1)]
        parts = [f"d{ln[m]}" for m in self.lattice] + [f"d{cn[i]}" for i in self.continuous]
        return "^".join(parts)


SCALAR = BasisWedge()


def concat_basis(a: BasisWedge, b: BasisWedge) -> tuple[int, BasisWedge] | None:
    """Sort ``a ^ b`` into canonical order; ``None`` when a covector repeats."""
    if set(a.lattice) & set(b.lattice) or set(a.continuous) & set(b.continuous):
        return None
    seq = [(0, m) for m in a.lattice] + [(1, i) for i in a.continuous]
    seq += [(0, m) for m in b.lattice] + [(1, i) for i in b.continuous]
    inversions = sum(1 for x in range(len(seq)) for y in range(x + 1, len(seq)) if seq[x] > seq[y])
    seq.sort()
    out = BasisWedge(
        tuple(k for kind, k in seq if kind == 0), tuple(k for kind, k in seq if kind == 1)
    )
    return (-1 if inversions % 2 else 1), out


def _product(f: Field, g: Field) -> Field:
    if f.shape and g.shape:
        return f @ g
    return f * g


def shift_multi(f: Field, directions: Iterable[int]) -> Field:
    for mu in directions:
        f = f.shift(mu)
    return f


def normalize_commute(mu: int, f: Field) -> Field:
    """Coefficient left behind when ``dn^mu`` moves left past ``f``: ``E_mu f``."""
    return f.shift(mu)


class Form:
    """Homogeneous-degree form with left coefficients."""

    def __init__(self, domain: Domain, degree: int, terms: Mapping[BasisWedge, Field] | None = None):
        self.domain = domain
        self.degree = degree
        kept: dict[BasisWedge, Field] = {}
        shape = None
        for basis, coeff in (terms or {}).items():
            if basis.degree != degree:
                raise ShapeError(f"term {basis} has degree {basis.degree}, form has degree {degree}")
            if any(m >= domain.p for m in basis.lattice) or any(i >= domain.q for i in basis.continuous):
                raise ShapeError(f"basis {basis} exceeds the domain's directions")
            if not isinstance(coeff, Field):
                coeff = Field.constant(domain, coeff)
            if shape is None:
                shape = coeff.shape
            elif coeff.shape != shape:
                raise ShapeError(f"mixed coefficient shapes {shape} and {coeff.shape}")
            if not coeff.is_exact_zero():
                kept[basis] = coeff
        if kept and degree > domain.p + domain.q:
            raise ShapeError(f"degree {degree} exceeds p + q = {domain.p + domain.q}")
        self.terms = dict(sorted(kept.items()))
        self.shape = shape

    # --------------------------------------------------------------- builders
    @classmethod
    def zero(cls, domain: Domain, degree: int) -> "Form":
        return cls(domain, degree)

    @classmethod
    def scalar(cls, f: Field) -> "Form":
        return cls(f.domain, 0, {SCALAR: f})

    @classmethod
    def basis(cls, domain: Domain, basis: BasisWedge, coeff=1) -> "Form":
        return cls(domain, basis.degree, {basis: coeff})

    @classmethod
    def one_form(cls, domain: Domain, lattice: Iterable = (), continuous: Iterable = ()) -> "Form":
        """``sum_mu a_mu dn^mu + sum_i b_i dx^i``; ``None`` entries are skipped."""
        terms = {}
        for mu, c in enumerate(lattice):
            if c is not None:
                terms[BasisWedge((mu,), ())] = c
        for i, c in enumerate(continuous):
            if c is not None:
                terms[BasisWedge((), (i,))] = c
        return cls(domain, 1, terms)

    # ------------------------------------------------------------ inspection
    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self):
        return len(self.terms)

    def coefficient(self, basis: BasisWedge) -> Field | None:
        return self.terms.get(basis)

    @property
    def is_pure_lattice(self) -> bool:
        return all(not b.continuous for b in self.terms)

    @property
    def region(self) -> Region:
        region = self.domain.full_region
        for f in self.terms.values():
            region = intersect_regions(region, f.region)
        return region

    def max_norm(self) -> float:
        return max((f.max_abs() for f in self.terms.values()), default=0.0)

    def __repr__(self):
        body = " + ".join(f"({f!r}) {b.label(self.domain)}" for b, f in self.terms.items()) or "0"
        return f"Form[deg {self.degree}]({body})"

    # ------------------------------------------------------------ arithmetic
    def _check(self, other: "Form") -> None:
        if not isinstance(other, Form):
            raise ShapeError("expected a Form")
        if other.domain != self.domain:
            raise ShapeError("forms live on different domains")

    def __add__(self, other: "Form") -> "Form":
        self._check(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        if other.degree != self.degree:
            raise ShapeError("mixed-degree sums are graded tuples, not Forms")
        terms = dict(self.terms)
        for b, f in other.terms.items():
            terms[b] = terms[b] + f if b in terms else f
        return Form(self.domain, self.degree, terms)

    def __neg__(self) -> "Form":
        return Form(self.domain, self.degree, {b: -f for b, f in self.terms.items()})

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, c) -> "Form":
        return Form(self.domain, self.degree, {b: f * c for b, f in self.terms.items()})

    def left_multiply(self, g: Field) -> "Form":
        """``g * w`` with ``g`` already on the left, so no shift is applied."""
        return Form(self.domain, self.degree, {b: _product(g, f) for b, f in self.terms.items()})

    def map_coefficients(self, fn) -> "Form":
        return Form(self.domain, self.degree, {b: fn(f) for b, f in self.terms.items()})

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)


def wedge(omega: Form, eta: Form) -> Form:
    """``omega ^ eta``; each ``dn^mu`` of omega's basis shifts eta's coefficient."""
    omega._check(eta)
    terms: dict[BasisWedge, Field] = {}
    for b1, f in omega.terms.items():
        for b2, g in eta.terms.items():
            merged = concat_basis(b1, b2)
            if merged is None:
                continue
            sign, b = merged
            c = _product(f, shift_multi(g, b1.lattice))
            if sign < 0:
                c = -c
            terms[b] = terms[b] + c if b in terms else c
    return Form(omega.domain, omega.degree + eta.degree, terms)


def _differential(omega: Form, which: str) -> Form:
    dom = omega.domain
    terms: dict[BasisWedge, Field] = {}
    count = dom.p if which == "lattice" else dom.q
    for basis, f in omega.terms.items():
        for k in range(count):
            if which == "lattice":
                if k in basis.lattice:
                    continue
                front = BasisWedge((k,), ())
                coeff = f.delta(k)
            else:
                if k in basis.continuous:
                    continue
                front = BasisWedge((), (k,))
                coeff = f.partial(k)
            sign, b = concat_basis(front, basis)
            if sign < 0:
                coeff = -coeff
            terms[b] = terms[b] + coeff if b in terms else coeff
    return Form(dom, omega.degree + 1, terms)


def d_discrete(omega: Form) -> Form:
    """``d_D``: difference part, ``d_D(f dn^I dx^J) = sum_mu Delta_mu f dn^mu ^ dn^I ^ dx^J``."""
    return _differential(omega, "lattice")


def d_continuous(omega: Form) -> Form:
    return _differential(omega, "continuous")


def d(omega: Form) -> Form:
    """Semi-discrete exterior derivative ``d_D + d_C``."""
    out = d_discrete(omega)
    cont = d_continuous(omega)
    if not out.terms:
        return cont
    return out + cont


def max_difference(a: Form, b: Form) -> float:
    """Max-norm of ``a - b`` over each term's valid region (missing terms count as zero)."""
    return (a - b).max_norm()


# --------------------------------------------------------------- primitive


def _anti_difference(arr: np.ndarray, axis: int) -> np.ndarray:
    """``S g (n) = sum_{k < n} g(k)`` from the base corner along ``axis``."""
    c = np.cumsum(arr, axis=axis)
    pad = np.zeros_like(np.take(c, [0], axis=axis))
    return np.concatenate([pad, np.take(c, range(c.shape[axis] - 1), axis=axis)], axis=axis)


def _face(arr: np.ndarray, axes: Iterable[int]) -> np.ndarray:
    """Restrict to index 0 along ``axes`` and extend constantly."""
    out = arr
    for ax in axes:
        out = np.broadcast_to(np.take(out, [0], axis=ax), out.shape)
    return out


def discrete_primitive(omega: Form, tolerance: float = CLOSED_TOLERANCE) -> Form:
    """A form ``P`` with ``d_D P = omega`` for a closed pure-lattice ``omega``.

    The box is the common region of omega's coefficients. For each direction
    ``mu`` in turn, the ``dn^mu``-component of omega (restricted to the face
    where all earlier lattice coordinates sit at the base corner) is
    anti-differenced along ``mu``. Continuous coordinates ride along as
    parameters. Primitives are unique only up to closed forms.
    """
    if omega.degree < 1:
        raise ShapeError("the primitive needs a form of degree >= 1")
    if not omega.is_pure_lattice:
        raise ShapeError("only pure-lattice forms (no dx factors) are supported")
    dom = omega.domain
    if not omega.terms:
        return Form.zero(dom, omega.degree - 1)
    defect = d_discrete(omega).max_norm()
    if defect > tolerance:
        raise NotClosedError(defect, tolerance)
    region = omega.region
    grids = {b: f.restrict(region).to_grid() for b, f in omega.terms.items()}
    terms: dict[BasisWedge, Field] = {}
    for basis, g in grids.items():
        mu = basis.lattice[0]
        rest = BasisWedge(basis.lattice[1:], ())
        earlier = range(mu)

        def op(a, mu=mu, earlier=earlier):
            return _anti_difference(_face(a, earlier), mu)

        piece = GridField(
            dom, op(g.data), region, [None if j is None else op(j) for j in g.jets], g.margins
        )
        terms[rest] = terms[rest] + piece if rest in terms else piece
    return Form(dom, omega.degree - 1, terms)


def lattice_bases(p: int, degree: int) -> list[BasisWedge]:
    return [BasisWedge(c, ()) for c in combinations(range(p), degree)]


def all_bases(p: int, q: int, degree: int) -> list[BasisWedge]:
    out = []
    for k in range(max(0, degree - q), min(p, degree) + 1):
        for lat in combinations(range(p), k):
            for cont in combinations(range(q), degree - k):
                out.append(BasisWedge(lat, cont))
    return out


# ---------------------------------------------------------------- file format


def save_form(form: Form, directory: str | Path) -> Path:
    """Write ``manifest.json`` plus one binary field blob per term."""
    from .fieldio import write_field

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (basis, coeff) in enumerate(form.terms.items()):
        blob = f"term{k}.cvf"
        write_field(coeff.to_grid(), directory / blob)
        entries.append({"lattice": list(basis.lattice), "continuous": list(basis.continuous), "blob": blob})
    manifest = {"format": "curvkit-form", "version": 1, "degree": form.degree, "terms": entries}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_form(directory: str | Path) -> Form:
    from .fieldio import read_field

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != "curvkit-form":
        raise ShapeError("not a curvkit form manifest")
    terms = {}
    domain = None
    for entry in manifest["terms"]:
        f = read_field(directory / entry["blob"])
        if domain is None:
            domain = f.domain
        terms[BasisWedge(tuple(entry["lattice"]), tuple(entry["continuous"]))] = f
    if domain is None:
        raise ShapeError("cannot infer the domain of an empty form manifest")
    return Form(domain, manifest["degree"], terms)
