"""Connections, covariant derivatives and curvature on the trivial bundle.

Sections are row vectors ``f = (f^1, ..., f^m)`` against constant basis
sections ``s_alpha``; connection matrices act from the right, so the
covariant derivative is ``(Delta_mu f - f B_D,mu) dn^mu + (d_i f - f B_C,i) dx^i``.
A row-valued form stands for ``sum_beta w_beta (x) s_beta``: column ``beta``
of the coefficient is the form attached to ``s_beta``.

Discrete coefficients ``B_D,mu`` live on links ``(n, n + e_mu)`` and are
stored at the base point ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analytic as ag
from .domain import Domain, Region, intersect_regions
from .errors import ShapeError
from .field import AnalyticField, Field, GridField
from .forms import BasisWedge, Form, d, wedge


@dataclass(frozen=True)
class Connection:
    domain: Domain
    m: int
    B_D: tuple[Field, ...]
    B_C: tuple[Field, ...]

    def __post_init__(self):
        if len(self.B_D) != self.domain.p or len(self.B_C) != self.domain.q:
            raise ShapeError(
                f"need {self.domain.p} discrete and {self.domain.q} continuous coefficients"
            )
        for f in self.B_D + self.B_C:
            if f.domain != self.domain:
                raise ShapeError("connection coefficient on a foreign domain")
            if f.shape != (self.m, self.m):
                raise ShapeError(f"connection coefficient of shape {f.shape}, expected {(self.m, self.m)}")

    @classmethod
    def build(cls, domain: Domain, B_D: Sequence = (), B_C: Sequence = ()) -> "Connection":
        coeffs = [c if isinstance(c, Field) else Field.constant(domain, c) for c in list(B_D) + list(B_C)]
        if not coeffs:
            raise ShapeError("empty connection")
        m = coeffs[0].shape[0] if coeffs[0].shape else 0
        return cls(domain, m, tuple(coeffs[: len(B_D)]), tuple(coeffs[len(B_D) :]))

    @classmethod
    def zero(cls, domain: Domain, m: int) -> "Connection":
        z = Field.constant(domain, np.zeros((m, m)))
        return cls(domain, m, (z,) * domain.p, (z,) * domain.q)

    def as_form(self) -> Form:
        """The matrix-valued one-form ``B = B_D,mu dn^mu + B_C,i dx^i``."""
        return Form.one_form(self.domain, self.B_D, self.B_C)

    def permute_lattice(self, order: Sequence[int], domain: Domain) -> "Connection":
        """Relabel lattice axes: new direction ``k`` is old direction ``order[k]``."""
        B_D = tuple(_permute_field(self.B_D[o], order, domain) for o in order)
        B_C = tuple(_permute_field(b, order, domain) for b in self.B_C)
        return Connection(domain, self.m, B_D, B_C)


def _permute_field(f: Field, order: Sequence[int], domain: Domain) -> Field:
    region = tuple(f.region[o] for o in order)
    # analytic fields are sampled together with their exact partials
    g = f.to_grid(with_jets=isinstance(f, AnalyticField))
    axes = list(order) + list(range(len(order), g.data.ndim))
    jets = [None if j is None else np.transpose(j, axes) for j in g.jets]
    return GridField(domain, np.transpose(g.data, axes), region, jets, g.margins)


@dataclass(frozen=True)
class Section:
    row: Field

    def __post_init__(self):
        if len(self.row.shape) != 2 or self.row.shape[0] != 1:
            raise ShapeError(f"a section is a 1 x m row field, got shape {self.row.shape}")

    @property
    def domain(self) -> Domain:
        return self.row.domain

    @property
    def m(self) -> int:
        return self.row.shape[1]

    @classmethod
    def basis(cls, domain: Domain, m: int, alpha: int) -> "Section":
        row = np.zeros((1, m))
        row[0, alpha] = 1
        return cls(Field.constant(domain, row))


def _as_row(s) -> Field:
    return s.row if isinstance(s, Section) else s


@dataclass(frozen=True)
class CurvatureComponents:
    """Curvature stored once per unordered pair (0-based indices)."""

    domain: Domain
    DD: dict = field(default_factory=dict)  # (mu, nu), mu < nu
    CC: dict = field(default_factory=dict)  # (i, j), i < j
    DC: dict = field(default_factory=dict)  # (mu, i)

    def items(self):
        for kind in ("DD", "CC", "DC"):
            for key, f in sorted(getattr(self, kind).items()):
                yield f"{kind}[{key[0] + 1},{key[1] + 1}]", f

    @property
    def region(self) -> Region:
        region = self.domain.full_region
        for _, f in self.items():
            region = intersect_regions(region, f.region)
        return region


# ------------------------------------------------------------ operations


def covariant_derivative(s, B: Connection) -> Form:
    """Row-valued one-form ``sum_mu (Delta_mu f - f B_D,mu) dn^mu + sum_i (d_i f - f B_C,i) dx^i``."""
    f = _as_row(s)
    if f.shape != (1, B.m):
        raise ShapeError(f"section width {f.shape} does not match connection dimension {B.m}")
    disc = [f.delta(mu) - f @ B.B_D[mu] for mu in range(B.domain.p)]
    cont = [f.partial(i) - f @ B.B_C[i] for i in range(B.domain.q)]
    return Form.one_form(B.domain, disc, cont)


def exterior_covariant(W: Form, B: Connection) -> Form:
    """Extend the connection to row-valued forms.

    For ``W = sum_beta w_beta (x) s_beta`` of degree ``k``,
    ``D W = dW + (-1)^k sum_beta w_beta ^ D(s_beta)``, and ``D(s_beta)`` is
    minus row ``beta`` of ``B``, so ``D W = dW + (-1)^(k+1) W ^ B``.
    """
    wb = wedge(W, B.as_form())
    if W.degree % 2 == 0:
        wb = -wb
    return d(W) + wb


def curvature_components(B: Connection) -> CurvatureComponents:
    """Curvature from the closed-form component formulas."""
    p, q = B.domain.p, B.domain.q
    BD, BC = B.B_D, B.B_C
    DD, CC, DC = {}, {}, {}
    for mu in range(p):
        for nu in range(mu + 1, p):
            DD[(mu, nu)] = (
                BD[nu].delta(mu) - BD[mu].delta(nu) + BD[mu] @ BD[nu].shift(mu) - BD[nu] @ BD[mu].shift(nu)
            )
    for i in range(q):
        for j in range(i + 1, q):
            CC[(i, j)] = BC[j].partial(i) - BC[i].partial(j) + BC[i] @ BC[j] - BC[j] @ BC[i]
    for mu in range(p):
        for i in range(q):
            DC[(mu, i)] = BC[i].delta(mu) - BD[mu].partial(i) + BD[mu] @ BC[i].shift(mu) - BC[i] @ BD[mu]
    return CurvatureComponents(B.domain, DD, CC, DC)


def _stack_rows(rows: Sequence[Field]) -> Field:
    if all(isinstance(r, AnalyticField) for r in rows):
        return AnalyticField(rows[0].domain, ag.vstack([r.node for r in rows]), _common(rows))
    region = _common(rows)
    grids = [r.restrict(region).to_grid() for r in rows]
    data = np.concatenate([g.data for g in grids], axis=-2)
    return GridField(rows[0].domain, data, region, None,
                     tuple(max(g.margins[i] for g in grids) for i in range(rows[0].domain.q)))


def _common(fields: Sequence[Field]) -> Region:
    region = fields[0].region
    for f in fields[1:]:
        region = intersect_regions(region, f.region)
    return region


def curvature_via_D2(B: Connection, probes: Sequence | None = None) -> CurvatureComponents:
    """Curvature read off ``D(D s)`` for a spanning set of probe sections.

    ``D^2 s = -f F`` with ``F = dB + B ^ B`` stored once per ordered basis
    pair, so stacking probe rows ``P`` and their ``D^2`` coefficients ``C``
    gives ``F = -pinv(P) C``.
    """
    dom, m = B.domain, B.m
    if probes is None:
        probes = [Section.basis(dom, m, a) for a in range(m)]
    rows = [_as_row(s) for s in probes]
    if len(rows) < m:
        raise ShapeError(f"need at least {m} probe sections to span the fibre")
    second = [exterior_covariant(covariant_derivative(r, B), B) for r in rows]
    zero_row = Field.constant(dom, np.zeros((1, m)))
    P = _stack_rows(rows)
    const_probe = isinstance(P, AnalyticField) and P.is_constant

    def extract(basis: BasisWedge) -> Field:
        C = _stack_rows([s.coefficient(basis) or zero_row for s in second])
        if const_probe:
            pinv = np.linalg.pinv(P.node.constant_value())
            return -(Field.constant(dom, pinv) @ C)
        region = intersect_regions(P.region, C.region)
        pg, cg = P.restrict(region).to_grid(), C.restrict(region).to_grid()
        data = -np.linalg.pinv(pg.data) @ cg.data
        margins = tuple(max(a, b) for a, b in zip(pg.margins, cg.margins))
        return GridField(dom, data, region, None, margins)

    p, q = dom.p, dom.q
    DD = {(a, b): extract(BasisWedge((a, b), ())) for a in range(p) for b in range(a + 1, p)}
    CC = {(i, j): extract(BasisWedge((), (i, j))) for i in range(q) for j in range(i + 1, q)}
    DC = {(a, i): extract(BasisWedge((a,), (i,))) for a in range(p) for i in range(q)}
    return CurvatureComponents(dom, DD, CC, DC)


def sigma_check(alpha: int, f: Field, B: Connection) -> float:
    """Max-norm of ``D(s_alpha f) - [D(s_alpha) f + sigma(s_alpha (x) df)]``.

    The right action of ``f`` on a form is the wedge with the 0-form ``f``
    on the right, which shifts ``f`` past every ``dn^mu``.
    ``sigma(s_alpha (x) df) = df (x) s_alpha + sum_mu Delta_mu f B_D,mu[alpha, :] dn^mu``.
    """
    if not 0 <= alpha < B.m:
        raise ShapeError(f"basis index {alpha} out of range for m={B.m}")
    if f.shape != ():
        raise ShapeError("sigma_check takes a scalar function")
    dom = B.domain
    e = Section.basis(dom, B.m, alpha).row
    lhs = covariant_derivative(f * e, B)
    right_action = wedge(covariant_derivative(e, B), Form.scalar(f))
    df = d(Form.scalar(f))
    sigma = df.map_coefficients(lambda c: c * e) + Form.one_form(
        dom, [f.delta(mu) * (e @ B.B_D[mu]) for mu in range(dom.p)], []
    )
    return (lhs - (right_action + sigma)).max_norm()


def residual_norms(F: CurvatureComponents) -> dict:
    """Max and quadrature-weighted L2 norms per component over the common region."""
    region = F.region
    out = {}
    for name, f in F.items():
        g = f.restrict(region)
        v = g.interior_values()
        points = v.size // max(1, int(np.prod(g.shape)))
        out[name] = {"max": g.max_abs(), "l2": g.l2(), "points": int(points)}
    return out
