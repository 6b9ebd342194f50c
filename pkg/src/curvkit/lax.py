"""Zero-curvature examples: NLS, semi-discrete sine-Gordon and discrete Toda.

Each example pairs a 2x2 connection built from an unknown field with the
nonlinear equation its flatness encodes. ``zero_curvature_residual``
evaluates the compatibility expression with the operand ordering used in
the example's own display, which differs from ``curvature_components`` by
an overall sign for NLS and Toda.

Directions:

* NLS: ``p=0, q=2``, continuous directions ``(x, t)``.
* sine-Gordon: ``p=1, q=1``, lattice ``n`` and continuous ``t``.
* Toda: ``p=2, q=0``, lattice ``(m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from numbers import Real
from typing import Sequence

import numpy as np

from .connection import Connection, CurvatureComponents, residual_norms
from .errors import ConfigError, ShapeError
from .field import Field

KINDS = ("nls", "sg", "toda")

# spectral parameter per kind
SPECTRAL = {"sg": "k", "toda": "lam"}

SG_COEFFICIENT = 4.0


@dataclass(frozen=True)
class LaxExample:
    """One example: its kind, scalar parameters and the unknown field.

    ``field`` is ``u(x, t)`` for NLS, ``theta_n(t)`` for sine-Gordon and the
    positive ``u_{m,n} = exp(q_{m,n})`` for Toda.
    """

    kind: str
    field: Field
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown example {self.kind!r}; expected one of {KINDS}")
        dims = {"nls": (0, 2), "sg": (1, 1), "toda": (2, 0)}[self.kind]
        d = self.field.domain
        if (d.p, d.q) != dims:
            raise ShapeError(f"{self.kind} needs a domain with (p, q) = {dims}, got {(d.p, d.q)}")
        if self.field.shape != ():
            raise ShapeError(f"{self.kind} takes a scalar field")
        if self.kind == "sg":
            _nonzero_real(self.params, "k")
            _real(self.params, "gamma")
        if self.kind == "toda":
            _nonzero_real(self.params, "lam")
            v = self.field.values()
            if np.any(np.abs(v.imag) > 0) or np.any(v.real <= 0):
                raise ConfigError("Toda field must be real and strictly positive")

    @classmethod
    def nls(cls, u: Field) -> "LaxExample":
        return cls("nls", u, {})

    @classmethod
    def sine_gordon(cls, theta: Field, gamma: float = 1.0, k: float = 1.0) -> "LaxExample":
        return cls("sg", theta, {"gamma": gamma, "k": k})

    @classmethod
    def toda(cls, u: Field, lam: float = 1.0) -> "LaxExample":
        return cls("toda", u, {"lam": lam})

    @classmethod
    def toda_from_q(cls, q: Field, lam: float = 1.0) -> "LaxExample":
        return cls.toda(q.exp(), lam)

    def with_field(self, f: Field) -> "LaxExample":
        return replace(self, field=f)

    def with_params(self, **params) -> "LaxExample":
        return replace(self, params={**self.params, **params})


def _real(params: dict, name: str) -> float:
    v = params.get(name)
    if not isinstance(v, Real) or not np.isfinite(v):
        raise ConfigError(f"parameter {name} must be a finite real number, got {v!r}")
    return float(v)


def _nonzero_real(params: dict, name: str) -> float:
    v = _real(params, name)
    if v == 0:
        raise ConfigError(f"parameter {name} must be nonzero")
    return v


# --------------------------------------------------------------- connections


def build_connection(ex: LaxExample, as_printed: bool = False) -> Connection:
    """The example's 2x2 connection.

    For NLS the ``dt`` coefficient carries ``i u_x^*`` at (1,2) and
    ``i u_x`` at (2,1); ``as_printed=True`` swaps them back to the
    originally published placement, whose compatibility expression keeps a
    nonzero diagonal.
    """
    f, dom = ex.field, ex.field.domain
    if ex.kind == "nls":
        u, uc = f, f.conj()
        mod2 = u * uc
        ux, ucx = u.partial(0), uc.partial(0)
        upper, lower = (ux, ucx) if as_printed else (ucx, ux)
        B1 = Field.from_entries([[0 * u, uc], [-u, 0 * u]])
        B2 = Field.from_entries([[-1j * mod2, 1j * upper], [1j * lower, 1j * mod2]])
        return Connection.build(dom, [], [B1, B2])
    if ex.kind == "sg":
        gamma, k = ex.params["gamma"], ex.params["k"]
        c = gamma / (1j * k)
        BC = Field.from_entries([[-1 + 0 * f, c * (1j * f).exp()], [c * (-1j * f).exp(), -1 + 0 * f]])
        jump = f.shift(0) - f
        BD = Field.from_entries(
            [[-1 + (-0.5j * jump).exp(), 1j * k + 0 * jump], [1j * k + 0 * jump, -1 + (0.5j * jump).exp()]]
        )
        return Connection.build(dom, [BD], [BC])
    lam = ex.params["lam"]
    u = f
    u_left = u.shift(1, -1)  # u_{m, n-1}
    u_prev = u.shift(0, -1)  # u_{m-1, n}
    B1 = Field.from_entries([[lam - 1 + 0 * u_left, lam / u_left], [u, -2 + 0 * u]])
    B2 = Field.from_entries([[lam - 1 + u / u_prev, lam / u_prev], [u, -1 + 0 * u]])
    return Connection.build(dom, [B1, B2], [])


def zero_curvature_residual(ex: LaxExample, as_printed: bool = False) -> CurvatureComponents:
    """The single relevant curvature component, in the example's display ordering."""
    B = build_connection(ex, as_printed)
    dom = B.domain
    if ex.kind == "nls":
        B1, B2 = B.B_C
        F = B1.partial(1) - B2.partial(0) + B2 @ B1 - B1 @ B2
        return CurvatureComponents(dom, CC={(0, 1): F})
    if ex.kind == "sg":
        (BD,), (BC,) = B.B_D, B.B_C
        F = BC.delta(0) - BD.partial(0) + BD @ BC.shift(0) - BC @ BD
        return CurvatureComponents(dom, DC={(0, 0): F})
    B1, B2 = B.B_D
    F = B1.delta(1) - B2.delta(0) + B2 @ B1.shift(1) - B1 @ B2.shift(0)
    return CurvatureComponents(dom, DD={(0, 1): F})


def residual_field(ex: LaxExample, as_printed: bool = False) -> Field:
    """The matrix field of :func:`zero_curvature_residual`."""
    (_, F), = zero_curvature_residual(ex, as_printed).items()
    return F


def reduced_equation_residual(ex: LaxExample, coefficient: float = SG_COEFFICIENT) -> Field:
    """Scalar residual of the governing equation.

    * NLS: ``u_t + i u_xx + 2i |u|^2 u``.
    * sine-Gordon: ``d_t(theta_{n+1} - theta_n) - c gamma sin((theta_{n+1} + theta_n) / 2)``
      with ``c = coefficient``.
    * Toda: ``q_{m+1,n} - 2 q_{m,n} + q_{m-1,n} - ln[(e^{q_{m,n+1} - q_{m,n}} + 1) / (e^{q_{m,n} - q_{m,n-1}} + 1)]``
      with ``q = ln u``.
    """
    f = ex.field
    if ex.kind == "nls":
        return f.partial(1) + 1j * f.partial(0).partial(0) + 2j * (f * f.conj()) * f
    if ex.kind == "sg":
        gamma = ex.params["gamma"]
        return (f.shift(0) - f).partial(0) - coefficient * gamma * ((f.shift(0) + f) * 0.5).sin()
    return toda_q_residual(f.log())


def toda_q_residual(q: Field) -> Field:
    """Residual of the Toda recursion written in ``q``."""
    up, down = q.shift(0), q.shift(0, -1)
    right, left = q.shift(1), q.shift(1, -1)
    ratio = ((right - q).exp() + 1) / ((q - left).exp() + 1)
    return up - 2 * q + down - ratio.log()


def residual_norm(F: CurvatureComponents) -> float:
    return max(v["max"] for v in residual_norms(F).values())


# ---------------------------------------------------------------- witnesses


@dataclass(frozen=True)
class WitnessRow:
    label: str
    curvature: float  # worst over the sampled spectral parameters
    reduced: float
    per_param: tuple = ()

    def agrees(self, tolerance: float) -> bool:
        return (self.curvature <= tolerance) == (self.reduced <= tolerance)


@dataclass(frozen=True)
class WitnessReport:
    kind: str
    tolerance: float
    rows: tuple[WitnessRow, ...]

    @property
    def consistent(self) -> bool:
        """Both norms small together or large together, for every sample."""
        return all(r.agrees(self.tolerance) for r in self.rows)


def equivalence_witness(
    ex: LaxExample,
    fields: Sequence[tuple[str, Field]],
    params: Sequence[float] | None = None,
    tolerance: float = 1e-10,
) -> WitnessReport:
    """Curvature and reduced-equation norms for each candidate field.

    For sine-Gordon and Toda the curvature norm is the worst over
    ``params`` (spectral parameter values, default 0.5, 1 and 2).
    """
    if not fields:
        raise ConfigError("equivalence_witness needs at least one field")
    name = SPECTRAL.get(ex.kind)
    values = [None] if name is None else list(params or (0.5, 1.0, 2.0))
    rows = []
    for label, f in fields:
        base = ex.with_field(f)
        per = []
        for v in values:
            e = base if v is None else base.with_params(**{name: v})
            per.append(residual_norm(zero_curvature_residual(e)))
        reduced = reduced_equation_residual(base)
        rows.append(WitnessRow(label, max(per), reduced.max_abs(), tuple(zip(values, per))))
    return WitnessReport(ex.kind, tolerance, tuple(rows))
