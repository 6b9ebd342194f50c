"""Seeded random inputs and the algebraic identity suites.

Random analytic fields are short trigonometric polynomials
``sum_k c_k exp(i w_k . (n, x))`` with ``|w| < 1`` and ``|c| ~ 1/4``, so
values stay O(1) and every identity should hold to round-off. Pure-lattice
cases are also run on the grid backend, where shifts are exact slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .connection import Connection, curvature_components, curvature_via_D2, sigma_check
from .domain import Domain, make_domain
from .errors import ConfigError, NotClosedError
from .field import Field
from .forms import Form, all_bases, d, d_discrete, discrete_primitive, wedge

TERMS = 3


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    worst: float = 0.0
    details: list = field(default_factory=list)

    def record(self, value: float, **info) -> None:
        self.trials += 1
        self.worst = max(self.worst, float(value))
        if info:
            self.details.append({"value": float(value), **info})

    def passed(self, tolerance: float) -> bool:
        return self.trials > 0 and self.worst <= tolerance


# ----------------------------------------------------------- random inputs


def random_domain(rng: np.random.Generator, size: int, max_p: int = 2, max_q: int = 2, p=None, q=None) -> Domain:
    """A box with ``size`` lattice points per direction and ``[0, 1]`` continuous ranges."""
    if p is None or q is None:
        while True:
            p, q = int(rng.integers(0, max_p + 1)), int(rng.integers(0, max_q + 1))
            if p + q >= 1:
                break
    return make_domain(p, q, [(0, size - 1)] * p, [(0.0, 1.0)] * q, [0.25] * q)


def random_field(rng: np.random.Generator, domain: Domain, shape: tuple = (), backend: str = "analytic") -> Field:
    coeffs = (rng.normal(size=(TERMS,) + shape) + 1j * rng.normal(size=(TERMS,) + shape)) / 4
    freqs = rng.uniform(-1, 1, size=(TERMS, domain.p + domain.q))
    f = Field.trig_polynomial(domain, coeffs, freqs)
    if backend == "grid":
        if domain.q:
            raise ConfigError("grid-backend random fields are pure-lattice only")
        return f.to_grid()
    return f


def random_form(rng: np.random.Generator, domain: Domain, degree: int, shape: tuple = (), backend: str = "analytic") -> Form:
    bases = all_bases(domain.p, domain.q, degree)
    if not bases:
        return Form.zero(domain, degree)
    k = int(rng.integers(1, len(bases) + 1))
    chosen = rng.choice(len(bases), size=k, replace=False)
    return Form(domain, degree, {bases[i]: random_field(rng, domain, shape, backend) for i in sorted(chosen)})


def random_connection(rng: np.random.Generator, domain: Domain, m: int) -> Connection:
    return Connection.build(
        domain,
        [random_field(rng, domain, (m, m)) for _ in range(domain.p)],
        [random_field(rng, domain, (m, m)) for _ in range(domain.q)],
    )


def _degree(rng, domain: Domain, low: int = 0) -> int:
    return int(rng.integers(low, domain.p + domain.q + 1))


# ----------------------------------------------------------------- suites


def d_squared_suite(rng, sizes: Sequence[int], trials: int, backend: str = "analytic") -> SuiteResult:
    """``d(d w) = 0``."""
    out = SuiteResult(f"d_squared[{backend}]")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, backend)
        w = random_form(rng, dom, _degree(rng, dom), backend=backend)
        out.record(d(d(w)).max_norm())
    return out


def graded_leibniz_suite(rng, sizes, trials, backend="analytic") -> SuiteResult:
    """``d(a ^ b) = da ^ b + (-1)^deg(a) a ^ db``."""
    out = SuiteResult(f"graded_leibniz[{backend}]")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, backend)
        a = random_form(rng, dom, _degree(rng, dom), backend=backend)
        b = random_form(rng, dom, _degree(rng, dom), backend=backend)
        rhs = wedge(d(a), b) + wedge(a, d(b)).scale((-1) ** a.degree)
        out.record((d(wedge(a, b)) - rhs).max_norm())
    return out


def associativity_suite(rng, sizes, trials, backend="analytic") -> SuiteResult:
    """``(a ^ b) ^ c = a ^ (b ^ c)`` with matrix coefficients."""
    out = SuiteResult(f"wedge_associativity[{backend}]")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, backend)
        shape = (2, 2) if t % 2 else ()
        a, b, c = (random_form(rng, dom, _degree(rng, dom), shape, backend) for _ in range(3))
        out.record((wedge(wedge(a, b), c) - wedge(a, wedge(b, c))).max_norm())
    return out


def deformed_leibniz_suite(rng, sizes, trials, backend="analytic") -> SuiteResult:
    """``Delta_mu(f g) = (Delta_mu f) E_mu g + f Delta_mu g`` (matrix product for matrices)."""
    out = SuiteResult(f"deformed_leibniz[{backend}]")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, backend, need_lattice=True)
        shape = (2, 2) if t % 2 else ()
        f, g = random_field(rng, dom, shape, backend), random_field(rng, dom, shape, backend)
        mul = (lambda a, b: a @ b) if shape else (lambda a, b: a * b)
        mu = int(rng.integers(0, dom.p))
        lhs = mul(f, g).delta(mu)
        rhs = mul(f.delta(mu), g.shift(mu)) + mul(f, g.delta(mu))
        out.record((lhs - rhs).max_abs())
    return out


def sigma_suite(rng, sizes, trials) -> SuiteResult:
    """Covariant derivative of ``s_alpha f`` against the sigma-twisted Leibniz rule."""
    out = SuiteResult("sigma")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, "analytic")
        m = int(rng.integers(1, 4))
        B = random_connection(rng, dom, m)
        out.record(sigma_check(int(rng.integers(0, m)), random_field(rng, dom), B))
    return out


def curvature_paths_suite(rng, sizes, trials) -> SuiteResult:
    """Closed-form curvature components against those read off ``D(D s)``."""
    out = SuiteResult("curvature_paths")
    for t in range(trials):
        dom = _suite_domain(rng, sizes, t, "analytic")
        m = int(rng.integers(1, 4))
        out.record(curvature_path_difference(random_connection(rng, dom, m)), p=dom.p, q=dom.q, m=m)
    return out


def curvature_path_difference(B: Connection, probes=None) -> float:
    direct, via = curvature_components(B), curvature_via_D2(B, probes)
    region = via.region
    worst = 0.0
    for (name, a), (other, b) in zip(direct.items(), via.items()):
        assert name == other
        worst = max(worst, (a.restrict(region) - b.restrict(region)).max_abs())
    return worst


def primitive_suite(rng, sizes: Sequence[int], trials: int) -> SuiteResult:
    """``d_D(P w) = w`` for exact pure-lattice 1- and 2-forms on grid boxes."""
    out = SuiteResult("discrete_primitive")
    for t in range(trials):
        p = int(rng.integers(1, 4))
        degree = 1 if p == 1 else int(rng.integers(1, 3))
        size = sizes[t % len(sizes)]
        dom = make_domain(p, 0, [(0, size - 1)] * p)
        omega = d_discrete(random_form(rng, dom, degree - 1, backend="grid"))
        if not omega.terms:
            continue
        out.record((d_discrete(discrete_primitive(omega)) - omega).max_norm(), p=p, degree=degree, size=size)
    return out


def not_closed_defect(rng, size: int = 4) -> float:
    """The defect reported when a random (non-closed) 1-form is rejected."""
    dom = make_domain(2, 0, [(0, size - 1)] * 2)
    w = random_form(rng, dom, 1, backend="grid")
    try:
        discrete_primitive(w)
    except NotClosedError as err:
        return err.defect
    raise AssertionError("random 1-form was accepted as closed")


def _suite_domain(rng, sizes, t, backend, need_lattice=False) -> Domain:
    size = sizes[t % len(sizes)]
    if backend == "grid":
        return random_domain(rng, size, max_p=3, max_q=0, p=int(rng.integers(1, 4)), q=0)
    dom = random_domain(rng, size)
    while need_lattice and dom.p == 0:
        dom = random_domain(rng, size)
    return dom


# -------------------------------------------------------------- driver

IDENTITY_SUITES: dict[str, Callable] = {
    "d_squared": d_squared_suite,
    "graded_leibniz": graded_leibniz_suite,
    "wedge_associativity": associativity_suite,
    "deformed_leibniz": deformed_leibniz_suite,
}


def run_identity_suites(seed: int = 0, sizes: Sequence[int] = (3, 4), trials: int = 100) -> list[SuiteResult]:
    """All algebraic identity suites on both backends plus the sigma check."""
    sizes = list(sizes)
    if not sizes or any(int(s) != s or s < 2 for s in sizes):
        raise ConfigError(f"sizes must be a non-empty list of integers >= 2, got {sizes}")
    if trials < 1:
        raise ConfigError("trials must be positive")
    results = []
    for k, (name, suite) in enumerate(IDENTITY_SUITES.items()):
        for b, backend in enumerate(("analytic", "grid")):
            rng = np.random.default_rng([seed, k, b])
            results.append(suite(rng, sizes, trials, backend))
    results.append(sigma_suite(np.random.default_rng([seed, len(IDENTITY_SUITES)]), sizes, trials))
    return results
