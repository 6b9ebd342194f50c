"""Solution generators for the three reduced equations.

* ``nls_solve``: Strang splitting for ``u_t = -i u_xx - 2i |u|^2 u`` on a
  periodic grid. The nonlinear substep is an exact pointwise phase
  rotation; the linear substep is either exact in Fourier space
  (``spectral``, default) or Crank-Nicolson with the 3-point Laplacian
  (``cn``), both applied with FFTs.
* ``sg_integrate``: classical RK4 for the chained relation
  ``d_t theta_{n+1} = d_t theta_n + c gamma sin((theta_{n+1} + theta_n) / 2)``
  closed by a prescribed ``d_t theta_0``.
* ``toda_evolve``: the explicit two-row Toda recursion, periodic in ``n``.

Every solver returns the full space-time field as a ``GridField``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .domain import Domain, make_domain
from .errors import ConfigError, NumericalError
from .field import AnalyticField, Field, GridField

NLS_METHODS = ("spectral", "cn")
GROWTH_LIMIT = 0.10
SG_BLOWUP = 1e6
TODA_JUMP_LIMIT = 500.0


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    steps: int
    h: float = 0.05
    x_range: tuple[float, float] = (-20.0, 20.0)
    method: str = "spectral"
    boundary: str = "periodic"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"steps must be a positive integer, got {self.steps}")
        if not (np.isfinite(self.h) and self.h > 0):
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.boundary not in ("periodic", "prescribed-edge"):
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")

    @property
    def t_final(self) -> float:
        return self.steps * self.dt


# ------------------------------------------------------------------- NLS


def nls_soliton(x, t):
    """``sech(x) exp(-i t)``."""
    return np.exp(-1j * np.asarray(t)) / np.cosh(np.asarray(x))


def nls_soliton_field(domain: Domain) -> AnalyticField:
    """The soliton as an analytic field on a ``(x, t)`` domain."""
    x, t = domain.continuous_symbols
    return Field.analytic(domain, sp.sech(x) * sp.exp(-sp.I * t))


def periodic_grid(cfg: SolverConfig) -> np.ndarray:
    """Nodes ``a, a + h, ..., b - h`` of the periodic interval ``[a, b)``."""
    a, b = cfg.x_range
    n = int(round((b - a) / cfg.h))
    if n < 4 or not np.isclose(n * cfg.h, b - a):
        raise ConfigError(f"h={cfg.h} does not divide the interval {cfg.x_range}")
    return a + cfg.h * np.arange(n)


def linear_multiplier(n: int, h: float, dt: float, method: str) -> np.ndarray:
    """Fourier multiplier of one linear substep ``u_t = -i u_xx`` over ``dt``."""
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    if method == "spectral":
        return np.exp(1j * k**2 * dt)
    if method == "cn":
        lap = -(4.0 / h**2) * np.sin(k * h / 2) ** 2
        return (1 - 0.5j * dt * lap) / (1 + 0.5j * dt * lap)
    raise ConfigError(f"unknown NLS method {method!r}; expected one of {NLS_METHODS}")


def nls_linear_step(u: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return np.fft.ifft(mult * np.fft.fft(u))


def nls_nonlinear_step(u: np.ndarray, tau: float) -> np.ndarray:
    # |u| is constant along u_t = -2i|u|^2 u
    return u * np.exp(-2j * np.abs(u) ** 2 * tau)


def mass(u: np.ndarray, h: float) -> float:
    return float(np.sum(np.abs(u) ** 2) * h)


def nls_solve(u0, cfg: SolverConfig) -> GridField:
    """Advance ``u0`` (sampled on :func:`periodic_grid`) and return ``u(x, t)``.

    The result lives on a ``(x, t)`` domain with spacings ``(h, dt)``.
    """
    x = periodic_grid(cfg)
    u = np.asarray(u0(x) if callable(u0) else u0, dtype=complex)
    if u.shape != x.shape:
        raise ConfigError(f"initial profile has {u.size} samples, grid has {x.size}")
    mult = linear_multiplier(x.size, cfg.h, cfg.dt, cfg.method)
    out = np.empty((x.size, cfg.steps + 1), dtype=complex)
    out[:, 0] = u
    norm0 = np.linalg.norm(u)
    for step in range(1, cfg.steps + 1):
        u = nls_nonlinear_step(u, cfg.dt / 2)
        u = nls_linear_step(u, mult)
        u = nls_nonlinear_step(u, cfg.dt / 2)
        norm = np.linalg.norm(u)
        if not np.isfinite(norm) or norm > (1 + GROWTH_LIMIT) * norm0 + 1e-300:
            raise NumericalError("NLS solution norm grew beyond 10%", step=step)
        out[:, step] = u
    dom = make_domain(0, 2, [], [(x[0], x[-1]), (0.0, cfg.t_final)], [cfg.h, cfg.dt], ["x", "t"])
    return GridField(dom, out)


# ----------------------------------------------------------- sine-Gordon


def sg_rate(theta: np.ndarray, t: float, gamma: float, drive: Callable, coefficient: float) -> np.ndarray:
    """``d_t theta`` of the whole chain."""
    s = np.sin(0.5 * (theta[1:] + theta[:-1]))
    return drive(t) + coefficient * gamma * np.concatenate(([0.0], np.cumsum(s)))


def sg_integrate(
    theta_init,
    gamma: float,
    cfg: SolverConfig,
    drive: Callable | None = None,
    coefficient: float = 4.0,
) -> GridField:
    """RK4 integration of the chain; returns ``theta_n(t)`` on an ``(n, t)`` domain.

    The field carries the exact ODE right-hand side as its ``t``-derivative.
    """
    theta = np.asarray(theta_init, dtype=float).copy()
    if theta.ndim != 1 or theta.size < 2:
        raise ConfigError("sine-Gordon chain needs at least 2 sites")
    drive = drive or (lambda t: 0.0)

    def rate(y, t):
        return sg_rate(y, t, gamma, drive, coefficient)

    n, dt = theta.size, cfg.dt
    vals = np.empty((n, cfg.steps + 1))
    rates = np.empty_like(vals)
    vals[:, 0], rates[:, 0] = theta, rate(theta, 0.0)
    for step in range(1, cfg.steps + 1):
        t = (step - 1) * dt
        k1 = rates[:, step - 1]
        k2 = rate(theta + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rate(theta + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rate(theta + dt * k3, t + dt)
        theta = theta + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > SG_BLOWUP:
            raise NumericalError("sine-Gordon chain blew up", step=step)
        vals[:, step], rates[:, step] = theta, rate(theta, step * dt)
    dom = make_domain(1, 1, [(0, n - 1)], [(0.0, cfg.t_final)], [dt], ["n", "t"])
    return GridField(dom, vals, jets=[rates])


# ----------------------------------------------------------------- Toda


def toda_step(q_prev: np.ndarray, q_cur: np.ndarray) -> np.ndarray:
    """``q_{m+1} = 2 q_m - q_{m-1} + ln[(e^{q_{n+1} - q_n} + 1) / (e^{q_n - q_{n-1}} + 1)]``."""
    fwd = np.roll(q_cur, -1) - q_cur
    bwd = q_cur - np.roll(q_cur, 1)
    if max(np.max(np.abs(fwd)), np.max(np.abs(bwd))) > TODA_JUMP_LIMIT:
        raise NumericalError("Toda neighbour difference exceeds the overflow guard")
    return 2 * q_cur - q_prev + np.logaddexp(fwd, 0.0) - np.logaddexp(bwd, 0.0)


def toda_evolve(q_row0, q_row1, steps: int) -> GridField:
    """Rows ``m = 0 .. steps + 1`` of ``q_{m,n}``, periodic in ``n``."""
    q0, q1 = np.asarray(q_row0, dtype=float), np.asarray(q_row1, dtype=float)
    if q0.shape != q1.shape or q0.ndim != 1 or q0.size < 2:
        raise ConfigError("Toda seed rows must be 1-d of equal length >= 2")
    if int(steps) != steps or steps < 0:
        raise ConfigError(f"steps must be a non-negative integer, got {steps}")
    rows = [q0, q1]
    for step in range(steps):
        try:
            rows.append(toda_step(rows[-2], rows[-1]))
        except NumericalError as err:
            raise NumericalError(str(err), step=step + 2) from None
    q = np.array(rows)
    dom = make_domain(2, 0, [(0, q.shape[0] - 1), (0, q.shape[1] - 1)], [], [], ["m", "n"])
    return GridField(dom, q)
