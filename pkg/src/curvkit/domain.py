"""The semi-discrete box: ``p`` integer lattice directions times ``q`` real directions.

Lattice spacing is always 1. Continuous directions carry a sample step ``h``
which defines the grid used by sampled fields and the evaluation points used
when norms of analytic fields are taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import sympy as sp

from .errors import ConfigError, RegionError

Region = tuple  # tuple[tuple[int, int], ...], inclusive lattice bounds per direction


@dataclass(frozen=True)
class Point:
    lattice: tuple[int, ...]
    continuous: tuple[float, ...]


@dataclass(frozen=True)
class Domain:
    lattice_extents: tuple[tuple[int, int], ...]
    continuous_ranges: tuple[tuple[float, float], ...]
    spacings: tuple[float, ...]
    lattice_names: tuple[str, ...]
    continuous_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return len(self.lattice_extents)

    @property
    def q(self) -> int:
        return len(self.continuous_ranges)

    @property
    def full_region(self) -> Region:
        return self.lattice_extents

    @cached_property
    def grids(self) -> tuple[np.ndarray, ...]:
        out = []
        for (a, _), h, m in zip(self.continuous_ranges, self.spacings, self.continuous_sizes):
            out.append(a + h * np.arange(m))
        return tuple(out)

    @cached_property
    def continuous_sizes(self) -> tuple[int, ...]:
        return tuple(
            int(round((b - a) / h)) + 1 for (a, b), h in zip(self.continuous_ranges, self.spacings)
        )

    @cached_property
    def lattice_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(name, integer=True) for name in self.lattice_names)

    @cached_property
    def continuous_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(name, real=True) for name in self.continuous_names)

    @property
    def symbols(self) -> tuple[sp.Symbol, ...]:
        return self.lattice_symbols + self.continuous_symbols

    def region_shape(self, region: Region) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in region)

    def sample_shape(self, region: Region) -> tuple[int, ...]:
        return self.region_shape(region) + self.continuous_sizes

    def cell_volume(self) -> float:
        return float(np.prod(self.spacings)) if self.q else 1.0

    def contains(self, point: Point, region: Region | None = None) -> bool:
        region = self.full_region if region is None else region
        if len(point.lattice) != self.p or len(point.continuous) != self.q:
            return False
        if any(not lo <= n <= hi for n, (lo, hi) in zip(point.lattice, region)):
            return False
        return all(a <= x <= b for x, (a, b) in zip(point.continuous, self.continuous_ranges))

    def node_index(self, i: int, x: float) -> int:
        """Index of the grid node at coordinate ``x`` in direction ``i``."""
        a, _ = self.continuous_ranges[i]
        h = self.spacings[i]
        k = int(round((x - a) / h))
        if not 0 <= k < self.continuous_sizes[i] or abs(a + k * h - x) > 1e-9 * max(1.0, abs(h)):
            raise RegionError(f"{self.continuous_names[i]}={x} is not a grid node")
        return k

    def describe(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "lattice": [
                {"name": nm, "min": lo, "max": hi}
                for nm, (lo, hi) in zip(self.lattice_names, self.lattice_extents)
            ],
            "continuous": [
                {"name": nm, "min": a, "max": b, "h": h, "samples": m}
                for nm, (a, b), h, m in zip(
                    self.continuous_names, self.continuous_ranges, self.spacings, self.continuous_sizes
                )
            ],
        }


def _default_names(prefix: str, count: int) -> tuple[str, ...]:
    if count == 1:
        return (prefix,)
    return tuple(f"{prefix}{k + 1}" for k in range(count))


def make_domain(
    p: int,
    q: int,
    lattice_extents: Sequence[Sequence[int]] = (),
    continuous_ranges: Sequence[Sequence[float]] = (),
    spacings: Sequence[float] = (),
    names: Sequence[str] | None = None,
) -> Domain:
    """Build and validate a :class:`Domain`.

    ``names`` lists the lattice names followed by the continuous names; the
    defaults are ``n``/``n1..np`` and ``x``/``x1..xq``.

    >>> make_domain(1, 1, [(0, 63)], [(0.0, 10.0)], [0.05]).continuous_sizes
    (201,)
    """
    if p < 0 or q < 0 or p + q < 1:
        raise ConfigError(f"need p >= 0, q >= 0 and p + q >= 1, got p={p}, q={q}")
    if len(lattice_extents) != p:
        raise ConfigError(f"expected {p} lattice extents, got {len(lattice_extents)}")
    if len(continuous_ranges) != q or len(spacings) != q:
        raise ConfigError(
            f"expected {q} continuous ranges and spacings, got {len(continuous_ranges)} and {len(spacings)}"
        )
    extents = []
    for lo, hi in lattice_extents:
        if int(lo) != lo or int(hi) != hi:
            raise ConfigError(f"lattice extent [{lo}, {hi}] is not integral")
        if hi < lo:
            raise ConfigError(f"empty lattice extent [{lo}, {hi}]")
        extents.append((int(lo), int(hi)))
    ranges = []
    for (a, b), h in zip(continuous_ranges, spacings):
        a, b, h = float(a), float(b), float(h)
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(h)):
            raise ConfigError("continuous range and spacing must be finite")
        if h <= 0:
            raise ConfigError(f"spacing must be positive, got {h}")
        if b < a:
            raise ConfigError(f"empty continuous range [{a}, {b}]")
        steps = (b - a) / h
        if abs(steps - round(steps)) > 1e-6:
            raise ConfigError(f"range [{a}, {b}] is not a whole number of steps h={h}")
        ranges.append((a, b))
    if names is None:
        names = _default_names("n", p) + _default_names("x", q)
    names = tuple(names)
    if len(names) != p + q or len(set(names)) != p + q:
        raise ConfigError(f"need {p + q} distinct direction names, got {names}")
    return Domain(tuple(extents), tuple(ranges), tuple(float(h) for h in spacings), names[:p], names[p:])


def intersect_regions(a: Region, b: Region) -> Region:
    out = tuple((max(lo1, lo2), min(hi1, hi2)) for (lo1, hi1), (lo2, hi2) in zip(a, b))
    if any(hi < lo for lo, hi in out):
        raise RegionError(f"empty intersection of regions {a} and {b}")
    return out


def region_size(region: Region) -> int:
    return int(np.prod([hi - lo + 1 for lo, hi in region])) if region else 1
