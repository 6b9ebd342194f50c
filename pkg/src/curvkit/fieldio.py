"""Grid-field files.

Binary (``.cvf``)::

    b"CVKF" | uint32 little-endian header length | JSON header | float64 LE payload

The payload is the sample array in row-major order (lattice axes, then
continuous axes, then matrix entries) with real and imaginary parts
interleaved, followed by one block of the same layout per stored jet.

CSV: ``#``-prefixed ``key=value`` header lines, one column-name line, then
one row per sample point: lattice coordinates, continuous coordinates, and
``re,im`` pairs per entry. Floats are written with 17 significant digits, so
a round trip reproduces the samples bit for bit. Jets are not written to CSV.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .domain import Domain, make_domain
from .errors import ConfigError
from .field import Field, GridField

MAGIC = b"CVKF"


def _header(f: GridField) -> dict:
    d = f.domain
    return {
        "format": "curvkit-field",
        "version": 1,
        "p": d.p,
        "q": d.q,
        "lattice_extents": [list(e) for e in d.lattice_extents],
        "continuous_ranges": [list(r) for r in d.continuous_ranges],
        "spacings": list(d.spacings),
        "names": list(d.lattice_names + d.continuous_names),
        "region": [list(r) for r in f.region],
        "shape": list(f.shape),
        "margins": list(f.margins),
        "jets": [j is not None for j in f.jets],
    }


def _domain_from_header(h: dict) -> Domain:
    return make_domain(
        h["p"], h["q"], h["lattice_extents"], h["continuous_ranges"], h["spacings"], h["names"]
    )


def write_field(f: Field, path: str | Path) -> Path:
    path = Path(path)
    g = f.to_grid()
    header = json.dumps(_header(g), sort_keys=True).encode()
    blocks = [g.data] + [j for j in g.jets if j is not None]
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype="<c16").view("<f8").tobytes())
    return path


def read_field(path: str | Path) -> GridField:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ConfigError(f"{path} is not a curvkit field file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    h = json.loads(raw[8 : 8 + hlen])
    dom = _domain_from_header(h)
    region = tuple(tuple(r) for r in h["region"])
    full = dom.sample_shape(region) + tuple(h["shape"])
    count = int(np.prod(full))
    payload = np.frombuffer(raw[8 + hlen :], dtype="<f8")
    nblocks = 1 + sum(h["jets"])
    if payload.size != 2 * count * nblocks:
        raise ConfigError(f"{path}: payload size does not match header")
    blocks = [payload[2 * count * k : 2 * count * (k + 1)].view("<c16").reshape(full).copy() for k in range(nblocks)]
    data, rest = blocks[0], iter(blocks[1:])
    jets = [next(rest) if has else None for has in h["jets"]]
    return GridField(dom, data, region, jets, h["margins"])


def write_csv(f: Field, path_or_buffer) -> None:
    g = f.to_grid()
    d = g.domain
    h = _header(g)
    lines = [f"# {k}={json.dumps(h[k])}" for k in sorted(h) if k != "jets"]
    entries = [""] if not g.shape else [f"[{r}{c}]" for r in range(g.shape[0]) for c in range(g.shape[1])]
    cols = list(d.lattice_names) + list(d.continuous_names)
    cols += [f"{part}{e}" for e in entries for part in ("re", "im")]
    lines.append(",".join(cols))
    region_axes = [np.arange(lo, hi + 1) for lo, hi in g.region]
    axes = region_axes + list(d.grids)
    mesh = np.meshgrid(*axes, indexing="ij") if axes else []
    coords = [m.reshape(-1) for m in mesh]
    npts = coords[0].size if coords else 1
    vals = g.data.reshape(npts, -1)
    table = np.empty((npts, len(coords) + 2 * vals.shape[1]))
    for k, c in enumerate(coords):
        table[:, k] = c
    table[:, len(coords) :: 2] = vals.real
    table[:, len(coords) + 1 :: 2] = vals.imag
    buf = io.StringIO()
    np.savetxt(buf, table, fmt="%.17g", delimiter=",")
    text = "\n".join(lines) + "\n" + buf.getvalue()
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        Path(path_or_buffer).write_text(text)


def read_csv(path_or_buffer) -> GridField:
    text = path_or_buffer.read() if hasattr(path_or_buffer, "read") else Path(path_or_buffer).read_text()
    header = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, value = lines[k][1:].strip().partition("=")
        header[key] = json.loads(value)
        k += 1
    if header.get("format") != "curvkit-field":
        raise ConfigError("not a curvkit field CSV")
    dom = _domain_from_header(header)
    region = tuple(tuple(r) for r in header["region"])
    shape = tuple(header["shape"])
    body = "\n".join(lines[k + 1 :])
    table = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    ncoord = dom.p + dom.q
    vals = table[:, ncoord::2] + 1j * table[:, ncoord + 1 :: 2]
    data = vals.reshape(dom.sample_shape(region) + shape)
    return GridField(dom, data, region, None, header["margins"])
