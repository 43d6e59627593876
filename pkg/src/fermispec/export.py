"""Deterministic CSV and JSON serialization of grids, envelopes and spectra.

Floats are written with ``repr`` (shortest round-trip decimal), infinities
as ``inf``, lines end in LF and JSON keys are sorted, so identical inputs
produce byte-identical files and every CSV reads back into bit-equal values.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .lattice import DispersionRelation, MomentumGrid
from .quasispectrum import SpectrumEnvelope

__all__ = [
    "fmt_float",
    "parse_float",
    "momentum_columns",
    "write_envelope_csv",
    "read_envelope_csv",
    "write_dispersion_csv",
    "read_dispersion_csv",
    "write_bottoms_csv",
    "to_jsonable",
    "write_json",
    "read_json",
    "grid_metadata",
    "envelope_json",
    "blocks_json",
]

_AXES = ("kx", "ky", "kz")


def fmt_float(x) -> str:
    """Shortest round-trip decimal of ``x``; ``inf``, ``-inf`` or ``nan`` otherwise."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0.0"  # drops the sign of -0.0 so outputs do not depend on it
    return repr(x)


def parse_float(s: str) -> float:
    return float(s)


def momentum_columns(d: int) -> list:
    return list(_AXES[:d])


def _momentum_strings(grid: MomentumGrid) -> list:
    return [[fmt_float(c * grid.spacing) for c in row] for row in grid.coords.tolist()]


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_envelope_csv(path, envelope: SpectrumEnvelope) -> None:
    """Columns ``kx[, ky, kz], value, sector``; one row per grid point."""
    grid = envelope.grid
    header = momentum_columns(grid.d) + ["value", "sector"]
    rows = [k + [fmt_float(v), envelope.sector]
            for k, v in zip(_momentum_strings(grid), envelope.values)]
    _write_rows(path, header, rows)


def _split_table(path, n_tail):
    header, rows = _read_rows(path)
    d = len(header) - n_tail
    if d not in (1, 2, 3) or header[:d] != momentum_columns(d):
        raise ValueError(f"{path}: unexpected header {header}")
    k = np.array([[parse_float(x) for x in r[:d]] for r in rows], dtype=float).reshape(-1, d)
    return header, rows, d, k


def read_envelope_csv(path) -> dict:
    """Return ``{"momenta": (n, d) array, "values": (n,) array, "sectors": list}``."""
    _, rows, d, k = _split_table(path, 2)
    return {
        "momenta": k,
        "values": np.array([parse_float(r[d]) for r in rows], dtype=float),
        "sectors": [r[d + 1] for r in rows],
    }


def write_dispersion_csv(path, disp: DispersionRelation) -> None:
    """Columns ``kx[, ky, kz], value, label``; usable as a hull input."""
    header = momentum_columns(disp.grid.d) + ["value", "label"]
    label = disp.label or ""
    rows = [k + [fmt_float(v), label]
            for k, v in zip(_momentum_strings(disp.grid), disp.values)]
    _write_rows(path, header, rows)


def read_dispersion_csv(path, grid: MomentumGrid) -> DispersionRelation:
    """Read a dispersion written for ``grid``; momenta must match its points."""
    _, rows, d, k = _split_table(path, 2)
    if d != grid.d or k.shape[0] != grid.size or not np.allclose(k, grid.points, atol=1e-12):
        raise ValueError(f"{path}: momenta do not match the grid")
    values = np.array([parse_float(r[d]) for r in rows], dtype=float)
    label = rows[0][d + 1] if rows else None
    return DispersionRelation(grid, values, label=label or None)


def write_bottoms_csv(path, grid: MomentumGrid, bottoms: dict, sector: str) -> None:
    """Exact-diagonalization ``eps^{L,+-}`` in the envelope CSV layout.

    Grid points without a block are written as ``inf``.
    """
    values = np.array([bottoms.get(tuple(c), math.inf) for c in grid.coords.tolist()])
    write_envelope_csv(path, SpectrumEnvelope(grid, values, sector))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt_float(x)
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def grid_metadata(grid: MomentumGrid) -> dict:
    return {"d": grid.d, "L": grid.L, "cutoff": grid.cutoff, "nmax": grid.nmax,
            "spacing": grid.spacing, "points": grid.size}


def envelope_json(envelopes: Iterable[SpectrumEnvelope]) -> dict:
    """Grid metadata plus one value array per sector (shared grid required)."""
    envelopes = list(envelopes)
    grid = envelopes[0].grid
    return {
        "grid": grid_metadata(grid),
        "coords": grid.coords,
        "sectors": {e.sector: e.values for e in envelopes},
    }


def blocks_json(blocks, extra: Optional[dict] = None) -> dict:
    """Sorted eigenvalues keyed by ``"K=<coords>;parity=<+-1>;n=<N>"``."""
    out = {}
    for b in blocks:
        K = ",".join(str(x) for x in b.total_momentum)
        key = f"K={K};parity={b.parity:+d};n={b.particle_number}"
        out[key] = b.eigenvalues
    doc = {"blocks": out}
    if extra:
        doc.update(extra)
    return doc
