"""Min-plus calculus for the bottom of quasiparticle excitation spectra.

Every function here works on values sampled over a :class:`MomentumGrid`.
Momentum addition is exact integer arithmetic on lattice coordinates; a sum
that leaves the cube window is dropped, so on a finite window all envelopes
are upper bounds for their infinite-lattice counterparts.

Window semantics
----------------
A composition of quasiparticles is *admissible* when the constituents and
every intermediate sum of some binary composition tree lie in the window.
This is exactly what the fixed point of ``h -> min(h, h (+) h)`` sees, which
keeps the windowed hull subadditive and idempotent.  In ``d = 1`` any multiset
whose constituents and total lie in the window is admissible, so there the
windowed hull is also the plain multiset minimum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .lattice import DispersionRelation, MomentumGrid

__all__ = [
    "SECTORS",
    "SpectrumEnvelope",
    "SpectrumSummary",
    "SpectrumRegion",
    "species_min",
    "minplus_convolve",
    "subadditive_hull",
    "sector_hulls",
    "essential_hull",
    "combine_sector_ess",
    "gap_and_cvel",
    "brute_force_hull",
    "region_raster",
]

SECTORS = ("full", "even", "odd", "essential_full", "essential_even", "essential_odd")

MAX_HULL_POINTS = 100_000
ORACLE_LIMIT = 10 ** 8
_MAX_ROUNDS = 10_000


@dataclass(frozen=True, eq=False)
class SpectrumEnvelope:
    """Lower envelope of an excitation spectrum; ``+inf`` marks unreachable momenta."""

    grid: MomentumGrid
    values: np.ndarray
    sector: str = "full"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values, got shape {vals.shape}")
        if np.any(np.isnan(vals)) or np.any(vals == -np.inf):
            raise ValueError("envelope values must be finite or +inf")
        if self.sector not in SECTORS:
            raise ValueError(f"unknown sector tag {self.sector!r}")
        object.__setattr__(self, "values", vals)

    def at(self, k) -> float:
        """Value at a physical momentum that must be a lattice point of the grid."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        c = np.rint(k / self.grid.spacing).astype(np.int64)
        if not np.allclose(c * self.grid.spacing, k, atol=1e-9):
            raise ValueError(f"{k} is not a lattice momentum")
        idx = int(self.grid.index_of(c))
        if idx < 0:
            raise ValueError(f"{k} lies outside the window")
        return float(self.values[idx])

    def restricted(self, sub: MomentumGrid) -> "SpectrumEnvelope":
        return SpectrumEnvelope(sub, self.grid.restrict(self.values, sub), self.sector)


@dataclass(frozen=True)
class SpectrumSummary:
    """Energy gap and critical velocity of an envelope with the attaining momenta."""

    gap: float
    critical_velocity: float
    argmin_gap: np.ndarray
    argmin_cvel: Optional[np.ndarray]


@dataclass(frozen=True, eq=False)
class SpectrumRegion:
    """Boolean (momentum x energy) raster of an excitation-spectrum set.

    ``momenta`` are the signed coordinates along the first axis of the points
    in ``indices``; ``curves`` holds ``(values, style)`` pairs with style
    ``"solid"`` (part of the set) or ``"dotted"`` (overlay only).
    """

    grid: MomentumGrid
    indices: np.ndarray
    momenta: np.ndarray
    energy_axis: np.ndarray
    membership: np.ndarray
    lower_boundary: np.ndarray
    curves: list = field(default_factory=list)
    title: str = ""


# ---------------------------------------------------------------------------
# core min-plus kernel
# ---------------------------------------------------------------------------

def _shift_slices(offset, n: int, nmax: int):
    """Source/destination slices adding a lattice offset inside a cube of side n."""
    src, dst = [], []
    for o in offset:
        o = int(o)
        if abs(o) > 2 * nmax:
            return None
        if o >= 0:
            src.append(slice(0, n - o))
            dst.append(slice(o, n))
        else:
            src.append(slice(-o, n))
            dst.append(slice(0, n + o))
    return tuple(src), tuple(dst)


def _minplus(grid: MomentumGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[k] = min over k1 + k2 = k (all in window) of a[k1] + b[k2]``."""
    A = np.asarray(a, dtype=float).reshape(grid.shape)
    out = np.full(grid.shape, np.inf)
    b = np.asarray(b, dtype=float)
    n = grid.side
    for j in np.flatnonzero(np.isfinite(b)):
        sl = _shift_slices(grid.coords[j], n, grid.nmax)
        if sl is None:
            continue
        src, dst = sl
        view = out[dst]
        np.minimum(view, A[src] + b[j], out=view)
    return out.ravel()


def _check_same_grid(*grids: MomentumGrid):
    first = grids[0]
    for g in grids[1:]:
        if not first.same_lattice(g):
            raise ValueError("operands live on different grids")


def _check_hull_size(grid: MomentumGrid):
    if grid.size > MAX_HULL_POINTS:
        raise ValueError(
            f"grid has {grid.size} points; hull operations are limited to "
            f"{MAX_HULL_POINTS}")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def species_min(dispersions: Sequence[DispersionRelation]) -> DispersionRelation:
    """Pointwise lowest dispersion over the species present at each momentum."""
    if not dispersions:
        raise ValueError("need at least one dispersion relation")
    grid = dispersions[0].grid
    _check_same_grid(*(w.grid for w in dispersions))
    stacked = np.stack([w.masked_values() for w in dispersions])
    low = stacked.min(axis=0)
    uncovered = ~np.isfinite(low)
    if np.any(uncovered):
        bad = grid.points[np.flatnonzero(uncovered)[0]]
        raise ValueError(f"momentum {bad} is covered by no species")
    return DispersionRelation(grid, low, label="omega_min")


def minplus_convolve(f: SpectrumEnvelope, g: SpectrumEnvelope,
                     sector: Optional[str] = None) -> SpectrumEnvelope:
    """Infimal convolution ``(f (+) g)(k) = min_{k1 + k2 = k} f(k1) + g(k2)``.

    Only pairs whose constituents and sum lie in the window contribute; momenta
    with no admissible pair get ``+inf``.
    """
    _check_same_grid(f.grid, g.grid)
    return SpectrumEnvelope(f.grid, _minplus(f.grid, f.values, g.values),
                            sector or f.sector)


def _omega_values(omega) -> tuple:
    if isinstance(omega, DispersionRelation):
        grid, w = omega.grid, omega.masked_values()
    elif isinstance(omega, SpectrumEnvelope):
        grid, w = omega.grid, omega.values
    else:
        raise TypeError("expected a DispersionRelation or SpectrumEnvelope")
    if np.any(w < 0):
        raise ValueError("dispersion has negative values; the hull is unbounded below")
    return grid, w


def _fixed_point_full(grid, w):
    h = w.copy()
    for _ in range(_MAX_ROUNDS):
        new = np.minimum(h, _minplus(grid, h, h))
        if np.array_equal(new, h):
            return h
        h = new
    raise RuntimeError("hull iteration did not reach a fixed point")


def _fixed_point_parity(grid, w):
    """Relax the (parity x momentum) product graph until nothing improves."""
    odd = w.copy()
    even = _minplus(grid, odd, odd)
    for _ in range(_MAX_ROUNDS):
        new_odd = np.minimum(odd, _minplus(grid, odd, even))
        new_even = np.minimum(even, np.minimum(_minplus(grid, new_odd, new_odd),
                                               _minplus(grid, even, even)))
        if np.array_equal(new_odd, odd) and np.array_equal(new_even, even):
            return even, odd
        odd, even = new_odd, new_even
    raise RuntimeError("parity hull iteration did not reach a fixed point")


def _report(env: SpectrumEnvelope, mode: str) -> SpectrumEnvelope:
    if mode == "windowed":
        return env
    if mode == "reporting":
        inner = max(1, env.grid.nmax // 2)
        return env.restricted(env.grid.sub_window(inner))
    raise ValueError(f"unknown window mode {mode!r}")


def subadditive_hull(omega, parity: Optional[str] = None,
                     mode: str = "windowed") -> SpectrumEnvelope:
    """Bottom of the excitation spectrum generated by a non-negative dispersion.

    Parameters
    ----------
    omega : DispersionRelation or SpectrumEnvelope
        Quasiparticle energies; points outside a species support are ``+inf``.
    parity : {None, "even", "odd"}
        ``None`` gives the subadditive hull over all quasiparticle numbers.
        ``"odd"`` restricts to odd numbers; ``"even"`` to even numbers >= 2,
        so the vacuum is never counted.
    mode : {"windowed", "reporting"}
        ``"reporting"`` returns only the inner half window, where boundary
        truncation has the least influence.
    """
    grid, w = _omega_values(omega)
    _check_hull_size(grid)
    if parity is None:
        env = SpectrumEnvelope(grid, _fixed_point_full(grid, w), "full")
    elif parity in ("even", "odd"):
        even, odd = _fixed_point_parity(grid, w)
        env = SpectrumEnvelope(grid, even if parity == "even" else odd, parity)
    else:
        raise ValueError(f"parity must be None, 'even' or 'odd', got {parity!r}")
    return _report(env, mode)


def sector_hulls(omega, mode: str = "windowed") -> dict:
    """All six envelopes: ``full``, ``even``, ``odd`` and their essential parts."""
    grid, w = _omega_values(omega)
    _check_hull_size(grid)
    even_v, odd_v = _fixed_point_parity(grid, w)
    even = SpectrumEnvelope(grid, even_v, "even")
    odd = SpectrumEnvelope(grid, odd_v, "odd")
    full = SpectrumEnvelope(grid, np.minimum(even_v, odd_v), "full")
    ess_even, ess_odd = combine_sector_ess(even, odd)
    ess_full = SpectrumEnvelope(grid, np.minimum(ess_even.values, ess_odd.values),
                                "essential_full")
    out = {"full": full, "even": even, "odd": odd, "essential_full": ess_full,
           "essential_even": ess_even, "essential_odd": ess_odd}
    return {k: _report(v, mode) for k, v in out.items()}


def essential_hull(envelope_full: SpectrumEnvelope) -> SpectrumEnvelope:
    """Two-or-more quasiparticle bottom ``eps (+) eps`` of a full-sector envelope."""
    if envelope_full.sector != "full":
        raise ValueError("essential_hull expects a 'full' envelope")
    return minplus_convolve(envelope_full, envelope_full, "essential_full")


def combine_sector_ess(even: SpectrumEnvelope, odd: SpectrumEnvelope):
    """Essential envelopes of both sectors from the sector bottoms.

    Returns ``(ess_even, ess_odd)`` with ``ess_odd = odd (+) even`` and
    ``ess_even = min(even (+) even, odd (+) odd)``.
    """
    _check_same_grid(even.grid, odd.grid)
    if even.sector != "even" or odd.sector != "odd":
        raise ValueError("expected envelopes tagged 'even' and 'odd'")
    grid = even.grid
    ess_odd = _minplus(grid, odd.values, even.values)
    ess_even = np.minimum(_minplus(grid, even.values, even.values),
                          _minplus(grid, odd.values, odd.values))
    return (SpectrumEnvelope(grid, ess_even, "essential_even"),
            SpectrumEnvelope(grid, ess_odd, "essential_odd"))


def gap_and_cvel(envelope: SpectrumEnvelope) -> SpectrumSummary:
    """Energy gap and critical velocity ``min_{k != 0} value(k) / |k|``.

    Ties go to the lexicographically smallest momentum.
    """
    vals = envelope.values
    if not np.any(np.isfinite(vals)):
        raise ValueError("envelope is +inf everywhere")
    grid = envelope.grid
    i_gap = int(np.argmin(vals))
    nonzero = grid.norms > 0
    ratio = np.full(grid.size, np.inf)
    ratio[nonzero] = vals[nonzero] / grid.norms[nonzero]
    if np.any(np.isfinite(ratio)):
        i_cv = int(np.argmin(ratio))
        cvel, arg_cv = float(ratio[i_cv]), grid.points[i_cv].copy()
    else:
        cvel, arg_cv = float("inf"), None
    return SpectrumSummary(float(vals[i_gap]), cvel, grid.points[i_gap].copy(), arg_cv)


def _parity_ok(n: int, parity: Optional[str]) -> bool:
    if parity is None:
        return True
    if parity == "odd":
        return n % 2 == 1
    if parity == "even":
        return n % 2 == 0
    raise ValueError(f"parity must be None, 'even' or 'odd', got {parity!r}")


def multiset_count(n_points: int, n_max: int) -> int:
    """Number of multisets of size 1..n_max drawn from n_points constituents."""
    return sum(math.comb(n_points + n - 1, n) for n in range(1, n_max + 1))


def brute_force_hull(omega, n_max: int, parity: Optional[str] = None,
                     windowed: bool = True) -> SpectrumEnvelope:
    """Exhaustive minimum over quasiparticle compositions of size 1..n_max.

    With ``windowed=True`` the search runs over every composition tree of
    exactly ``n`` quasiparticles, layer by layer in ``n``, with the window
    rule described in the module docstring.  With ``windowed=False`` every
    multiset of supported constituents is enumerated explicitly and summed
    without any window on intermediate sums; this explicit route is refused
    above ``ORACLE_LIMIT`` multisets.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    grid, w = _omega_values(omega)
    sector = parity or "full"
    if windowed:
        layers = {1: w.copy()}
        for n in range(2, n_max + 1):
            best = np.full(grid.size, np.inf)
            for a in range(1, n // 2 + 1):
                best = np.minimum(best, _minplus(grid, layers[a], layers[n - a]))
            layers[n] = best
        out = np.full(grid.size, np.inf)
        for n, layer in layers.items():
            if _parity_ok(n, parity):
                out = np.minimum(out, layer)
        return SpectrumEnvelope(grid, out, sector)
    return _enumerate_multisets(grid, w, n_max, parity, sector)


def _enumerate_multisets(grid, w, n_max, parity, sector, chunk=200_000):
    support = np.flatnonzero(np.isfinite(w))
    total = multiset_count(len(support), n_max)
    if total > ORACLE_LIMIT:
        raise ValueError(
            f"brute-force oracle refused: {total} multisets exceed {ORACLE_LIMIT}")
    coords = grid.coords[support]
    costs = w[support]
    out = np.full(grid.size, np.inf)
    for n in range(1, n_max + 1):
        if not _parity_ok(n, parity):
            continue
        combos = itertools.combinations_with_replacement(range(len(support)), n)
        while True:
            block = np.fromiter(itertools.chain.from_iterable(
                itertools.islice(combos, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            block = block.reshape(-1, n)
            ksum = coords[block].sum(axis=1)
            csum = costs[block].sum(axis=1)
            idx = grid.index_of(ksum)
            keep = idx >= 0
            np.minimum.at(out, idx[keep], csum[keep])
    return SpectrumEnvelope(grid, out, sector)


def axis_indices(grid: MomentumGrid) -> np.ndarray:
    """Indices of the points on the first momentum axis (other coordinates 0)."""
    on_axis = np.all(grid.coords[:, 1:] == 0, axis=1)
    return np.flatnonzero(on_axis)


def region_raster(essential: SpectrumEnvelope, curves: Iterable = (),
                  energy_max: float = 4.0, energy_steps: int = 200,
                  title: str = "") -> SpectrumRegion:
    """Rasterize an excitation-spectrum set along the first momentum axis.

    A cell ``(k, e)`` belongs to the set when ``e >= essential(k)`` or when
    ``e`` is within half an energy step of a ``"solid"`` curve at ``k``.
    ``curves`` is an iterable of ``(values, style)`` with per-grid-point
    values (a :class:`DispersionRelation` or an array).
    """
    if energy_max <= 0:
        raise ValueError("energy_max must be positive")
    if energy_steps < 2:
        raise ValueError("need at least two energy samples")
    grid = essential.grid
    idx = axis_indices(grid)
    momenta = grid.points[idx, 0].copy()
    energy = np.linspace(0.0, energy_max, energy_steps)
    half = 0.5 * (energy[1] - energy[0])
    lower = essential.values[idx]
    member = energy[None, :] >= lower[:, None]
    kept = []
    for values, style in curves:
        if style not in ("solid", "dotted"):
            raise ValueError(f"unknown curve style {style!r}")
        v = values.values if isinstance(values, DispersionRelation) else np.asarray(values)
        v = np.asarray(v, dtype=float)[idx]
        if style == "solid":
            member |= np.abs(energy[None, :] - v[:, None]) <= half
        kept.append((v, style))
    return SpectrumRegion(grid, idx, momenta, energy, member, lower, kept, title)
