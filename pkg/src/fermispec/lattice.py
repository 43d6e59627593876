"""Momentum lattices and the canonical dispersion relations of the Fermi gas.

A :class:`MomentumGrid` is the cube window ``[-cutoff, cutoff]^d`` of the torus
momentum lattice ``(2 pi / L) Z^d``.  Points are kept as integer lattice
coordinates so that momentum addition is exact; the physical momentum is
``coords * spacing``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

__all__ = [
    "MomentumGrid",
    "DispersionRelation",
    "FreeGasConstants",
    "build_grid",
    "free_dispersion",
    "model_dispersion",
    "free_gas_constants",
    "kinetic_energy",
]

# Slack used when converting a cutoff into a number of lattice steps.
_ROUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Finite cube window of the momentum lattice ``(2 pi / L) Z^d``.

    Attributes
    ----------
    d : int
        Spatial dimension.
    L : float
        Box side length.
    cutoff : float
        Largest admitted momentum magnitude per axis.
    nmax : int
        Largest admitted lattice coordinate per axis, ``floor(cutoff / spacing)``.
    """

    d: int
    L: float
    cutoff: float
    nmax: int

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def side(self) -> int:
        """Number of lattice points along one axis."""
        return 2 * self.nmax + 1

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.d

    @property
    def size(self) -> int:
        return self.side ** self.d

    @property
    def volume(self) -> float:
        """Box volume ``L^d``."""
        return float(self.L) ** self.d

    @cached_property
    def coords(self) -> np.ndarray:
        """Integer lattice coordinates, shape ``(size, d)``, lexicographic order."""
        axis = np.arange(-self.nmax, self.nmax + 1)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def points(self) -> np.ndarray:
        """Physical momenta ``coords * spacing``, shape ``(size, d)``."""
        out = self.coords * self.spacing
        out.setflags(write=False)
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared momentum norm at every point."""
        out = np.sum(self.points ** 2, axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def norms(self) -> np.ndarray:
        out = np.sqrt(self.k2)
        out.setflags(write=False)
        return out

    @cached_property
    def neg(self) -> np.ndarray:
        """Index permutation ``k -> -k``; an involution of the point list."""
        out = self.index_of(-self.coords)
        out.setflags(write=False)
        return out

    @property
    def zero_index(self) -> int:
        return (self.size - 1) // 2

    def contains(self, coords) -> np.ndarray:
        """Whether integer coordinates lie inside the window."""
        c = np.asarray(coords)
        return np.all(np.abs(c) <= self.nmax, axis=-1)

    def index_of(self, coords) -> np.ndarray:
        """Flat index of integer coordinates; ``-1`` where outside the window."""
        c = np.asarray(coords, dtype=np.int64)
        inside = np.all(np.abs(c) <= self.nmax, axis=-1)
        shifted = np.where(inside[..., None], c + self.nmax, 0)
        flat = np.ravel_multi_index(tuple(np.moveaxis(shifted, -1, 0)), self.shape)
        return np.where(inside, flat, -1)

    def to_array(self, values) -> np.ndarray:
        """Reshape a flat per-point array into the ``d``-dimensional cube."""
        return np.asarray(values).reshape(self.shape)

    def sub_window(self, nmax: int) -> "MomentumGrid":
        """Concentric grid with the same spacing and a smaller coordinate range."""
        if not 0 < nmax <= self.nmax:
            raise ValueError(f"sub-window nmax={nmax} outside 1..{self.nmax}")
        return MomentumGrid(self.d, self.L, nmax * self.spacing, nmax)

    def restrict(self, values, sub: "MomentumGrid") -> np.ndarray:
        """Take per-point values of this grid at the points of ``sub``."""
        idx = self.index_of(sub.coords)
        if np.any(idx < 0):
            raise ValueError("sub-grid is not contained in this grid")
        return np.asarray(values)[idx]

    def same_lattice(self, other: "MomentumGrid") -> bool:
        return (self.d == other.d and self.nmax == other.nmax
                and self.L == other.L)

    def __eq__(self, other):
        if not isinstance(other, MomentumGrid):
            return NotImplemented
        return self.same_lattice(other)

    def __hash__(self):
        return hash((self.d, self.L, self.nmax))

    def __repr__(self):
        return (f"MomentumGrid(d={self.d}, L={self.L!r}, cutoff={self.cutoff!r}, "
                f"points={self.size})")


@dataclass(frozen=True, eq=False)
class DispersionRelation:
    """Real energy sampled at every point of a grid.

    ``support`` marks the points where the species exists; ``None`` means
    everywhere.  Values outside the support are ignored by consumers.
    """

    grid: MomentumGrid
    values: np.ndarray
    label: Optional[str] = None
    support: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("dispersion values must be finite")
        object.__setattr__(self, "values", vals)
        if self.support is not None:
            mask = np.asarray(self.support, dtype=bool)
            if mask.shape != vals.shape:
                raise ValueError("support mask does not match the grid")
            object.__setattr__(self, "support", mask)

    @property
    def mask(self) -> np.ndarray:
        if self.support is None:
            return np.ones(self.grid.size, dtype=bool)
        return self.support

    def masked_values(self) -> np.ndarray:
        """Values with ``+inf`` outside the support."""
        return np.where(self.mask, self.values, np.inf)

    def is_even(self) -> bool:
        return bool(np.array_equal(self.values, self.values[self.grid.neg]))


@dataclass(frozen=True)
class FreeGasConstants:
    """Vacuum energy and occupied-mode count dropped by the particle-hole transform."""

    ground_energy: float
    occupied_count: int


def build_grid(d: int, L: float, cutoff: float) -> MomentumGrid:
    """Cube window of ``(2 pi / L) Z^d`` with ``|k_i| <= cutoff`` on every axis.

    >>> build_grid(1, 2 * np.pi, 3).points.ravel()
    array([-3., -2., -1.,  0.,  1.,  2.,  3.])
    """
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if not L > 0:
        raise ValueError(f"box length must be positive, got {L}")
    spacing = 2.0 * np.pi / L
    if cutoff < spacing * (1 - _ROUND_SLACK):
        raise ValueError(
            f"cutoff {cutoff} is smaller than the lattice spacing {spacing}")
    nmax = int(np.floor(cutoff / spacing + _ROUND_SLACK))
    return MomentumGrid(int(d), float(L), float(cutoff), nmax)


def free_dispersion(grid: MomentumGrid, mu: float) -> DispersionRelation:
    """Particle-hole dispersion ``| |k|^2 - mu |`` of the free gas."""
    return DispersionRelation(grid, np.abs(grid.k2 - mu), label="free",
                              metadata={"mu": float(mu)})


def model_dispersion(grid: MomentumGrid, mu: float, gamma: float) -> DispersionRelation:
    """Gapped dispersion ``sqrt((|k|^2 - mu)^2 + gamma^2)``."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    xi = grid.k2 - mu
    return DispersionRelation(grid, np.sqrt(xi * xi + gamma * gamma), label="model",
                              metadata={"mu": float(mu), "gamma": float(gamma)})


def kinetic_energy(grid: MomentumGrid, mu: float) -> DispersionRelation:
    """Signed one-particle energy ``|k|^2 - mu`` (not a quasiparticle dispersion)."""
    return DispersionRelation(grid, grid.k2 - mu, label="tau",
                              metadata={"mu": float(mu)})


def free_gas_constants(grid: MomentumGrid, mu: float) -> FreeGasConstants:
    """Constants ``E^L = sum (k^2 - mu)`` and ``C^L = #{k}`` over ``k^2 <= mu``.

    Spinless convention.  Raises if the occupied ball is cut by the window.
    """
    if mu > grid.cutoff ** 2:
        raise ValueError(
            f"mu={mu} exceeds cutoff^2={grid.cutoff ** 2}: occupied shell truncated")
    occ = grid.k2 <= mu
    return FreeGasConstants(float(np.sum(grid.k2[occ] - mu)), int(np.count_nonzero(occ)))
