"""Exact diagonalization of the grand-canonical spin-1/2 Fermi gas on a few momenta.

The Hamiltonian on the mode set ``{(k, spin)}`` is::

    H = sum_{k,s} tau(k) a*_{k s} a_{k s}
        + 1/(2 L^d) sum_{k1+k2=k3+k4} q(k1,k2,k3,k4) a*_{k1 i} a*_{k2 j} a_{k3 j} a_{k4 i}

with all four momenta inside the window.  A local potential enters through
``q(k1,k2,k3,k4) = V(k1 - k4)``.  Fock states are bit masks, with mode
``(k_index, spin)`` at bit ``2 * k_index + spin`` (spin up = 0).  Total
momentum is the exact lattice sum (no folding), so a block may sit outside
the window even though every occupied mode lies inside it.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .lattice import DispersionRelation, MomentumGrid

__all__ = [
    "MAX_BITS",
    "ModeGuardError",
    "ModeSet",
    "Interaction",
    "SectorBlock",
    "FiniteVolumeSpectrum",
    "GroundState",
    "local_interaction",
    "kernel_interaction",
    "fock_hamiltonian",
    "build_blocks",
    "ground_energy",
    "excitation_bottoms",
    "shells",
    "finite_volume_spectrum",
    "parity_momentum_check",
]

log = logging.getLogger(__name__)

MAX_BITS = 16
DEGENERACY_TOL = 1e-10


class ModeGuardError(ValueError):
    """The requested mode set exceeds the Fock-space size limit."""


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Spin-1/2 single-particle modes over the points of a small grid."""

    grid: MomentumGrid
    spin_dim: int = 2

    def __post_init__(self):
        if self.spin_dim != 2:
            raise ValueError("only spin 1/2 is supported")
        if self.n_bits > MAX_BITS:
            raise ModeGuardError(
                f"mode set needs {self.n_bits} bits (2 x {self.grid.size} momenta); "
                f"the limit is {MAX_BITS}")

    @property
    def n_bits(self) -> int:
        return self.spin_dim * self.grid.size

    def bit(self, k_index: int, spin: int) -> int:
        return self.spin_dim * k_index + spin

    def mode_coords(self) -> np.ndarray:
        """Integer momentum of every bit, shape ``(n_bits, d)``."""
        return np.repeat(self.grid.coords, self.spin_dim, axis=0)


@dataclass(frozen=True)
class Interaction:
    """Two-body term as a list of ``(m1, m2, m3, m4, coefficient)``.

    The coefficient already contains ``1/(2 L^d)``; the operator is
    ``coef * a*_{m1} a*_{m2} a_{m3} a_{m4}``.
    """

    terms: tuple
    descriptor: dict = field(default_factory=dict)


def kernel_interaction(modes: ModeSet, q: Callable, descriptor: Optional[dict] = None) -> Interaction:
    """Spin-independent interaction from a momentum kernel ``q(k1, k2, k3, k4)``.

    ``q`` receives physical momentum vectors and is only evaluated on
    momentum-conserving quadruples ``k1 + k2 = k3 + k4``.
    """
    grid = modes.grid
    c = grid.coords
    p = grid.points
    pref = 0.5 / grid.volume
    terms = []
    n = grid.size
    for i1, i2, i3 in itertools.product(range(n), repeat=3):
        c4 = c[i1] + c[i2] - c[i3]
        i4 = int(grid.index_of(c4))
        if i4 < 0:
            continue
        val = float(q(p[i1], p[i2], p[i3], p[i4]))
        if val == 0.0:
            continue
        for si, sj in itertools.product(range(modes.spin_dim), repeat=2):
            terms.append((modes.bit(i1, si), modes.bit(i2, sj), modes.bit(i3, sj),
                          modes.bit(i4, si), pref * val))
    return Interaction(tuple(terms), dict(descriptor or {"interaction": "kernel"}))


def local_interaction(modes: ModeSet, vhat: Callable) -> Interaction:
    """Interaction of a local potential with Fourier transform ``vhat``."""
    def q(k1, k2, k3, k4):
        return float(np.asarray(vhat(np.asarray(k1 - k4)[None, :])).ravel()[0])
    desc = dict(getattr(vhat, "descriptor", {"potential": "callable"}))
    return kernel_interaction(modes, q, desc)


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


def _apply_annihilate(states, sign, alive, m):
    bit = np.uint64(1) << np.uint64(m)
    occupied = (states & bit) != 0
    alive = alive & occupied
    below = states & (bit - np.uint64(1))
    sign = np.where(_popcount(below) % 2 == 1, -sign, sign)
    return states ^ bit, sign, alive


def _apply_create(states, sign, alive, m):
    bit = np.uint64(1) << np.uint64(m)
    empty = (states & bit) == 0
    alive = alive & empty
    below = states & (bit - np.uint64(1))
    sign = np.where(_popcount(below) % 2 == 1, -sign, sign)
    return states ^ bit, sign, alive


def _matrix_elements(modes: ModeSet, tau: DispersionRelation,
                     interaction: Optional[Interaction]):
    """COO triplets ``(row, col, value)`` of ``H`` on the full Fock space."""
    dim = 1 << modes.n_bits
    states = np.arange(dim, dtype=np.uint64)
    rows, cols, vals = [], [], []
    # one-body part is diagonal
    diag = np.zeros(dim)
    for m in range(modes.n_bits):
        e = tau.values[m // modes.spin_dim]
        diag += e * ((states >> np.uint64(m)) & np.uint64(1)).astype(float)
    rows.append(states.astype(np.int64))
    cols.append(states.astype(np.int64))
    vals.append(diag)
    if interaction is not None:
        for m1, m2, m3, m4, coef in interaction.terms:
            s = states.copy()
            sign = np.ones(dim)
            alive = np.ones(dim, dtype=bool)
            s, sign, alive = _apply_annihilate(s, sign, alive, m4)
            s, sign, alive = _apply_annihilate(s, sign, alive, m3)
            s, sign, alive = _apply_create(s, sign, alive, m2)
            s, sign, alive = _apply_create(s, sign, alive, m1)
            if not np.any(alive):
                continue
            rows.append(s[alive].astype(np.int64))
            cols.append(states[alive].astype(np.int64))
            vals.append(coef * sign[alive])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def fock_hamiltonian(modes: ModeSet, tau: DispersionRelation,
                     interaction: Optional[Interaction] = None) -> sp.csr_matrix:
    """Sparse Hamiltonian on the full Fock space, basis ordered by bit mask."""
    r, c, v = _matrix_elements(modes, tau, interaction)
    dim = 1 << modes.n_bits
    return sp.csr_matrix((v, (r, c)), shape=(dim, dim))


@dataclass(frozen=True, eq=False)
class SectorBlock:
    """Hamiltonian restricted to fixed total momentum, parity and (optionally) ``N``."""

    total_momentum: tuple
    momentum: np.ndarray
    parity: int
    particle_number: Optional[int]
    basis_states: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    spacing: float

    @property
    def key(self) -> tuple:
        return (self.total_momentum, self.parity, self.particle_number)


def _state_labels(modes: ModeSet):
    dim = 1 << modes.n_bits
    states = np.arange(dim, dtype=np.uint64)
    mc = modes.mode_coords()
    K = np.zeros((dim, modes.grid.d), dtype=np.int64)
    for m in range(modes.n_bits):
        occ = ((states >> np.uint64(m)) & np.uint64(1)).astype(np.int64)
        K += occ[:, None] * mc[m][None, :]
    N = _popcount(states)
    return K, N


def build_blocks(modes: ModeSet, tau: DispersionRelation,
                 interaction: Optional[Interaction] = None,
                 refine_number: bool = True) -> list:
    """Diagonalized blocks of ``H`` covering the whole Fock space.

    ``interaction`` is an :class:`Interaction`, a potential ``vhat`` (any
    callable, treated as a local potential) or ``None`` for the free gas.

    Blocks are keyed by exact total lattice momentum and fermion parity, and
    also by particle number when ``refine_number`` is set.
    """
    if callable(interaction) and not isinstance(interaction, Interaction):
        interaction = local_interaction(modes, interaction)
    if not tau.grid.same_lattice(modes.grid):
        raise ValueError("tau and the mode set live on different grids")
    K, N = _state_labels(modes)
    r, c, v = _matrix_elements(modes, tau, interaction)
    if np.any(np.any(K[r] != K[c], axis=1)):
        raise ValueError("interaction does not conserve momentum")
    if np.any((N[r] - N[c]) % 2 != 0):
        raise ValueError("interaction does not conserve fermion parity")
    label = N if refine_number else N % 2
    keys = np.concatenate([K, label[:, None]], axis=1)
    uniq, block_of = np.unique(keys, axis=0, return_inverse=True)
    block_of = block_of.ravel()
    if refine_number and np.any(block_of[r] != block_of[c]):
        raise ValueError("interaction does not conserve particle number")
    dim = len(N)
    local = np.empty(dim, dtype=np.int64)
    members = [np.flatnonzero(block_of == b) for b in range(len(uniq))]
    for mem in members:
        local[mem] = np.arange(len(mem))
    order = np.argsort(block_of[r], kind="stable")
    r, c, v = r[order], c[order], v[order]
    bounds = np.searchsorted(block_of[r], np.arange(len(uniq) + 1))
    blocks = []
    for b, key in enumerate(uniq):
        mem = members[b]
        M = np.zeros((len(mem), len(mem)))
        lo, hi = bounds[b], bounds[b + 1]
        np.add.at(M, (local[r[lo:hi]], local[c[lo:hi]]), v[lo:hi])
        Kb = tuple(int(x) for x in key[:-1])
        n_label = int(key[-1])
        parity = 1 if n_label % 2 == 0 else -1
        blocks.append(SectorBlock(
            total_momentum=Kb,
            momentum=np.asarray(Kb, dtype=float) * modes.grid.spacing,
            parity=parity,
            particle_number=n_label if refine_number else None,
            basis_states=mem.astype(np.int64),
            matrix=M,
            eigenvalues=np.linalg.eigvalsh(M),
            spacing=modes.grid.spacing,
        ))
    return blocks


@dataclass(frozen=True)
class GroundState:
    energy: float
    total_momentum: tuple
    parity: int
    particle_number: Optional[int]
    degeneracy: int


def ground_energy(blocks: list) -> GroundState:
    """Global lowest eigenvalue and the block holding it.

    When the lowest level is degenerate across blocks, the reported block is
    the one with the smallest ``|K|``, then even parity, then smallest ``N``.
    """
    E = float(min(b.eigenvalues[0] for b in blocks))
    lowest = [b for b in blocks if b.eigenvalues[0] <= E + DEGENERACY_TOL]
    best = min(lowest, key=lambda b: (sum(x * x for x in b.total_momentum), b.total_momentum,
                                      -b.parity, b.particle_number or 0))
    degeneracy = sum(int(np.sum(b.eigenvalues <= E + DEGENERACY_TOL)) for b in blocks)
    return GroundState(E, best.total_momentum, best.parity, best.particle_number, degeneracy)


def _zero(d):
    return (0,) * d


def excitation_bottoms(blocks: list, E: Optional[float] = None) -> dict:
    """Lowest excitation energies per sector and total momentum.

    Returns ``{"even": {K: eps}, "odd": {K: eps}, "flags": [...]}`` with ``K``
    an integer-coordinate tuple.  At ``K = 0`` in the even sector the ground
    eigenvalue is removed once; a degenerate ground level is flagged.
    """
    gs = ground_energy(blocks)
    E = gs.energy if E is None else E
    d = len(blocks[0].total_momentum)
    by_sector = {1: {}, -1: {}}
    for b in blocks:
        by_sector[b.parity].setdefault(b.total_momentum, []).append(b.eigenvalues)
    flags = []
    if gs.degeneracy > 1:
        flags.append("degenerate_ground_state")
    if gs.parity != 1 or gs.total_momentum != _zero(d):
        flags.append("ground_state_not_even_at_zero_momentum")
    out = {"even": {}, "odd": {}, "flags": flags}
    for parity, name in ((1, "even"), (-1, "odd")):
        for K, spectra in by_sector[parity].items():
            ev = np.sort(np.concatenate(spectra))
            if parity == 1 and K == _zero(d) and gs.parity == 1 and gs.total_momentum == K:
                ev = ev[1:]
            if ev.size:
                out[name][K] = float(ev[0] - E)
    return out


def shells(blocks: list, j: int, n: int, parity: int, k, E: Optional[float] = None):
    """``j``-th lowest eigenvalue (1-based) of the ``(k, parity, n)`` block minus ``E``.

    At ``k = 0`` in the even sector the ``(j+1)``-st eigenvalue is used.
    Returns ``None`` when the block or the eigenvalue does not exist.
    """
    if (n % 2 == 0) != (parity == 1):
        return None
    K = tuple(int(x) for x in k)
    E = ground_energy(blocks).energy if E is None else E
    for b in blocks:
        if b.total_momentum == K and b.particle_number == n:
            idx = j - 1 + (1 if parity == 1 and not any(K) else 0)
            if j < 1 or idx >= len(b.eigenvalues):
                return None
            return float(b.eigenvalues[idx] - E)
    return None


@dataclass(frozen=True)
class FiniteVolumeSpectrum:
    """Ground energy, sector bottoms and shells of one diagonalized system."""

    ground_energy: float
    ground: GroundState
    bottoms_even: dict
    bottoms_odd: dict
    shells: dict
    flags: list
    spacing: float = 1.0

    def bottom(self, parity: int, k) -> Optional[float]:
        """``eps^{L,+-}`` at the physical momentum ``k``; ``None`` if no block exists."""
        K = tuple(int(x) for x in np.rint(np.atleast_1d(np.asarray(k, dtype=float)) / self.spacing))
        table = self.bottoms_even if parity == 1 else self.bottoms_odd
        return table.get(K)


def finite_volume_spectrum(blocks: list) -> FiniteVolumeSpectrum:
    """Collect ``E``, ``eps^{+-}(K)`` and every shell ``nu_j^{n,+-}(K)``."""
    gs = ground_energy(blocks)
    bottoms = excitation_bottoms(blocks, gs.energy)
    table = {}
    for b in blocks:
        if b.particle_number is None:
            continue
        skip = 1 if (b.parity == 1 and not any(b.total_momentum)) else 0
        for j, ev in enumerate(b.eigenvalues[skip:], start=1):
            table[(j, b.particle_number, b.parity, b.total_momentum)] = float(ev - gs.energy)
    return FiniteVolumeSpectrum(gs.energy, gs, bottoms["even"], bottoms["odd"], table,
                                bottoms["flags"], blocks[0].spacing)


def _diagonal_energies(modes: ModeSet, tau: DispersionRelation,
                       interaction: Optional[Interaction]) -> np.ndarray:
    """``<s|H|s>`` for every basis state, from occupation numbers only."""
    dim = 1 << modes.n_bits
    states = np.arange(dim, dtype=np.uint64)
    occ = np.stack([((states >> np.uint64(m)) & np.uint64(1)).astype(float)
                    for m in range(modes.n_bits)], axis=1)
    e = occ @ np.repeat(tau.values, modes.spin_dim)
    if interaction is not None:
        for m1, m2, m3, m4, coef in interaction.terms:
            if m1 == m2:
                continue
            if m4 == m1 and m3 == m2:
                e += coef * occ[:, m1] * occ[:, m2]
            elif m3 == m1 and m4 == m2:
                e -= coef * occ[:, m1] * occ[:, m2]
    return e


@dataclass(frozen=True)
class BlockCheck:
    ok: bool
    block_trace: float
    diagonal_trace: float
    basis_total: int
    max_asymmetry: float


def parity_momentum_check(blocks: list, modes: ModeSet, tau: DispersionRelation,
                          interaction: Optional[Interaction] = None,
                          rtol: float = 1e-8) -> BlockCheck:
    """Check that the blocks partition the Fock space and carry the full trace.

    The sum of all block eigenvalues is compared with the trace computed
    directly from occupation numbers.
    """
    total = sum(len(b.basis_states) for b in blocks)
    block_trace = float(sum(np.sum(b.eigenvalues) for b in blocks))
    diag_trace = float(np.sum(_diagonal_energies(modes, tau, interaction)))
    asym = max(float(np.max(np.abs(b.matrix - b.matrix.T))) for b in blocks)
    scale = max(1.0, abs(diag_trace))
    ok = (total == 1 << modes.n_bits and abs(block_trace - diag_trace) <= rtol * scale
          and asym < 1e-12)
    if not ok:
        log.error("block check failed: trace %r vs %r, %d states, asymmetry %g",
                  block_trace, diag_trace, total, asym)
    return BlockCheck(ok, block_trace, diag_trace, total, asym)
