"""Hartree-Fock-Bogoliubov theory of the spin-1/2 Fermi gas on a momentum lattice.

Only the real, spin-independent reduction with the BCS ansatz is treated.
A Gaussian state is labelled by one angle ``2 theta_k`` per lattice momentum,
even in ``k``.  With ``s = sin 2theta`` and ``c = cos 2theta`` the Gaussian
energy, with ``V = L^d``, is::

    B = sum_k tau(k) (1 - c_k)
        + 1/(4V) sum_{k,k'} alpha(k,k') s_k s_k'
        + 1/(4V) sum_{k,k'} beta(k,k') (1 - c_k)(1 - c_k')

and its derivative along ``2 theta_k`` is ``delta(k) c_k + xi(k) s_k`` with::

    delta(k) = 1/(2V) sum_k' alpha(k,k') s_k'
    xi(k)    = tau(k) + 1/(2V) sum_k' beta(k,k') (1 - c_k')

The general m x m formulas for the rotated Hamiltonian are not implemented.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lattice import DispersionRelation, MomentumGrid
from .quasispectrum import SpectrumEnvelope, gap_and_cvel

__all__ = [
    "InteractionKernel",
    "HFBState",
    "HFBObservables",
    "HFBSolution",
    "kernels_from_potential",
    "direct_kernels",
    "contact_potential",
    "gaussian_potential",
    "compute_delta_xi",
    "hfb_energy",
    "energy_of_angles",
    "hfb_gradient",
    "observables",
    "pairing_seed",
    "solve_gap_equation",
    "normal_solution",
    "quasiparticle_dispersion",
    "hessian",
    "hessian_smallest_eig",
    "attractiveness_identity_residual",
    "variational_bounds",
    "solver_report",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
SYMMETRY_TOL = 1e-10


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InteractionKernel:
    """Pairing kernel ``alpha`` and Hartree-Fock kernel ``beta`` over grid points."""

    grid: MomentumGrid
    alpha: np.ndarray
    beta: np.ndarray
    descriptor: dict = field(default_factory=dict)


def contact_potential(g: float) -> Callable:
    """Fourier transform of an attractive contact potential, ``V(q) = -g``."""
    def vhat(q):
        q = np.asarray(q, dtype=float)
        return np.full(q.shape[:-1], -float(g))
    vhat.descriptor = {"potential": "contact", "g": float(g)}
    return vhat


def gaussian_potential(g: float, width: float = 1.0) -> Callable:
    """``V(q) = -g exp(-(|q| width)^2)``."""
    def vhat(q):
        q = np.asarray(q, dtype=float)
        return -float(g) * np.exp(-np.sum(q * q, axis=-1) * width * width)
    vhat.descriptor = {"potential": "gaussian", "g": float(g), "width": float(width)}
    return vhat


def _orbit_canonical(grid: MomentumGrid, M: np.ndarray, full_negation: bool) -> np.ndarray:
    """Make ``M`` bitwise symmetric under its kernel symmetry group.

    Both kernels are symmetric and invariant under ``(k, k') -> (-k, -k')``;
    with ``full_negation`` the single flips ``k -> -k`` and ``k' -> -k'`` are
    added.  Each entry is replaced by the entry at the smallest flat index of
    its orbit.
    """
    n = grid.size
    neg = grid.neg
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    images = [(i, j), (j, i), (neg[i], neg[j]), (neg[j], neg[i])]
    if full_negation:
        images += [(neg[i], j), (i, neg[j]), (neg[j], i), (j, neg[i])]
    flat = np.min(np.stack([a * n + b for a, b in images]), axis=0)
    return M.ravel()[flat]


def _lattice_q(grid: MomentumGrid, sign: int) -> np.ndarray:
    c = grid.coords
    return (c[:, None, :] + sign * c[None, :, :]) * grid.spacing


def kernels_from_potential(vhat: Callable, grid: MomentumGrid) -> InteractionKernel:
    """Kernels of a local, even potential given by its Fourier transform.

    ``alpha(k,k') = (V(k-k') + V(k+k')) / 2`` and ``beta(k,k') = 2 V(0) - V(k-k')``.
    ``vhat`` takes an array of momenta with trailing axis ``d``.
    """
    qm = _lattice_q(grid, -1)
    qp = _lattice_q(grid, +1)
    vm = np.asarray(vhat(qm), dtype=float)
    vp = np.asarray(vhat(qp), dtype=float)
    v0 = float(np.asarray(vhat(np.zeros((1, grid.d))), dtype=float).ravel()[0])
    # evenness probe on the same lattice differences
    v_neg = np.asarray(vhat(-qm), dtype=float)
    if not np.allclose(vm, v_neg, rtol=SYMMETRY_TOL, atol=SYMMETRY_TOL):
        raise ValueError("potential is not even: V(q) != V(-q)")
    alpha = _orbit_canonical(grid, 0.5 * (vm + vp), full_negation=True)
    beta = _orbit_canonical(grid, 2.0 * v0 - vm, full_negation=False)
    desc = dict(getattr(vhat, "descriptor", {"potential": "callable"}))
    return InteractionKernel(grid, alpha, beta, desc)


def direct_kernels(alpha_fn: Callable, beta_fn: Callable, grid: MomentumGrid) -> InteractionKernel:
    """Kernels sampled from ``alpha_fn(k, k')`` and ``beta_fn(k, k')``.

    The functions receive broadcast arrays of momenta with trailing axis ``d``.
    Required symmetries, each checked to ``1e-10``: ``alpha`` and ``beta``
    symmetric, ``alpha(-k, k') = alpha(k, k')`` and ``beta(-k, -k') = beta(k, k')``.
    """
    p = grid.points
    k, kp = p[:, None, :], p[None, :, :]
    A = np.broadcast_to(np.asarray(alpha_fn(k, kp), dtype=float), (grid.size,) * 2)
    Bm = np.broadcast_to(np.asarray(beta_fn(k, kp), dtype=float), (grid.size,) * 2)
    neg = grid.neg

    def _close(x, y):
        scale = max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        return np.max(np.abs(x - y)) <= SYMMETRY_TOL * scale

    if not _close(A, A.T):
        raise ValueError("alpha is not symmetric")
    if not _close(A, A[neg, :]):
        raise ValueError("alpha(-k, k') differs from alpha(k, k')")
    if not _close(Bm, Bm.T):
        raise ValueError("beta is not symmetric")
    if not _close(Bm, Bm[np.ix_(neg, neg)]):
        raise ValueError("beta(-k, -k') differs from beta(k, k')")
    alpha = _orbit_canonical(grid, A, full_negation=True)
    beta = _orbit_canonical(grid, Bm, full_negation=False)
    return InteractionKernel(grid, alpha, beta, {"potential": "direct"})


# ---------------------------------------------------------------------------
# states and observables
# ---------------------------------------------------------------------------

def _sincos(two_theta: np.ndarray):
    """``sin``/``cos`` of angles in ``[0, 2 pi)`` with exact values at 0 and pi."""
    s = np.sin(two_theta)
    c = np.cos(two_theta)
    at_pi = two_theta == np.pi
    at_zero = two_theta == 0.0
    s[at_pi | at_zero] = 0.0
    c[at_pi] = -1.0
    c[at_zero] = 1.0
    return s, c


@dataclass(frozen=True, eq=False)
class HFBState:
    """Bogoliubov angles ``2 theta_k`` on a grid, even in ``k`` and reduced mod ``2 pi``."""

    grid: MomentumGrid
    two_theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.two_theta, dtype=float)
        if t.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} angles, got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("angles must be finite")
        t = np.mod(t, TWO_PI)
        t[t >= TWO_PI] = 0.0
        if not np.array_equal(t, t[self.grid.neg]):
            raise ValueError("angles must be even in k; use HFBState.even()")
        t.setflags(write=False)
        object.__setattr__(self, "two_theta", t)

    @classmethod
    def even(cls, grid: MomentumGrid, two_theta) -> "HFBState":
        """State from arbitrary angles, symmetrized over ``k <-> -k``."""
        t = np.mod(np.asarray(two_theta, dtype=float), TWO_PI)
        tn = t[grid.neg]
        # average on the circle so that e.g. 0.1 and 2 pi - 0.1 meet at 0
        diff = np.mod(tn - t + np.pi, TWO_PI) - np.pi
        avg = t + 0.5 * diff
        avg = np.where(np.arange(grid.size) <= grid.neg, avg, avg[grid.neg])
        return cls(grid, avg)

    @classmethod
    def normal(cls, grid: MomentumGrid, occupied) -> "HFBState":
        """Slater determinant with both spins filled on ``occupied`` momenta."""
        occ = np.asarray(occupied, dtype=bool)
        return cls(grid, np.where(occ, np.pi, 0.0))

    @property
    def sin2(self) -> np.ndarray:
        return _sincos(self.two_theta)[0]

    @property
    def cos2(self) -> np.ndarray:
        return _sincos(self.two_theta)[1]

    def is_normal(self) -> bool:
        return bool(np.all(self.sin2 == 0.0))


@dataclass(frozen=True, eq=False)
class HFBObservables:
    """Fields derived from a state: ``delta``, ``xi``, ``B``, ``O`` and ``D``.

    ``D = sqrt(xi^2 + delta^2)`` is the quasiparticle energy.  At a solution
    of the gap equation it equals ``xi cos 2theta - delta sin 2theta``, the
    diagonal of the rotated one-body Hamiltonian.
    """

    delta: np.ndarray
    xi: np.ndarray
    B: float
    O: np.ndarray
    D: np.ndarray


@dataclass(frozen=True, eq=False)
class HFBSolution:
    state: HFBState
    observables: HFBObservables
    branch: str
    converged: bool
    residual: float
    iterations: int
    kernel: Optional[InteractionKernel] = None
    tau: Optional[DispersionRelation] = None
    flags: tuple = ()


def _check(state: HFBState, kernel: InteractionKernel, tau: DispersionRelation):
    if not (state.grid.same_lattice(kernel.grid) and state.grid.same_lattice(tau.grid)):
        raise ValueError("state, kernel and tau live on different grids")


def _delta_xi(grid, s, c, kernel, tau_vals):
    pref = 0.5 / grid.volume
    delta = pref * (kernel.alpha @ s)
    xi = tau_vals + pref * (kernel.beta @ (1.0 - c))
    neg = grid.neg
    # both are even in exact arithmetic; restore it bitwise
    delta = 0.5 * (delta + delta[neg])
    xi = 0.5 * (xi + xi[neg])
    return delta, xi


def compute_delta_xi(state: HFBState, kernel: InteractionKernel, tau: DispersionRelation):
    """Pairing field ``delta(k)`` and Hartree-Fock shifted energy ``xi(k)``."""
    _check(state, kernel, tau)
    s, c = _sincos(state.two_theta)
    return _delta_xi(state.grid, s, c, kernel, tau.values)


def _energy_from_sc(grid, s, c, kernel, tau_vals) -> float:
    one_m_c = 1.0 - c
    pref = 0.25 / grid.volume
    return float(np.dot(tau_vals, one_m_c)
                 + pref * (s @ kernel.alpha @ s)
                 + pref * (one_m_c @ kernel.beta @ one_m_c))


def hfb_energy(state: HFBState, kernel: InteractionKernel, tau: DispersionRelation) -> float:
    """Gaussian energy ``B``: the expectation of the Hamiltonian in the state."""
    _check(state, kernel, tau)
    s, c = _sincos(state.two_theta)
    return _energy_from_sc(state.grid, s, c, kernel, tau.values)


def energy_of_angles(two_theta, kernel: InteractionKernel, tau: DispersionRelation) -> float:
    """``B`` for an arbitrary angle array; evenness is not required."""
    t = np.asarray(two_theta, dtype=float)
    return _energy_from_sc(kernel.grid, np.sin(t), np.cos(t), kernel, tau.values)


def hfb_gradient(state: HFBState, kernel: InteractionKernel, tau: DispersionRelation) -> np.ndarray:
    """Partial derivatives of ``B`` along each ``2 theta_k``."""
    _check(state, kernel, tau)
    s, c = _sincos(state.two_theta)
    delta, xi = _delta_xi(state.grid, s, c, kernel, tau.values)
    return delta * c + xi * s


def observables(state: HFBState, kernel: InteractionKernel, tau: DispersionRelation) -> HFBObservables:
    _check(state, kernel, tau)
    s, c = _sincos(state.two_theta)
    delta, xi = _delta_xi(state.grid, s, c, kernel, tau.values)
    B = _energy_from_sc(state.grid, s, c, kernel, tau.values)
    return HFBObservables(delta, xi, B, delta * c + xi * s, np.hypot(delta, xi))


def _energy_scale(tau: DispersionRelation) -> float:
    scale = float(np.max(np.abs(tau.values)))
    return scale if scale > 0 else 1.0


def pairing_seed(tau: DispersionRelation, delta0: Optional[float] = None) -> HFBState:
    """Pairing-biased starting state ``sin 2theta = -D0/sqrt(tau^2+D0^2)``.

    ``D0`` defaults to a tenth of the largest ``|tau|`` on the grid.
    """
    if delta0 is None:
        delta0 = 0.1 * _energy_scale(tau)
    r = np.hypot(tau.values, delta0)
    return HFBState.even(tau.grid, np.arctan2(-delta0 / r, tau.values / r))


def _gap_angles(delta, xi):
    """Angles solving the gap equation; ``delta = xi = 0`` maps to the empty mode."""
    r = np.hypot(delta, xi)
    degenerate = r == 0.0
    safe = np.where(degenerate, 1.0, r)
    s = np.where(degenerate, 0.0, -delta / safe)
    c = np.where(degenerate, 1.0, xi / safe)
    return np.mod(np.arctan2(s, c), TWO_PI)


def _snap_normal(grid, two_theta, tol):
    """Round angles within ``tol`` of 0 or pi onto them exactly."""
    t = two_theta.copy()
    near_pi = np.abs(t - np.pi) <= tol
    near_zero = (t <= tol) | (TWO_PI - t <= tol)
    t[near_pi] = np.pi
    t[near_zero] = 0.0
    return t


def solve_gap_equation(kernel: InteractionKernel, tau: DispersionRelation,
                       init: Optional[HFBState] = None, tol: float = 1e-10,
                       damping: float = 0.5, max_iter: int = 20_000) -> HFBSolution:
    """Damped fixed-point iteration of the BCS gap equation.

    Each step maps the current angles to ``(delta, xi)``, takes the angles
    with ``sin 2theta = -delta/r`` and ``cos 2theta = xi/r`` and mixes them
    into the current ones with weight ``damping``.  Iteration stops when
    ``max |delta cos 2theta + xi sin 2theta| <= tol``.  A converged state whose
    largest ``|sin 2theta|`` is at most ``10 tol`` is reported as the normal
    branch, with the angles snapped to 0 or pi.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    grid = kernel.grid
    state = init if init is not None else pairing_seed(tau)
    _check(state, kernel, tau)
    t = state.two_theta.copy()
    converged = False
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        s, c = _sincos(t)
        delta, xi = _delta_xi(grid, s, c, kernel, tau.values)
        residual = float(np.max(np.abs(delta * c + xi * s)))
        if residual <= tol:
            converged = True
            break
        target = _gap_angles(delta, xi)
        step = np.mod(target - t + np.pi, TWO_PI) - np.pi
        # delta and xi are bitwise even, so the update keeps t even
        t = np.mod(t + damping * step, TWO_PI)
    flags = ()
    if not converged:
        log.warning("gap equation not converged after %d iterations (residual %.3g)",
                    max_iter, residual)
        flags = ("max_iter",)
    branch = "superconducting"
    if converged and float(np.max(np.abs(np.sin(t)))) <= 10 * tol:
        t = _snap_normal(grid, t, 1e-6)
        branch = "normal"
    final = HFBState(grid, t)
    obs = observables(final, kernel, tau)
    residual = float(np.max(np.abs(obs.O)))
    return HFBSolution(final, obs, branch, converged, residual, it, kernel, tau, flags)


def normal_solution(kernel: InteractionKernel, tau: DispersionRelation,
                    max_iter: int = 1000) -> HFBSolution:
    """Self-consistent Slater determinant: fill the modes with ``xi(k) < 0``.

    Starts from the ``tau(k) < 0`` occupation.  If the occupied set starts to
    cycle, the lowest-``B`` member of the cycle is returned and flagged.
    """
    grid = kernel.grid
    occ = tau.values < 0
    seen = []
    flags = ()
    it = 0
    for it in range(1, max_iter + 1):
        state = HFBState.normal(grid, occ)
        _, xi = compute_delta_xi(state, kernel, tau)
        new = xi < 0
        if np.array_equal(new, occ):
            break
        if any(np.array_equal(new, o) for o in seen):
            candidates = [HFBState.normal(grid, o) for o in seen + [occ]]
            energies = [hfb_energy(st, kernel, tau) for st in candidates]
            occ = (seen + [occ])[int(np.argmin(energies))]
            flags = ("occupation_cycle",)
            break
        seen.append(occ)
        occ = new
    state = HFBState.normal(grid, occ)
    obs = observables(state, kernel, tau)
    converged = not flags and it < max_iter
    return HFBSolution(state, obs, "normal", converged, float(np.max(np.abs(obs.O))),
                       it, kernel, tau, flags)


def quasiparticle_dispersion(solution: HFBSolution) -> DispersionRelation:
    """``D(k)`` as a single fermionic species with spin degeneracy 2."""
    obs = solution.observables
    return DispersionRelation(solution.state.grid, obs.D, label="hfb_D",
                              metadata={"spin_degeneracy": 2, "branch": solution.branch})


def hessian(solution: HFBSolution, kernel: Optional[InteractionKernel] = None) -> np.ndarray:
    """Second derivatives of ``B`` in the angles ``2 theta_k``."""
    kernel = kernel or solution.kernel
    grid = kernel.grid
    s, c = _sincos(solution.state.two_theta)
    obs = solution.observables
    pref = 0.5 / grid.volume
    H = pref * (kernel.alpha * np.outer(c, c) + kernel.beta * np.outer(s, s))
    # the diagonal term is xi cos - delta sin, which reduces to D at a solution
    # of the gap equation and stays correct at saddles such as a normal state
    # with the wrong occupation
    H[np.diag_indices_from(H)] += c * obs.xi - s * obs.delta
    return 0.5 * (H + H.T)


def hessian_smallest_eig(solution: HFBSolution, kernel: Optional[InteractionKernel] = None) -> float:
    """Smallest Hessian eigenvalue; negative means the critical point is a saddle."""
    return float(np.linalg.eigvalsh(hessian(solution, kernel))[0])


def attractiveness_identity_residual(solution: HFBSolution,
                                     kernel: Optional[InteractionKernel] = None):
    """Check ``sum s_k^2 r_k = -1/(2V) s.alpha.s`` with ``r = sqrt(delta^2 + xi^2)``.

    Returns ``(|lhs - rhs|, quadratic_form)`` where ``quadratic_form`` is
    ``s.alpha.s / (2V)``; a superconducting solution needs it negative.
    """
    kernel = kernel or solution.kernel
    grid = kernel.grid
    s = solution.state.sin2
    obs = solution.observables
    lhs = float(np.sum(s * s * np.hypot(obs.delta, obs.xi)))
    form = float(s @ kernel.alpha @ s) * 0.5 / grid.volume
    return abs(lhs + form), form


@dataclass(frozen=True)
class BoundReport:
    """Exact-versus-Gaussian comparison; margins are ``upper - lower`` (>= 0 when the bound holds)."""

    ground_holds: bool
    ground_margin: float
    odd_holds: dict
    odd_margins: dict


def variational_bounds(solution: HFBSolution, exact_ground: float,
                       exact_odd_bottom: Callable, tol: float = 1e-10) -> BoundReport:
    """Compare exact energies with the Gaussian bounds ``E <= B`` and
    ``E + eps_odd(k) <= B + D(k)``.

    ``exact_odd_bottom(k)`` returns the exact odd excitation bottom at the
    momentum ``k`` (a physical vector) or ``None`` if unavailable.
    """
    obs = solution.observables
    grid = solution.state.grid
    ground_margin = obs.B - exact_ground
    odd_holds, odd_margins = {}, {}
    for i, k in enumerate(grid.points):
        eps = exact_odd_bottom(k)
        if eps is None:
            continue
        key = tuple(float(x) for x in k)
        margin = obs.B + obs.D[i] - (exact_ground + eps)
        odd_margins[key] = float(margin)
        odd_holds[key] = bool(margin >= -tol)
    return BoundReport(bool(ground_margin >= -tol), float(ground_margin), odd_holds, odd_margins)


def solver_report(solution: HFBSolution) -> dict:
    """JSON-ready summary of a solution, including the full ``D(k)`` table."""
    D = quasiparticle_dispersion(solution)
    summary = gap_and_cvel(SpectrumEnvelope(D.grid, D.values, "odd"))
    grid = solution.state.grid
    return {
        "branch": solution.branch,
        "converged": solution.converged,
        "residual": solution.residual,
        "iterations": solution.iterations,
        "B": solution.observables.B,
        "gap": summary.gap,
        "critical_velocity": summary.critical_velocity,
        "flags": list(solution.flags),
        "grid": {"d": grid.d, "L": grid.L, "cutoff": grid.cutoff, "spacing": grid.spacing},
        "D": [[*map(float, k), float(v)] for k, v in zip(grid.points, D.values)],
    }
