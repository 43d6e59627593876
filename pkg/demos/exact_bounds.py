"""Exact diagonalization of three momenta with both spins, compared with the
Gaussian (BCS) variational energies.

Run with ``python3 demos/exact_bounds.py``.
"""
import numpy as np

from fermispec.exactdiag import ModeSet, build_blocks, finite_volume_spectrum, local_interaction
from fermispec.hfb import (HFBState, contact_potential, hfb_energy, kernels_from_potential,
                           pairing_seed, solve_gap_equation, variational_bounds)
from fermispec.lattice import build_grid, kinetic_energy

grid = build_grid(1, 2 * np.pi, 1)  # momenta -1, 0, 1
modes = ModeSet(grid)
tau = kinetic_energy(grid, 1.0)
rng = np.random.default_rng(0)

for g in (0.0, 0.1, 0.5):
    vhat = contact_potential(g)
    fv = finite_volume_spectrum(build_blocks(modes, tau, local_interaction(modes, vhat)))
    kernel = kernels_from_potential(vhat, grid)
    sol = solve_gap_equation(kernel, tau, init=pairing_seed(tau, 0.5))
    report = variational_bounds(sol, fv.ground_energy, lambda k: fv.bottom(-1, k))
    random_B = min(hfb_energy(HFBState.even(grid, rng.uniform(-np.pi, np.pi, 3)), kernel, tau)
                   for _ in range(50))
    print(f"g={g}: exact ground {fv.ground_energy:.6f}, HFB {sol.observables.B:.6f} "
          f"({sol.branch}), best of 50 random states {random_B:.6f}")
    print("   odd bottoms:", {k[0]: v for k, v in fv.bottoms_odd.items()},
          " bound margins:", {k[0]: round(m, 6) for k, m in report.odd_margins.items()})
