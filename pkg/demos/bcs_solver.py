"""Solve the BCS gap equation for a constant pairing interaction and compare
with a scalar root find.

Run with ``python3 demos/bcs_solver.py``.
"""
import numpy as np
from scipy.optimize import brentq

from fermispec.hfb import (attractiveness_identity_residual, direct_kernels,
                           hessian_smallest_eig, normal_solution, solve_gap_equation)
from fermispec.lattice import build_grid, kinetic_energy

grid = build_grid(1, 2 * np.pi, 3)
tau = kinetic_energy(grid, 1.0)

for g in (0.5, 1.0, 2.0, 4.0):
    kernel = direct_kernels(lambda k, kp: -g, lambda k, kp: 0.0, grid)
    sol = solve_gap_equation(kernel, tau, tol=1e-12)
    gap_eq = lambda D: g / (2 * grid.volume) * np.sum(1 / np.hypot(tau.values, D)) - 1
    root = brentq(gap_eq, 1e-14, 1e3, xtol=1e-16, rtol=1e-15)
    normal = normal_solution(kernel, tau)
    residual, form = attractiveness_identity_residual(sol)
    print(f"g={g:3.1f}  delta={abs(sol.observables.delta[0]):.10f}  root={root:.10f}  "
          f"B={sol.observables.B:.6f}  B_normal={normal.observables.B:.6f}  "
          f"identity residual {residual:.1e}  form {form:.3f}")

# the normal state is a saddle once pairing wins
kernel = direct_kernels(lambda k, kp: -4.0, lambda k, kp: 0.0, grid)
print("smallest Hessian eigenvalue at the normal state:",
      hessian_smallest_eig(normal_solution(kernel, kinetic_energy(grid, 0.5))))
