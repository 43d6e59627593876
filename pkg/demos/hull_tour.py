"""Excitation envelopes of a free and a gapped Fermi gas in one dimension.

Run with ``python3 demos/hull_tour.py``.
"""
import numpy as np

from fermispec.lattice import build_grid, free_dispersion, model_dispersion
from fermispec.quasispectrum import brute_force_hull, gap_and_cvel, sector_hulls

grid = build_grid(1, 8 * np.pi, 4.0)  # spacing 0.25, window [-4, 4]
free = free_dispersion(grid, 1.0)     # |k^2 - 1|
hulls = sector_hulls(free)

# one quasiparticle at the Fermi point costs nothing, and so does a pair
print("odd bottom at k=1   :", hulls["odd"].at(1))
print("even bottom at k=2  :", hulls["even"].at(2))
# a pair with total momentum 1 cannot both sit at the Fermi point
print("even bottom at k=1  :", hulls["even"].at(1))
print("full bottom at k=0.5:", hulls["full"].at(0.5))

# the exhaustive search over up to six quasiparticles agrees
print("oracle at k=0.5     :", brute_force_hull(free, 6).at(0.5))

# where the spectrum touches zero
zeros = grid.points[hulls["essential_full"].values == 0, 0]
print("zero-energy momenta :", zeros[np.abs(zeros) <= 2.5])

# a gap in the dispersion makes both the gap and the critical velocity positive
gapped = model_dispersion(grid, 1.0, 0.5)
summary = gap_and_cvel(sector_hulls(gapped)["full"])
print(f"gapped: gap {summary.gap}, critical velocity {summary.critical_velocity:.4f}")
