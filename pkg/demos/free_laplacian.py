"""Resonances of a 1-d double well: integral equation against complex scaling."""
import numpy as np

from bcdres import ComplexEnergyGrid
from bcdres.free1d import Grid1D, complex_scaled_spectrum, free_scan, nearest_eigenvalue, refine_free
from bcdres.nonlinear import local_minima

grid = Grid1D(20, 0.05)
cmap = free_scan(grid, ComplexEnergyGrid((0.05, 2.5), (-1.5, 0.05), 40, 26))
seeds = local_minima(cmap.values, cmap.z)[:3]
print("scan minima:", ", ".join(f"{z:.3f}" for z in seeds))

eigs = complex_scaled_spectrum(grid, theta=np.pi / 5)
for z in seeds:
    res = refine_free(grid, z)
    cs = nearest_eigenvalue(eigs, res.z)
    print(f"refined {res.z:.6f} in {res.iterations} steps, nearest scaled eigenvalue {cs:.6f}")

# box-length dependence of the first resonance
ref = refine_free(Grid1D(40, 0.05), 0.68 - 0.13j).z
for L in (8, 12, 16, 20):
    print(f"L={L:2d}  error {abs(refine_free(Grid1D(L, 0.05), ref).z - ref):.1e}")
