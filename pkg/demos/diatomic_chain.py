"""Diatomic chain: continuation of the Green function and the four defect resonances."""
import numpy as np

from bcdres import (ComplexEnergyGrid, DeformationParams, GreenEvaluator, make_diatomic,
                    make_diatomic_defect, normalize_residue, refine_resonance, trace_map)
from bcdres.chain_oracle import chain_resonance

model = make_diatomic()
ev = GreenEvaluator.deformed(model, DeformationParams(1.8, 0.3, 0.5), 50, warn=False)
grid = ComplexEnergyGrid((1.1, 2.3), (-0.03, 0.1), 61, 8)
adaptive = trace_map(ev, grid, mode="adaptive").values
plain = trace_map(GreenEvaluator.undeformed(model, 50), grid).values
print(f"max |Tr R0| deformed {np.abs(adaptive).max():.2f}, undeformed {np.nanmax(np.abs(plain)):.1f}")

# at eps = 0 the block b_-1, a_0, b_0, a_1 decouples and its eigenvalues are embedded
block = np.diag([0.0, 1.0, 0.0, 1.0]) + np.diag([1.0] * 3, 1) + np.diag([1.0] * 3, -1)
defect = make_diatomic_defect(0.2)
for E0 in np.linalg.eigvalsh(block):
    ev = GreenEvaluator.deformed(model, DeformationParams(E0, 0.3, 0.5), 100, warn=False)
    res = normalize_residue(ev, defect, refine_resonance(ev, defect, E0 - 0.01j))
    oracle = chain_resonance(model, defect, E0 - 0.01j).z0
    print(f"embedded {E0:+.4f} -> resonance {res.z0:.8f}  (chain oracle gap {abs(res.z0 - oracle):.1e})")
