"""Adatom on graphene: resonance against N, Fermi Golden Rule and the density of states."""
from bcdres import (DeformationParams, GreenEvaluator, dos_bcd, dos_smearing, fermi_golden_rule,
                    make_adatom_defect, make_graphene, refine_resonance)

model = make_graphene()
defect = make_adatom_defect(0.4, 2.0)
z = 2 - 0.1j
for N in (9, 13, 17, 25, 35):
    ev = GreenEvaluator.deformed(model, DeformationParams(2.0, 0.4, 0.5), N, warn=False)
    z = refine_resonance(ev, defect, z).z0
    print(f"N={N:2d}  z0 = {z:.6f}")
print(f"Fermi Golden Rule: {fermi_golden_rule(ev, defect):.5f}")

bcd = dos_bcd(model, 2.0, DeformationParams(2.0, 0.3, 0.4), 9)
print(f"DOS(2): deformed N=9 {bcd:.4f}, smeared N=9 {dos_smearing(model, 2.0, 0.3, 9):.4f}, "
      f"converged {dos_smearing(model, 2.0, 0.02, 400):.4f}")
