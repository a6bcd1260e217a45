"""Resonances of defects in crystals via complex deformation of the Brillouin zone."""
from .errors import (BCDError, BranchPoint, DegenerateBands, DegenerateResonance,
                     DeformationTooStrong, DivergedOutsideWindow, NoConvergence,
                     PatternMismatch, SingularKPoint, VanHoveProximity)
from .lattice import (BandData, TightBindingModel, band_eigens, band_gradient, bloch_matrix,
                      bloch_matrices, load_model, monkhorst_pack, save_model)
from .deformation import (DeformationField, DeformationParams, build_deformation,
                          field_from_function, jacobian_det, validate_parameters, van_hove_energies)
from .greens import (ComplexEnergyGrid, ComplexMap, GreenEvaluator, dos_bcd, dos_smearing,
                     green_block, green_derivative, trace_green, trace_map)
from .resonance import (DefectOperator, ExtraSite, ResonanceResult, assemble_A,
                        defect_resolvent_block, fermi_golden_rule, normalize_residue,
                        refine_resonance, resonant_state_samples, support_resolvent, svd_scan)
from .models import (NamedSystem, make_adatom_defect, make_chain, make_diatomic,
                     make_diatomic_defect, make_flatband, make_graphene)

__version__ = "0.1.0"
