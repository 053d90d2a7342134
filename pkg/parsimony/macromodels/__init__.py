from .dmp import DmpCalibration, DmpEquilibrium, DmpSteadyState, dmp_law, dmp_residuals, solve_dmp
from .fixedpoint import FixedPointResult, solve_fixed_point, verify_memoryless
from .gepe import GeEquilibrium, economy_law, ge_equilibrium, ge_pe_transform, pe_action_loading
from .laws import LinearLaw, impulse_response, simulate, to_long_format
from .nk import (
    ForwardGuidanceResult,
    NkCalibration,
    NkEquilibrium,
    expected_rate_path,
    nk_closed_form_loadings,
    nk_forward_guidance,
    nk_forward_guidance_sweep,
    nk_law,
    nk_residuals,
    rate_cut_impulse,
    solve_nk,
)
from .rbc import RbcCalibration, RbcEquilibrium, RbcSteadyState, rbc_law, solve_rbc
