"""Simulation and regularity analysis of Volterra-Lévy processes."""
__version__ = "0.1.0"

from .kernel import KernelSpec, eval_partial, verify_growth_bounds, verify_smooth_variation
from .levy import (LevyMeasureSpec, SamplePath, beta_index, check_jaffard_sum,
                   jump_oracle_exponent, jump_oracle_grid, shell_mass, simulate)
from .volterra import (VolterraPath, decomposition_check, eval_by_parts, eval_jump_sum,
                       f_delta_integral)
from .regularity import (ExponentEstimate, ScaleFit, estimate_exponents, estimate_frontier,
                         estimate_gauge_exponent, estimate_local_holder,
                         estimate_pointwise_holder, frontier_holder, gauge_profile)
from .spectrum import (ClassifiedPoints, ClassifyConfig, EDeltaSet, SpectrumEstimate,
                       box_dimension, build_e_delta, classify_points, estimate_spectrum)
