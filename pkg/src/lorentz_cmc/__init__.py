"""Spacelike CMC surfaces with singularities in Minkowski 3-space via loop groups."""

__version__ = "0.1.0"

from .bjorling import (BjorlingData, SingularityType, classify_singularity,
                       data_to_singular_potential, null_direction, reconstruct_curve,
                       singular_frame_on_curve, solve_bjorling)
from .iwasawa import (CellTag, NotInBigCell, PlusFactor, SwitchResult, cell_classify,
                      h_probe, iwasawa_factor, switch_factor)
from .loop_algebra import (CircleSampling, LoopMatrix, identity_loop, lambda_scaled_derivative,
                           loop_eval, loop_inverse, loop_mul, make_omega, reality_residual)
from .potentials import (AnalyticFunction, GridSpec, SingularPotential, StandardPotential,
                         eval_singular_potential, integrate_frame, translate_to_standard,
                         validate_standard)
from .surface import (SurfaceGrid, build_surface, build_surfaces, euclidean_cross,
                      euclidean_normal, hopf_Q, mean_curvature_oracle, metric_g,
                      minkowski_inner, psi_signed, sample_surface, sample_surfaces,
                      sym_bobenko)

__all__ = [
    "BjorlingData", "SingularityType", "classify_singularity", "data_to_singular_potential",
    "null_direction", "reconstruct_curve", "singular_frame_on_curve", "solve_bjorling",
    "CellTag", "NotInBigCell", "PlusFactor", "SwitchResult", "cell_classify", "h_probe",
    "iwasawa_factor", "switch_factor", "CircleSampling", "LoopMatrix", "identity_loop",
    "lambda_scaled_derivative", "loop_eval", "loop_inverse", "loop_mul", "make_omega",
    "reality_residual", "AnalyticFunction", "GridSpec", "SingularPotential",
    "StandardPotential", "eval_singular_potential", "integrate_frame",
    "translate_to_standard", "validate_standard", "SurfaceGrid", "build_surface",
    "build_surfaces", "euclidean_cross", "euclidean_normal", "hopf_Q",
    "mean_curvature_oracle", "metric_g", "minkowski_inner", "psi_signed", "sample_surface",
    "sample_surfaces", "sym_bobenko",
]
