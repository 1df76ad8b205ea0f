"""Kernel least-squares collocation method of lines for diffusion on closed surfaces."""

from .dense_numerics import (
    condition_number,
    eigenvalues_general,
    reduced_qr,
    solve_spd,
    solve_upper_triangular,
)
from .estimators import KernelInterpolant, SurfaceDiffusionMoL
from .geometry import (
    PointCloud,
    Surface,
    closest_point,
    get_surface,
    sample_narrow_band,
    sample_quasi_uniform,
)
from .mol_core import (
    DiscreteSystem,
    SpectrumReport,
    assemble,
    evaluate_solution,
    integrate,
    interpolate_initial,
    ode_matrix,
    spectrum_report,
)
from .special_kernels import SobolevKernel, bessel_k, matern_phi
from .surface_ops import EllipticProblem, apply_elliptic_operator, identity_tensor
from .timestepping import SolveTrace, dopri5

__version__ = "0.1.0"

__all__ = [
    "DiscreteSystem",
    "EllipticProblem",
    "KernelInterpolant",
    "PointCloud",
    "SobolevKernel",
    "SolveTrace",
    "SpectrumReport",
    "Surface",
    "SurfaceDiffusionMoL",
    "apply_elliptic_operator",
    "assemble",
    "bessel_k",
    "closest_point",
    "condition_number",
    "dopri5",
    "eigenvalues_general",
    "evaluate_solution",
    "get_surface",
    "identity_tensor",
    "integrate",
    "interpolate_initial",
    "matern_phi",
    "ode_matrix",
    "reduced_qr",
    "sample_narrow_band",
    "sample_quasi_uniform",
    "solve_spd",
    "solve_upper_triangular",
    "spectrum_report",
]
