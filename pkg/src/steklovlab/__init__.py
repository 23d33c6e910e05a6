"""Finite element laboratory for Steklov-Robin eigensystems with matrix
weights: spectral structure checks, nonresonance certificates, and homotopy
continuation for nonlinear boundary conditions."""

from .mesh import (Mesh, MeshError, boundary_nodes, make_unit_disk,
                   make_unit_square, read_mesh, refine_uniform, write_mesh)
from .weights import (MatrixField, SpectralFactor, ValidationReport,
                      lambda_extremes, spectral_decompose, validate_asmp,
                      validate_mp_integral, validate_nonnegative, validate_psd)
from .assembly import (BoundaryNonlinearity, GramPair, assemble_boundary_jacobian,
                       assemble_boundary_load, assemble_gram)
from .spectrum import Spectrum, expand, hmp_kernel, parseval_check, sign_check_first, solve_eigs
from .certify import NonresonanceCertificate, build_alpha_beta, certify, slope_scan
from .solve import HomotopyTrace, homotopy_solve, pick_delta, residual_report, solve_linear_L
from . import oracle

__version__ = "0.1.0"

__all__ = [
    "Mesh", "MeshError", "boundary_nodes", "make_unit_disk", "make_unit_square",
    "read_mesh", "refine_uniform", "write_mesh",
    "MatrixField", "SpectralFactor", "ValidationReport", "lambda_extremes",
    "spectral_decompose", "validate_asmp", "validate_mp_integral",
    "validate_nonnegative", "validate_psd",
    "BoundaryNonlinearity", "GramPair", "assemble_boundary_jacobian",
    "assemble_boundary_load", "assemble_gram",
    "Spectrum", "expand", "hmp_kernel", "parseval_check", "sign_check_first", "solve_eigs",
    "NonresonanceCertificate", "build_alpha_beta", "certify", "slope_scan",
    "HomotopyTrace", "homotopy_solve", "pick_delta", "residual_report", "solve_linear_L",
    "oracle",
]
