"""Multiplicity structure, refinement and verified error bounds for breadth-one
singular roots of square polynomial systems."""

from .deflate import DeflatedSystem, PivotRecord, build_deflated_system, eval_G_and_JG, select_pivots
from .dualspace import (DiffFunctional, DualBasis, MultiplicityStructure, construct_dual_basis,
                        msb1, phi_op, psi_op)
from .errors import (BreadthNotOne, BreadthOneError, DimensionError, IntervalError,
                     MultiplicityCapExceeded, ParseError, RefinementError, SingularMatrixError,
                     VerificationFailure, ZeroMatrix)
from .interval import IArray, Interval, ieval_poly
from .pipeline import certify, refine_point
from .poly import Polynomial, PolySystem, parse_polynomial, parse_system
from .refine import RefineState, mrrb1, regularized_newton_step, solve_parameters
from .verify import CertifiedRoot, ijacobian, krawczyk_verify, verify_breadth_one

__all__ = [
    "BreadthNotOne", "BreadthOneError", "CertifiedRoot", "DeflatedSystem", "DiffFunctional",
    "DimensionError", "DualBasis", "IArray", "Interval", "IntervalError", "MultiplicityCapExceeded",
    "MultiplicityStructure", "ParseError", "PivotRecord", "PolySystem", "Polynomial",
    "RefineState", "RefinementError", "SingularMatrixError", "VerificationFailure", "ZeroMatrix",
    "build_deflated_system", "certify", "construct_dual_basis", "eval_G_and_JG", "ieval_poly",
    "ijacobian", "krawczyk_verify", "mrrb1", "msb1", "parse_polynomial", "parse_system",
    "phi_op", "psi_op", "refine_point", "regularized_newton_step", "select_pivots",
    "solve_parameters", "verify_breadth_one",
]
