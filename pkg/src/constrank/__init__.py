"""Construct and certify rank-s extensions of Cauchy data (S, D, N*)."""

from .cauchy import AdaptedFramePoint, CauchyProblem, adapted_frame
from .expr import parse, to_text
from .extension import certify, relative_nullity_index, ruling_jets, sigma, tangent_space
from .io import load, shipped_problem_path
from .jets import Jet2, eval_jet2
from .linalg import Dims, Subspace
from .nullity import check_nonsingular, check_solvability, phi, phi_data
from .rulings import fiber_nullspace_oracle, ruling_frame_cofactor, ruling_frame_cross

__all__ = [
    "AdaptedFramePoint", "CauchyProblem", "Dims", "Jet2", "Subspace",
    "adapted_frame", "certify", "check_nonsingular", "check_solvability",
    "eval_jet2", "fiber_nullspace_oracle", "load", "parse", "phi", "phi_data",
    "relative_nullity_index", "ruling_frame_cofactor", "ruling_frame_cross",
    "ruling_jets", "shipped_problem_path", "sigma", "tangent_space", "to_text",
]
