"""Small-matrix linear algebra and the differentiation engine."""

from .derivatives import (EvaluationError, FPartials, grad_check,
                          jacobians_of_f, seed_triplet)
from .dual import Dual2
from .linalg import (jacobi_sym_eig, smallest_abs_eig_pair,
                     smallest_abs_eigenvalue, sym_eig)
from .tape import Tape, Var, concat, stack

__all__ = [
    "Tape", "Var", "Dual2", "concat", "stack",
    "sym_eig", "jacobi_sym_eig", "smallest_abs_eigenvalue",
    "smallest_abs_eig_pair",
    "FPartials", "seed_triplet", "jacobians_of_f", "grad_check",
    "EvaluationError",
]
