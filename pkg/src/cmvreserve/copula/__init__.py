from .estimation import (
    CopulaFit,
    EmpiricalMarginal,
    fit_copula,
    kendall_tau,
    pseudo_observations,
    residual_pairs,
)
from .families import (
    FAMILIES,
    CopulaError,
    CopulaFamily,
    conditional_cdf,
    conditional_inverse,
    density,
    markov_paths,
    sample_markov_path,
    sample_pairs,
)
from .gof import GofResult, gof_test

__all__ = [
    "FAMILIES", "CopulaError", "CopulaFamily", "CopulaFit", "EmpiricalMarginal",
    "GofResult", "conditional_cdf", "conditional_inverse", "density", "fit_copula",
    "gof_test", "kendall_tau", "markov_paths", "pseudo_observations",
    "residual_pairs", "sample_markov_path", "sample_pairs",
]
