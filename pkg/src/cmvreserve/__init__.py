"""Claims reserving with conditional mean-variance models and copula-dependent residuals.

Names that need the copula machinery are imported on first access, so the
chain-ladder benchmark can run without loading it.
"""

import importlib

__version__ = "0.1.0"

from .chain_ladder import ChainLadderFit, bootstrap_chain_ladder, fit_chain_ladder  # noqa: E402
from .cls import ClsConfig, ClsTrace, fit_cls, objective_M, objective_V  # noqa: E402
from .cmv import CmvFit, CmvSpec, mean_step, residuals, sd_step  # noqa: E402
from .distribution import ReserveDistribution, summarize  # noqa: E402
from .rng import RngStream  # noqa: E402
from .triangle import Triangle, TriangleKind, latest_diagonal, load_triangle, to_incremental  # noqa: E402

_LAZY = {
    "bootstrap_reserves": "bootstrap",
    "naive_point_prediction": "bootstrap",
    "SimSpec": "simulator",
    "simulate_triangle": "simulator",
    "run_consistency_study": "simulator",
}


def __getattr__(name):
    if name in _LAZY:
        return getattr(importlib.import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "ChainLadderFit", "ClsConfig", "ClsTrace", "CmvFit", "CmvSpec", "ReserveDistribution",
    "RngStream", "SimSpec", "Triangle", "TriangleKind", "bootstrap_chain_ladder",
    "bootstrap_reserves", "fit_chain_ladder", "fit_cls", "latest_diagonal", "load_triangle",
    "mean_step", "naive_point_prediction", "objective_M", "objective_V", "residuals",
    "run_consistency_study", "sd_step", "simulate_triangle", "summarize", "to_incremental",
]
