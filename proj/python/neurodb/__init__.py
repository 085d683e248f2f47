"""Learned query answering with per-partition neural networks."""

from ._core import (
    BuildError,
    ContractError,
    Dataset,
    Engine,
    InfeasibleError,
    InputError,
    LoadError,
    QuerySpec,
    UndefinedMetricError,
    exact_answer,
    gen_gmm,
    gen_queries,
    label,
    normalized_abs_error,
    relative_error,
)

__all__ = [
    "BuildError",
    "ContractError",
    "Dataset",
    "Engine",
    "InfeasibleError",
    "InputError",
    "LoadError",
    "QuerySpec",
    "UndefinedMetricError",
    "exact_answer",
    "gen_gmm",
    "gen_queries",
    "label",
    "normalized_abs_error",
    "relative_error",
]
