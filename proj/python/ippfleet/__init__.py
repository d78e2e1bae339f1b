"""Python access to the ippfleet simulation core."""

from ._core import (
    ConfigError,
    ParseError,
    ContractError,
    MetricError,
    NumericalError,
    default_map_shape,
    gp_bench,
    gp_predict,
    ground_truth,
    navigable_cells,
    nsor,
    rank_sum_test,
    run_eval,
    selftest,
    sor,
)

__all__ = [
    "ConfigError",
    "ParseError",
    "ContractError",
    "MetricError",
    "NumericalError",
    "default_map_shape",
    "gp_bench",
    "gp_predict",
    "ground_truth",
    "navigable_cells",
    "nsor",
    "rank_sum_test",
    "run_eval",
    "selftest",
    "sor",
]
