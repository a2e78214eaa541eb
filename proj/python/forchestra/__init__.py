"""Python bindings for the Forchestra forecasting toolkit."""

from ._forchestra import (
    Error,
    Model,
    ensemble_weights,
    generate_synthetic,
    masked_mae,
    masked_mase,
    masked_rmse,
    rbo,
    run_cli,
)

__all__ = [
    "Error",
    "Model",
    "ensemble_weights",
    "generate_synthetic",
    "masked_mae",
    "masked_mase",
    "masked_rmse",
    "rbo",
    "run_cli",
]
