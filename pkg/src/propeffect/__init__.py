"""Quantify how a model's output responds to gradual interventions on one property."""
from ._backend import BACKEND
from .findiff import DiffScheme, fornberg_weights, gradient_series
from .score import (
    PropertyImpactReport,
    cace_binary,
    detect_flips,
    expected_gradient_magnitude,
    pearson,
    summarize,
)
from .series import InterventionSeries
from .stattest import NullSample, TestConfig, example_functions, null_distribution, permutation_test

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiffScheme",
    "InterventionSeries",
    "NullSample",
    "PropertyImpactReport",
    "TestConfig",
    "cace_binary",
    "detect_flips",
    "example_functions",
    "expected_gradient_magnitude",
    "fornberg_weights",
    "gradient_series",
    "null_distribution",
    "pearson",
    "permutation_test",
    "summarize",
]
