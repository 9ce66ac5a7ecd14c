"""Differentially private multi-quantile estimation.

The headline estimator releases all m quantiles with a single exponential
mechanism draw (`jointexp.joint_exp`); three single-quantile baselines
composed m ways live in `baselines`; `bench` reproduces the accuracy and
timing experiments.
"""

from .core import (
    QuantileEstimates,
    QuantileSpec,
    RandomSource,
    SortedDataset,
    jitter,
    prepare_dataset,
)
from .jointexp import MechanismParams, joint_exp

__version__ = "0.1.0"

__all__ = [
    "MechanismParams",
    "QuantileEstimates",
    "QuantileSpec",
    "RandomSource",
    "SortedDataset",
    "jitter",
    "joint_exp",
    "prepare_dataset",
    "__version__",
]
