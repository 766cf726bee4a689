"""Mortality tensor-modeling toolkit.

Library, CLI, and HTTP service for weighted Tucker decomposition of a
sex x age x country x year logit-mortality tensor, regime clustering,
trajectory-based life table generation, disruption modeling,
single-schedule fitting, summary-indicator prediction, and Kalman-filter
forecasting.
"""

__version__ = "0.1.0"
