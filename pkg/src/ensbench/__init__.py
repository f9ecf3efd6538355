"""Regression-ensemble benchmarking: from-scratch base regressors, bagging and
AdaBoost.R2 wrappers, repeated hold-out evaluation, rank tables and clustering."""

__version__ = "0.1.0"
