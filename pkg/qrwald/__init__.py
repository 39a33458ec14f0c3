"""Wald tests for quantile-regression coefficients.

The conditional densities entering the regression-quantile covariance are
estimated by kernel-smoothing contrasts of the fitted quantile process.
"""
