"""Shared assertions for Monte Carlo tests."""

import numpy as np


def assert_mean_within(samples, expected, n_se=3.0):
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean() - expected) <= n_se * se, (x.mean(), expected, se)


def assert_variance_within(samples, expected, n_se=3.0):
    x = np.asarray(samples, dtype=float)
    c = x - x.mean()
    var = np.mean(c ** 2) * x.size / (x.size - 1)
    se = np.sqrt(max(np.mean(c ** 4) - var ** 2, 0.0) / x.size)
    assert abs(var - expected) <= n_se * se, (var, expected, se)
