"""Streaming Monte Carlo accumulator."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class McEstimate:
    """Running mean and sum of squared deviations (Welford / Chan et al.).

    Attributes
    ----------
    mean : float
    m2 : float
        Sum of squared deviations from the running mean.
    count : int
    clipped : int
        Number of contributing paths that left the simulated level range.
        Only kernel and trace estimators set this.
    """

    mean: float = 0.0
    m2: float = 0.0
    count: int = 0
    clipped: int = 0

    @classmethod
    def from_samples(cls, samples, clipped=0):
        x = np.asarray(samples, dtype=float).ravel()
        if x.size == 0:
            return cls(clipped=int(clipped))
        mean = float(x.mean())
        return cls(mean, float(np.sum((x - mean) ** 2)), int(x.size), int(clipped))

    def add(self, value):
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)
        return self

    def merge(self, other):
        """Return the accumulator of the union of both sample sets."""
        n = self.count + other.count
        if n == 0:
            return McEstimate(clipped=self.clipped + other.clipped)
        if other.count == 0:
            return McEstimate(self.mean, self.m2, self.count, self.clipped + other.clipped)
        if self.count == 0:
            return McEstimate(other.mean, other.m2, other.count, self.clipped + other.clipped)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return McEstimate(mean, m2, n, self.clipped + other.clipped)

    __add__ = merge

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def stderr(self):
        if self.count < 2:
            return math.nan
        return math.sqrt(self.m2 / (self.count * (self.count - 1)))

    @property
    def truncated(self):
        return self.clipped > 0

    def z_score(self, predicted):
        return (self.mean - predicted) / self.stderr

    def as_dict(self):
        return {
            "estimate": self.mean,
            "stderr": self.stderr,
            "count": self.count,
            "clipped": self.clipped,
        }


def reduce_estimates(estimates):
    """Merge accumulators by a fixed pairwise tree, independent of scheduling."""
    items = list(estimates)
    if not items:
        return McEstimate()
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def combined_z(a, b):
    """z-score of the difference of two independent estimates."""
    return (a.mean - b.mean) / math.hypot(a.stderr, b.stderr)
