"""Log-logistic failure model, effective lifetime, and array-level risk.

A disk's cumulative failure probability as a function of its raw P/E count t
follows a log-logistic CDF with scale mu (in log-P/E units) and shape sigma.
The effective lifetime adds a configurable risk penalty on top of the raw
count so that heavily worn disks look "older" than their P/E count alone
suggests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class FailureModelParams:
    """Scale/shape of the log-logistic lifetime CDF."""

    mu: float  # ln of the median-life P/E count
    sigma: float  # shape; smaller = steeper transition

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class LifetimeParams:
    """Weights of the effective-lifetime metric L(t) = k*t + k_p*P(t)."""

    k: float = 1.0
    k_p: float = 0.0

    def __post_init__(self):
        if self.k <= 0:
            raise DomainError(f"k must be > 0, got {self.k}")
        if self.k_p < 0:
            raise DomainError(f"k_p must be >= 0, got {self.k_p}")


def failure_probability(t: float, p: FailureModelParams) -> float:
    """Cumulative failure probability of a disk with raw P/E count t > 0.

    Evaluated in log space so extreme arguments neither overflow nor lose
    the tail entirely.
    """
    if t <= 0:
        raise DomainError(f"P/E count must be > 0, got {t}")
    z = (math.log(t) - p.mu) / p.sigma
    # numerically stable logistic; keep the result strictly inside (0,1)
    # even where float64 would saturate
    if z >= 0:
        out = 1.0 / (1.0 + math.exp(-z))
        return math.nextafter(1.0, 0.0) if out >= 1.0 else out
    e = math.exp(z)
    out = e / (1.0 + e)
    return 5e-324 if out <= 0.0 else out


def effective_lifetime(t: float, lp: LifetimeParams, fp: FailureModelParams) -> float:
    """Risk-weighted lifetime L(t) = k*t + k_p*P_failure(t).

    t = 0 is taken as the limit (both terms vanish), avoiding log(0).
    """
    if t < 0:
        raise DomainError(f"P/E count must be >= 0, got {t}")
    if t == 0:
        return 0.0
    return lp.k * t + lp.k_p * failure_probability(t, fp)


def array_failure_probability(probs) -> float:
    """Probability that at least one disk in the array has failed."""
    survive = 1.0
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"probability out of [0,1]: {p}")
        survive *= 1.0 - p
    return 1.0 - survive


def initial_wear_for_probability(target_p: float, fp: FailureModelParams) -> float:
    """Invert the failure CDF: the P/E count at which P_failure == target_p."""
    if not 0.0 < target_p < 1.0:
        raise DomainError(f"target probability must be in (0,1), got {target_p}")
    return math.exp(fp.mu + fp.sigma * math.log(target_p / (1.0 - target_p)))
