"""Pair-number statistics of an unseeded OPA.

Single-mode emission is Bose-Einstein (thermal) in the pair number k:

    P(k) = (1 - tanh^2 g) tanh^(2k) g

and the mu-mode generalization, with every mode equally likely to be
occupied, is negative-binomial:

    P(k) = C(k+mu-1, mu-1) (1 - tanh^2 g)^mu tanh^(2k) g

The mean pair number is mu*sinh^2(g); the variance is <k>(1 + <k>/mu).
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_TRUNCATION_EPS = 1e-12


@dataclass(frozen=True)
class SourceConfig:
    """Unseeded OPA: gain g per mode and mode count mu."""

    gain: float
    modes: int = 1

    def __post_init__(self):
        if not (self.gain > 0.0 and math.isfinite(self.gain)):
            raise ValueError(f"gain must be positive and finite, got {self.gain}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")

    @cached_property
    def thermal_ratio(self) -> float:
        """tanh^2(g), the geometric ratio of the thermal law."""
        return math.tanh(self.gain) ** 2

    @cached_property
    def mean_pairs_per_mode(self) -> float:
        """sinh^2(g)."""
        return math.sinh(self.gain) ** 2

    @cached_property
    def mean_pairs(self) -> float:
        return self.modes * self.mean_pairs_per_mode


@dataclass(frozen=True)
class Pmf:
    """Truncated probability mass function over photon/pair number.

    ``masses[i]`` is the probability of count ``offset + i``; ``tail_bound``
    is a guaranteed upper bound on the probability mass dropped by the
    truncation.
    """

    offset: int
    masses: np.ndarray
    tail_bound: float

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")
        if m.size and m.min() < 0.0:
            raise ValueError("masses must be nonnegative")
        if self.tail_bound < 0.0:
            raise ValueError("tail_bound must be nonnegative")

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.masses.size)

    def total(self) -> float:
        return float(self.masses.sum())

    def mean(self) -> float:
        return float(self.support @ self.masses) / self.total()

    def variance(self) -> float:
        mu = self.mean()
        d = self.support - mu
        return float((d * d) @ self.masses) / self.total()

    def argmax(self) -> int:
        """Count with the largest mass; ties break toward the smallest."""
        return self.offset + int(np.argmax(self.masses))

    def items(self):
        for i, p in enumerate(self.masses):
            yield self.offset + i, float(p)


def opa_pmf(src: SourceConfig, k: int) -> float:
    """Probability that the OPA emits k pairs across its mu modes."""
    if k < 0:
        raise ValueError("pair count must be nonnegative")
    t = src.thermal_ratio
    mu = src.modes
    log_p = mu * math.log1p(-t)
    if k:
        log_p += (
            math.lgamma(k + mu) - math.lgamma(k + 1) - math.lgamma(mu)
            + k * math.log(t)
        )
    return math.exp(log_p)


def _negbin_tail_bound(t: float, mu: int, k: int, p_k: float) -> float:
    """Upper bound on sum_{j>k} p_j via the geometric majorant.

    The term ratio p_{j+1}/p_j = t (j+mu)/(j+1) is decreasing in j, so once
    it falls below 1 the tail is bounded by a geometric series.
    """
    r = t * (k + 1 + mu) / (k + 2)
    if r >= 1.0:
        return math.inf
    next_term = p_k * t * (k + mu) / (k + 1)
    return next_term / (1.0 - r)


def truncated_negbin(src: SourceConfig, eps: float) -> Pmf:
    """Negative-binomial PMF truncated once its tail bound drops below eps.

    No ceiling on eps: internal callers may demand far tighter tails than
    the public default.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    t = src.thermal_ratio
    mu = src.modes
    masses = [(1.0 - t) ** mu]
    k = 0
    while True:
        bound = _negbin_tail_bound(t, mu, k, masses[-1])
        if bound <= eps:
            break
        masses.append(masses[-1] * t * (k + mu) / (k + 1))
        k += 1
        if k > 10_000_000:  # pragma: no cover - defensive
            raise RuntimeError("negative-binomial truncation failed to converge")
    return Pmf(offset=0, masses=np.array(masses), tail_bound=bound)


def opa_truncated(src: SourceConfig, eps: float = DEFAULT_TRUNCATION_EPS) -> Pmf:
    """Truncated OPA pair-number PMF with tail bound at most eps."""
    if not (0.0 < eps <= 1e-6):
        raise ValueError(f"eps must lie in (0, 1e-6], got {eps}")
    return truncated_negbin(src, eps)
