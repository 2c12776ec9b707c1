"""Bayesian heralding: the signal-field photon-number posterior.

Given n_i clicks on the idler TMD, Bayes' theorem gives

    P_sig(n_s | n_i) = P_det(n_i | n_s) P_OPA(n_s) / sum_k P_det(n_i | k) P_OPA(k)

with support n_s >= n_i (fewer emitted pairs than clicks is impossible).
The normalizing constant is the heralding probability: the per-pulse
probability that the TMD reports exactly n_i clicks.

This module computes the posterior by direct truncated summation; the
truncation point is chosen adaptively from a rigorous geometric majorant
of the weight tail, so the recorded tail bound is a guarantee, not an
estimate.  The direct moments here serve as the oracle for the closed-form
expressions in ``closed_form``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .detector import DetectorConfig
from .errors import InfeasibleEventError, UndefinedQError
from .source import DEFAULT_TRUNCATION_EPS, Pmf, SourceConfig

_TINY = 5e-324  # smallest subnormal double; absolute floor for tail bounds


def _herald_weights(
    det: DetectorConfig, src: SourceConfig, n_i: int, rel_eps: float = 1e-16
) -> tuple[np.ndarray, float, float]:
    """Weights w_k = P_det(n_i|k) P_OPA(k) for k = n_i..K, adaptively truncated.

    Returns (weights, total, tail_bound).  The detector factor is produced
    by the stable occupancy Markov chain restricted to occupied-bin counts
    0..n_i (transitions never look above n_i, so the restriction is exact).
    The tail past K is bounded by C(M,n_i) 2^n_i sum_{k>K} q0^k P_OPA(k)
    with q0 = (1-eta) + eta n_i / M, since every term of the alternating
    detector sum is at most C(n_i,j) q0^k in magnitude.
    """
    M, eta = det.bins, det.efficiency
    if not (0 <= n_i <= M):
        raise ValueError(f"n_i must lie in [0, {M}], got {n_i}")
    t = src.thermal_ratio
    mu = src.modes
    q0 = (1.0 - eta) + eta * n_i / M

    ns = np.arange(n_i + 1)
    stay = (1.0 - eta) + eta * ns / M
    grow = eta * (M - (ns - 1)) / M
    row = np.zeros(n_i + 1)
    row[0] = 1.0

    log_comb_prefix = (
        math.lgamma(M + 1) - math.lgamma(n_i + 1) - math.lgamma(M - n_i + 1)
        + n_i * math.log(2.0)
    )
    log_q0 = math.log(q0) if q0 > 0.0 else -math.inf
    lp = mu * math.log1p(-t)  # log P_OPA(k), updated incrementally

    weights: list[float] = []
    total = 0.0
    tail_bound = math.inf
    k = 0
    while True:
        w = row[n_i] * math.exp(lp)
        weights.append(w)
        total += w

        if k >= n_i:
            # Geometric majorant of the tail starting at k+1.
            lp_next = lp + math.log(t) + math.log((k + mu) / (k + 1))
            r = q0 * t * (k + 1 + mu) / (k + 2)
            if r < 1.0:
                log_b = log_comb_prefix + (k + 1) * log_q0 + lp_next
                tail_bound = (
                    0.0 if log_b == -math.inf
                    else math.exp(min(log_b, 700.0)) / (1.0 - r)
                )
                if tail_bound <= max(rel_eps * total, _TINY):
                    break
        if k > 200_000:  # pragma: no cover - defensive
            raise RuntimeError("herald-weight truncation failed to converge")
        # Advance the occupancy chain by one photon and the prior by one pair.
        new = row * stay
        new[1:] += row[:-1] * grow[1:]
        row = new
        lp += math.log(t) + math.log((k + mu) / (k + 1))
        k += 1

    w_arr = np.array(weights[n_i:]) if len(weights) > n_i else np.zeros(1)
    return w_arr, total, tail_bound


@dataclass(frozen=True)
class HeraldedState:
    """Everything the model says about the signal field after n_i clicks."""

    n_i: int
    posterior: Pmf
    ml_estimate: int
    ml_mse: float
    cond_mean: float
    cond_var: float
    q: float
    herald_prob: float


def posterior(
    det: DetectorConfig,
    src: SourceConfig,
    n_i: int,
    eps: float = DEFAULT_TRUNCATION_EPS,
) -> Pmf:
    """Posterior PMF of the signal photon number given n_i idler clicks.

    Renormalized over the truncated support; the inherited tail bound is
    recorded on the returned Pmf.  Raises InfeasibleEventError when the
    heralding event's probability is below the machine floor.
    """
    w, total, bound = _herald_weights(det, src, n_i, rel_eps=min(eps, 1e-14))
    if total <= 0.0:
        raise InfeasibleEventError(
            f"heralding event n_i={n_i} has probability below machine floor"
        )
    return Pmf(offset=n_i, masses=w / total, tail_bound=min(1.0, bound / total))


def ml_estimate(post: Pmf) -> int:
    """Maximum-likelihood signal photon number: posterior arg max.

    Ties break toward the smallest count.
    """
    if post.masses.size == 0:
        raise ValueError("posterior is empty")
    return post.argmax()


def ml_mse(post: Pmf, ml: int) -> float:
    """Mean squared error sum (n_s - ml)^2 P_sig(n_s|n_i) of the estimate."""
    if ml < post.offset:
        raise ValueError("ml estimate lies below the posterior support")
    d = post.support - ml
    return float((d * d) @ post.masses) / post.total()


def cond_moments_direct(
    det: DetectorConfig, src: SourceConfig, n_i: int
) -> tuple[float, float]:
    """Conditional mean and variance of n_s by direct truncated summation.

    Independent oracle for the closed-form route; uses a tighter internal
    truncation than the public posterior so second moments keep full
    precision.
    """
    w, total, _ = _herald_weights(det, src, n_i, rel_eps=1e-18)
    if total <= 0.0:
        raise InfeasibleEventError(
            f"heralding event n_i={n_i} has probability below machine floor"
        )
    ks = np.arange(n_i, n_i + w.size)
    mean = float(ks @ w) / total
    d = ks - mean
    var = float((d * d) @ w) / total
    return mean, var


def mandel_q(mean: float, variance: float) -> float:
    """Mandel Q = (variance - mean)/mean; -1 for Fock, 0 for Poisson."""
    if mean < 0.0 or variance < 0.0:
        raise ValueError("moments must be nonnegative")
    if mean == 0.0:
        raise UndefinedQError("Mandel Q is undefined for a zero-mean field")
    return (variance - mean) / mean


def herald_probability(det: DetectorConfig, src: SourceConfig, n_i: int) -> float:
    """P(g, eta; n_i): per-pulse probability of observing exactly n_i clicks."""
    _, total, _ = _herald_weights(det, src, n_i)
    return min(total, 1.0)


def herald_state(
    det: DetectorConfig,
    src: SourceConfig,
    n_i: int,
    eps: float = DEFAULT_TRUNCATION_EPS,
) -> HeraldedState:
    """Assemble the full heralded-state summary for n_i idler clicks."""
    w, total, bound = _herald_weights(det, src, n_i, rel_eps=min(eps, 1e-14))
    if total <= 0.0:
        raise InfeasibleEventError(
            f"heralding event n_i={n_i} has probability below machine floor"
        )
    post = Pmf(offset=n_i, masses=w / total, tail_bound=min(1.0, bound / total))
    ml = ml_estimate(post)
    mean, var = cond_moments_direct(det, src, n_i)
    return HeraldedState(
        n_i=n_i,
        posterior=post,
        ml_estimate=ml,
        ml_mse=ml_mse(post, ml),
        cond_mean=mean,
        cond_var=var,
        q=mandel_q(mean, var),
        herald_prob=min(total, 1.0),
    )
