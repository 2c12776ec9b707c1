"""Event-level Monte-Carlo oracle for the whole herald chain.

Each trial draws the OPA pair number from the (multimode) thermal law,
subjects every idler photon to independent loss with survival probability
eta, throws the survivors into M equally likely time bins, and counts the
occupied bins as on/off APD clicks.  Empirical distributions from this
chain validate every analytic module.

Randomness comes from numpy's PCG64 generator.  Trials are processed in
fixed-size chunks and chunk c draws from SeedSequence((seed, c)), so the
stream for a given seed is reproducible regardless of how the chunks are
executed.
"""

from dataclasses import dataclass

import numpy as np

from .detector import DetectorConfig
from .errors import InsufficientStatisticsError
from .source import SourceConfig

_CHUNK = 100_000


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int
    det: DetectorConfig
    src: SourceConfig

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class EmpiricalPmf:
    """Histogram estimate of a PMF with per-bin binomial standard errors."""

    offset: int
    masses: np.ndarray
    stderr: np.ndarray
    trials: int

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.masses.size)

    def mean(self) -> float:
        return float(self.support @ self.masses)

    def variance(self) -> float:
        d = self.support - self.mean()
        return float((d * d) @ self.masses)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, chunk))))


def _count_clicks(
    rng: np.random.Generator, photons: np.ndarray, bins: int, eta: float
) -> np.ndarray:
    """Clicks per trial: survivors of independent loss land uniformly in bins;
    the click count is the number of occupied bins."""
    survivors = rng.binomial(photons, eta) if eta < 1.0 else photons
    s_max = int(survivors.max(initial=0))
    if s_max == 0:
        return np.zeros(photons.shape, dtype=np.int64)
    placements = rng.integers(0, bins, size=(photons.size, s_max), dtype=np.int64)
    # Mask slots beyond each trial's survivor count, then count distinct bins.
    placements[np.arange(s_max)[None, :] >= survivors[:, None]] = -1
    placements.sort(axis=1)
    distinct = (np.diff(placements, axis=1) != 0).sum(axis=1)
    first_real = placements[:, 0] >= 0  # row had no masked slot at all
    clicks = distinct + np.where(first_real, 1, 0)
    return clicks


def _empirical_pmf(counts: np.ndarray, trials: int) -> EmpiricalPmf:
    hist = np.bincount(counts)
    p = hist / trials
    se = np.sqrt(p * (1.0 - p) / trials)
    return EmpiricalPmf(offset=0, masses=p, stderr=se, trials=trials)


def simulate_detection(cfg: McConfig, N: int) -> EmpiricalPmf:
    """Empirical click PMF for exactly N incident photons."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    M, eta = cfg.det.bins, cfg.det.efficiency
    counts = []
    done = 0
    chunk = 0
    while done < cfg.trials:
        size = min(_CHUNK, cfg.trials - done)
        rng = _chunk_rng(cfg.seed, chunk)
        photons = np.full(size, N, dtype=np.int64)
        counts.append(_count_clicks(rng, photons, M, eta))
        done += size
        chunk += 1
    return _empirical_pmf(np.concatenate(counts), cfg.trials)


def simulate_herald(cfg: McConfig, n_i: int) -> tuple[EmpiricalPmf, float, float]:
    """Empirical signal-number posterior given exactly n_i clicks.

    Runs the full chain per trial, keeps trials whose click count equals
    n_i, and returns (posterior over the pair number k among kept trials,
    herald probability estimate, its standard error).  Raises
    InsufficientStatisticsError when no trial is kept.
    """
    M, eta = cfg.det.bins, cfg.det.efficiency
    if not (0 <= n_i <= M):
        raise ValueError(f"n_i must lie in [0, {M}], got {n_i}")
    t = cfg.src.thermal_ratio
    mu = cfg.src.modes
    kept_pairs = []
    done = 0
    chunk = 0
    while done < cfg.trials:
        size = min(_CHUNK, cfg.trials - done)
        rng = _chunk_rng(cfg.seed, chunk)
        pairs = rng.negative_binomial(mu, 1.0 - t, size=size)
        clicks = _count_clicks(rng, pairs, M, eta)
        kept_pairs.append(pairs[clicks == n_i])
        done += size
        chunk += 1
    kept = np.concatenate(kept_pairs)
    rate = kept.size / cfg.trials
    if kept.size == 0:
        raise InsufficientStatisticsError(
            f"no trial out of {cfg.trials} produced n_i={n_i} clicks",
            acceptance_rate=0.0,
        )
    hist = np.bincount(kept, minlength=n_i + 1)[n_i:]
    p = hist / kept.size
    se = np.sqrt(p * (1.0 - p) / kept.size)
    post = EmpiricalPmf(offset=n_i, masses=p, stderr=se, trials=int(kept.size))
    rate_se = float(np.sqrt(rate * (1.0 - rate) / cfg.trials))
    return post, rate, rate_se
