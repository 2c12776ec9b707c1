"""Time-multiplexed detector (TMD) click statistics.

A TMD splits an incoming pulse across M = 2^m time bins using m stages of
50/50 couplers; each bin is read out by an on/off APD.  The click count
undercounts the incident photon number whenever a photon is lost (survival
probability eta per photon) or two photons share a bin.  The conditional
click distribution P_det(n|N) follows from a standard urn model:

    P_det(n|N) = C(M,n) * sum_j (-1)^j C(n,j) [(1-eta) + eta(n-j)/M]^N

Dark counts are excluded throughout.

Two independent evaluation routes are provided:

* ``det_prob`` evaluates the alternating sum directly, term-by-term with
  compensated summation (math.fsum) and a clamping policy for the tiny
  negative residuals cancellation leaves behind.  When the a-priori
  cancellation-error estimate exceeds the clamping budget (large M, or
  deep-tail probabilities), it switches to exact rational arithmetic at
  the binary-rational eta actually stored in the double, so the result is
  correctly rounded rather than rejected.
* ``click_table`` runs the underlying loss+urn Markov chain (occupied-bin
  count as state), which involves only nonnegative terms and is therefore
  stable for arbitrarily large N.  Bulk consumers (posteriors, parameter
  sweeps) use the table; the two routes cross-check each other in tests.

``det_prob_exact`` is a brute-force rational-arithmetic oracle for small
systems (enumeration of surviving-photon subsets x bin placements).
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import NumericalAccuracyError

# Eq.-style evaluation is only certified up to this many incident photons;
# beyond it, cancellation can exceed the clamping budget.
N_CEILING = 10_000

_CLAMP_FLOOR = -1e-10  # below this a result is rejected, not clamped


@dataclass(frozen=True)
class DetectorConfig:
    """TMD description: m splitter stages (M = 2^m bins), efficiency eta.

    ``stages == 0`` (a single bin, i.e. one bare APD) is permitted.
    ``efficiency_ratio`` optionally carries an exact rational eta so the
    brute-force oracle can run in exact arithmetic.
    """

    stages: int
    efficiency: float
    bins: int = field(init=False)
    efficiency_ratio: Fraction | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.stages < 0:
            raise ValueError(f"stages must be >= 0, got {self.stages}")
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError(
                f"efficiency must lie in (0, 1], got {self.efficiency}"
            )
        if self.efficiency_ratio is not None and not math.isclose(
            float(self.efficiency_ratio), self.efficiency, rel_tol=1e-12
        ):
            raise ValueError("efficiency_ratio disagrees with efficiency")
        object.__setattr__(self, "bins", 2 ** self.stages)

    @classmethod
    def from_bins(cls, bins: int, efficiency, **kw) -> "DetectorConfig":
        """Build from a bin count, which must be a power of two."""
        if bins < 1 or bins & (bins - 1):
            raise ValueError(f"bins must be a power of two, got {bins}")
        if isinstance(efficiency, Fraction):
            return cls(bins.bit_length() - 1, float(efficiency),
                       efficiency_ratio=efficiency, **kw)
        return cls(bins.bit_length() - 1, float(efficiency), **kw)


def _term_magnitude(M: int, n: int, j: int, N: int, base: float) -> float:
    """|term j| of the alternating sum, in float with log-space fallback.

    Returns inf when the magnitude overflows the double range; the caller
    then falls back to exact rational evaluation.
    """
    c1 = math.comb(M, n)
    c2 = math.comb(n, j)
    if base == 0.0:
        return 1.0 if N == 0 else 0.0
    if c1 < 2**53 and c2 < 2**53:
        mag = float(c1) * float(c2) * base**N
        if math.isfinite(mag):
            return mag
    log_mag = (
        math.lgamma(M + 1) - math.lgamma(n + 1) - math.lgamma(M - n + 1)
        + math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
        + N * math.log(base)
    )
    if log_mag > 709.0:
        return math.inf
    return math.exp(log_mag)


def _det_prob_rational(cfg: DetectorConfig, n: int, N: int) -> float:
    """Alternating sum in exact rational arithmetic, rounded once at the end.

    Uses ``efficiency_ratio`` when supplied, otherwise the exact binary
    rational stored in the efficiency double.
    """
    M = cfg.bins
    eta = cfg.efficiency_ratio
    if eta is None:
        eta = Fraction(cfg.efficiency)
    total = Fraction(0)
    for j in range(n + 1):
        base = (1 - eta) + eta * Fraction(n - j, M)
        term = math.comb(n, j) * base**N
        total += -term if j & 1 else term
    total *= math.comb(M, n)
    return min(max(float(total), 0.0), 1.0)


def det_prob(cfg: DetectorConfig, n: int, N: int) -> float:
    """P_det(n|N): probability of n clicks given N incident photons.

    Raises ValueError for n > M (the detector cannot report more clicks
    than bins) or N beyond the certified ceiling, and
    NumericalAccuracyError if cancellation exceeds the clamping budget.
    """
    M, eta = cfg.bins, cfg.efficiency
    if n < 0 or N < 0:
        raise ValueError("photon and click counts must be nonnegative")
    if n > M:
        raise ValueError(f"n={n} exceeds bin count M={M}")
    if N > N_CEILING:
        raise ValueError(
            f"N={N} exceeds the certified ceiling {N_CEILING}; "
            "use det_prob_ideal_limit or the MC oracle"
        )
    if n > N:
        return 0.0
    terms = []
    mag_sum = 0.0
    for j in range(n + 1):
        base = (1.0 - eta) + eta * (n - j) / M
        mag = _term_magnitude(M, n, j, N, base)
        mag_sum += mag
        terms.append(-mag if j & 1 else mag)
    # Cancellation leaves an absolute error of order mag_sum * ulp; once that
    # estimate exceeds the clamping budget the float route is meaningless.
    if not math.isfinite(mag_sum) or mag_sum * 1e-15 > 1e-13:
        return _det_prob_rational(cfg, n, N)
    p = math.fsum(terms)
    if p < 0.0:
        if p < _CLAMP_FLOOR:  # pragma: no cover - guarded by the estimate above
            raise NumericalAccuracyError(
                f"P_det({n}|{N}) = {p} lies below the clamping floor "
                f"{_CLAMP_FLOOR}; cancellation lost too many digits"
            )
        return 0.0
    return min(p, 1.0)


def det_prob_ideal_limit(eta: float, n: int, N: int) -> float:
    """Binomial loss law binom(N,n)(1-eta)^(N-n) eta^n (the M -> inf limit)."""
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not (0 <= n <= N):
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    return math.comb(N, n) * (1.0 - eta) ** (N - n) * eta**n


@lru_cache(maxsize=64)
def click_table(cfg: DetectorConfig, N_max: int) -> np.ndarray:
    """Table T[N, n] = P_det(n|N) for N = 0..N_max, by the loss+urn chain.

    One incident photon at a time: it is lost with probability 1-eta,
    falls into an already-occupied bin with probability eta*n/M, or opens
    a new bin with probability eta*(M-n)/M.  All transition weights are
    nonnegative, so the recursion is numerically stable for any N.

    The returned array is cached and marked read-only.
    """
    if N_max < 0:
        raise ValueError("N_max must be >= 0")
    M, eta = cfg.bins, cfg.efficiency
    width = min(N_max, M) + 1
    ns = np.arange(width)
    stay = (1.0 - eta) + eta * ns / M
    grow = eta * (M - (ns - 1)) / M  # weight for arriving from n-1 occupied
    T = np.zeros((N_max + 1, width))
    T[0, 0] = 1.0
    row = T[0].copy()
    for N in range(1, N_max + 1):
        new = row * stay
        new[1:] += row[:-1] * grow[1:]
        T[N] = new
        row = new
    T.setflags(write=False)
    return T


def det_response_band(cfg: DetectorConfig, N_max: int) -> list[tuple[int, float, float]]:
    """Mean and standard deviation of the click count for N = 0..N_max.

    Reproduces the detector-response bands (solid/dotted/dashed curves and
    one-standard-deviation shading) of the TMD characterization plot.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    T = click_table(cfg, N_max)
    ns = np.arange(T.shape[1])
    means = T @ ns
    second = T @ ns.astype(float) ** 2
    var = np.maximum(second - means**2, 0.0)
    return [(N, float(means[N]), float(math.sqrt(var[N]))) for N in range(N_max + 1)]


@lru_cache(maxsize=None)
def _occupancy_counts(bins: int, s: int) -> tuple[int, ...]:
    """counts[n] = number of placements of s labeled balls into `bins` bins
    that occupy exactly n distinct bins (brute-force enumeration)."""
    counts = [0] * (min(s, bins) + 1)
    for placement in itertools.product(range(bins), repeat=s):
        counts[len(set(placement))] += 1
    return tuple(counts)


def det_prob_exact(cfg: DetectorConfig, n: int, N: int) -> Fraction:
    """Exact rational P_det(n|N) by enumerating survivor subsets x placements.

    Only practical for small systems (M**N placements are enumerated); it
    serves as the independent oracle for ``det_prob``.  Requires an exact
    rational efficiency (``efficiency_ratio`` or an eta that is exactly
    representable, e.g. 1 or 0.5).
    """
    M = cfg.bins
    if n < 0 or N < 0:
        raise ValueError("photon and click counts must be nonnegative")
    if n > M:
        raise ValueError(f"n={n} exceeds bin count M={M}")
    eta = cfg.efficiency_ratio
    if eta is None:
        eta = Fraction(cfg.efficiency)
    total = Fraction(0)
    for s in range(N + 1):
        counts = _occupancy_counts(M, s)
        if n >= len(counts) or counts[n] == 0:
            continue
        subset_weight = math.comb(N, s) * eta**s * (1 - eta) ** (N - s)
        total += subset_weight * Fraction(counts[n], M**s)
    return total
