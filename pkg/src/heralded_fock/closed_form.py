"""Closed-form conditional moments of the heralded signal field.

Single mode: the conditional mean and variance collapse to sums over

    a_j = 1 / (1 - tanh^2 g [(1-eta) + eta (n_i - j)/M]),   j = 0..n_i

    mean = sum_j a_j - 1,       variance = sum_j (a_j^2 - a_j).

Multimode: the moments follow from derivatives of the beta function
B(x, 1+n_i) through

    g_mu(x) = d^mu B / d^(mu-1) B,
    mean    = -mu - c g_mu(x),
    var     = (c + c^2 d/dx) g_mu(x),

with x = M/(eta sinh^2 g) + M - n_i, b = M(1-eta)/eta + n_i and
c = M/(eta tanh^2 g).  B(x, 1+n_i) has the exact partial-fraction form

    B(x, 1+n_i) = sum_j C(n_i,j) (-1)^j / (x + j),

so every derivative is available term-by-term exactly.  The alternating
partial-fraction sums cancel catastrophically in floating point (their
value is ~n_i!/x^(n_i+1) against leading terms of order 1/x), so all of
them are evaluated in exact rational arithmetic at the binary-rational
x actually stored in the double; only the final mean/variance are rounded.

The intermediate sums S_0, S_1, S_2 (l-th moments of the unnormalized
weights) are exposed for testing via ``appendix_sums``.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from .detector import DetectorConfig
from .errors import NumericalAccuracyError
from .source import SourceConfig


@dataclass(frozen=True)
class AppendixContext:
    """Scalars feeding the multimode closed forms."""

    x: float
    b: float
    c: float
    A: float
    mu: int
    n_i: int


def appendix_context(det: DetectorConfig, src: SourceConfig, n_i: int) -> AppendixContext:
    M, eta = det.bins, det.efficiency
    if not (0 <= n_i <= M):
        raise ValueError(f"n_i must lie in [0, {M}], got {n_i}")
    s2 = src.mean_pairs_per_mode
    t2 = src.thermal_ratio
    base = M / (eta * s2)
    return AppendixContext(
        x=base + M - n_i,
        b=M * (1.0 - eta) / eta + n_i,
        c=M / (eta * t2),
        A=math.comb(M, n_i) * base**src.modes,
        mu=src.modes,
        n_i=n_i,
    )


@dataclass(frozen=True)
class PartialFractionForm:
    """sum_j coeff_j / (x + pole_j)^power, with exact rational coefficients."""

    power: int
    terms: tuple[tuple[Fraction, int], ...]

    def derivative(self) -> "PartialFractionForm":
        """Exact d/dx: power goes up by one, coefficients scale by -power."""
        p = self.power
        return PartialFractionForm(
            power=p + 1,
            terms=tuple((c * (-p), j) for c, j in self.terms),
        )

    def eval(self, x) -> Fraction:
        """Evaluate exactly; pass a Fraction x for a rational result."""
        x = Fraction(x)
        return sum((c / (x + j) ** self.power for c, j in self.terms), Fraction(0))


def beta_pf(n_i: int) -> PartialFractionForm:
    """Partial-fraction form of B(x, 1+n_i) = sum_j C(n_i,j)(-1)^j/(x+j)."""
    if n_i < 0:
        raise ValueError("n_i must be nonnegative")
    return PartialFractionForm(
        power=1,
        terms=tuple(
            (Fraction(-math.comb(n_i, j) if j & 1 else math.comb(n_i, j)), j)
            for j in range(n_i + 1)
        ),
    )


def _beta_derivatives(n_i: int, order: int, x: Fraction) -> list[Fraction]:
    """[B(x), B'(x), ..., B^(order)(x)] evaluated exactly."""
    form = beta_pf(n_i)
    values = [form.eval(x)]
    for _ in range(order):
        form = form.derivative()
        values.append(form.eval(x))
    return values


def a_coeff(det: DetectorConfig, src: SourceConfig, n_i: int, j: int) -> float:
    """a_j of the single-mode closed forms; always >= 1 for valid inputs."""
    M, eta = det.bins, det.efficiency
    if not (0 <= j <= n_i <= M):
        raise ValueError(f"need 0 <= j <= n_i <= M, got j={j}, n_i={n_i}, M={M}")
    t2 = src.thermal_ratio
    return 1.0 / (1.0 - t2 * ((1.0 - eta) + eta * (n_i - j) / M))


def cond_mean_single(det: DetectorConfig, src: SourceConfig, n_i: int) -> float:
    """Single-mode conditional mean: sum_j a_j - 1."""
    return math.fsum(a_coeff(det, src, n_i, j) for j in range(n_i + 1)) - 1.0


def cond_var_single(det: DetectorConfig, src: SourceConfig, n_i: int) -> float:
    """Single-mode conditional variance: sum_j (a_j^2 - a_j)."""
    return math.fsum(
        (a := a_coeff(det, src, n_i, j)) * a - a for j in range(n_i + 1)
    )


def g_mu(ctx: AppendixContext) -> float:
    """Derivative ratio g_mu(x) = d^mu B / d^(mu-1) B at x = ctx.x."""
    if ctx.mu < 1:
        raise ValueError("mu must be >= 1")
    d = _beta_derivatives(ctx.n_i, ctx.mu, Fraction(ctx.x))
    if d[ctx.mu - 1] == 0:
        raise NumericalAccuracyError(
            f"beta derivative of order {ctx.mu - 1} vanished at x={ctx.x}"
        )
    return float(d[ctx.mu] / d[ctx.mu - 1])


def g_mu_derivative(ctx: AppendixContext) -> float:
    """d/dx of g_mu(x), by the quotient rule on exact beta derivatives."""
    if ctx.mu < 1:
        raise ValueError("mu must be >= 1")
    d = _beta_derivatives(ctx.n_i, ctx.mu + 1, Fraction(ctx.x))
    lo, mid, hi = d[ctx.mu - 1], d[ctx.mu], d[ctx.mu + 1]
    if lo == 0:
        raise NumericalAccuracyError(
            f"beta derivative of order {ctx.mu - 1} vanished at x={ctx.x}"
        )
    return float((hi * lo - mid * mid) / (lo * lo))


def cond_moments_multimode(
    det: DetectorConfig, src: SourceConfig, n_i: int
) -> tuple[float, float]:
    """Closed-form multimode conditional (mean, variance).

    mean = -mu - c g_mu(x), var = (c + c^2 d/dx) g_mu(x), evaluated in exact
    rational arithmetic so the near-total cancellation between -mu and
    -c g_mu(x) costs nothing; for mu = 1 this reduces to the single-mode
    forms.
    """
    ctx = appendix_context(det, src, n_i)
    mu = ctx.mu
    x = Fraction(ctx.x)
    c = Fraction(ctx.c)
    d = _beta_derivatives(n_i, mu + 1, x)
    lo, mid, hi = d[mu - 1], d[mu], d[mu + 1]
    if lo == 0:
        raise NumericalAccuracyError(
            f"beta derivative of order {mu - 1} vanished at x={ctx.x}"
        )
    g = mid / lo
    dg = (hi * lo - mid * mid) / (lo * lo)
    mean = -mu - c * g
    var = c * g + c * c * dg
    return float(mean), float(var)


def appendix_sums(
    det: DetectorConfig, src: SourceConfig, n_i: int
) -> tuple[float, float, float]:
    """The closed-form S_0, S_1, S_2 (unnormalized posterior moments).

    S_l = sum_n n^l P_det(n_i|n) P_OPA(n); the direct-summation route in
    tests adjudicates any typo in these prefactors.
    """
    ctx = appendix_context(det, src, n_i)
    mu = ctx.mu
    x = Fraction(ctx.x)
    b = Fraction(ctx.b)
    c = Fraction(ctx.c)
    d = _beta_derivatives(n_i, mu + 1, x)

    def dn_xb_beta(p: int) -> Fraction:
        """d^p/dx^p [(x+b) B]."""
        out = (x + b) * d[p]
        if p >= 1:
            out += p * d[p - 1]
        return out

    def dn_xb2_beta(p: int) -> Fraction:
        """d^p/dx^p [(x+b)^2 B]."""
        out = (x + b) ** 2 * d[p]
        if p >= 1:
            out += 2 * p * (x + b) * d[p - 1]
        if p >= 2:
            out += p * (p - 1) * d[p - 2]
        return out

    A = Fraction(ctx.A)
    s0 = A * Fraction((-1) ** (mu - 1), math.factorial(mu - 1)) * d[mu - 1]
    s1 = A * Fraction(mu * (-1) ** mu, math.factorial(mu)) * dn_xb_beta(mu)
    s2 = (
        A
        * Fraction(mu**2 * (-1) ** (mu + 1), math.factorial(mu + 1))
        * (dn_xb2_beta(mu + 1) + (c / mu) * dn_xb_beta(mu + 1))
    )
    return float(s0), float(s1), float(s2)
