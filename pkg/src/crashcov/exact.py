"""Exact conditional inference on 2x2 tables.

Given a table with grand total ``N``, column (crashed) total ``K`` and row
(tested) total ``n``, the count ``X = n11`` follows the hypergeometric
distribution under independence, and Fisher's noncentral hypergeometric
distribution with odds ratio ``psi`` in general::

    P_psi(X = k) ∝ C(K, k) C(N - K, n - k) psi**k,  max(0, n + K - N) <= k <= min(n, K)

The one-sided "less" test and the conditional maximum-likelihood odds ratio
with its exact upper confidence bound all come from that family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .validation import check_conf_level, check_table

ROOT_RTOL = 1e-9
MAX_ITER = 200


def support(N: int, K: int, n: int) -> tuple[int, int]:
    """Inclusive bounds of the support of X."""
    _check_params(N, K, n)
    return max(0, n + K - N), min(n, K)


def _check_params(N, K, n):
    for name, value in (("N", N), ("K", K), ("n", n)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise TypeError(f"{name} must be an integer, got {value!r}")
    if N < 0 or not 0 <= K <= N or not 0 <= n <= N:
        raise ValueError(f"invalid hypergeometric parameters N={N}, K={K}, n={n}")


def log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_hypergeom_pmf(k: int, N: int, K: int, n: int) -> float:
    """log P(X = k) for the central hypergeometric distribution.

    Read off the cached log-weight vector and its log-sum-exp, which is both
    closer to the exact value and better normalized than differencing
    log-gamma terms when N is in the tens of thousands. Raises ValueError
    when ``k`` is outside the support.
    """
    lo, hi = support(N, K, n)
    if not lo <= k <= hi:
        raise ValueError(f"k={k} outside support [{lo}, {hi}]")
    return float(_central_log_weights(N, K, n)[k - lo]) - _central_log_norm(N, K, n)


@lru_cache(maxsize=64)
def _central_log_weights(N: int, K: int, n: int) -> np.ndarray:
    # log C(K,k) C(N-K,n-k) up to a constant, built from the term ratio
    # f(k+1)/f(k) = (K-k)(n-k) / ((k+1)(N-K-n+k+1)); accumulating small log
    # ratios keeps more digits than differencing large log-gamma values.
    lo, hi = support(N, K, n)
    k = np.arange(lo, hi, dtype=np.float64)
    steps = (
        np.log(K - k) + np.log(n - k) - np.log(k + 1.0) - np.log(N - K - n + k + 1.0)
    )
    out = np.empty(hi - lo + 1)
    out[0] = 0.0
    np.cumsum(steps, out=out[1:])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _central_log_norm(N: int, K: int, n: int) -> float:
    logw = _central_log_weights(N, K, n)
    top = float(logw.max())
    return top + math.log(math.fsum(np.exp(logw - top)))


def noncentral_pmf_vector(N: int, K: int, n: int, psi: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(ks, probs)`` over the whole support for odds ratio ``psi``.

    ``psi = 1`` gives the central hypergeometric distribution. Weights are
    formed in log space and shifted by their maximum before exponentiation.
    """
    if not psi > 0:
        raise ValueError(f"psi must be positive, got {psi!r}")
    lo, hi = support(N, K, n)
    logw = _central_log_weights(N, K, n)
    if psi != 1.0:
        if math.isinf(psi):
            raise ValueError("psi must be finite")
        logw = logw + np.arange(hi - lo + 1) * math.log(psi)
    w = np.exp(logw - logw.max())
    probs = w / math.fsum(w)
    return np.arange(lo, hi + 1), probs


def hypergeom_pmf_vector(N: int, K: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    return noncentral_pmf_vector(N, K, n, 1.0)


def noncentral_pmf(k: int, N: int, K: int, n: int, psi: float) -> float:
    lo, hi = support(N, K, n)
    if not lo <= k <= hi:
        raise ValueError(f"k={k} outside support [{lo}, {hi}]")
    _, probs = noncentral_pmf_vector(N, K, n, psi)
    return float(probs[k - lo])


def noncentral_cdf(x: int, N: int, K: int, n: int, psi: float = 1.0) -> float:
    """P_psi(X <= x), summing whichever tail has fewer terms."""
    lo, hi = support(N, K, n)
    if x < lo:
        return 0.0
    if x >= hi:
        return 1.0
    _, probs = noncentral_pmf_vector(N, K, n, psi)
    cut = x - lo + 1
    if cut <= len(probs) - cut:
        value = math.fsum(probs[:cut])
    else:
        value = 1.0 - math.fsum(probs[cut:])
    return min(1.0, max(0.0, value))


def noncentral_mean(N: int, K: int, n: int, psi: float) -> float:
    ks, probs = noncentral_pmf_vector(N, K, n, psi)
    return math.fsum(ks * probs)


def _solve_increasing(func, rtol=ROOT_RTOL, max_iter=MAX_ITER) -> float:
    """Root of ``func(psi)`` for psi in (0, inf), ``func`` increasing.

    Brackets by widening geometrically from psi = 1, then bisects on log psi
    until the bracket's relative width drops below ``rtol``.
    """
    f1 = func(1.0)
    if f1 == 0.0:
        return 1.0
    # Widen in log space with doubling step: 2, 4, 16, 256, ...
    direction = -1.0 if f1 > 0 else 1.0
    inner, step = 0.0, math.log(2.0)
    for _ in range(max_iter):
        outer = inner + direction * step
        if abs(outer) > 700.0:
            raise ArithmeticError("root bracket left the representable range")
        value = func(math.exp(outer))
        if value == 0.0:
            return math.exp(outer)
        if (value > 0) != (f1 > 0):
            break
        inner, step = outer, step * 2.0
    else:
        raise ArithmeticError("failed to bracket root")
    lo, hi = sorted((inner, outer))
    log_rtol = math.log1p(rtol)
    for _ in range(max_iter):
        if hi - lo <= log_rtol:
            break
        mid = 0.5 * (lo + hi)
        value = func(math.exp(mid))
        if value == 0.0:
            return math.exp(mid)
        if value < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def conditional_mle_odds_ratio(x: int, N: int, K: int, n: int) -> float:
    """psi solving E_psi[X] = x; 0 or inf at the support bounds."""
    lo, hi = support(N, K, n)
    if x == lo:
        return 0.0
    if x == hi:
        return math.inf
    return _solve_increasing(lambda psi: noncentral_mean(N, K, n, psi) - x)


def upper_confidence_bound(x: int, N: int, K: int, n: int, conf_level: float = 0.95) -> float:
    """psi solving P_psi(X <= x) = 1 - conf_level; inf at the upper bound."""
    alpha = 1.0 - check_conf_level(conf_level)
    _, hi = support(N, K, n)
    if x >= hi:
        return math.inf
    # the CDF decreases in psi, so negate it to get an increasing objective
    return _solve_increasing(lambda psi: alpha - noncentral_cdf(x, N, K, n, psi))


@dataclass(frozen=True)
class FisherResult:
    p_value: float
    odds_ratio: float
    ci_low: float
    ci_high: float
    alternative: str = "less"
    conf_level: float = 0.95
    degenerate: bool = False

    def fisher_line(self) -> str:
        low = "0" if self.ci_low == 0 else format_half_up(self.ci_low)
        return (
            f"p={format_half_up(self.p_value)}, OR={format_half_up(self.odds_ratio)}, "
            f"CI=[{low}, {format_half_up(self.ci_high)}]"
        )

    def to_dict(self) -> dict:
        return {
            "alternative": self.alternative,
            "conf_level": repr(self.conf_level),
            "degenerate": self.degenerate,
            "p_value": repr(self.p_value),
            "odds_ratio": repr(self.odds_ratio),
            "ci_low": repr(self.ci_low),
            "ci_high": repr(self.ci_high),
            "display": {
                "p_value": format_half_up(self.p_value),
                "odds_ratio": format_half_up(self.odds_ratio),
                "ci_low": format_half_up(self.ci_low),
                "ci_high": format_half_up(self.ci_high),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FisherResult":
        return cls(
            p_value=float(data["p_value"]),
            odds_ratio=float(data["odds_ratio"]),
            ci_low=float(data["ci_low"]),
            ci_high=float(data["ci_high"]),
            alternative=data.get("alternative", "less"),
            conf_level=float(data.get("conf_level", 0.95)),
            degenerate=bool(data.get("degenerate", False)),
        )


def fisher_pvalue_less(table) -> float:
    """P(X <= n11) under independence, given the table's margins."""
    t = check_table(table)
    if min(t.row1, t.row0, t.col1, t.col0) == 0:
        return 1.0
    return noncentral_cdf(t.n11, t.total, t.col1, t.row1, 1.0)


def fisher_less(table, conf_level: float = 0.95) -> FisherResult:
    """One-sided Fisher exact test that the odds ratio is below 1.

    ``table`` is anything :func:`check_table` accepts. A zero margin yields a
    degenerate result: p = 1, odds ratio NaN, interval [0, inf].
    """
    t = check_table(table)
    conf_level = check_conf_level(conf_level)
    N, K, n, x = t.total, t.col1, t.row1, t.n11
    if min(t.row1, t.row0, t.col1, t.col0) == 0:
        return FisherResult(1.0, math.nan, 0.0, math.inf, "less", conf_level, True)
    p = fisher_pvalue_less(t)
    odds = conditional_mle_odds_ratio(x, N, K, n)
    upper = upper_confidence_bound(x, N, K, n, conf_level)
    return FisherResult(p, odds, 0.0, upper, "less", conf_level, False)


def round_half_up(value: float, places: int = 3) -> Decimal:
    """Round the decimal representation of ``value`` half-up."""
    quantum = Decimal(1).scaleb(-places)
    return Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)


def format_half_up(value: float, places: int = 3) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return str(round_half_up(value, places))


def percent_half_up(count: int, total: int) -> str:
    """``count / total`` as a percentage with one decimal, rounded half-up exactly."""
    scaled = Fraction(1000 * count, total) + Fraction(1, 2)
    tenths = scaled.numerator // scaled.denominator
    return f"{tenths // 10}.{tenths % 10}%"


def summarize_percentages(table) -> dict[str, str]:
    """Each cell's share of the grand total, e.g. ``{"n00": "82.3%", ...}``."""
    t = check_table(table)
    if t.total == 0:
        raise ValueError("cannot express shares of an empty table")
    return {name: percent_half_up(count, t.total) for name, count in t.to_dict().items()}


def margin_percentages(table) -> dict[str, str]:
    t = check_table(table)
    if t.total == 0:
        raise ValueError("cannot express shares of an empty table")
    margins = {"row1": t.row1, "row0": t.row0, "col1": t.col1, "col0": t.col0}
    return {name: percent_half_up(v, t.total) for name, v in margins.items()}
