"""Closed-form bounds and identities for the two-minimizer tie analysis.

Rational evaluations use exact big-integer binomials; float evaluations go
through log-gamma (``scipy.stats.binom``). ``mode="auto"`` switches to float
once the binomial size exceeds ``RATIONAL_CROSSOVER``.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from ._validation import as_fraction, check_probability, check_sample_size
from .exceptions import ValidationError
from .model import NO_GAP

RATIONAL_CROSSOVER = 1000


@dataclass(frozen=True)
class BinomialSpec:
    n: int
    q: Fraction

    def __post_init__(self):
        check_sample_size(self.n, 0, "n")
        object.__setattr__(self, "q", check_probability(self.q, "q"))

    def pmf(self, k):
        if not 0 <= k <= self.n:
            return Fraction(0)
        return math.comb(self.n, k) * self.q**k * (1 - self.q) ** (self.n - k)


def _resolve_mode(mode, n):
    if mode == "auto":
        return "rational" if n <= RATIONAL_CROSSOVER else "float"
    if mode not in ("rational", "float"):
        raise ValidationError(f"mode must be 'auto', 'rational' or 'float', got {mode!r}")
    return mode


def _window_numerator(k):
    """``central_window_prob(k) * 2**k``."""
    if k % 2 == 0:
        return math.comb(k, k // 2)
    return 2 * math.comb(k, (k - 1) // 2)


def central_window_prob(k, mode="rational"):
    """``Pr(|Bin(k, 1/2) - k/2| <= 1/2)``."""
    k = check_sample_size(k, 0, "k")
    if _resolve_mode(mode, k) == "rational":
        return Fraction(_window_numerator(k), 2**k)
    if k % 2 == 0:
        return float(binom.pmf(k // 2, k, 0.5))
    return float(2 * binom.pmf((k - 1) // 2, k, 0.5))


def odd_central_binom_prob(k, mode="rational"):
    """``Pr(Bin(2j + 1, 1/2) = j)`` with ``j = k // 2``."""
    k = check_sample_size(k, 0, "k")
    j = k // 2
    if _resolve_mode(mode, 2 * j + 1) == "rational":
        return Fraction(math.comb(2 * j + 1, j), 2 ** (2 * j + 1))
    return float(binom.pmf(j, 2 * j + 1, 0.5))


def _exact_mixture(p, n, weight_of_k, ks):
    """``sum_k Pr(Bin(n, p) = k) * weight_of_k(k) / 2**k`` over ``ks``, exactly.

    Summed over a common denominator so that large ``n`` stays cheap.
    """
    a, b = p.numerator, p.denominator
    total = 0
    for k in ks:
        total += math.comb(n, k) * a**k * (b - a) ** (n - k) * weight_of_k(k) * 2 ** (n - k)
    return Fraction(total, b**n * 2**n)


def tie_gap_probability(p, m, mode="auto"):
    """Probability that the two minimizers' retained error counts differ by at most one.

    ``p`` is the disagreement mass; the examples in the disagreement region
    favour either minimizer with equal probability.
    """
    m = check_sample_size(m, 2)
    p = check_probability(p)
    n = m - 1
    if _resolve_mode(mode, n) == "rational":
        return _exact_mixture(p, n, _window_numerator, range(n + 1))
    ks = np.arange(n + 1)
    windows = np.array([central_window_prob(int(k), "float") for k in ks])
    return math.fsum(binom.pmf(ks, n, float(p)) * windows)


class UpperBoundTerms(NamedTuple):
    c: int
    tail: object
    sup: object

    @property
    def value(self):
        return self.tail + self.sup


def tie_gap_upper_bound_terms(p, m, tail="cdf", mode="auto"):
    """Split of the tie-gap upper bound at ``c = ceil(p (m - 1) / 2)``.

    ``tail`` is ``Pr(Bin(m - 1, p) <= c)`` (``"cdf"``) or the Chernoff form
    ``exp(-p (m - 1) / 8)`` (``"chernoff"``); ``sup`` is the largest central
    window probability over ``k = c + 1 .. m - 1`` (zero if that range is empty).
    """
    m = check_sample_size(m, 3)
    p = check_probability(p, open_low=True)
    n = m - 1
    c = math.ceil(p * n / 2)
    mode = _resolve_mode(mode, n)
    if tail == "cdf":
        if mode == "rational":
            tail_value = _exact_mixture(p, n, lambda k: 2**k, range(min(c, n) + 1))
        else:
            tail_value = float(binom.cdf(c, n, float(p)))
    elif tail == "chernoff":
        tail_value = math.exp(-float(p) * n / 8)
    else:
        raise ValidationError(f"tail must be 'cdf' or 'chernoff', got {tail!r}")
    ks = range(c + 1, n + 1)
    if mode == "rational" and tail == "cdf":
        sup = max((central_window_prob(k) for k in ks), default=Fraction(0))
    else:
        sup = max((central_window_prob(k, "float") for k in ks), default=0.0)
    return UpperBoundTerms(c, tail_value, sup)


def tie_gap_upper_bound(p, m, tail="cdf", mode="auto"):
    return tie_gap_upper_bound_terms(p, m, tail, mode).value


def tie_gap_lower_bound(m, mode="auto"):
    """``min_{0 <= k <= m - 1} central_window_prob(k)``, the mixture-free lower bound."""
    m = check_sample_size(m, 2)
    return min(central_window_prob(k, mode) for k in range(m))


class ClampedBound(NamedTuple):
    value: float
    raw: float


def erm_in_hstar_lower_bound(h_size, eps, m):
    """``1 - (|H| - 1) exp(-eps^2 m / 2)``, clamped to [0, 1] with the raw value kept."""
    if eps is NO_GAP or eps is None:
        raise ValidationError("no risk gap: every hypothesis is a risk minimizer")
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValidationError(f"the risk gap must be positive, got {eps}")
    h_size = check_sample_size(h_size, 1, "|H|")
    m = check_sample_size(m, 1)
    raw = 1.0 - (h_size - 1) * math.exp(-float(eps) ** 2 * m / 2)
    return ClampedBound(min(1.0, max(0.0, raw)), raw)


def thm25_training_rate(m):
    """``(2 pi m)^(-1/2)``."""
    m = check_sample_size(m, 1)
    return 1.0 / math.sqrt(2 * math.pi * m)


def thm25_weak_rate(p, m):
    """``exp(-(2 - 1/p)^2 m / 8)``, defined for ``p > 1/2``."""
    p = check_probability(p)
    if p <= Fraction(1, 2):
        raise ValidationError(f"the exponential weak-stability rate needs p > 1/2, got {p}")
    m = check_sample_size(m, 1)
    return math.exp(-((2 - 1 / float(p)) ** 2) * m / 8)


def pair_mismatch_prob(p):
    """``p^2 / 2``: mass of opposite-side pairs when both sides weigh ``p / 2``."""
    if isinstance(p, float):
        check_probability(p)
        return p * p / 2
    p = check_probability(p)
    return p * p / 2
