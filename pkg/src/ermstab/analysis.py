"""Decay-rate fitting and phase classification of instability series.

Both candidate models are straight lines after a log transform:

* power law ``delta = c * m**(-alpha)``: regress ``log delta`` on ``log m``;
* exponential ``delta = a * exp(-b * m)``: regress ``log delta`` on ``m``.

:func:`classify` compares the residual sums of squares (in log space) under
an explicit, recorded decision rule. The rule is a finite-sample proxy for an
asymptotic statement; its thresholds are part of the output.
"""

import enum
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError

MIN_FIT_POINTS = 4
_Z95 = 1.959963984540054


class Phase(str, enum.Enum):
    POWER_LAW = "PowerLaw"
    EXPONENTIAL = "Exponential"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RateSeries:
    """Instability values over increasing sample sizes."""

    m: tuple
    delta: tuple
    ci: tuple = None
    provenance: tuple = None

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        delta = tuple(float(v) for v in self.delta)
        if len(m) != len(delta):
            raise ValidationError("m and delta must have equal length")
        if any(b <= a for a, b in zip(m, m[1:])):
            raise ValidationError(f"m must be strictly increasing: {m}")
        if any(not np.isfinite(d) or d <= 0 for d in delta):
            raise ValidationError("delta values must be positive and finite for log-space fits")
        if self.ci is not None and len(self.ci) != len(m):
            raise ValidationError("one confidence interval per point is required")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "delta", delta)

    def __len__(self):
        return len(self.m)

    @classmethod
    def from_records(cls, records):
        """Build from ``(m, delta, ci_low, ci_high, provenance)`` tuples.

        Monte Carlo points whose interval reaches zero have no usable log and
        are dropped, as are exact zeros.
        """
        kept = []
        for m, delta, lo, hi, prov in records:
            if prov == "mc" and (lo is None or lo <= 0):
                continue
            if delta <= 0:
                continue
            kept.append((m, delta, None if lo is None else (lo, hi), prov))
        kept.sort(key=lambda r: r[0])
        cis = tuple(r[2] for r in kept)
        return cls(
            m=tuple(r[0] for r in kept),
            delta=tuple(r[1] for r in kept),
            ci=cis if all(c is not None for c in cis) and cis else None,
            provenance=tuple(r[3] for r in kept),
        )


@dataclass(frozen=True)
class PowerLawFit:
    c: float
    alpha: float
    rss: float

    def predict(self, m):
        return self.c * np.asarray(m, dtype=float) ** (-self.alpha)


@dataclass(frozen=True)
class ExponentialFit:
    a: float
    b: float
    rss: float

    def predict(self, m):
        return self.a * np.exp(-self.b * np.asarray(m, dtype=float))


@dataclass(frozen=True)
class ClassifyConfig:
    rss_ratio: float = 4.0
    alpha_min: float = 0.2
    alpha_max: float = 1.5
    min_span: float = 8.0
    min_points: int = 6
    weighted: bool = False

    def __post_init__(self):
        if self.rss_ratio < 1:
            raise ValidationError("rss_ratio must be at least 1")
        if not self.alpha_min < self.alpha_max:
            raise ValidationError("alpha_min must be below alpha_max")
        if self.min_points < MIN_FIT_POINTS:
            raise ValidationError(f"min_points must be at least {MIN_FIT_POINTS}")


@dataclass(frozen=True)
class RateFit:
    power: PowerLawFit
    exponential: ExponentialFit
    classification: Phase
    thresholds: ClassifyConfig = field(default_factory=ClassifyConfig)

    @property
    def model(self):
        if self.classification is Phase.EXPONENTIAL:
            return self.exponential
        if self.classification is Phase.POWER_LAW:
            return self.power
        return self.power if self.power.rss <= self.exponential.rss else self.exponential

    def to_dict(self):
        return {
            "classification": self.classification.value,
            "power_law": asdict(self.power),
            "exponential": asdict(self.exponential),
            "thresholds": asdict(self.thresholds),
        }


def _as_series(series):
    if isinstance(series, RateSeries):
        return series
    m, delta = series
    return RateSeries(tuple(m), tuple(delta))


def _line_fit(x, series, weighted):
    if len(series) < MIN_FIT_POINTS:
        raise ValidationError(
            f"a rate fit needs at least {MIN_FIT_POINTS} points, got {len(series)}"
        )
    y = np.log(np.asarray(series.delta))
    w = None
    if weighted:
        if series.ci is None:
            raise ValidationError("weighted fits need confidence intervals")
        # delta method: sd(log delta) ~ sd(delta) / delta
        sd = np.array([(hi - lo) / (2 * _Z95) for lo, hi in series.ci]) / np.asarray(series.delta)
        if (sd <= 0).any():
            raise ValidationError("confidence intervals must have positive width")
        w = 1.0 / sd
    slope, intercept = np.polyfit(x, y, 1, w=w)
    resid = y - (slope * x + intercept)
    return slope, intercept, float(resid @ resid)


def fit_power(series, weighted=False):
    """Least-squares fit of ``log delta = log c - alpha log m``."""
    series = _as_series(series)
    slope, intercept, rss = _line_fit(np.log(np.asarray(series.m, dtype=float)), series, weighted)
    return PowerLawFit(float(np.exp(intercept)), float(-slope), rss)


def fit_exponential(series, weighted=False):
    """Least-squares fit of ``log delta = log a - b m``."""
    series = _as_series(series)
    slope, intercept, rss = _line_fit(np.asarray(series.m, dtype=float), series, weighted)
    return ExponentialFit(float(np.exp(intercept)), float(-slope), rss)


def classify(series, config=None):
    """Fit both models and label the series PowerLaw, Exponential or Inconclusive.

    PowerLaw needs the power-law rss to be smaller by at least
    ``config.rss_ratio`` and ``alpha`` within ``[alpha_min, alpha_max]``;
    Exponential needs the exponential rss smaller by the same factor.
    """
    config = config or ClassifyConfig()
    series = _as_series(series)
    if len(series) < config.min_points:
        raise ValidationError(
            f"classification needs at least {config.min_points} points, got {len(series)}"
        )
    span = series.m[-1] / series.m[0]
    if span < config.min_span:
        raise ValidationError(
            f"classification needs m to span a factor of {config.min_span}, got {span:.3g}"
        )
    power = fit_power(series, config.weighted)
    expo = fit_exponential(series, config.weighted)
    if expo.rss >= config.rss_ratio * power.rss and config.alpha_min <= power.alpha <= config.alpha_max:
        phase = Phase.POWER_LAW
    elif power.rss >= config.rss_ratio * expo.rss:
        phase = Phase.EXPONENTIAL
    else:
        phase = Phase.INCONCLUSIVE
    return RateFit(power, expo, phase, config)


class DecayRateClassifier(BaseEstimator):
    """Estimator wrapper around :func:`classify`.

    ``fit(m, delta)`` stores the fitted models and the phase label;
    ``predict(m)`` evaluates the selected model.

    Parameters
    ----------
    rss_ratio : float, default=4.0
    alpha_min, alpha_max : float, default=(0.2, 1.5)
    min_span : float, default=8.0
    min_points : int, default=6
    weighted : bool, default=False
        Weight points by their confidence intervals (requires ``ci`` in ``fit``).
    """

    def __init__(self, rss_ratio=4.0, alpha_min=0.2, alpha_max=1.5, min_span=8.0,
                 min_points=6, weighted=False):
        self.rss_ratio = rss_ratio
        self.alpha_min = alpha_min
        self.alpha_max = alpha_max
        self.min_span = min_span
        self.min_points = min_points
        self.weighted = weighted

    def fit(self, m, delta, ci=None):
        config = ClassifyConfig(**self.get_params())
        series = RateSeries(tuple(np.ravel(m)), tuple(np.ravel(delta)), None if ci is None else tuple(map(tuple, ci)))
        self.fit_ = classify(series, config)
        self.power_ = self.fit_.power
        self.exponential_ = self.fit_.exponential
        self.classification_ = self.fit_.classification
        return self

    def predict(self, m):
        check_is_fitted(self, "fit_")
        return self.fit_.model.predict(m)
