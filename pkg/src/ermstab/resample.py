"""Leave-one-out deletion/replacement and the per-draw discrepancy indicators.

Positions ``i`` are 1-based throughout, matching the usual ``s^i`` notation.
"""

import enum
from dataclasses import dataclass

from ._validation import check_beta
from .exceptions import ValidationError
from .model import Example, Sample, _as_example, empirical_risk, erm, loss


class StabilityNotion(str, enum.Enum):
    WEAK = "weak"
    CV = "cv"
    OVERLAP = "overlap"
    TRAINING = "training"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"weak_hypothesis": "weak", "weakhypothesis": "weak", "cross_validation": "cv"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown stability notion {value!r}; expected one of "
                + ", ".join(n.value for n in cls)
            ) from None

    def __str__(self):
        return self.value


def _check_position(S, i):
    if not 1 <= i <= S.m:
        raise ValidationError(f"position i must lie in [1, {S.m}], got {i}")


def delete(S, i):
    """``S`` with its ``i``-th example removed."""
    S = S if isinstance(S, Sample) else Sample(S)
    _check_position(S, i)
    if S.m < 2:
        raise ValidationError("deleting from a one-example sample leaves it empty")
    return Sample(S.examples[: i - 1] + S.examples[i:])


def replace(S, i, U):
    """``S`` with its ``i``-th example replaced by ``U``."""
    S = S if isinstance(S, Sample) else Sample(S)
    _check_position(S, i)
    return Sample(S.examples[: i - 1] + (_as_example(U),) + S.examples[i:])


@dataclass(frozen=True)
class ReplacementDraw:
    S: Sample
    i: int
    U: Example

    def __post_init__(self):
        if not isinstance(self.S, Sample):
            object.__setattr__(self, "S", Sample(self.S))
        object.__setattr__(self, "U", _as_example(self.U))
        _check_position(self.S, self.i)

    @property
    def m(self):
        return self.S.m

    @property
    def retained(self):
        return delete(self.S, self.i)

    @property
    def replaced(self):
        return replace(self.S, self.i, self.U)

    def outputs(self, H):
        """ERM indices on the original and the replaced sample."""
        return erm(self.S, H), erm(self.replaced, H)


def cv_discrepancy(draw, H, beta=0):
    beta = check_beta(beta)
    f, g = draw.outputs(H)
    return int(abs(loss(H[f], draw.U) - loss(H[g], draw.U)) > beta)


def weak_discrepancy(draw, H, beta=0):
    """Loss gap maximized over every ``(x, y)`` of the finite example space."""
    beta = check_beta(beta)
    f, g = draw.outputs(H)
    hf, hg = H[f], H[g]
    worst = max(
        abs(loss(hf, (x, y)) - loss(hg, (x, y)))
        for x in range(H.input_size)
        for y in (-1, 1)
    )
    return int(worst > beta)


def overlap_discrepancy(draw, H, beta=0):
    beta = check_beta(beta)
    if draw.m < 2:
        raise ValidationError("overlap stability needs m >= 2")
    f, g = draw.outputs(H)
    retained = draw.retained
    return int(abs(empirical_risk(H[f], retained) - empirical_risk(H[g], retained)) > beta)


def training_discrepancy(draw, H, beta=0):
    return int(cv_discrepancy(draw, H, beta) or overlap_discrepancy(draw, H, beta))


DISCREPANCIES = {
    StabilityNotion.WEAK: weak_discrepancy,
    StabilityNotion.CV: cv_discrepancy,
    StabilityNotion.OVERLAP: overlap_discrepancy,
    StabilityNotion.TRAINING: training_discrepancy,
}


def discrepancy(notion, draw, H, beta=0):
    return DISCREPANCIES[StabilityNotion.parse(notion)](draw, H, beta)
