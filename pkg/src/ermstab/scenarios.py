"""Built-in scenarios for each stability regime, plus a JSON document loader.

Scenario documents look like::

    {
      "name": "three_hyp_two_min",
      "input_size": 2,
      "atoms": [{"x": 0, "y": 1, "weight": "1/4"}, ...],
      "hypotheses": [{"name": "h_a", "labels": [1, -1]}, ...]
    }

Weights are written as ``"a/b"`` strings so that they round-trip exactly.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from pathlib import Path

from ._validation import as_fraction, check_probability
from .exceptions import ValidationError
from .model import (
    NO_GAP,
    Example,
    FiniteDistribution,
    Hypothesis,
    HypothesisSpace,
    loss,
    loss_pattern_reduce,
)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """A distribution together with a hypothesis space bound to it."""

    name: str
    distribution: FiniteDistribution
    hypotheses: HypothesisSpace
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.hypotheses.distribution is not self.distribution:
            object.__setattr__(self, "hypotheses", self.hypotheses.bind(self.distribution))

    @property
    def label(self):
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({inner})"

    @property
    def risks(self):
        return self.hypotheses.risks

    @property
    def minimizers(self):
        return self.hypotheses.minimizers

    @property
    def gap(self):
        return self.hypotheses.gap

    @property
    def n_minimizers(self):
        return len(self.minimizers)

    @cached_property
    def reduced(self):
        return loss_pattern_reduce(self.distribution, self.hypotheses)

    def region_masses(self, j=None, k=None):
        """Masses of the regions where ``h_j`` strictly beats ``h_k`` and vice versa.

        Defaults to the first two risk minimizers.
        """
        if j is None or k is None:
            if self.n_minimizers < 2:
                raise ValidationError("region masses need two risk minimizers")
            j, k = self.minimizers[:2]
        hj, hk = self.hypotheses[j], self.hypotheses[k]
        first = second = Fraction(0)
        for z, w in self.distribution:
            lj, lk = loss(hj, z), loss(hk, z)
            if lj < lk:
                first += w
            elif lk < lj:
                second += w
        return first, second

    @property
    def disagreement_mass(self):
        """Probability that an example separates the two risk minimizers (|H*| = 2 only)."""
        if self.n_minimizers != 2:
            raise ValidationError(
                f"disagreement mass is defined for exactly two minimizers, found {self.n_minimizers}"
            )
        return sum(self.region_masses(), Fraction(0))

    @property
    def pairwise_disagreement(self):
        """``{(j, k): Pr(h_j(X) != h_k(X))}`` over pairs of risk minimizers."""
        table = self.hypotheses.disagreement
        return {(j, k): table[j][k] for j, k in combinations(self.minimizers, 2)}

    def pair_mismatch_mass(self):
        """Exact mass of ``(Z_1 x Z_2) u (Z_2 x Z_1)`` for the two minimizers."""
        first, second = self.region_masses()
        return 2 * first * second

    def metadata(self):
        gap = self.gap
        meta = {
            "risks": [str(r) for r in self.risks],
            "minimizers": list(self.minimizers),
            "gap": None if gap is NO_GAP else str(gap),
        }
        if self.n_minimizers == 2:
            meta["disagreement_mass"] = str(self.disagreement_mass)
        if self.n_minimizers > 1:
            meta["pairwise_disagreement"] = {
                f"{j},{k}": str(v) for (j, k), v in self.pairwise_disagreement.items()
            }
        return meta


def _spec(name, atoms, input_size, hypotheses, params=None):
    D = FiniteDistribution(atoms, input_size=input_size)
    H = HypothesisSpace(hypotheses, D)
    return ScenarioSpec(name, D, H, dict(params or {}))


def two_constant(p=Fraction(1, 2)):
    """One input point, label +1 with probability ``p``; H = [h_+, h_-]."""
    p = check_probability(p)
    atoms = [(Example(0, 1), p), (Example(0, -1), 1 - p)]
    hyps = [Hypothesis((1,), "h_+"), Hypothesis((-1,), "h_-")]
    return _spec("two_constant", atoms, 1, hyps, {"p": str(p)})


def three_hyp_two_min():
    """Three hypotheses on two points, two of them tied at risk 1/4."""
    atoms = [
        (Example(0, 1), Fraction(1, 4)),
        (Example(0, -1), Fraction(1, 4)),
        (Example(1, -1), Fraction(1, 2)),
    ]
    hyps = [
        Hypothesis((1, -1), "h_a"),
        Hypothesis((-1, -1), "h_b"),
        Hypothesis((1, 1), "h_c"),
    ]
    return _spec("three_hyp_two_min", atoms, 2, hyps)


def symmetric_n_min(n=3):
    """``n`` uniform points with coin-flip labels; ``h_i`` is +1 only on point ``i``."""
    if isinstance(n, str):
        n = int(n)
    if n < 2:
        raise ValidationError(f"symmetric_n_min needs n >= 2, got {n}")
    w = Fraction(1, 2 * n)
    atoms = [(Example(x, y), w) for x in range(n) for y in (1, -1)]
    hyps = [
        Hypothesis(tuple(1 if x == i else -1 for x in range(n)), f"h_{i + 1}")
        for i in range(n)
    ]
    return _spec("symmetric_n_min", atoms, n, hyps, {"n": n})


def unique_min(margin=Fraction(1, 5)):
    """``two_constant(1/2 + margin)``: a single risk minimizer with gap ``2 * margin``."""
    margin = as_fraction(margin)
    if not 0 < margin < Fraction(1, 2):
        raise ValidationError(f"margin must lie in (0, 1/2), got {margin}")
    base = two_constant(Fraction(1, 2) + margin)
    spec = ScenarioSpec("unique_min", base.distribution, base.hypotheses, {"margin": str(margin)})
    assert spec.minimizers == (0,) and spec.gap == 2 * margin
    return spec


def irrelevant_feature():
    """Two uniform bits; the label is the first bit, H only looks at the second.

    Input ids encode ``x = 2 * relevant_bit + irrelevant_bit``.
    """
    w = Fraction(1, 4)
    atoms = [
        (Example(2 * b1 + b2, 1 if b1 else -1), w) for b1 in (0, 1) for b2 in (0, 1)
    ]
    bit2 = tuple(1 if x % 2 else -1 for x in range(4))
    hyps = [
        Hypothesis(bit2, "h_bit2"),
        Hypothesis(tuple(-v for v in bit2), "h_negbit2"),
    ]
    return _spec("irrelevant_feature", atoms, 4, hyps)


BUILTINS = {
    "two_constant": two_constant,
    "three_hyp_two_min": three_hyp_two_min,
    "symmetric_n_min": symmetric_n_min,
    "unique_min": unique_min,
    "irrelevant_feature": irrelevant_feature,
}


def builtin(name, **params):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValidationError(
            f"unknown scenario {name!r}; built-ins are {', '.join(BUILTINS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name}: {exc}") from None


def default_scenarios():
    """One instance of every built-in regime."""
    return [
        two_constant(Fraction(1, 2)),
        two_constant(Fraction(7, 10)),
        three_hyp_two_min(),
        symmetric_n_min(3),
        unique_min(Fraction(1, 5)),
        irrelevant_feature(),
    ]


def dump_scenario(spec):
    return {
        "name": spec.name,
        "input_size": spec.distribution.input_size,
        "atoms": [
            {"x": z.x_id, "y": z.y, "weight": f"{w.numerator}/{w.denominator}"}
            for z, w in spec.distribution
        ],
        "hypotheses": [{"name": h.name, "labels": list(h.labels)} for h in spec.hypotheses],
    }


def load_scenario(document):
    """Build a :class:`ScenarioSpec` from a dict, a JSON string or a path to a JSON file."""
    if isinstance(document, Path) or (
        isinstance(document, str) and not document.lstrip().startswith("{")
    ):
        document = Path(document).read_text()
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"scenario document is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ValidationError("scenario document must be a JSON object")
    missing = {"atoms", "hypotheses"} - set(document)
    if missing:
        raise ValidationError(f"scenario document lacks keys: {sorted(missing)}")
    try:
        atoms = [((a["x"], a["y"]), a["weight"]) for a in document["atoms"]]
        hyps = [
            Hypothesis(tuple(h["labels"]), h.get("name", f"h{k}"))
            for k, h in enumerate(document["hypotheses"])
        ]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scenario document: {exc!r}") from None
    input_size = document.get("input_size")
    if input_size is None:
        input_size = len(hyps[0].labels) if hyps else None
    return _spec(document.get("name", "custom"), atoms, input_size, hyps)
