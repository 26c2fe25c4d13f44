"""Finite example spaces, hypotheses, 0-1 loss, risks and deterministic ERM.

Weights are held as exact :class:`~fractions.Fraction` values; float views are
derived from them. Hypotheses are explicit label tables over a finite input
space ``{0, ..., n_inputs - 1}``, and the order of a :class:`HypothesisSpace`
is also its ERM tie-break order.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_fraction, check_inputs, check_label_table
from .exceptions import (
    IndistinguishableHypothesesError,
    InvalidExampleError,
    ValidationError,
)

FLOAT_SUM_TOLERANCE = 1e-12


class _NoGap:
    """Sentinel for the risk gap when every hypothesis is a risk minimizer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NO_GAP"

    def __reduce__(self):
        return (_NoGap, ())


NO_GAP = _NoGap()


@dataclass(frozen=True, order=True)
class Example:
    x_id: int
    y: int

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise ValidationError(f"label must be -1 or +1, got {self.y!r}")
        if int(self.x_id) != self.x_id or self.x_id < 0:
            raise InvalidExampleError(f"x_id must be a nonnegative integer, got {self.x_id!r}")
        object.__setattr__(self, "x_id", int(self.x_id))
        object.__setattr__(self, "y", int(self.y))


def _as_example(z):
    if isinstance(z, Example):
        return z
    x_id, y = z
    return Example(x_id, y)


class FiniteDistribution:
    """A probability mass function over finitely many examples.

    Parameters
    ----------
    atoms : iterable of (example, weight)
        ``example`` is an :class:`Example` or an ``(x_id, y)`` pair. Weights
        may be fractions, ints, ``"a/b"`` strings or floats. Exact inputs must
        sum to exactly one; if any weight is a float the sum may be off by at
        most 1e-12 and the weights are renormalized to sum to one exactly.
        Zero weights are dropped.
    input_size : int, optional
        Size of the input space. Defaults to one past the largest ``x_id``.
    """

    def __init__(self, atoms, input_size=None):
        examples, weights = [], []
        saw_float = False
        for z, w in atoms:
            saw_float |= isinstance(w, (float, np.floating))
            w = as_fraction(w)
            if w < 0:
                raise ValidationError(f"weights must be nonnegative, got {w} for {z}")
            if w == 0:
                continue
            examples.append(_as_example(z))
            weights.append(w)
        if not examples:
            raise ValidationError("a distribution needs at least one atom of positive weight")
        if len(set(examples)) != len(examples):
            raise ValidationError("distribution atoms must be pairwise distinct")
        total = sum(weights, Fraction(0))
        if total != 1:
            if saw_float and abs(float(total) - 1.0) <= FLOAT_SUM_TOLERANCE:
                weights = [w / total for w in weights]
            else:
                raise ValidationError(f"weights must sum to 1, got {total}")
        needed = max(z.x_id for z in examples) + 1
        if input_size is None:
            input_size = needed
        elif input_size < needed:
            raise InvalidExampleError(
                f"input_size={input_size} but an atom uses x_id={needed - 1}"
            )
        self.atoms = tuple(examples)
        self.weights = tuple(weights)
        self.input_size = int(input_size)

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(zip(self.atoms, self.weights))

    def __eq__(self, other):
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return (
            self.input_size == other.input_size
            and dict(zip(self.atoms, self.weights)) == dict(zip(other.atoms, other.weights))
        )

    def __hash__(self):
        return hash((self.input_size, frozenset(zip(self.atoms, self.weights))))

    def __repr__(self):
        body = ", ".join(f"({z.x_id}, {z.y:+d}): {w}" for z, w in self)
        return f"FiniteDistribution({{{body}}}, input_size={self.input_size})"

    @cached_property
    def float_weights(self):
        return np.array([float(w) for w in self.weights])

    @cached_property
    def _index(self):
        return {z: k for k, z in enumerate(self.atoms)}

    def index(self, z):
        """Position of example ``z`` among the atoms."""
        try:
            return self._index[_as_example(z)]
        except KeyError:
            raise InvalidExampleError(f"{z} is not an atom of this distribution") from None

    def weight(self, z):
        return self.weights[self.index(z)]

    def input_marginal(self):
        """Probability of each x id (zero off the support)."""
        marginal = [Fraction(0)] * self.input_size
        for z, w in self:
            marginal[z.x_id] += w
        return marginal


@dataclass(frozen=True)
class Hypothesis:
    labels: tuple
    name: str = ""

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if not labels:
            raise ValidationError("a hypothesis needs at least one input point")
        if any(v not in (-1, 1) for v in labels):
            raise ValidationError(f"labels must be -1 or +1, got {self.labels!r}")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def __call__(self, x_id):
        if not 0 <= x_id < len(self.labels):
            raise InvalidExampleError(
                f"x_id {x_id} outside the input space of size {len(self.labels)}"
            )
        return self.labels[x_id]


class HypothesisSpace:
    """An ordered, finite set of hypotheses, optionally bound to a distribution.

    The list order is the ERM tie-break order. When ``distribution`` is given
    the space is validated against its support (no two members may agree on
    every input point of positive probability) and the risks, the minimizer
    set, the gap and the pairwise disagreement masses become available.
    """

    def __init__(self, hypotheses, distribution=None):
        hyps = []
        for k, h in enumerate(hypotheses):
            if not isinstance(h, Hypothesis):
                h = Hypothesis(tuple(h), f"h{k}")
            hyps.append(h)
        if not hyps:
            raise ValidationError("a hypothesis space needs at least one member")
        size = len(hyps[0])
        if any(len(h) != size for h in hyps):
            raise ValidationError("all hypotheses must share the input space size")
        self.hypotheses = tuple(hyps)
        self.input_size = size
        self.distribution = distribution
        if distribution is not None:
            if distribution.input_size > size:
                raise InvalidExampleError(
                    f"distribution uses {distribution.input_size} input points, "
                    f"hypotheses are defined on {size}"
                )
            self._check_distinct(distribution)

    def _check_distinct(self, distribution):
        support = sorted({z.x_id for z in distribution.atoms})
        seen = {}
        for k, h in enumerate(self.hypotheses):
            key = tuple(h.labels[x] for x in support)
            if key in seen:
                j = seen[key]
                raise IndistinguishableHypothesesError(
                    f"hypotheses {self.hypotheses[j].name or j!s} and "
                    f"{h.name or k!s} agree on every input point of positive "
                    "probability (h_1(X) = h_2(X) a.s.); such pairs must be "
                    "merged before building the space"
                )
            seen[key] = k

    def __len__(self):
        return len(self.hypotheses)

    def __getitem__(self, k):
        return self.hypotheses[k]

    def __iter__(self):
        return iter(self.hypotheses)

    @property
    def names(self):
        return [h.name for h in self.hypotheses]

    @cached_property
    def label_table(self):
        return np.array([h.labels for h in self.hypotheses], dtype=np.int64)

    def bind(self, distribution):
        return HypothesisSpace(self.hypotheses, distribution)

    def _bound(self):
        if self.distribution is None:
            raise ValidationError("this hypothesis space is not bound to a distribution")
        return self.distribution

    @cached_property
    def risks(self):
        D = self._bound()
        return tuple(risk(h, D) for h in self.hypotheses)

    @cached_property
    def _minimizers(self):
        return risk_minimizers(self, self._bound())

    @property
    def minimizers(self):
        return self._minimizers[0]

    @property
    def gap(self):
        return self._minimizers[1]

    @cached_property
    def disagreement(self):
        """Matrix of ``Pr(h_j(X) != h_k(X))`` as fractions."""
        marginal = self._bound().input_marginal()
        n = len(self)
        out = [[Fraction(0)] * n for _ in range(n)]
        for j, k in combinations(range(n), 2):
            hj, hk = self.hypotheses[j], self.hypotheses[k]
            mass = sum(
                (w for x, w in enumerate(marginal) if hj.labels[x] != hk.labels[x]),
                Fraction(0),
            )
            out[j][k] = out[k][j] = mass
        return tuple(tuple(row) for row in out)


class Sample:
    """An ordered sequence of ``m >= 1`` examples."""

    def __init__(self, examples):
        self.examples = tuple(_as_example(z) for z in examples)
        if not self.examples:
            raise ValidationError("a sample needs at least one example")

    @property
    def m(self):
        return len(self.examples)

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def __getitem__(self, k):
        return self.examples[k]

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return self.examples == other.examples

    def __hash__(self):
        return hash(self.examples)

    def __repr__(self):
        body = ", ".join(f"({z.x_id}, {z.y:+d})" for z in self.examples)
        return f"Sample([{body}])"

    def counts(self, distribution):
        """The sufficient statistic of this sample over ``distribution``'s atoms."""
        c = [0] * len(distribution)
        for z in self.examples:
            c[distribution.index(z)] += 1
        return CountVector(distribution.atoms, c)


class CountVector:
    """Number of occurrences of each atom in a sample."""

    def __init__(self, atoms, counts):
        self.atoms = tuple(_as_example(z) for z in atoms)
        self.counts = tuple(int(c) for c in counts)
        if len(self.atoms) != len(self.counts):
            raise ValidationError("one count per atom is required")
        if any(c < 0 for c in self.counts):
            raise ValidationError("counts must be nonnegative")

    @property
    def total(self):
        return sum(self.counts)

    m = total

    def __iter__(self):
        return iter(zip(self.atoms, self.counts))

    def __eq__(self, other):
        if not isinstance(other, CountVector):
            return NotImplemented
        return self.atoms == other.atoms and self.counts == other.counts

    def __repr__(self):
        return f"CountVector({list(self.counts)})"


def loss(h, z):
    """0-1 loss of hypothesis ``h`` on example ``z``."""
    z = _as_example(z)
    return int(h(z.x_id) != z.y)


def risk(h, D, mode="rational"):
    """Expected 0-1 loss of ``h`` under ``D``."""
    if D.input_size > len(h):
        raise InvalidExampleError("hypothesis is not defined on the whole support")
    if mode == "float":
        return float(sum(w * loss(h, z) for z, w in zip(D.atoms, D.float_weights)))
    return sum((w for z, w in D if loss(h, z)), Fraction(0))


def _weighted_examples(s):
    if isinstance(s, CountVector):
        pairs = [(z, c) for z, c in s if c]
    elif isinstance(s, Sample):
        pairs = [(z, 1) for z in s]
    else:
        pairs = [(z, 1) for z in Sample(s)]
    if not pairs:
        raise ValidationError("empirical risk of an empty sample is undefined")
    return pairs


def _error_counts(s, hypotheses):
    pairs = _weighted_examples(s)
    return [sum(c * loss(h, z) for z, c in pairs) for h in hypotheses], sum(c for _, c in pairs)


def empirical_risk(h, s):
    """Fraction of the sample ``s`` (a Sample or CountVector) misclassified by ``h``."""
    (errors,), m = _error_counts(s, [h])
    return Fraction(errors, m)


def erm(s, H):
    """Index of the empirical risk minimizer; ties go to the earliest index."""
    errors, _ = _error_counts(s, H)
    return min(range(len(errors)), key=lambda k: (errors[k], k))


def erm_restricted(s, H, subset):
    """ERM over the members of ``H`` listed in ``subset``, tie-broken by ``H``'s order."""
    subset = sorted(set(int(k) for k in subset))
    if not subset:
        raise ValidationError("restricted ERM needs a nonempty subset")
    if subset[0] < 0 or subset[-1] >= len(H):
        raise ValidationError(f"subset indices must lie in [0, {len(H)})")
    errors, _ = _error_counts(s, [H[k] for k in subset])
    best = min(range(len(subset)), key=lambda j: (errors[j], j))
    return subset[best]


def risk_minimizers(H, D):
    """Return ``(minimizer indices, gap)``; the gap is ``NO_GAP`` when every member is optimal."""
    risks = [risk(h, D) for h in H]
    best = min(risks)
    minimizers = tuple(k for k, r in enumerate(risks) if r == best)
    others = [r for r in risks if r != best]
    gap = min(others) - best if others else NO_GAP
    return minimizers, gap


@dataclass(frozen=True)
class ReducedDistribution:
    """Atoms merged into loss-pattern classes.

    ``patterns[c]`` is the loss vector ``(loss(h, z))_h`` shared by every atom
    in ``members[c]``; ``weights[c]`` is their summed probability.
    """

    weights: tuple
    patterns: tuple
    members: tuple
    n_hypotheses: int

    def __len__(self):
        return len(self.weights)

    @property
    def loss_matrix(self):
        return np.array(self.patterns, dtype=np.int64).reshape(len(self), self.n_hypotheses)


def loss_matrix(D, H):
    """Integer array of shape ``(len(D), len(H))`` with the loss of each hypothesis on each atom."""
    table = H.label_table
    xs = np.array([z.x_id for z in D.atoms])
    ys = np.array([z.y for z in D.atoms])
    return (table[:, xs].T != ys[:, None]).astype(np.int64)


def loss_pattern_reduce(D, H):
    """Merge atoms with identical loss vectors across ``H``."""
    L = loss_matrix(D, H)
    order, weights, members = [], {}, {}
    for k, (row, w) in enumerate(zip(map(tuple, L.tolist()), D.weights)):
        if row not in weights:
            order.append(row)
            weights[row] = Fraction(0)
            members[row] = []
        weights[row] += w
        members[row].append(k)
    return ReducedDistribution(
        weights=tuple(weights[r] for r in order),
        patterns=tuple(order),
        members=tuple(tuple(members[r]) for r in order),
        n_hypotheses=len(H),
    )


class ERMClassifier(ClassifierMixin, BaseEstimator):
    """Empirical risk minimization over an explicit finite hypothesis table.

    Parameters
    ----------
    hypotheses : array-like of shape (n_hypotheses, n_inputs) or HypothesisSpace
        Label table with entries in {-1, +1}. Row order is the tie-break order.
    candidates : sequence of int, optional
        Restrict the minimization to these rows (ties still follow row order).

    Attributes
    ----------
    hypothesis_index_ : int
        Row selected by ERM.
    errors_ : ndarray of shape (n_candidates,)
        Weighted number of training errors of each candidate.
    empirical_risk_ : ndarray of shape (n_candidates,)
        ``errors_`` divided by the total sample weight.
    """

    def __init__(self, hypotheses, candidates=None):
        self.hypotheses = hypotheses
        self.candidates = candidates

    def _table(self):
        if isinstance(self.hypotheses, HypothesisSpace):
            return self.hypotheses.label_table
        return check_label_table(self.hypotheses)

    def fit(self, X, y, sample_weight=None):
        table = self._table()
        X = check_inputs(X, table.shape[1])
        y = np.asarray(y).ravel()
        if y.shape != X.shape:
            raise ValidationError(f"X and y lengths differ: {X.shape[0]} vs {y.shape[0]}")
        if X.size == 0:
            raise ValidationError("cannot fit on an empty sample")
        if not np.isin(y, (-1, 1)).all():
            raise ValidationError("labels must be -1 or +1")
        if sample_weight is None:
            sample_weight = np.ones(X.shape[0], dtype=np.int64)
        else:
            sample_weight = np.asarray(sample_weight)
            if sample_weight.shape != X.shape or (sample_weight < 0).any():
                raise ValidationError("sample_weight must be nonnegative with one entry per example")
            if sample_weight.sum() == 0:
                raise ValidationError("total sample weight must be positive")
        rows = np.arange(table.shape[0]) if self.candidates is None else np.array(
            sorted(set(int(k) for k in self.candidates)), dtype=np.int64
        )
        if rows.size == 0:
            raise ValidationError("candidates must be nonempty")
        if rows[0] < 0 or rows[-1] >= table.shape[0]:
            raise ValidationError("candidate index out of range")
        mistakes = table[rows][:, X] != y[np.newaxis, :]
        self.errors_ = mistakes @ sample_weight
        self.empirical_risk_ = self.errors_ / sample_weight.sum()
        self.candidates_ = rows
        self.hypothesis_index_ = int(rows[np.argmin(self.errors_)])
        self.classes_ = np.array([-1, 1])
        self.n_inputs_ = table.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "hypothesis_index_")
        X = check_inputs(X, self.n_inputs_)
        return self._table()[self.hypothesis_index_, X]
