"""Exact instability probabilities for finite scenarios.

Every quantity computed here depends on a sample only through the error
counts ``E_h`` of each hypothesis, and ERM only needs the differences
``E_h - E_0``. The default method therefore propagates the distribution of
that difference profile over the ``m - 1`` retained examples (a lattice walk
in ``|H| - 1`` dimensions) and then sums the discrepancy indicator over the
atoms at position ``i`` and the replacement ``U``. Two slower methods are
kept as cross-checks: enumeration of multinomial count vectors, and plain
enumeration of every sequence (which also allows any position ``i``).

Rational mode is exact. Float mode works with float64 probabilities and
``math.fsum`` and agrees with rational mode to 1e-10 absolute.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

from ._validation import check_beta, check_mode, check_probability, check_sample_size
from .exceptions import EnumerationCapError, UndefinedConditionalError, ValidationError
from .model import ReducedDistribution, loss_matrix
from .resample import StabilityNotion
from .scenarios import ScenarioSpec

DEFAULT_CAP = 50_000_000
FLOAT_TOLERANCE = 1e-10
METHODS = ("profile", "counts", "sequences")


@dataclass(frozen=True)
class ExactResult:
    scenario: str
    m: int
    notion: StabilityNotion
    beta: Fraction
    i: int
    delta: object
    enumeration_size: int
    mode: str
    method: str
    components: dict = field(default_factory=dict)

    @property
    def delta_float(self):
        return float(self.delta)

    @property
    def delta_rational(self):
        return self.delta if isinstance(self.delta, Fraction) else None


@dataclass(frozen=True)
class _Patterns:
    name: str
    weights: tuple
    losses: np.ndarray

    @property
    def n_hypotheses(self):
        return self.losses.shape[1]

    def restrict(self, columns):
        """Patterns seen by ERM over the listed hypotheses only (classes merged again)."""
        merged = {}
        for w, row in zip(self.weights, self.losses[:, columns].tolist()):
            merged[tuple(row)] = merged.get(tuple(row), Fraction(0)) + w
        rows = list(merged)
        return _Patterns(self.name, tuple(merged[r] for r in rows), np.array(rows, dtype=np.int64))


def _patterns(source, reduce=True):
    if isinstance(source, _Patterns):
        return source
    if isinstance(source, ReducedDistribution):
        return _Patterns("reduced", tuple(source.weights), source.loss_matrix)
    if isinstance(source, ScenarioSpec):
        if reduce:
            r = source.reduced
            return _Patterns(source.label, tuple(r.weights), r.loss_matrix)
        return _Patterns(
            source.label,
            tuple(source.distribution.weights),
            loss_matrix(source.distribution, source.hypotheses),
        )
    raise ValidationError(f"cannot compute on a {type(source).__name__}")


def _scale(weights):
    """Integer numerators over a common denominator."""
    Q = math.lcm(*(w.denominator for w in weights))
    return [int(w * Q) for w in weights], Q


def _overlap_threshold(beta, retained):
    """Largest error-count gap on the retained sample that is not above ``beta``."""
    return math.floor(beta * retained)


def _shift_slices(v):
    dst, src = [], []
    for step in v:
        if step == 1:
            dst.append(slice(1, None))
            src.append(slice(None, -1))
        elif step == -1:
            dst.append(slice(None, -1))
            src.append(slice(1, None))
        else:
            dst.append(slice(None))
            src.append(slice(None))
    return tuple(dst), tuple(src)


def _profile_walk(pat, n, mode, cap):
    """Distribution of ``(E_h - E_0)_{h >= 1}`` after ``n`` draws.

    Returns ``(P, scale)``: rational mode gives integer masses to be divided
    by ``scale``; float mode gives probabilities and ``scale = 1``.
    """
    dims = pat.n_hypotheses - 1
    width = 2 * n + 1
    size = width**dims
    if size > cap:
        raise EnumerationCapError(size, cap)
    increments = {}
    for w, row in zip(pat.weights, pat.losses.tolist()):
        v = tuple(row[h] - row[0] for h in range(1, len(row)))
        increments[v] = increments.get(v, Fraction(0)) + w
    if mode == "rational":
        factors, Q = _scale(list(increments.values()))
        P = np.zeros((width,) * dims, dtype=object)
        P[...] = 0
        one, scale = 1, Q**n
    else:
        factors = [float(w) for w in increments.values()]
        P = np.zeros((width,) * dims, dtype=np.float64)
        one, scale = 1.0, 1
    P[(n,) * dims] = one
    moves = [(_shift_slices(v), f) for v, f in zip(increments, factors)]
    for t in range(n):
        # support after t draws lies within n +- t on every axis
        box = (slice(n - t - 1, n + t + 2),) * dims
        cur = P[box]
        new = np.zeros_like(cur)
        for (dst, src), f in moves:
            new[dst] += f * cur[src]
        P[box] = new
    return P, scale


def _profile_grid(n, dims):
    """Error counts relative to hypothesis 0, shape ``(dims + 1, *grid)``."""
    width = 2 * n + 1
    E = np.zeros((dims + 1,) + (width,) * dims, dtype=np.int64)
    if dims:
        E[1:] = np.indices((width,) * dims) - n
    return E


def _choices(E, losses):
    """ERM choice on the profile grid after adding each pattern (first index wins ties)."""
    extra = (np.newaxis,) * (E.ndim - 1)
    return [np.argmin(E + row[(slice(None),) + extra], axis=0) for row in losses]


def _weighted_sum(P, C, mode):
    if mode == "rational":
        return int((P * C).sum()) if P.size else 0
    return math.fsum((P * C).ravel())


def _profile_deltas(pat, m, beta, mode, cap):
    n = m - 1
    H = pat.n_hypotheses
    if H == 1:
        zero = Fraction(0) if mode == "rational" else 0.0
        return {k: zero for k in ("weak", "cv", "overlap")}, 1
    P, scale = _profile_walk(pat, n, mode, cap)
    E = _profile_grid(n, H - 1)
    F = _choices(E, pat.losses)
    thr = _overlap_threshold(beta, n)
    if mode == "rational":
        pw, Q = _scale(list(pat.weights))
        coef = {k: np.zeros(P.shape, dtype=object) for k in ("weak", "cv", "overlap")}
        for c in coef.values():
            c[...] = 0
    else:
        pw, Q = [float(w) for w in pat.weights], 1
        coef = {k: np.zeros(P.shape) for k in ("weak", "cv", "overlap")}
    Ef = [np.take_along_axis(E, f[np.newaxis], axis=0)[0] for f in F]
    d = len(pat.weights)
    for a in range(d):
        for b in range(d):
            if a == b:
                # identical pattern at position i and U: both samples have the same profile
                continue
            wab = pw[a] * pw[b]
            switch = F[a] != F[b]
            lb = pat.losses[b]
            coef["weak"] += wab * switch
            coef["cv"] += wab * (lb[F[a]] != lb[F[b]])
            coef["overlap"] += wab * (np.abs(Ef[a] - Ef[b]) > thr)
    denom = scale * Q * Q
    out = {}
    for k, C in coef.items():
        if mode == "rational":
            C = C.astype(object)
            out[k] = Fraction(_weighted_sum(P, C, mode), denom)
        else:
            out[k] = _weighted_sum(P, C, mode) / denom
    return out, P.size


def _compositions(n, d):
    for bars in combinations(range(n + d - 1), d - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(n + d - 2 - prev)
        yield row


def _count_deltas(pat, m, beta, mode, cap):
    n = m - 1
    d = len(pat.weights)
    size = math.comb(n + d - 1, d - 1)
    if size > cap:
        raise EnumerationCapError(size, cap)
    L = pat.losses
    thr = _overlap_threshold(beta, n)
    if mode == "rational":
        pw, Q = _scale(list(pat.weights))
        total = {k: 0 for k in ("weak", "cv", "overlap")}
        fact = [math.factorial(k) for k in range(n + 1)]
    else:
        logw = np.log([float(w) for w in pat.weights])
        terms = {k: [] for k in ("weak", "cv", "overlap")}
    for counts in _compositions(n, d):
        E = np.asarray(counts) @ L
        ind = {"weak": 0, "cv": 0, "overlap": 0}
        inner = {k: 0 if mode == "rational" else 0.0 for k in ind}
        choice = [int(np.argmin(E + L[a])) for a in range(d)]
        for a in range(d):
            for b in range(d):
                fa, fb = choice[a], choice[b]
                wab = pw[a] * pw[b] if mode == "rational" else float(pat.weights[a] * pat.weights[b])
                if fa != fb:
                    inner["weak"] += wab
                if L[b][fa] != L[b][fb]:
                    inner["cv"] += wab
                if abs(int(E[fa]) - int(E[fb])) > thr:
                    inner["overlap"] += wab
        if mode == "rational":
            multinom = fact[n]
            for c in counts:
                multinom //= fact[c]
            weight = multinom * math.prod(q**c for q, c in zip(pw, counts))
            for k in total:
                total[k] += weight * inner[k]
        else:
            logp = gammaln(n + 1) - sum(gammaln(c + 1) for c in counts) + sum(
                c * lw for c, lw in zip(counts, logw) if c
            )
            p = math.exp(logp)
            for k in terms:
                terms[k].append(p * inner[k])
    if mode == "rational":
        return {k: Fraction(v, Q ** (n + 2)) for k, v in total.items()}, size
    return {k: math.fsum(v) for k, v in terms.items()}, size


def _sequence_deltas(pat, m, beta, i, mode, cap):
    """Enumerate every ``(z_1, ..., z_m, U)`` with the replacement at 1-based position ``i``."""
    d = len(pat.weights)
    size = d ** (m + 1)
    if size > cap:
        raise EnumerationCapError(size, cap)
    L = pat.losses
    seqs = np.array(list(product(range(d), repeat=m + 1)), dtype=np.int64).reshape(-1, m + 1)
    S, U = seqs[:, :m], seqs[:, m]
    E_S = L[S].sum(axis=1)
    E_ret = E_S - L[S[:, i - 1]]
    E_rep = E_ret + L[U]
    f, g = np.argmin(E_S, axis=1), np.argmin(E_rep, axis=1)
    rows = np.arange(len(seqs))
    ind = {
        "weak": f != g,
        "cv": L[U, f] != L[U, g],
        "overlap": np.abs(E_ret[rows, f] - E_ret[rows, g]) > _overlap_threshold(beta, m - 1),
    }
    if mode == "rational":
        pw, Q = _scale(list(pat.weights))
        qs = np.array(pw, dtype=object)
        weight = np.prod(qs[seqs], axis=1)
        return {k: Fraction(int(weight[v].sum()), Q ** (m + 1)) for k, v in ind.items()}, size
    logw = np.log([float(w) for w in pat.weights])
    weight = np.exp(logw[seqs].sum(axis=1))
    return {k: math.fsum(weight[v]) for k, v in ind.items()}, size


def _combine(values, notion):
    if notion is StabilityNotion.TRAINING:
        return max(values["cv"], values["overlap"]), {"cv": values["cv"], "overlap": values["overlap"]}
    return values[notion.value], {}


def exact_all(scenario, m, beta=0, *, mode="rational", method="profile", i=None,
              cap=DEFAULT_CAP, reduce=True):
    """Exact instability probability for every notion at once.

    Returns ``(values, enumeration_size, method)`` with ``values`` keyed by
    notion name; ``"training"`` is the larger of ``"cv"`` and ``"overlap"``.
    """
    m = check_sample_size(m, 2)
    beta = check_beta(beta)
    mode = check_mode(mode)
    if i is None:
        i = m
    if not 1 <= i <= m:
        raise ValidationError(f"position i must lie in [1, {m}], got {i}")
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    if i != m and method != "sequences":
        method = "sequences"
    pat = _patterns(scenario, reduce)
    if method == "profile":
        values, size = _profile_deltas(pat, m, beta, mode, cap)
    elif method == "counts":
        values, size = _count_deltas(pat, m, beta, mode, cap)
    else:
        values, size = _sequence_deltas(pat, m, beta, i, mode, cap)
    values["training"] = max(values["cv"], values["overlap"])
    return values, size, method


def exact_delta(scenario, m, notion="cv", beta=0, *, mode="rational", method="profile",
                i=None, cap=DEFAULT_CAP, reduce=True):
    """Exact probability that the chosen discrepancy indicator fires.

    Parameters
    ----------
    scenario : ScenarioSpec or ReducedDistribution
    m : int
        Sample size, at least 2.
    notion : StabilityNotion or str
    beta : number in [0, 1)
    mode : {"rational", "float"}
    method : {"profile", "counts", "sequences"}
        ``"profile"`` is the fast default. Passing ``i`` other than ``m``
        forces ``"sequences"``, the only method that distinguishes positions.
    cap : int
        Refuse (``EnumerationCapError``) when the enumeration is larger.
    reduce : bool
        Merge atoms into loss-pattern classes first (results are identical).
    """
    notion = StabilityNotion.parse(notion)
    beta = check_beta(beta)
    values, size, method = exact_all(
        scenario, m, beta, mode=mode, method=method, i=i, cap=cap, reduce=reduce
    )
    delta, components = _combine(values, notion)
    name = scenario.label if isinstance(scenario, ScenarioSpec) else "reduced"
    return ExactResult(name, m, notion, beta, m if i is None else i, delta, size, mode, method, components)


def _binomial_masses(p, n, mode):
    """``Pr(Bin(n, p) = k)`` for k = 0..n, exact or via log-gamma."""
    if mode == "rational":
        q = 1 - p
        return [math.comb(n, k) * p**k * q ** (n - k) for k in range(n + 1)]
    return binom.pmf(np.arange(n + 1), n, float(p)).tolist()


def exact_delta_two_class(p, m, notion="cv", beta=0, *, mode="rational"):
    """Closed-form sum for the two constant classifiers ``[h_+, h_-]``.

    With ``K`` positive labels among the ``m - 1`` retained examples, ERM on
    the full sample picks ``h_+`` iff positives are at least half.
    """
    p = check_probability(p)
    m = check_sample_size(m, 2)
    notion = StabilityNotion.parse(notion)
    beta = check_beta(beta)
    mode = check_mode(mode)
    n = m - 1
    thr = _overlap_threshold(beta, n)
    masses = _binomial_masses(p, n, mode)
    pz = {1: p, -1: 1 - p} if mode == "rational" else {1: float(p), -1: 1 - float(p)}
    values = {"weak": [], "cv": [], "overlap": []}

    def picks_plus(k, y):
        return k + (y == 1) >= n - k + (y == -1)

    for k, mass in enumerate(masses):
        for y_i, y_u in ((1, -1), (-1, 1)):
            if picks_plus(k, y_i) == picks_plus(k, y_u):
                continue
            term = mass * pz[y_i] * pz[y_u]
            values["weak"].append(term)
            values["cv"].append(term)
            if abs(n - 2 * k) > thr:
                values["overlap"].append(term)
    if mode == "rational":
        totals = {k: sum(v, Fraction(0)) for k, v in values.items()}
    else:
        totals = {k: math.fsum(v) for k, v in values.items()}
    totals["training"] = max(totals["cv"], totals["overlap"])
    delta, components = _combine(totals, notion)
    return ExactResult(f"two_constant(p={p})", m, notion, beta, m, delta, n + 1, mode, "two_class", components)


def conditional_switch_probability(scenario, m, *, mode="rational", tie_rule="first",
                                   cap=DEFAULT_CAP):
    """``Pr(f_S != f_{S^{i,U}} | A and B)`` for ERM restricted to the two risk minimizers.

    ``A``: the examples at position ``i`` and ``U`` fall on opposite sides of
    the disagreement region; ``B``: the retained sample's error counts of the
    two minimizers differ by at most one.

    ``tie_rule="position_adverse"`` is a fault injection: ties go to the
    minimizer that errs on the example at position ``i``, which breaks the
    consistency between the two samples that the lower bound of 1/2 needs.
    """
    if tie_rule not in ("first", "position_adverse"):
        raise ValidationError(f"unknown tie rule {tie_rule!r}")
    m = check_sample_size(m, 2)
    mode = check_mode(mode)
    if scenario.n_minimizers != 2:
        raise ValidationError(
            f"needs exactly two risk minimizers, scenario has {scenario.n_minimizers}"
        )
    pat = _patterns(scenario).restrict(list(scenario.minimizers))
    n = m - 1
    P, scale = _profile_walk(pat, n, mode, cap)
    D = np.arange(-n, n + 1)
    L = pat.losses
    near = np.abs(D) <= 1

    def choice(row):
        s1, s2 = row[0], D + row[1]
        first = np.where(s1 < s2, 0, np.where(s1 > s2, 1, 0))
        if tie_rule == "position_adverse":
            first = np.where(s1 == s2, 0 if row[0] == 1 else 1, first)
        return first

    if mode == "rational":
        pw, Q = _scale(list(pat.weights))
    else:
        pw, Q = [float(w) for w in pat.weights], 1
    side = [int(np.sign(row[1] - row[0])) for row in L.tolist()]
    num = 0 if mode == "rational" else []
    mass_a = 0
    for a, b in product(range(len(pw)), repeat=2):
        if side[a] == 0 or side[b] != -side[a]:
            continue
        wab = pw[a] * pw[b]
        mass_a += wab
        hit = near & (choice(L[a]) != choice(L[b]))
        if mode == "rational":
            num += wab * int(P[hit].sum())
        else:
            num.append(wab * math.fsum(P[hit]))
    if mode == "rational":
        den = mass_a * int(P[near].sum())
        if den == 0:
            raise UndefinedConditionalError("Pr(A and B) = 0")
        return Fraction(num, den)
    den = mass_a * math.fsum(P[near])
    if den == 0:
        raise UndefinedConditionalError("Pr(A and B) = 0")
    return math.fsum(num) / den


def prob_erm_in_hstar(scenario, m, *, mode="rational", cap=DEFAULT_CAP):
    """Exact probability that ERM on ``m`` examples returns a risk minimizer."""
    m = check_sample_size(m, 1)
    mode = check_mode(mode)
    minimizers = scenario.minimizers
    if len(minimizers) == len(scenario.hypotheses):
        return Fraction(1) if mode == "rational" else 1.0
    pat = _patterns(scenario)
    P, scale = _profile_walk(pat, m, mode, cap)
    E = _profile_grid(m, pat.n_hypotheses - 1)
    hit = np.isin(np.argmin(E, axis=0), minimizers)
    if mode == "rational":
        return Fraction(int(P[hit].sum()), scale)
    return math.fsum(P[hit])
