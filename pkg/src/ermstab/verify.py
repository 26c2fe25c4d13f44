"""Desk-scale self-check run by ``ermstab verify``.

Each check returns ``(passed, detail)``. A check whose enumeration exceeds
the cap is reported as skipped rather than failed.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .analysis import Phase, classify
from .bounds import (
    central_window_prob,
    erm_in_hstar_lower_bound,
    odd_central_binom_prob,
    pair_mismatch_prob,
    thm25_training_rate,
    tie_gap_lower_bound,
    tie_gap_probability,
    tie_gap_upper_bound,
)
from .exact import (
    DEFAULT_CAP,
    conditional_switch_probability,
    exact_all,
    exact_delta,
    exact_delta_two_class,
    prob_erm_in_hstar,
)
from .exceptions import EnumerationCapError
from .model import NO_GAP
from .montecarlo import McConfig, count_hits, estimate_delta
from .resample import ReplacementDraw, StabilityNotion, discrepancy
from .scenarios import (
    default_scenarios,
    irrelevant_feature,
    three_hyp_two_min,
    two_constant,
    unique_min,
)

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str


def definitional_delta(scenario, m, notion, beta=0, i=None):
    """Sum the per-draw indicator over every sequence of atoms; tiny m only."""
    D, H = scenario.distribution, scenario.hypotheses
    i = m if i is None else i
    total = Fraction(0)
    for seq in product(range(len(D)), repeat=m + 1):
        w = math.prod((D.weights[k] for k in seq), start=Fraction(1))
        draw = ReplacementDraw([D.atoms[k] for k in seq[:m]], i, D.atoms[seq[m]])
        if discrepancy(notion, draw, H, beta):
            total += w
    return total


def _baseline(cap, fault):
    spec = two_constant(Fraction(1, 2))
    oracle = definitional_delta(spec, 3, "cv")
    got = exact_delta(spec, 3, "cv", cap=cap).delta
    return oracle == got == Fraction(1, 4), f"engine {got}, enumeration {oracle}"


def _oracle_equality(scenarios, max_m):
    def check(cap, fault):
        worst = []
        for spec in scenarios:
            for m in range(2, max_m + 1):
                for beta in (Fraction(0), Fraction(1, 2 * (m - 1))):
                    fast, _, _ = exact_all(spec, m, beta, cap=cap)
                    slow, _, _ = exact_all(spec, m, beta, method="sequences", reduce=False, cap=cap)
                    if fast != slow:
                        worst.append(f"{spec.label} m={m} beta={beta}")
        return not worst, "all equal" if not worst else "; ".join(worst[:3])

    return check


def _i_independence(scenarios, max_m):
    def check(cap, fault):
        bad = []
        for spec in scenarios:
            for m in range(2, max_m + 1):
                ref, _, _ = exact_all(spec, m, cap=cap)
                first, _, _ = exact_all(spec, m, i=1, method="sequences", cap=cap)
                if ref != first:
                    bad.append(f"{spec.label} m={m}")
        return not bad, "i=1 equals i=m" if not bad else "; ".join(bad[:3])

    return check


def _two_class(cap, fault):
    bad = []
    for p in (Fraction(1, 2), Fraction(7, 10), Fraction(1, 3)):
        spec = two_constant(p)
        for m in range(2, 41):
            for notion in StabilityNotion:
                if exact_delta_two_class(p, m, notion).delta != exact_delta(spec, m, notion, cap=cap).delta:
                    bad.append(f"p={p} m={m} {notion}")
    return not bad, "fast path agrees" if not bad else "; ".join(bad[:3])


def _hstar_bound(scenarios, max_m):
    def check(cap, fault):
        worst = math.inf
        for spec in scenarios:
            if spec.gap is NO_GAP:
                continue
            for m in range(1, max_m + 1):
                exact = prob_erm_in_hstar(spec, m, mode="float", cap=cap)
                bound = erm_in_hstar_lower_bound(len(spec.hypotheses), spec.gap, m).raw
                worst = min(worst, exact - bound)
        return worst >= 0, f"min slack {worst:.3g}"

    return check


def _pair_mass(scenarios):
    def check(cap, fault):
        bad = [
            s.label
            for s in scenarios
            if s.n_minimizers == 2 and s.pair_mismatch_mass() != pair_mismatch_prob(s.disagreement_mass)
        ]
        return not bad, "p^2/2 exact" if not bad else ", ".join(bad)

    return check


def _switch_floor(scenarios, grid):
    def check(cap, fault):
        rule = "position_adverse" if fault == "tie-break" else "first"
        lowest, where = Fraction(2), ""
        for spec in scenarios:
            if spec.n_minimizers != 2:
                continue
            for m in grid:
                v = conditional_switch_probability(spec, m, tie_rule=rule, cap=cap)
                if v < lowest:
                    lowest, where = v, f"{spec.label} m={m}"
        return lowest >= Fraction(1, 2), f"min {float(lowest):.4f} at {where}"

    return check


def _mixture_enumeration(cap, fault):
    bad = []
    for p in (Fraction(3, 10), Fraction(1, 2), Fraction(4, 5)):
        for m in range(2, 9):
            n = m - 1
            brute = Fraction(0)
            cells = ((p / 2, 1), (p / 2, -1), (1 - p, 0))
            for seq in product(cells, repeat=n):
                if abs(sum(s for _, s in seq)) <= 1:
                    brute += math.prod((w for w, _ in seq), start=Fraction(1))
            if brute != tie_gap_probability(p, m, "rational"):
                bad.append(f"p={p} m={m}")
    return not bad, "mixture equals enumeration" if not bad else "; ".join(bad)


def _sandwich(cap, fault):
    bad = []
    for m in range(3, 101):
        low = tie_gap_lower_bound(m)
        if low < odd_central_binom_prob(m):
            bad.append(f"lower chain m={m}")
        for p in (Fraction(k, 10) for k in range(1, 10)):
            mid = tie_gap_probability(p, m)
            if not (low <= mid <= tie_gap_upper_bound(p, m)):
                bad.append(f"p={p} m={m}")
    return not bad, "bounds hold for m<=100" if not bad else "; ".join(bad[:3])


def _training_rate_ratio(cap, fault):
    ratios = [
        exact_delta(two_constant(Fraction(1, 2)), m, "cv", mode="float", cap=cap).delta / thm25_training_rate(m)
        for m in (25, 50, 100)
    ]
    return all(0.5 <= r <= 2 for r in ratios), "ratios " + ", ".join(f"{r:.4f}" for r in ratios)


def _phase(cap, fault):
    grid = list(range(20, 201, 20))
    multi = [exact_delta(three_hyp_two_min(), m, "cv", mode="float", cap=cap).delta for m in grid]
    unique = [exact_delta(unique_min(Fraction(1, 5)), m, "weak", mode="float", cap=cap).delta for m in grid]
    a, b = classify((grid, multi)), classify((grid, unique))
    ok = a.classification is Phase.POWER_LAW and b.classification is Phase.EXPONENTIAL
    return ok, f"two minimizers: {a.classification} (alpha {a.power.alpha:.3f}); unique: {b.classification}"


def _mc(cap, fault):
    spec = two_constant(Fraction(1, 2))
    est = estimate_delta(spec, 3, McConfig(trials=20_000, seed=7))
    close = abs(est.delta_hat - 0.25) <= 4 * est.half_width
    same = count_hits(spec, 5, McConfig(trials=20_000, seed=3, workers=1)) == count_hits(
        spec, 5, McConfig(trials=20_000, seed=3, workers=2)
    )
    return close and same, f"estimate {est.delta_hat:.4f} +- {est.half_width:.4f}; workers invariant: {same}"


def build_checks(extra=()):
    builtins = default_scenarios()
    two_min = [two_constant(Fraction(1, 2)), three_hyp_two_min(), irrelevant_feature()]
    checks = [
        ("baseline delta_cv = 1/4", _baseline),
        ("exact engine = sequence enumeration", _oracle_equality(builtins, 4)),
        ("position independence", _i_independence(builtins, 4)),
        ("two-class fast path", _two_class),
        ("Pr(ERM in H*) >= 1 - (|H|-1)exp(-eps^2 m/2)", _hstar_bound(builtins, 30)),
        ("pair mismatch mass = p^2/2", _pair_mass(builtins)),
        ("conditional switch >= 1/2", _switch_floor(two_min, (5, 6, 11, 12, 21))),
        ("tie-gap mixture = enumeration", _mixture_enumeration),
        ("tie-gap sandwich", _sandwich),
        ("delta_cv ~ (2 pi m)^-1/2", _training_rate_ratio),
        ("phase classification", _phase),
        ("Monte Carlo agreement", _mc),
    ]
    for spec in extra:
        checks.append((f"{spec.label}: exact engine = sequence enumeration", _oracle_equality([spec], 3)))
        checks.append((f"{spec.label}: Pr(ERM in H*) bound", _hstar_bound([spec], 20)))
        if spec.n_minimizers == 2:
            checks.append((f"{spec.label}: conditional switch >= 1/2", _switch_floor([spec], (5, 6))))
    return checks


def run_checks(cap=DEFAULT_CAP, fault=None, extra=()):
    results = []
    for name, check in build_checks(extra):
        try:
            ok, detail = check(cap, fault)
            results.append(CheckResult(name, PASS if ok else FAIL, detail))
        except EnumerationCapError as exc:
            results.append(CheckResult(name, SKIP, str(exc)))
    return results
