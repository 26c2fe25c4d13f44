"""Monte Carlo estimation of instability probabilities.

Randomness is counter based: the uniform variate for slot ``j`` of trial
``t`` is a pure function of ``(master seed, m, t, j)``, built from the
splitmix64 finalizer. Trials are processed in fixed-size blocks and the
per-block hit counts are integers, so the result does not depend on how the
blocks are spread over workers.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from ._validation import check_beta, check_grid, check_sample_size
from .exceptions import ValidationError
from .model import Sample, loss_matrix
from .resample import ReplacementDraw, StabilityNotion

BLOCK_SIZE = 8192
CI_LEVEL = 0.95
CI_METHOD = "wilson"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(x):
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _add(a, b):
    with np.errstate(over="ignore"):
        return np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64)


def _mul(a, b):
    with np.errstate(over="ignore"):
        return np.asarray(a, dtype=np.uint64) * np.asarray(b, dtype=np.uint64)


def stream_key(master_seed, m):
    """64-bit key of the ``(master seed, m)`` stream, hashed by :class:`numpy.random.SeedSequence`."""
    state = np.random.SeedSequence(int(master_seed), spawn_key=(int(m),)).generate_state(1, np.uint64)
    return state[0]


def trial_seeds(master_seed, m, trials):
    """Seeds of the trials listed in ``trials``.

    ``seed_t = mix(key + golden * (t + 1))``: the splitmix64 stream started at
    the stream key, read at position ``t``.
    """
    t = np.asarray(trials, dtype=np.uint64)
    return mix64(_add(stream_key(master_seed, m), _mul(_GOLDEN, t + np.uint64(1))))


def _uniforms(seeds, slots):
    """Uniform(0, 1) variates of shape ``(len(seeds), slots)`` with 53-bit resolution.

    Slot ``j`` of a trial is output ``j`` of the splitmix64 stream seeded by its trial seed.
    """
    j = np.arange(1, slots + 1, dtype=np.uint64)
    bits = mix64(_add(seeds[:, None], _mul(j[None, :], _GOLDEN)))
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _cdf(distribution):
    cdf = np.cumsum(distribution.float_weights)
    cdf[-1] = 1.0
    return cdf


def _atom_indices(distribution, seeds, m):
    """Atom index of the ``m`` sample slots plus ``U`` (last column), by inverse CDF."""
    u = _uniforms(seeds, m + 2)
    idx = np.searchsorted(_cdf(distribution), u[:, : m + 1], side="right")
    return idx, u[:, m + 1]


def sample_draw(distribution, m, trial_seed, i=None):
    """One replacement draw: ``S`` of size ``m`` and ``U``, i.i.d. from ``distribution``.

    ``i`` defaults to ``m``; pass ``"uniform"`` to draw it from the trial's stream.
    """
    m = check_sample_size(m, 1)
    seeds = np.array([trial_seed & _MASK], dtype=np.uint64)
    idx, extra = _atom_indices(distribution, seeds, m)
    atoms = distribution.atoms
    S = Sample(atoms[k] for k in idx[0, :m])
    if i is None:
        i = m
    elif i == "uniform":
        i = int(extra[0] * m) + 1
    return ReplacementDraw(S, i, atoms[idx[0, m]])


@dataclass(frozen=True)
class McConfig:
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    notion: StabilityNotion = StabilityNotion.CV
    beta: Fraction = Fraction(0)
    i_policy: object = "fixed"

    def __post_init__(self):
        check_sample_size(self.trials, 1, "trials")
        check_sample_size(self.workers, 1, "workers")
        object.__setattr__(self, "notion", StabilityNotion.parse(self.notion))
        object.__setattr__(self, "beta", check_beta(self.beta))
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0 or self.seed > _MASK:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        policy = self.i_policy
        if policy not in ("fixed", "uniform") and not (isinstance(policy, int) and policy >= 1):
            raise ValidationError(
                f"i_policy must be 'fixed', 'uniform' or a 1-based position, got {policy!r}"
            )


@dataclass(frozen=True)
class StabilityEstimate:
    scenario: str
    m: int
    notion: StabilityNotion
    beta: Fraction
    delta_hat: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int
    seed: int
    i_policy: str
    provenance: str = "mc"
    ci_method: str = CI_METHOD
    ci_level: float = CI_LEVEL

    @property
    def half_width(self):
        return (self.ci_high - self.ci_low) / 2


def wilson_interval(hits, trials, level=CI_LEVEL):
    lo, hi = proportion_confint(hits, trials, alpha=1 - level, method=CI_METHOD)
    phat = hits / trials
    return min(max(0.0, float(lo)), phat), max(min(1.0, float(hi)), phat)


def _block_hits(L, distribution, m, seeds, positions, thr):
    idx, extra = _atom_indices(distribution, seeds, m)
    if positions is None:
        pos = (extra * m).astype(np.int64)
    else:
        pos = np.full(len(seeds), positions - 1, dtype=np.int64)
    rows = np.arange(len(seeds))
    S = idx[:, :m]
    U = idx[:, m]
    E_S = L[S].sum(axis=1)
    E_ret = E_S - L[S[rows, pos]]
    E_rep = E_ret + L[U]
    f = np.argmin(E_S, axis=1)
    g = np.argmin(E_rep, axis=1)
    weak = f != g
    cv = L[U, f] != L[U, g]
    overlap = np.abs(E_ret[rows, f] - E_ret[rows, g]) > thr
    return np.array([weak.sum(), cv.sum(), overlap.sum(), (cv | overlap).sum()], dtype=np.int64)


def count_hits(scenario, m, config):
    """Integer hit counts ``{"weak", "cv", "overlap", "union"}`` over ``config.trials`` trials."""
    m = check_sample_size(m, 2)
    D = scenario.distribution
    L = loss_matrix(D, scenario.hypotheses)
    thr = math.floor(config.beta * (m - 1))
    if config.i_policy == "fixed":
        positions = m
    elif config.i_policy == "uniform":
        positions = None
    else:
        positions = int(config.i_policy)
        if positions > m:
            raise ValidationError(f"position {positions} exceeds m = {m}")
    blocks = [
        (start, min(start + BLOCK_SIZE, config.trials))
        for start in range(0, config.trials, BLOCK_SIZE)
    ]

    def run(block):
        seeds = trial_seeds(config.seed, m, np.arange(*block, dtype=np.uint64))
        return _block_hits(L, D, m, seeds, positions, thr)

    if config.workers == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(run, blocks))
    total = np.sum(parts, axis=0)
    return dict(zip(("weak", "cv", "overlap", "union"), (int(v) for v in total)))


def _policy_label(policy):
    return policy if isinstance(policy, str) else f"fixed:{policy}"


def estimate_delta(scenario, m, config=None):
    """Monte Carlo estimate of the instability probability with a 95% Wilson interval.

    For the training notion the estimate is the larger of the CV and overlap
    proportions, with the interval of whichever component attains it.
    """
    config = config or McConfig()
    hits = count_hits(scenario, m, config)
    notion = config.notion
    if notion is StabilityNotion.TRAINING:
        key = "cv" if hits["cv"] >= hits["overlap"] else "overlap"
    else:
        key = notion.value
    k = hits[key]
    lo, hi = wilson_interval(k, config.trials)
    return StabilityEstimate(
        scenario=scenario.label,
        m=m,
        notion=notion,
        beta=config.beta,
        delta_hat=k / config.trials,
        ci_low=lo,
        ci_high=hi,
        hits=k,
        trials=config.trials,
        seed=int(config.seed),
        i_policy=_policy_label(config.i_policy),
    )


def sweep(scenario, grid, config=None):
    """One estimate per sample size; seeds differ per ``m`` through the trial-seed mix."""
    grid = check_grid(grid)
    config = config or McConfig()
    return [estimate_delta(scenario, m, config) for m in grid]


def default_workers():
    """Worker count from ``ERMSTAB_WORKERS``, else 1."""
    value = os.environ.get("ERMSTAB_WORKERS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        raise ValidationError(f"ERMSTAB_WORKERS must be an integer, got {value!r}") from None
