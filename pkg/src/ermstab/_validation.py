"""Input validation helpers shared by estimators, engines and the CLI."""

from fractions import Fraction
from numbers import Rational

import numpy as np

from .exceptions import InvalidExampleError, ValidationError


def as_fraction(value):
    """Convert ``value`` to an exact :class:`~fractions.Fraction`.

    Floats go through their shortest decimal representation, so ``0.7``
    becomes ``7/10`` rather than the nearest binary fraction. Strings may be
    ``"a/b"`` or decimal literals.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise ValidationError(f"expected a number, got {value!r}")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ValidationError(f"expected a finite number, got {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse {value!r} as a fraction") from exc
    raise ValidationError(f"expected a number, got {type(value).__name__}")


def check_probability(p, name="p", *, open_low=False, open_high=False):
    p = as_fraction(p)
    low_ok = p > 0 if open_low else p >= 0
    high_ok = p < 1 if open_high else p <= 1
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValidationError(f"{name} must lie in {lo}0, 1{hi}, got {p}")
    return p


def check_beta(beta):
    """Discrepancy thresholds live in [0, 1); at beta >= 1 every 0-1 loss gap is admissible."""
    beta = as_fraction(beta)
    if not 0 <= beta < 1:
        raise ValidationError(f"beta must lie in [0, 1), got {beta}")
    return beta


def check_sample_size(m, minimum=1, name="m"):
    if isinstance(m, (bool, np.bool_)) or not isinstance(m, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer, got {m!r}")
    m = int(m)
    if m < minimum:
        raise ValidationError(f"{name} must be at least {minimum}, got {m}")
    return m


def check_mode(mode):
    if mode not in ("rational", "float"):
        raise ValidationError(f"mode must be 'rational' or 'float', got {mode!r}")
    return mode


def check_grid(grid, name="m grid"):
    """Validate a strictly increasing, duplicate-free grid of sample sizes."""
    grid = [check_sample_size(m) for m in grid]
    if not grid:
        raise ValidationError(f"{name} must be nonempty")
    if len(set(grid)) != len(grid):
        raise ValidationError(f"{name} contains duplicated values: {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError(f"{name} must be increasing: {grid}")
    return grid


def check_label_table(labels):
    """Return ``labels`` as a 2-d int array of +/-1 values, one row per hypothesis."""
    table = np.asarray(labels)
    if table.ndim == 1:
        table = table[np.newaxis, :]
    if table.ndim != 2 or table.shape[0] == 0 or table.shape[1] == 0:
        raise ValidationError(
            f"label table must have shape (n_hypotheses, n_inputs), got {table.shape}"
        )
    if not np.isin(table, (-1, 1)).all():
        raise ValidationError("labels must be -1 or +1")
    return table.astype(np.int64)


def check_inputs(X, n_inputs):
    """Coerce input ids to a 1-d int array and range-check them."""
    X = np.asarray(X)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise ValidationError(f"expected input ids of shape (n,) or (n, 1), got {X.shape}")
    if X.size and not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValidationError("input ids must be integers")
        X = X.astype(np.int64)
    if X.size and (X.min() < 0 or X.max() >= n_inputs):
        raise InvalidExampleError(f"input ids must lie in [0, {n_inputs}), got range [{X.min()}, {X.max()}]")
    return X.astype(np.int64)
