"""Noise and evaluation-failure wrappers for benchmark objectives."""

from __future__ import annotations

__all__ = ["noisy", "failing"]


def noisy(f, sigma, stream):
    """Multiplicative Gaussian contamination: x -> [1 + sigma R] f(x).

    R is drawn independently on every call; with sigma = 0 the returned
    values are bitwise identical to f's.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")

    def wrapped(x):
        r = stream.standard_normal()
        return (1.0 + sigma * r) * f(x)

    return wrapped


def failing(f, p, stream):
    """Random evaluation failure: returns NaN with probability p per call."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")

    def wrapped(x):
        u = stream.uniform()
        value = f(x)
        return value if u >= p else float("nan")

    return wrapped
