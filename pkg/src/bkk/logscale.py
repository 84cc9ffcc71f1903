"""Log-domain arithmetic helpers.

Every density in this package is carried as the logarithm of a nonnegative
number: a float that is either finite or ``-inf`` (the log of zero).  ``+inf``
and ``nan`` are never legal log values.  The helpers here implement the few
primitives that need care, chiefly differences of exponentials without
catastrophic cancellation.
"""

from __future__ import annotations

import math

import numpy as np

LOG_ZERO = float("-inf")

__all__ = [
    "LOG_ZERO",
    "is_log_value",
    "log1mexp",
    "log_diff_exp",
    "log_sum_exp",
    "log_trapezoid",
]


def is_log_value(v) -> bool:
    """True when ``v`` is a legal log value: finite or ``-inf``."""
    v = float(v)
    return not math.isnan(v) and v != math.inf


def log1mexp(z):
    """log(1 - exp(z)) for z <= 0, stable at both ends.

    For z near 0 uses expm1 so the leading ``-z`` scale survives; for very
    negative z uses log1p.  z == 0 maps to -inf.  Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise ValueError("log1mexp requires z <= 0")
    cut = -math.log(2.0)
    with np.errstate(divide="ignore"):
        out = np.where(
            z > cut,
            np.log(-np.expm1(np.where(z > cut, z, cut))),
            np.log1p(-np.exp(np.where(z <= cut, z, cut))),
        )
    if out.ndim == 0:
        return float(out)
    return out


def log_diff_exp(a, b):
    """log(exp(a) - exp(b)) requiring a >= b elementwise.

    Equal arguments (including both ``-inf``) give ``-inf``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b > a):
        raise ValueError("log_diff_exp requires a >= b")
    both_inf = np.isneginf(a) & np.isneginf(b)
    d = np.where(both_inf, LOG_ZERO, b - a)
    out = np.where(both_inf | (d >= 0), LOG_ZERO, a + log1mexp(np.minimum(d, 0.0)))
    if out.ndim == 0:
        return float(out)
    return out


def log_sum_exp(values, weights=None, axis=None):
    """log of a (weighted, nonnegative weights) sum of exponentials.

    All ``-inf`` entries give ``-inf`` rather than a warning.
    """
    values = np.asarray(values, dtype=float)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        with np.errstate(divide="ignore"):
            logw = np.where(weights > 0, np.log(np.maximum(weights, 1e-300)), LOG_ZERO)
        values = values + logw
    if values.size == 0:
        return LOG_ZERO
    m = np.max(values, axis=axis, keepdims=True)
    m_safe = np.where(np.isneginf(m), 0.0, m)
    s = np.sum(np.exp(values - m_safe), axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = np.where(np.isneginf(m), LOG_ZERO, m_safe + np.log(s))
    out = np.squeeze(out, axis=0 if axis is None else axis) if out.ndim else out
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_trapezoid(log_f, x):
    """log of the trapezoid-rule integral of exp(log_f) over nodes x."""
    log_f = np.asarray(log_f, dtype=float)
    x = np.asarray(x, dtype=float)
    if log_f.shape != x.shape or log_f.ndim != 1 or x.size < 2:
        raise ValueError("log_trapezoid needs matching 1d arrays with >= 2 nodes")
    if np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing")
    w = np.empty_like(x)
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    return log_sum_exp(log_f, weights=w)
