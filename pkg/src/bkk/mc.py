"""Monte-Carlo route to survival, hitting, and killed-density estimates.

Paths of the process dR = (mu + 1/2)/R dt + dW are advanced by
Euler-Maruyama from R_0 = x and killed on first passage below the barrier
at 1.  Killing combines a hard test (R below 1 at a step end) with a
Brownian-bridge correction: a path above the barrier at both step ends
survives the step with probability 1 - exp(-2 (R_k - 1)(R_{k+1} - 1)/dt),
carried as a multiplicative weight.  Estimators average these weights, so
killed-histogram mass plus hitting mass is exactly one path by path.

Streams are counter-based: each block of 16384 consecutive paths draws
from its own Philox stream keyed by (seed, index of the block's first
path), and every step draws a full block-sized array whether or not paths
are already dead.  Results are therefore bit-for-bit reproducible and
independent of how blocks are scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hunt import HittingDensitySource, tabulated_source
from .logscale import LOG_ZERO

__all__ = [
    "McConfig",
    "McEstimate",
    "path_step",
    "simulate_survival",
    "simulate_killed_histogram",
    "simulate_hitting_histogram",
    "mc_hitting_source",
]

_BLOCK = 16384
_POSITIVITY_EPS = 1e-12


@dataclass(frozen=True)
class McConfig:
    """Path count, step size, stream seed, and bridge-correction switch.

    dt None defers to t/512 at call time; an explicit dt must satisfy
    dt <= t/64 for whatever horizon t the estimator is asked for.
    """

    n_paths: int = 1_000_000
    dt: float | None = None
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        if self.n_paths < 1000:
            raise ValueError("n_paths must be at least 1000")
        if self.dt is not None and not (self.dt > 0):
            raise ValueError("dt must be positive")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")

    def resolve_dt(self, t: float) -> tuple[float, int]:
        """Step size and count covering (0, t] exactly.

        An explicit dt is a target: the count is rounded to land on t.
        """
        dt = self.dt if self.dt is not None else t / 512.0
        if dt > t / 64.0:
            raise ValueError("dt must not exceed t/64")
        steps = int(round(t / dt))
        return t / steps, steps


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    n: int

    def __post_init__(self):
        if self.std_err < 0:
            raise ValueError("std_err must be nonnegative")


def path_step(mu, r, dt, gaussian_draw):
    """One Euler-Maruyama step; values driven to 0 or below are clamped.

    The clamp matters only for unkilled diagnostics: killed runs stop
    paths at the barrier 1, far above it.
    """
    r = np.asarray(r, dtype=float)
    safe = np.maximum(r, _POSITIVITY_EPS)
    out = r + (mu + 0.5) / safe * dt + math.sqrt(dt) * np.asarray(gaussian_draw)
    return np.maximum(out, _POSITIVITY_EPS)


def _block_rng(seed: int, start: int) -> np.random.Generator:
    key = np.array([seed, start], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _walk_block(mu, x, steps, dt, bridge, rng, n, on_loss=None):
    """March one block; returns final (positions, weights).

    on_loss(step_index, per_path_weight_loss) receives the killing mass
    shed at every step.
    """
    r = np.full(n, float(x))
    w = np.ones(n)
    sqdt = math.sqrt(dt)
    drift = mu + 0.5
    for k in range(steps):
        g = rng.standard_normal(n)
        r_new = r + drift / np.maximum(r, _POSITIVITY_EPS) * dt + sqdt * g
        dead = r_new <= 1.0
        if bridge:
            factor = -np.expm1(-2.0 * (r - 1.0) * (r_new - 1.0) / dt)
            w_new = np.where(dead, 0.0, w * factor)
        else:
            w_new = np.where(dead, 0.0, w)
        if on_loss is not None:
            on_loss(k, w - w_new)
        r = np.where(dead, 1.0, r_new)
        w = w_new
    return r, w


def _blocks(cfg: McConfig):
    start = 0
    while start < cfg.n_paths:
        n = min(_BLOCK, cfg.n_paths - start)
        yield start, n, _block_rng(cfg.seed, start)
        start += n


def _estimate(total, total_sq, n) -> McEstimate:
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return McEstimate(mean=float(mean), std_err=float(math.sqrt(var / n)), n=n)


def _validate_args(mu, x, t):
    if not (math.isfinite(mu) and mu != 0.0):
        raise ValueError("mu must be nonzero and finite")
    if not (x > 1.0):
        raise ValueError("x must exceed the barrier 1")
    if not (t > 0.0):
        raise ValueError("t must be positive")


def simulate_survival(mu, x, t, cfg: McConfig | None = None) -> McEstimate:
    """P_x(no passage below 1 on (0, t]), averaged over weighted paths."""
    cfg = cfg or McConfig()
    _validate_args(mu, x, t)
    dt, steps = cfg.resolve_dt(t)
    total = 0.0
    total_sq = 0.0
    for _, n, rng in _blocks(cfg):
        _, w = _walk_block(mu, x, steps, dt, cfg.bridge_correction, rng, n)
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
    return _estimate(total, total_sq, cfg.n_paths)


def _validate_bins(bins):
    bins = [(float(lo), float(hi)) for lo, hi in bins]
    prev = 1.0
    for lo, hi in bins:
        if not (prev <= lo < hi):
            raise ValueError("bins must be disjoint, ordered, and above 1")
        prev = hi
    return bins


def simulate_killed_histogram(mu, x, t, bins, cfg: McConfig | None = None):
    """Per-bin estimates of the killed-kernel mass over each interval.

    bins is an ordered sequence of disjoint (lo, hi] intervals above the
    barrier; each estimate targets the integral of p_1(t, x, .) over its
    interval, so the estimates sum to at most the survival probability.
    """
    cfg = cfg or McConfig()
    _validate_args(mu, x, t)
    bins = _validate_bins(bins)
    dt, steps = cfg.resolve_dt(t)
    k = len(bins)
    total = np.zeros(k)
    total_sq = np.zeros(k)
    for _, n, rng in _blocks(cfg):
        r, w = _walk_block(mu, x, steps, dt, cfg.bridge_correction, rng, n)
        for i, (lo, hi) in enumerate(bins):
            sel = w * ((r > lo) & (r <= hi))
            total[i] += float(np.sum(sel))
            total_sq[i] += float(np.sum(sel * sel))
    return [_estimate(total[i], total_sq[i], cfg.n_paths) for i in range(k)]


def simulate_hitting_histogram(mu, x, edges, cfg: McConfig | None = None):
    """Mass of the first-passage time in each cell of a time grid.

    edges is an increasing positive grid; cell i collects the weight shed
    during (edges[i], edges[i+1]].  The horizon is the last edge; mass
    shed at or before the first edge is dropped.  Returns one McEstimate
    per cell.
    """
    cfg = cfg or McConfig()
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be increasing with at least two entries")
    if edges[0] <= 0:
        raise ValueError("edges must be positive")
    horizon = float(edges[-1])
    _validate_args(mu, x, horizon)
    dt, steps = cfg.resolve_dt(horizon)
    mids = (np.arange(steps) + 0.5) * dt
    cell_of_step = np.searchsorted(edges, mids) - 1  # -1 below first edge
    k = len(edges) - 1
    total = np.zeros(k)
    total_sq = np.zeros(k)
    for _, n, rng in _blocks(cfg):
        per_path = np.zeros((n, k))

        def on_loss(step, dw, per_path=per_path):
            c = cell_of_step[step]
            if 0 <= c < k:
                per_path[:, c] += dw

        _walk_block(mu, x, steps, dt, cfg.bridge_correction, rng, n, on_loss)
        total += per_path.sum(axis=0)
        total_sq += (per_path * per_path).sum(axis=0)
    return [_estimate(total[i], total_sq[i], cfg.n_paths) for i in range(k)]


def mc_hitting_source(mu, x, horizon, cfg: McConfig | None = None,
                      n_cells: int = 64) -> HittingDensitySource:
    """Hitting-time density as a simulation-backed source over (0, horizon].

    Builds a geometric time grid from about (x-1)^2/100 up to the horizon,
    estimates per-cell first-passage mass, and tabulates the implied
    density at cell midpoints; continuation outside the tabulated range
    follows the exact small-time shape and the power tail.
    """
    cfg = cfg or McConfig()
    _validate_args(mu, x, horizon)
    lo = max((x - 1.0) ** 2 / 100.0, horizon * 1e-6)
    lo = min(lo, horizon / 16.0)
    edges = np.geomspace(lo, horizon, n_cells + 1)
    cells = simulate_hitting_histogram(mu, x, edges, cfg)
    widths = np.diff(edges)
    mids = np.sqrt(edges[:-1] * edges[1:])
    dens = np.array([c.mean for c in cells]) / widths
    with np.errstate(divide="ignore"):
        log_q = np.where(dens > 0, np.log(np.maximum(dens, 1e-320)), LOG_ZERO)
    return tabulated_source("monte_carlo", mu, x, mids, log_q)
