"""Finite-difference route to the killed kernel.

A slice y -> p_1(t, x, y) is obtained by evolving an approximate delta at x
under the generator

    G u = 1/2 u'' + (2 mu + 1) / (2 y) u'

with absorbing (Dirichlet) conditions at the barrier y = 1 and at a far cap
y = L.  The marched function is w(t, y) = p_1(t, y, x); the requested slice
follows from the symmetry p_1(t, x, y) = (y/x)^(2 mu + 1) p_1(t, y, x).

Space is discretized on a graded mesh, geometrically clustered against the
barrier (cell growth ratio 1.01) and uniform in the far field.  Interior
rows use five-point difference weights fitted to the local node offsets
(fourth order on smoothly varying mesh regions); the rows next to each
boundary fall back to three-point second-order stencils.  Time uses the
theta scheme (Crank-Nicolson by default) with a short fully implicit
startup to damp components a rough initial profile would otherwise ring;
one step at each octave fraction of a march is also taken implicitly,
which sheds roundoff Crank-Nicolson would otherwise let collect in the
stiff wall modes.

Startup profile: when the mesh resolves it, the march starts from the free
kernel at a small warm-start time t0 <= min(t/8, (x-1)^2/100); the killed
and free kernels then differ by at most exp(-50) of the peak, and the data
is smooth.  Otherwise it falls back to a hat-function delta two cells wide
with unit trapezoid mass.  The same march also yields the survival
probability (mass of the slice) and the hitting-time density as the
boundary flux q(s) = 1/2 d_y p_1(s, x, y) at y = 1+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .hunt import HittingDensitySource, tabulated_source
from .logscale import LOG_ZERO, log_trapezoid

__all__ = [
    "PdeConfig",
    "KernelSlice",
    "DomainTooSmall",
    "StabilityFailure",
    "KilledKernelSolver",
    "solve_killed_kernel",
    "survival_probability",
    "hitting_density_flux",
    "generator_residual",
    "default_domain_cap",
]


class DomainTooSmall(RuntimeError):
    """Mass reached the far boundary; enlarge the domain cap."""


class StabilityFailure(RuntimeError):
    """The marched profile developed significant negative values."""


def default_domain_cap(mu: float, t: float, x: float) -> float:
    """Far-boundary default: max(8 x, 8 sqrt(t (2 mu + 2)), 50).

    The sqrt term is eight standard deviations of the diffusive spread.
    Negative indices drift toward the barrier, so their spread never
    exceeds the Brownian scale; the floor keeps the argument positive.
    """
    return max(8.0 * x, 8.0 * math.sqrt(t * max(2.0 * mu + 2.0, 2.0)), 50.0)


@dataclass(frozen=True)
class PdeConfig:
    """Mesh and march parameters.

    domain_cap None defers to default_domain_cap at solve time; time_steps
    None defers to max(2400, ceil(40 t)), which keeps the Crank-Nicolson
    phase error below the spatial error out to eight standard deviations.
    time_grading > 1 makes successive steps grow geometrically by that
    ratio, which resolves small times while still reaching large horizons
    in a sane number of steps.
    """

    domain_cap: float | None = None
    nodes: int = 4000
    time_steps: int | None = None
    theta: float = 0.5
    time_grading: float = 1.0
    startup_implicit_steps: int = 2
    wall_cell_ratio: float = 1.01
    wall_refine: float = 0.008

    def __post_init__(self):
        if self.nodes < 200:
            raise ValueError("nodes must be at least 200")
        if self.time_steps is not None and self.time_steps < 40:
            raise ValueError("time_steps must be at least 40")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [1/2, 1]")
        if not (1.0 <= self.time_grading <= 1.2):
            raise ValueError("time_grading must lie in [1, 1.2]")
        if not (1.0 < self.wall_cell_ratio <= 1.05):
            raise ValueError("wall_cell_ratio must lie in (1, 1.05]")
        if not (0.001 <= self.wall_refine <= 1.0):
            raise ValueError("wall_refine must lie in [0.001, 1]")
        if self.domain_cap is not None and self.domain_cap <= 1.0:
            raise ValueError("domain_cap must exceed the barrier 1")


@dataclass(frozen=True)
class KernelSlice:
    """One killed-kernel slice y -> log p_1(t, x, y) on the solver mesh."""

    mu: float
    t: float
    x: float
    y: np.ndarray
    log_values: np.ndarray

    def interp_log(self, yq):
        """Piecewise-linear interpolation of log(p_1 / (y - wall)) in y.

        Factoring out the linear vanishing at the wall keeps the
        interpolated quantity smooth through the boundary layer.  Returns
        -inf outside the mesh and in cells adjacent to a zero value.
        """
        yq_arr = np.atleast_1d(np.asarray(yq, dtype=float))
        out = np.full(yq_arr.shape, LOG_ZERO)
        inside = (yq_arr >= self.y[0]) & (yq_arr <= self.y[-1])
        wall = self.y[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.log_values - np.log(self.y - wall)
        g[0] = g[1]
        idx = np.clip(np.searchsorted(self.y, yq_arr[inside]) - 1, 0, len(self.y) - 2)
        y0 = self.y[idx]
        y1 = self.y[idx + 1]
        f0 = g[idx]
        f1 = g[idx + 1]
        w = (yq_arr[inside] - y0) / (y1 - y0)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(
                np.isneginf(f0) | np.isneginf(f1),
                LOG_ZERO,
                f0 * (1.0 - w) + f1 * w + np.log(yq_arr[inside] - wall),
            )
        out[inside] = vals
        return float(out[0]) if np.ndim(yq) == 0 else out

    def local_spacing(self, yq) -> float:
        """Mesh spacing at position yq (largest adjacent cell)."""
        yq = float(yq)
        idx = int(np.clip(np.searchsorted(self.y, yq), 1, len(self.y) - 1))
        lo = max(idx - 1, 1)
        return float(np.max(np.diff(self.y[lo - 1 : idx + 1])))

    def log_survival(self) -> float:
        return log_trapezoid(self.log_values, self.y)


def _build_mesh(cap: float, n_cells: int, ratio: float, refine: float) -> np.ndarray:
    """Graded mesh on [1, cap]: geometric zone at the wall, then uniform.

    The wall cell is refine times the uniform spacing; cells grow by ratio
    until they reach the uniform size.  Doubling n_cells halves both the
    wall and the uniform spacing, so refinement studies scale cleanly.
    """
    span = cap - 1.0
    n_geo = min(int(math.ceil(-math.log(refine) / math.log(ratio))), n_cells // 2)
    beta = ratio**-n_geo
    geo = beta * ratio ** np.arange(n_geo)
    geo_len = float(np.sum(geo))  # in units of the uniform spacing
    h_uni = span / (geo_len + (n_cells - n_geo))
    cells = np.concatenate([geo * h_uni, np.full(n_cells - n_geo, h_uni)])
    mesh = np.concatenate([[1.0], 1.0 + np.cumsum(cells)])
    mesh[-1] = cap
    return mesh


def _difference_weights(y: np.ndarray):
    """Five-point interior weights for u' and u'' fitted to node offsets.

    Returns (w1, w2) of shape (n_interior, 5) with columns for offsets
    -2..2 relative to each interior node; the first and last interior rows
    use three-point stencils (zero weight in the outermost columns).
    """
    n = len(y) - 2
    w1 = np.zeros((n, 5))
    w2 = np.zeros((n, 5))
    # bulk: centered five-point via a batched Vandermonde solve
    j = np.arange(2, n)  # interior index, global node j+... global = j
    idx = j[:, None] + np.arange(-2, 3)[None, :]
    d = y[idx] - y[j][:, None]
    scale = np.max(np.abs(d), axis=1, keepdims=True)
    ds = d / scale
    vander = ds[:, None, :] ** np.arange(5)[None, :, None]
    rhs = np.zeros((len(j), 5, 2))
    rhs[:, 1, 0] = 1.0
    rhs[:, 2, 1] = 2.0
    sol = np.linalg.solve(vander, rhs)
    w1[1:-1] = sol[:, :, 0] / scale
    w2[1:-1] = sol[:, :, 1] / scale**2
    # boundary-adjacent rows: classical three-point nonuniform stencils
    for row, g in ((0, 1), (n - 1, n)):
        hm = y[g] - y[g - 1]
        hp = y[g + 1] - y[g]
        w2[row, 1] = 2.0 / (hm * (hm + hp))
        w2[row, 2] = -2.0 / (hm * hp)
        w2[row, 3] = 2.0 / (hp * (hm + hp))
        w1[row, 1] = -hp / (hm * (hm + hp))
        w1[row, 2] = (hp - hm) / (hm * hp)
        w1[row, 3] = hm / (hp * (hm + hp))
    return w1, w2


class KilledKernelSolver:
    """Theta-scheme march of the killed generator on a graded mesh.

    One instance fixes (mu, mesh); marches from the startup profile can be
    checkpointed at several times, with the boundary flux recorded at every
    accepted step.
    """

    def __init__(self, mu: float, cap: float, cfg: PdeConfig | None = None):
        cfg = cfg or PdeConfig()
        mu = float(mu)
        if not math.isfinite(mu) or mu == 0.0:
            raise ValueError("mu must be nonzero and finite")
        if cap <= 1.0:
            raise ValueError("domain cap must exceed the barrier 1")
        self.mu = mu
        self.cfg = cfg
        self.y = _build_mesh(cap, cfg.nodes, cfg.wall_cell_ratio, cfg.wall_refine)
        yi = self.y[1:-1]
        w1, w2 = _difference_weights(self.y)
        drift = (2.0 * mu + 1.0) / (2.0 * yi)
        wa = 0.5 * w2 + drift[:, None] * w1
        self._stencil = wa  # full rows, used when boundary values are known
        # diagonals of the homogeneous-Dirichlet operator: entries that
        # reach a boundary node multiply a zero and are dropped
        n = len(yi)
        self.diags = []
        for off in range(-2, 3):
            col = wa[:, off + 2].copy()
            if off < 0:
                col[: -off] = 0.0
            elif off > 0:
                col[n - off :] = 0.0
            self.diags.append(col)
        self._drift = drift

    # -- spatial operator ------------------------------------------------
    def apply_generator(self, u: np.ndarray) -> np.ndarray:
        """G u at the nodes (zero in the outermost slots); u on all nodes.

        Uses the full stencil rows, so boundary values of u participate;
        suitable for consistency checks on profiles that do not vanish at
        the wall.
        """
        n = len(u) - 2
        upad = np.concatenate([[0.0], u, [0.0]])
        v = np.zeros(n)
        for off in range(-2, 3):
            v += self._stencil[:, off + 2] * upad[2 + off : 2 + off + n]
        out = np.zeros_like(u)
        out[1:-1] = v
        return out

    def _step_matrix(self, dt: float, theta: float):
        n = len(self.y) - 2
        ab = np.zeros((5, n))
        c = -theta * dt
        ab[0, 2:] = c * self.diags[4][: n - 2]
        ab[1, 1:] = c * self.diags[3][: n - 1]
        ab[2, :] = 1.0 + c * self.diags[2]
        ab[3, : n - 1] = c * self.diags[1][1:]
        ab[4, : n - 2] = c * self.diags[0][2:]
        return ab

    def _apply_inner(self, inner: np.ndarray) -> np.ndarray:
        """Generator acting on the interior vector."""
        n = len(inner)
        v = self.diags[2] * inner
        v[1:] += self.diags[1][1:] * inner[:-1]
        v[2:] += self.diags[0][2:] * inner[:-2]
        v[: n - 1] += self.diags[3][: n - 1] * inner[1:]
        v[: n - 2] += self.diags[4][: n - 2] * inner[2:]
        return v

    def _march(self, u, dts, flux_rec=None, t_start=0.0, rannacher=None):
        """Advance u through the step sizes dts; returns the final profile.

        The first startup steps are integrated fully implicitly as two half
        steps each, and so is one step at each octave fraction of the total
        span: Crank-Nicolson barely damps the stiffest wall modes, so a
        long march needs the periodic implicit steps to shed the roundoff
        collecting there.  The rest use cfg.theta.
        """
        cfg = self.cfg
        inner = u[1:-1].copy()
        t = t_start
        last = (None, None)
        ab = None
        n_ran = cfg.startup_implicit_steps if rannacher is None else rannacher
        elapsed = np.cumsum(dts)
        marks = set(
            int(np.searchsorted(elapsed, elapsed[-1] / 2.0**k))
            for k in range(5, 0, -1)
        )
        expanded = []
        for i, dt in enumerate(dts):
            if i < n_ran or i in marks:
                expanded.extend([(0.5 * dt, 1.0), (0.5 * dt, 1.0)])
            else:
                expanded.append((dt, cfg.theta))
        for dt, theta in expanded:
            if (dt, theta) != last:
                ab = self._step_matrix(dt, theta)
                last = (dt, theta)
            rhs = inner.copy()
            if theta < 1.0:
                rhs += ((1.0 - theta) * dt) * self._apply_inner(inner)
            inner = solve_banded((2, 2), ab, rhs)
            t += dt
            if flux_rec is not None:
                flux_rec.append((t, self._wall_flux(inner)))
        out = np.zeros_like(u)
        out[1:-1] = inner
        return out

    def _wall_flux(self, inner: np.ndarray) -> float:
        """w'(1+)/2 by a one-sided second-order stencil (wall value zero)."""
        h1 = self.y[1] - self.y[0]
        h2 = self.y[2] - self.y[1]
        du = (h1 + h2) / (h1 * h2) * inner[0] - h1 / (h2 * (h1 + h2)) * inner[1]
        return 0.5 * du

    # -- startup profiles --------------------------------------------------
    def delta_profile(self, x: float) -> np.ndarray:
        """Piecewise-linear unit-mass mollification of the delta at x.

        Mass is spread over the two nodes bracketing x (a hat two cells
        wide) and normalized so the trapezoid integral is exactly one.
        """
        y = self.y
        if not (y[2] < x < y[-3]):
            raise ValueError("x must lie well inside the mesh")
        j = int(np.searchsorted(y, x)) - 1
        w_right = (x - y[j]) / (y[j + 1] - y[j])
        u = np.zeros_like(y)
        u[j] = (1.0 - w_right) / (0.5 * (y[j + 1] - y[j - 1]))
        u[j + 1] = w_right / (0.5 * (y[j + 2] - y[j]))
        return u

    def warm_start_time(self, t: float, x: float) -> float | None:
        """Largest admissible warm-start time, or None if unresolvable.

        The startup Gaussian needs sqrt(t0) at least three local cells;
        beyond (x-1)^2/100 the barrier matters and the startup switches to
        the image-corrected profile, whose index error grows with t0, so
        t0 stays as small as the mesh permits.
        """
        idx = int(np.clip(np.searchsorted(self.y, x), 2, len(self.y) - 2))
        h_loc = float(np.max(np.diff(self.y[idx - 2 : idx + 2])))
        t_res = (3.0 * h_loc) ** 2
        t0 = min(t / 8.0, max((x - 1.0) ** 2 / 100.0, t_res))
        if t0 < t_res:
            return None
        return t0

    def startup(self, t: float, x: float):
        """(profile, t_start) pair used by the marches.

        The image factor 1 - exp(-2(x-1)(y-1)/t0) is the universal leading
        boundary correction; it rounds to 1 wherever the barrier is out of
        reach, and lets wall-adjacent starts warm-start on coarse meshes.
        """
        from .kernels import log_free_kernel

        t0 = self.warm_start_time(t, x)
        if t0 is None:
            return self.delta_profile(x), 0.0
        u = np.exp(log_free_kernel(self.mu, t0, self.y, x))
        u *= -np.expm1(-2.0 * (x - 1.0) * (self.y - 1.0) / t0)
        u[0] = 0.0
        u[-1] = 0.0
        return u, t0

    # -- drivers -----------------------------------------------------------
    def _postprocess(self, w: np.ndarray, t: float, x: float) -> KernelSlice:
        peak = float(np.max(w))
        if peak <= 0.0:
            raise StabilityFailure("marched profile vanished entirely")
        if float(np.min(w)) < -1e-12 * peak:
            raise StabilityFailure(
                f"negative values at {float(np.min(w)) / peak:.2e} of the peak"
            )
        tail = float(np.max(w[-max(4, len(w) // 50) :]))
        if tail > 1e-12 * peak:
            raise DomainTooSmall(
                f"far-boundary mass at {tail / peak:.2e} of the peak; "
                f"raise domain_cap above {self.y[-1]:.3g}"
            )
        w = np.maximum(w, 0.0)
        with np.errstate(divide="ignore"):
            log_w = np.where(w > 0.0, np.log(np.maximum(w, 1e-320)), LOG_ZERO)
        log_vals = log_w + (2.0 * self.mu + 1.0) * (np.log(self.y) - math.log(x))
        return KernelSlice(mu=self.mu, t=t, x=x, y=self.y, log_values=log_vals)

    def _schedule(
        self, span: float, steps: int | None = None, ramp_from: float = 0.0
    ) -> np.ndarray:
        cfg = self.cfg
        m = steps or cfg.time_steps or max(2400, int(math.ceil(40.0 * span)))
        g = cfg.time_grading
        if g != 1.0:
            dt0 = span * (g - 1.0) / (g**m - 1.0)
            return dt0 * g ** np.arange(m)
        dt_uni = span / m
        if ramp_from <= 0.0 or dt_uni <= ramp_from:
            return np.full(m, dt_uni)
        # uniform steps would leap over the warm-start transient; resolve it
        # with a short geometric ramp before settling into uniform steps
        dt0 = ramp_from / 4.0
        n_ramp = int(math.ceil(math.log(dt_uni / dt0) / math.log(1.05)))
        ramp = dt0 * 1.05 ** np.arange(n_ramp)
        ramp = ramp[np.cumsum(ramp) < 0.5 * span]
        rem = span - float(np.sum(ramp))
        n_uni = max(int(math.ceil(rem / dt_uni)), 1)
        return np.concatenate([ramp, np.full(n_uni, rem / n_uni)])

    def solve(self, t: float, x: float, flux_rec=None) -> KernelSlice:
        if t <= 0 or x <= 1.0:
            raise ValueError("require t > 0 and x > 1")
        if self.y[-1] <= x + 5.0 * math.sqrt(t):
            raise DomainTooSmall(
                "domain cap must exceed x + 5 sqrt(t); "
                f"have {self.y[-1]:.3g}, need > {x + 5.0 * math.sqrt(t):.3g}"
            )
        return self.solve_checkpoints(x, [t], flux_rec=flux_rec)[-1]

    def solve_checkpoints(self, x: float, times, flux_rec=None):
        """March once, returning slices at each of the increasing times.

        Between consecutive checkpoints the local step is roughly
        t_prev/384; the leg from the startup time uses the same schedule
        as solve().  The leg density sets the far-tail phase accuracy:
        Crank-Nicolson lets the relative error at d standard deviations
        from the start grow like d^6 (dt/t)^2 per decade, so dt = t/384
        keeps eight standard deviations good to about 2e-3.
        """
        times = sorted(float(s) for s in times)
        if not times or times[0] <= 0:
            raise ValueError("checkpoint times must be positive")
        if self.y[-1] <= x + 5.0 * math.sqrt(times[-1]):
            raise DomainTooSmall(
                "domain cap must exceed x + 5 sqrt(t_max) for the ladder"
            )
        u, t_prev = self.startup(times[0], x)
        slices = []
        first = True
        for t_k in times:
            span = t_k - t_prev
            if first:
                u = self._march(
                    u,
                    self._schedule(span, ramp_from=t_prev),
                    flux_rec=flux_rec,
                    t_start=t_prev,
                )
                first = False
            else:
                n = max(384, int(math.ceil(384.0 * span / t_prev)))
                u = self._march(
                    u, np.full(n, span / n), flux_rec=flux_rec, t_start=t_prev
                )
            t_prev = t_k
            slices.append(self._postprocess(u, t_k, x))
        return slices

    def march_profile(self, u0: np.ndarray, span: float, t_start=0.0, flux_rec=None):
        """Advance an arbitrary profile by span (semigroup checkpointing)."""
        if len(u0) != len(self.y):
            raise ValueError("profile length must match the mesh")
        rann = None if t_start == 0.0 else 0
        return self._march(
            u0, self._schedule(span), flux_rec=flux_rec, t_start=t_start,
            rannacher=rann,
        )


def solve_killed_kernel(mu, t, x, cfg: PdeConfig | None = None) -> KernelSlice:
    """Slice y -> log p_1(t, x, y) on the solver mesh."""
    cfg = cfg or PdeConfig()
    cap = cfg.domain_cap or default_domain_cap(mu, t, x)
    return KilledKernelSolver(mu, cap, cfg).solve(t, x)


def survival_probability(mu, t, x, cfg: PdeConfig | None = None) -> float:
    """P_x(T_1 > t): trapezoid mass of the killed slice; in [0, 1]."""
    s = solve_killed_kernel(mu, t, x, cfg)
    return float(min(1.0, math.exp(s.log_survival())))


def hitting_density_flux(mu, x, horizon, cfg: PdeConfig | None = None):
    """Hitting-time density on (0, horizon] as a boundary-flux source.

    Marches once to the horizon recording q(s) at every accepted step;
    the returned source interpolates log q in log s and continues the
    exact small-s shape s^{-3/2} exp(-(x-1)^2/(2s)) below the first
    recorded time and the power tail s^{-(|mu|+1)} beyond the horizon.
    """
    cfg = cfg or PdeConfig()
    mu = float(mu)
    x = float(x)
    horizon = float(horizon)
    cap = cfg.domain_cap or default_domain_cap(mu, horizon, x)
    solver = KilledKernelSolver(mu, cap, cfg)
    if solver.y[-1] <= x + 5.0 * math.sqrt(horizon):
        raise DomainTooSmall("domain cap must exceed x + 5 sqrt(horizon)")
    base = solver.cfg
    if base.time_grading == 1.0 and base.time_steps is None:
        solver.cfg = replace(base, time_grading=1.02, time_steps=2400)
    rec = []
    u0, t_start = solver.startup(horizon, x)
    solver._march(u0, solver._schedule(horizon - t_start), flux_rec=rec,
                  t_start=t_start)
    solver.cfg = base
    # _wall_flux already carries the 1/2; only the symmetry power remains
    s_rec = np.array([p[0] for p in rec])
    q_rec = np.maximum(np.array([p[1] for p in rec]) * x ** -(2.0 * mu + 1.0), 0.0)
    return _flux_source(mu, x, s_rec, q_rec)


def _flux_source(mu, x, s_rec, q_rec) -> HittingDensitySource:
    with np.errstate(divide="ignore"):
        log_q_rec = np.where(q_rec > 0, np.log(np.maximum(q_rec, 1e-320)), LOG_ZERO)
    return tabulated_source("pde_flux", mu, x, s_rec, log_q_rec)


def generator_residual(mu, t, x, cfg: PdeConfig | None = None) -> float:
    """Relative defect of the discrete generator on the exact free kernel.

    Feeds w(y) = p(t, y, x) of the unkilled process through the discrete
    operator and compares with the exact time derivative by central
    differences; the free kernel satisfies dw/dt = G w in its first
    argument, so the result measures pure spatial truncation error.
    """
    from .kernels import log_free_kernel

    cfg = cfg or PdeConfig()
    cap = cfg.domain_cap or default_domain_cap(mu, t, x)
    solver = KilledKernelSolver(mu, cap, cfg)
    y = solver.y
    delta = 1e-4 * t
    w_mid = np.exp(log_free_kernel(mu, t, y, x))
    w_plus = np.exp(log_free_kernel(mu, t + delta, y, x))
    w_minus = np.exp(log_free_kernel(mu, t - delta, y, x))
    lhs = (w_plus - w_minus) / (2.0 * delta)
    rhs = solver.apply_generator(w_mid)
    interior = slice(1, -1)
    scale = float(np.max(np.abs(lhs[interior])))
    return float(np.max(np.abs(lhs[interior] - rhs[interior])) / scale)
