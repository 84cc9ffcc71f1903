"""Grid certification of the killed-kernel identities and two-sided bounds.

Builds tables of log p_1 over a (mu, t, x, y) grid -- closed forms for
mu = +-1/2, finite-difference ladders for other indices, negative indices
through the exact index-reflection factor -- then sweeps a fixed list of
inequality and identity checks, cross-validates random subsamples against
the convolution quadrature (driven by the recorded boundary flux) and
against direct simulation, and measures the comparability band between
the kernel and its explicit envelope.

Cells a method cannot reach are skipped with a recorded reason, never
passed silently: `below_floor` (value under the linear-scale floor),
`under_resolved` (no mesh can hold the start point and resolve the time
scale at the configured node budget), `domain_cap` (target too close to
the far boundary), `far_tail` (outside the validated accuracy envelope
of the marcher, |y - x| > 8 sqrt(t)), `no_method` (nothing applicable).

Inequality margins are signed log gaps (positive means violated) and are
recorded even when a check passes.  Closed-form routes are held to 1e-9,
finite-difference routes to 5e-3, simulation to four standard errors
plus a small discretization allowance; identity checks additionally
allow eight ulps of the largest log magnitude entering the comparison,
which matters only on cells with huge Gaussian exponents.  All
randomness derives from the explicit seed; the thread count never
changes any reported number.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import hunt, kernels, mc, pde
from .bessel import log_bessel_i
from .logscale import LOG_ZERO, log1mexp

__all__ = [
    "GridSpec",
    "CheckResult",
    "EnvelopeRow",
    "EnvelopeReport",
    "TableSet",
    "build_tables",
    "run_inequality_suite",
    "run_envelope_report",
    "emit_report",
    "parse_report",
    "CHECK_IDS",
]

SLACK_CLOSED = 1e-9
SLACK_IDENTITY = 1e-12
SLACK_PDE = 5e-3
SLACK_PDE_IDENTITY = 2e-3
SLACK_HITTING_BRACKET = 2.5e-2
SLACK_XCHECK_HUNT = 5e-2
MC_REL_SLACK = 1.5e-2

CHECK_IDS = (
    "bessel-ratio-bounds",
    "killed-below-free",
    "half-index-bracket",
    "index-power-bound",
    "small-time-lower-bound",
    "hitting-density-bracket",
    "symmetry-reflection",
    "barrier-scaling",
    "hitting-mass",
    "free-ratio-lower-bound",
    "xcheck-hunt",
    "xcheck-mc",
)

_METHOD_NAMES = {1: "closed-form", 2: "pde"}
_SKIP_NAMES = {1: "below_floor", 2: "under_resolved", 3: "domain_cap",
               4: "no_method", 5: "far_tail"}
_FLOOR_DROP = 600.0   # slice values this far under the peak are unusable
_RESOLUTION = 28.0    # required mesh cells per sqrt(t)
_CAP_MARGIN = 8.5     # far boundary beyond 1.03 x + this * sqrt(t)
_TAIL_SIGMA = 8.0     # validated accuracy envelope of the marcher
_EPS = np.finfo(float).eps


def _geomgrid(lo, hi, n):
    return tuple(float(v) for v in np.geomspace(lo, hi, n))


def _ulp_slack(*scales):
    """Float rounding floor for identities between large log values."""
    s = 1.0
    for sc in scales:
        s = np.maximum(s, np.abs(sc))
    return 8.0 * _EPS * s


@dataclass(frozen=True)
class GridSpec:
    """Parameter grid for the certification sweeps.

    The default covers eight indices and six decades of t, x - a, y - a,
    visiting all four regime combinations of the envelope's two bracketed
    factors.  Grids for a barrier other than 1 are given in the original
    scale; internally everything is reduced to the unit barrier.
    """

    mu_list: tuple = (-2.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.5)
    t_grid: tuple = _geomgrid(1e-3, 1e3, 12)
    x_grid: tuple = tuple(1.0 + g for g in _geomgrid(1e-3, 1e3, 12))
    y_grid: tuple = tuple(1.0 + g for g in _geomgrid(1e-3, 1e3, 12))
    a: float = 1.0

    def __post_init__(self):
        if not self.mu_list or not self.t_grid or not self.x_grid or not self.y_grid:
            raise ValueError("grids must be nonempty")
        if any(not math.isfinite(m) or m == 0.0 for m in self.mu_list):
            raise ValueError("mu must be nonzero")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError("a must be positive")
        if any(not (t > 0) for t in self.t_grid):
            raise ValueError("t must be positive")
        if any(x <= self.a for x in self.x_grid) or any(
            y <= self.a for y in self.y_grid
        ):
            raise ValueError("x and y must exceed a")

    def scaled_unit(self):
        """(t, x, y) grids reduced to the unit barrier."""
        a = self.a
        return (
            tuple(t / a**2 for t in self.t_grid),
            tuple(x / a for x in self.x_grid),
            tuple(y / a for y in self.y_grid),
        )


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one inequality or identity sweep.

    worst_margin is the largest signed log gap seen (0.0 when no cell
    was evaluable); slack is the loosest tolerance applied to any cell;
    skipped maps reason -> count for every cell left out.
    """

    check_id: str
    cells_total: int
    cells_failed: int
    worst_margin: float
    worst_cell: dict | None
    method_counts: dict
    skipped: dict
    slack: float

    @property
    def passed(self) -> bool:
        return self.cells_failed == 0


@dataclass(frozen=True)
class EnvelopeRow:
    """Comparability statistics of log p_1 - log envelope for one index."""

    mu: float
    cells_used: int
    min_log_ratio: float
    max_log_ratio: float
    spread: float
    argmin_cell: dict
    argmax_cell: dict
    regimes: dict
    rewrite_min: float
    rewrite_max: float
    identity_max_abs: float
    skipped: dict


@dataclass(frozen=True)
class EnvelopeReport:
    rows: tuple

    def row(self, mu: float) -> EnvelopeRow:
        for r in self.rows:
            if r.mu == mu:
                return r
        raise KeyError(f"no envelope row for mu={mu}")


class KernelTable:
    """log p_1 and log p over one index's (t, x, y) grid with provenance."""

    def __init__(self, mu, shape):
        self.mu = mu
        self.log_p1 = np.full(shape, LOG_ZERO)
        self.log_p = np.full(shape, LOG_ZERO)
        self.method = np.zeros(shape, dtype=np.int8)
        self.skip = np.full(shape, 4, dtype=np.int8)  # no_method until filled

    @property
    def ok(self):
        return self.skip == 0

    def slack_grid(self, identity: bool = False):
        loose = SLACK_PDE_IDENTITY if identity else SLACK_PDE
        tight = SLACK_IDENTITY if identity else SLACK_CLOSED
        return np.where(self.method == 2, loose, tight)

    def skip_counts(self) -> dict:
        out = {}
        for code in sorted(_SKIP_NAMES):
            n = int(np.sum(self.skip == code))
            if n:
                out[_SKIP_NAMES[code]] = n
        return out


@dataclass
class TableSet:
    """Kernel tables per index plus the boundary-flux records behind them."""

    spec: GridSpec
    tables: dict
    # (mu, ix) -> list of (frozenset of hosted unit times, s array, log q array)
    flux_records: dict = field(default_factory=dict)
    # (mu, ix) -> (largest marched unit horizon, log survival there)
    survival_at: dict = field(default_factory=dict)

    def source_for(self, mu, ix, t):
        """Flux source of the ladder hosting unit time t, or None."""
        for t_set, s_arr, lq_arr in self.flux_records.get((mu, ix), ()):
            if t in t_set:
                x = self.spec.scaled_unit()[1][ix]
                return hunt.tabulated_source("pde_flux", mu, x, s_arr, lq_arr)
        return None

    def combined_source(self, mu, ix):
        """Single source merging every ladder's flux record for (mu, ix).

        Ladder records overlap (each march restarts below its first
        checkpoint, where its own early steps are coarse); the earlier
        record wins on overlaps since it resolves small times finest.
        """
        recs = self.flux_records.get((mu, ix))
        if not recs:
            return None
        parts = []
        s_end = -math.inf
        for _, s_arr, lq_arr in recs:
            keep = s_arr > s_end
            if not np.any(keep):
                continue
            parts.append((s_arr[keep], lq_arr[keep]))
            s_end = float(s_arr[keep][-1])
        s_all = np.concatenate([p[0] for p in parts])
        lq_all = np.concatenate([p[1] for p in parts])
        order = np.argsort(s_all, kind="stable")
        x = self.spec.scaled_unit()[1][ix]
        return hunt.tabulated_source("pde_flux", mu, x,
                                     s_all[order], lq_all[order])


def _mesh_spacing(cap, nodes):
    """Largest cell of the solver mesh for this cap and node budget."""
    y = pde._build_mesh(cap, nodes, 1.01, 0.008)
    return float(np.max(np.diff(y)))


def _resolve_cap(cap, nodes, h_req):
    """Shrink cap until the actual mesh spacing is within h_req."""
    for _ in range(4):
        h = _mesh_spacing(cap, nodes)
        if h <= h_req:
            return cap
        cap = 1.0 + (cap - 1.0) * (h_req / h) * 0.995
    return cap if _mesh_spacing(cap, nodes) <= h_req else None


def _plan_ladders(x, t_list, nodes):
    """Greedy cover of the ascending unit times by shared-mesh marches.

    Each ladder's far cap is small enough that the mesh resolves its
    earliest time (spacing below sqrt(t)/28) yet large enough to hold
    1.03 x + 8.5 sqrt(t) for its latest.  Returns (ladders, skipped):
    ladders as (cap, [rung indices]), skipped as rung index -> code.
    """
    remaining = list(range(len(t_list)))
    ladders = []
    skipped = {}
    while remaining:
        i0 = remaining[0]
        t_lo = t_list[i0]
        h_req = math.sqrt(t_lo) / _RESOLUTION
        cap_try = 1.0 + nodes * h_req / 1.06
        need_lo = 1.03 * x + _CAP_MARGIN * math.sqrt(t_lo)
        if cap_try >= need_lo:
            cap_try = _resolve_cap(cap_try, nodes, h_req)
        else:
            cap_try = None
        if cap_try is None or cap_try < need_lo:
            skipped[i0] = 2
            remaining.pop(0)
            continue
        t_hi_max = ((cap_try - 1.03 * x) / _CAP_MARGIN) ** 2
        host = [i for i in remaining if t_list[i] <= t_hi_max]
        t_hi = t_list[host[-1]]
        cap = min(
            cap_try,
            max(1.03 * x + _CAP_MARGIN * math.sqrt(t_hi),
                2.0 * x + 1.0,
                1.0 + 20.0 * math.sqrt(t_hi)),
        )
        ladders.append((cap, host))
        remaining = [i for i in remaining if i not in host]
    return ladders, skipped


def _run_ladder(mu, x, cap, times, nodes):
    """One checkpointed march; returns (slices, flux record) or None."""
    solver = pde.KilledKernelSolver(mu, cap, pde.PdeConfig(nodes=nodes))
    rec = []
    try:
        slices = solver.solve_checkpoints(x, times, flux_rec=rec)
    except (pde.DomainTooSmall, pde.StabilityFailure, ValueError):
        return None
    return slices, rec


def _merge_ladder(ts, table, mu, ix, x, host, tu, yu, log_a, result):
    """Fold one ladder's slices and flux record into the tables."""
    if result is None:
        for it in host:
            table.skip[it, ix, :] = 2
        return
    slices, rec = result
    yq = np.asarray(yu)
    for it, sl in zip(host, slices):
        peak = float(np.max(sl.log_values))
        vals = sl.interp_log(yq)
        tail = _TAIL_SIGMA * math.sqrt(sl.t)
        for iy, y in enumerate(yu):
            if abs(y - x) > tail:
                table.skip[it, ix, iy] = 5
            elif y >= 0.97 * sl.y[-1]:
                table.skip[it, ix, iy] = 3
            elif sl.local_spacing(y) > math.sqrt(sl.t) / _RESOLUTION:
                table.skip[it, ix, iy] = 2
            elif not (vals[iy] > peak - _FLOOR_DROP):
                table.skip[it, ix, iy] = 1
            else:
                table.log_p1[it, ix, iy] = vals[iy] - log_a
                table.method[it, ix, iy] = 2
                table.skip[it, ix, iy] = 0
    if rec:
        s_arr = np.array([p[0] for p in rec])
        q_arr = np.maximum(
            np.array([p[1] for p in rec]) * x ** -(2.0 * mu + 1.0), 0.0
        )
        with np.errstate(divide="ignore"):
            lq_arr = np.where(q_arr > 0.0, np.log(np.maximum(q_arr, 1e-320)),
                              LOG_ZERO)
        t_set = frozenset(tu[i] for i in host)
        ts.flux_records.setdefault((mu, ix), []).append((t_set, s_arr, lq_arr))
        horizon = tu[host[-1]]
        prev = ts.survival_at.get((mu, ix))
        if prev is None or horizon > prev[0]:
            ts.survival_at[(mu, ix)] = (horizon, slices[-1].log_survival())


def build_tables(spec: GridSpec, *, pde_nodes: int = 4000,
                 threads: int = 1) -> TableSet:
    """Kernel tables for every index of the grid.

    Closed forms for mu = +-1/2; finite-difference ladders per (mu, x)
    for other positive indices; negative indices from the matching
    positive table through the exact reflection factor.  The thread
    count parallelizes independent marches and never changes values.
    """
    if pde_nodes < 500:
        raise ValueError("pde_nodes must be at least 500")
    tu, xu, yu = spec.scaled_unit()
    log_a = math.log(spec.a)
    shape = (len(tu), len(xu), len(yu))
    ts = TableSet(spec=spec, tables={})

    T = np.asarray(spec.t_grid)[:, None, None]
    X = np.asarray(spec.x_grid)[None, :, None]
    Y = np.asarray(spec.y_grid)[None, None, :]
    Tu = np.asarray(tu)[:, None, None]
    Xu = np.asarray(xu)[None, :, None]
    Yu = np.asarray(yu)[None, None, :]

    pde_pos = sorted({abs(m) for m in spec.mu_list if abs(m) != 0.5})
    all_mus = sorted(set(spec.mu_list) | set(pde_pos))
    for m in all_mus:
        tbl = KernelTable(m, shape)
        tbl.log_p = kernels.log_free_kernel(m, T, X, Y)
        ts.tables[m] = tbl

    # one job per ladder; results merged in queue order for determinism
    jobs = []
    for m in pde_pos:
        for ix, x in enumerate(xu):
            table = ts.tables[m]
            ladders, skipped = _plan_ladders(x, tu, pde_nodes)
            for it, code in skipped.items():
                table.skip[it, ix, :] = code
            for cap, host in ladders:
                times = [tu[i] for i in host]
                jobs.append((
                    (m, ix, x, host),
                    lambda m=m, x=x, cap=cap, times=times: _run_ladder(
                        m, x, cap, times, pde_nodes),
                ))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda job: job[1](), jobs))
    else:
        results = [job[1]() for job in jobs]
    for ((m, ix, x, host), _), res in zip(jobs, results):
        _merge_ladder(ts, ts.tables[m], m, ix, x, host, tu, yu, log_a, res)

    for m in spec.mu_list:
        if abs(m) == 0.5:
            tbl = ts.tables[m]
            vals = kernels.log_half_killed_kernel(Tu, Xu, Yu) - log_a
            if m < 0:
                vals = vals + kernels.reflect_index(0.5, Xu, Yu)
            tbl.log_p1 = vals
            tbl.method[:] = 1
            tbl.skip[:] = 0
        elif m < 0:
            base = ts.tables[abs(m)]
            tbl = ts.tables[m]
            tbl.log_p1 = base.log_p1 + kernels.reflect_index(abs(m), Xu, Yu)
            tbl.method = base.method.copy()
            tbl.skip = base.skip.copy()
    return ts


class _Acc:
    """Accumulates margins, methods, and skips for one check."""

    def __init__(self, check_id, base_slack):
        self.check_id = check_id
        self.base_slack = base_slack
        self.slack_max = 0.0
        self.n = 0
        self.failed = 0
        self.worst = -math.inf
        self.worst_cell = None
        self.methods = {}
        self.skips = {}

    def add(self, margin, cell, method, slack=None):
        slack = self.base_slack if slack is None else slack
        self.n += 1
        self.slack_max = max(self.slack_max, slack)
        self.methods[method] = self.methods.get(method, 0) + 1
        if margin > slack:
            self.failed += 1
        if margin > self.worst:
            self.worst = margin
            self.worst_cell = cell

    def skip(self, reason, n=1):
        if n:
            self.skips[reason] = self.skips.get(reason, 0) + int(n)

    def skip_from_tables(self, excluded_mask, *skip_arrays):
        """Attribute each excluded cell to the first skip code found."""
        rem = excluded_mask.copy()
        for arr in skip_arrays:
            for code in sorted(_SKIP_NAMES):
                hit = rem & (arr == code)
                self.skip(_SKIP_NAMES[code], int(np.sum(hit)))
                rem &= ~hit
        self.skip("not_applicable", int(np.sum(rem)))

    def sweep(self, margin, valid, method, slack, cellmaker):
        """Vectorized bulk add over a (nt, nx, ny) grid."""
        valid = valid & np.isfinite(margin)
        vals = margin[valid]
        if vals.size == 0:
            return
        slack = np.broadcast_to(slack, margin.shape)[valid]
        method = np.broadcast_to(method, margin.shape)[valid]
        self.n += int(vals.size)
        self.failed += int(np.sum(vals > slack))
        self.slack_max = max(self.slack_max, float(np.max(slack)))
        for code in np.unique(method):
            name = _METHOD_NAMES[int(code)]
            cnt = int(np.sum(method == code))
            self.methods[name] = self.methods.get(name, 0) + cnt
        k = int(np.argmax(vals))
        if vals[k] > self.worst:
            flat = np.flatnonzero(valid.ravel())[k]
            it, ix, iy = np.unravel_index(flat, margin.shape)
            self.worst = float(vals[k])
            self.worst_cell = cellmaker(int(it), int(ix), int(iy),
                                        float(vals[k]))

    def result(self) -> CheckResult:
        worst = self.worst if self.n else 0.0
        return CheckResult(
            check_id=self.check_id,
            cells_total=self.n,
            cells_failed=self.failed,
            worst_margin=float(worst),
            worst_cell=self.worst_cell,
            method_counts={k: self.methods[k] for k in sorted(self.methods)},
            skipped={k: self.skips[k] for k in sorted(self.skips)},
            slack=float(self.slack_max if self.n else self.base_slack),
        )


def _cellmaker(spec, mu, **extra):
    def make(it, ix, iy, margin):
        cell = {"mu": mu, "t": spec.t_grid[it], "x": spec.x_grid[ix],
                "y": spec.y_grid[iy], "margin": margin}
        cell.update(extra)
        return cell

    return make


def _method_grid(*tables):
    m = tables[0].method
    for t in tables[1:]:
        m = np.maximum(m, t.method)
    return m


def _check_bessel_ratio(spec):
    """Two-sided growth bounds for ratios of the modified Bessel function."""
    acc = _Acc("bessel-ratio-bounds", SLACK_CLOSED)
    orders = sorted({abs(m) for m in spec.mu_list})
    z = np.geomspace(1e-4, 1e4, 17)
    for nu in orders:
        lv = log_bessel_i(nu, z)
        for i in range(len(z)):
            for j in range(i + 1, len(z)):
                dz = float(z[j] - z[i])
                dlog = math.log(z[j] / z[i])
                ratio = float(lv[j] - lv[i])
                cell = {"mu": nu, "z_lo": float(z[i]), "z_hi": float(z[j])}
                slack = max(SLACK_CLOSED, float(_ulp_slack(lv[i], lv[j], dz)))
                acc.add(ratio - (nu * dlog + dz),
                        {**cell, "side": "upper"}, "closed-form", slack)
                if nu >= 0.5:
                    acc.add((-nu * dlog + dz) - ratio,
                            {**cell, "side": "lower"}, "closed-form", slack)
    return acc.result()


def _check_killed_below_free(spec, ts):
    """The killed kernel never exceeds the free one."""
    acc = _Acc("killed-below-free", SLACK_CLOSED)
    for m in spec.mu_list:
        tbl = ts.tables[m]
        with np.errstate(invalid="ignore"):  # -inf minus -inf at dead cells
            margin = tbl.log_p1 - tbl.log_p
        slack = np.maximum(tbl.slack_grid(), _ulp_slack(tbl.log_p1, tbl.log_p))
        acc.sweep(margin, tbl.ok, tbl.method, slack, _cellmaker(spec, m))
        acc.skip_from_tables(~tbl.ok, tbl.skip)
    return acc.result()


def _pair_sweep(acc, spec, ts, mu, nu, margin, label, extra_mask=None):
    ta, tb = ts.tables[mu], ts.tables[nu]
    ok = ta.ok & tb.ok
    if extra_mask is not None:
        ok = ok & extra_mask
    slack = np.maximum(np.maximum(ta.slack_grid(), tb.slack_grid()),
                       _ulp_slack(ta.log_p1, tb.log_p1))
    acc.sweep(margin, ok, _method_grid(ta, tb), slack,
              _cellmaker(spec, mu, pair_nu=nu, part=label))
    excluded = ~(ta.ok & tb.ok)
    if extra_mask is not None:
        excluded = excluded & extra_mask
    acc.skip_from_tables(excluded, ta.skip, tb.skip)


def _check_half_bracket(spec, ts):
    """Power-weighted bracketing of every index between the two half cases."""
    acc = _Acc("half-index-bracket", SLACK_CLOSED)
    pos = sorted(m for m in spec.mu_list if m > 0)
    if 0.5 not in pos:
        acc.skip("reference_index_missing")
        return acc.result()
    _, xu, yu = spec.scaled_unit()
    L = (np.log(np.asarray(xu))[None, :, None]
         - np.log(np.asarray(yu))[None, None, :])
    half = ts.tables[0.5].log_p1
    for m in pos:
        if m == 0.5:
            continue
        with np.errstate(invalid="ignore"):  # -inf minus -inf at dead cells
            if m > 0.5:
                margin = (m - 0.5) * L + ts.tables[m].log_p1 - half
                kind = "upper"
            else:
                margin = half - ((m - 0.5) * L + ts.tables[m].log_p1)
                kind = "lower"
        _pair_sweep(acc, spec, ts, m, 0.5, margin, kind)
    return acc.result()


def _check_index_power(spec, ts):
    """Monotone power comparison between any two positive indices."""
    acc = _Acc("index-power-bound", SLACK_CLOSED)
    pos = sorted(m for m in spec.mu_list if m > 0)
    _, xu, yu = spec.scaled_unit()
    L = (np.log(np.asarray(yu))[None, None, :]
         - np.log(np.asarray(xu))[None, :, None])
    for i, nu in enumerate(pos):
        for m in pos[i + 1:]:
            with np.errstate(invalid="ignore"):  # -inf minus -inf at dead cells
                margin = (ts.tables[m].log_p1
                          - ((m - nu) * L + ts.tables[nu].log_p1))
            _pair_sweep(acc, spec, ts, m, nu, margin, "power-bound")
    return acc.result()


def _check_small_time(spec, ts):
    """Reverse power comparison with an index constant, unit times <= 1."""
    acc = _Acc("small-time-lower-bound", SLACK_CLOSED)
    pos = sorted(m for m in spec.mu_list if m > 0)
    tu, xu, yu = spec.scaled_unit()
    tmask = (np.asarray(tu) <= 1.0)[:, None, None]
    n_big = int(np.sum(np.asarray(tu) > 1.0)) * len(xu) * len(yu)
    L = (np.log(np.asarray(yu))[None, None, :]
         - np.log(np.asarray(xu))[None, :, None])
    for i, nu in enumerate(pos):
        for m in pos[i + 1:]:
            const = -(m**2 - nu**2) / 2.0
            with np.errstate(invalid="ignore"):  # -inf minus -inf at dead cells
                margin = (const + (m - nu) * L
                          + ts.tables[nu].log_p1 - ts.tables[m].log_p1)
            _pair_sweep(acc, spec, ts, m, nu, margin, "small-time",
                        extra_mask=tmask)
            acc.skip("outside_domain", n_big)
    return acc.result()


def _check_hitting_bracket(spec, ts):
    """Power-weighted bracketing of the hitting density around index 1/2.

    The non-half densities come from the recorded boundary flux, so this
    check carries the widest slack of the suite; the bracket is tight in
    the small-time limit where both sides share one leading shape.
    """
    acc = _Acc("hitting-density-bracket", SLACK_HITTING_BRACKET)
    tu, xu, _ = spec.scaled_unit()
    pde_pos = sorted({abs(m) for m in spec.mu_list if abs(m) != 0.5})
    if not pde_pos:
        acc.skip("no_pde_indices")
        return acc.result()
    for m in pde_pos:
        for ix, x in enumerate(xu):
            lx = math.log(x)
            for it, t in enumerate(tu):
                # recorded wall flux is trustworthy only while the wall sits
                # inside the resolved window around the start
                if (x - 1.0) ** 2 > 40.0 * t:
                    acc.skip("below_floor")
                    continue
                src = ts.source_for(m, ix, t)
                if src is None:
                    acc.skip("no_flux_record")
                    continue
                lq = float(src.log_q(np.array([t]))[0])
                lq_half = float(kernels.log_half_hitting_density(x, t))
                if not math.isfinite(lq) or not math.isfinite(lq_half):
                    acc.skip("below_floor")
                    continue
                cell = {"mu": m, "t": spec.t_grid[it], "x": spec.x_grid[ix]}
                if m >= 0.5:
                    acc.add((m - 0.5) * lx + lq - lq_half,
                            {**cell, "side": "upper"}, "pde")
                else:
                    acc.add(lq_half - ((m - 0.5) * lx + lq),
                            {**cell, "side": "lower"}, "pde")
    return acc.result()


def _spread_indices(n, k):
    """k well-spread interior indices of range(n), deterministic."""
    if n <= k:
        return list(range(n))
    return sorted({int(round((i + 1) * (n - 1) / (k + 1))) for i in range(k)})


def _check_symmetry_reflection(spec, ts, seed, reflect_starts=2):
    """Start-end symmetry of the tables plus dual-route index reflection."""
    acc = _Acc("symmetry-reflection", SLACK_IDENTITY)
    nt = len(spec.t_grid)
    ypos = {v: j for j, v in enumerate(spec.y_grid)}
    # x grid values that also live in the y grid, with both indices
    shared = [(i, ypos[v]) for i, v in enumerate(spec.x_grid) if v in ypos]

    for m in spec.mu_list:
        tbl = ts.tables[m]
        w = 2.0 * m + 1.0
        for ka in range(len(shared)):
            for kb in range(ka, len(shared)):
                i1, j1 = shared[ka]   # value A as start, slot of A in y
                i2, j2 = shared[kb]   # value B as start, slot of B in y
                for it in range(nt):
                    ok1 = tbl.skip[it, i1, j2] == 0
                    ok2 = tbl.skip[it, i2, j1] == 0
                    if not (ok1 and ok2):
                        acc.skip("transpose_unavailable")
                        continue
                    v1 = (tbl.log_p1[it, i1, j2]
                          - w * math.log(spec.y_grid[j2]))
                    v2 = (tbl.log_p1[it, i2, j1]
                          - w * math.log(spec.y_grid[j1]))
                    meth = int(max(tbl.method[it, i1, j2],
                                   tbl.method[it, i2, j1]))
                    slack = (SLACK_IDENTITY if meth == 1
                             else SLACK_PDE_IDENTITY)
                    slack = max(slack, float(_ulp_slack(v1, v2)))
                    acc.add(abs(v1 - v2),
                            {"mu": m, "t": spec.t_grid[it],
                             "x": spec.x_grid[i1], "y": spec.x_grid[i2],
                             "part": "symmetry"},
                            _METHOD_NAMES.get(meth, "closed-form"), slack)

    tu, xu, yu = spec.scaled_unit()
    log_a = math.log(spec.a)

    # reflection, quadrature route: the negative half index evaluated by
    # convolution against the exactly reflected hitting density
    if -0.5 in ts.tables and 0.5 in {abs(m) for m in spec.mu_list}:
        tbl = ts.tables[-0.5]
        rng = np.random.Generator(np.random.Philox(
            key=np.array([seed, 0x5EED], dtype=np.uint64)))
        # quadrature needs the value itself representable in linear scale
        eligible = (tbl.ok & (tbl.log_p1 - tbl.log_p > -3.0)
                    & (tbl.log_p > -600.0))
        flat = np.flatnonzero(eligible.ravel())
        if flat.size:
            picks = rng.choice(flat, size=min(24, flat.size), replace=False)
            for f in sorted(int(v) for v in picks):
                it, ix, iy = np.unravel_index(f, tbl.log_p1.shape)
                x = xu[ix]
                src = hunt.HittingDensitySource(
                    kind="exact_half", mu=-0.5, x=x,
                    log_density=lambda s, x=x:
                        kernels.log_half_hitting_density(x, s) + math.log(x),
                )
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore",
                                              hunt.CancellationWarning)
                        lk = hunt.killed_kernel_via_hunt(
                            -0.5, tu[it], x, yu[iy], src)
                except hunt.NegativeDensity:
                    acc.skip("cancellation")
                    continue
                except hunt.ConvergenceFailure:
                    acc.skip("quadrature_stall")
                    continue
                acc.add(abs(lk - log_a - tbl.log_p1[it, ix, iy]),
                        {"mu": -0.5, "t": spec.t_grid[it],
                         "x": spec.x_grid[ix], "y": spec.y_grid[iy],
                         "part": "reflection-quadrature"},
                        "closed-form", 1e-6)

    # reflection, march route: direct negative-index solves against the
    # reflected positive table on a few starts
    neg = sorted(m for m in spec.mu_list if m < 0 and m != -0.5)
    mid_it = len(tu) // 2
    t_pick = tu[mid_it]
    nodes = 4000
    for m in neg:
        tbl = ts.tables[m]
        for ix in _spread_indices(len(xu), reflect_starts):
            usable = np.flatnonzero(tbl.skip[mid_it, ix, :] == 0)
            if usable.size == 0:
                acc.skip("under_resolved")
                continue
            x = xu[ix]
            h_req = math.sqrt(t_pick) / _RESOLUTION
            cap = max(1.03 * x + _CAP_MARGIN * math.sqrt(t_pick),
                      2.0 * x + 1.0, 1.0 + 20.0 * math.sqrt(t_pick))
            cap = _resolve_cap(min(cap, 1.0 + nodes * h_req / 1.06),
                               nodes, h_req)
            if cap is None or cap < 1.03 * x + _CAP_MARGIN * math.sqrt(t_pick):
                acc.skip("under_resolved")
                continue
            res = _run_ladder(m, x, cap, [t_pick], nodes)
            if res is None:
                acc.skip("under_resolved")
                continue
            sl = res[0][0]
            for iy in usable:
                direct = sl.interp_log(yu[iy]) - log_a
                if not math.isfinite(direct):
                    acc.skip("below_floor")
                    continue
                acc.add(abs(direct - tbl.log_p1[mid_it, ix, iy]),
                        {"mu": m, "t": spec.t_grid[mid_it],
                         "x": spec.x_grid[ix], "y": spec.y_grid[int(iy)],
                         "part": "reflection-march"},
                        "pde", SLACK_PDE)
    return acc.result()


def _log_half_killed_barrier(a, t, x, y):
    # direct closed form at barrier a, assembled without unit reduction
    u = (x - a) * (y - a) / t
    return (np.log(y / x) - 0.5 * np.log(2.0 * math.pi * t)
            - (x - y) ** 2 / (2.0 * t) + log1mexp(-2.0 * u))


def _check_barrier_scaling(spec, ts):
    """Barrier reduction identity against a direct closed-form assembly.

    For each alternate barrier the half-index kernel is evaluated once in
    the original coordinates and once through the unit-barrier reduction;
    a spread of scalar cells additionally exercises the query-object path.
    """
    acc = _Acc("barrier-scaling", SLACK_IDENTITY)
    tu, xu, yu = spec.scaled_unit()
    Tu = np.asarray(tu)[:, None, None]
    Xu = np.asarray(xu)[None, :, None]
    Yu = np.asarray(yu)[None, None, :]
    for a in (2.0, 10.0):
        Ta, Xa, Ya = Tu * a**2, Xu * a, Yu * a
        direct = _log_half_killed_barrier(a, Ta, Xa, Ya)
        reduced = (kernels.log_half_killed_kernel(Ta / a**2, Xa / a, Ya / a)
                   - math.log(a))
        margin = np.abs(direct - reduced)
        slack = np.maximum(SLACK_IDENTITY, _ulp_slack(direct, reduced))
        ones = np.ones(margin.shape, bool)
        acc.sweep(margin, ones, np.ones(margin.shape, np.int8), slack,
                  _cellmaker(spec, 0.5, part=f"vector a={a}"))
    for a in (2.0, 10.0):
        for it in _spread_indices(len(tu), 2):
            for ix in _spread_indices(len(xu), 2):
                for iy in _spread_indices(len(yu), 2):
                    q = kernels.KernelQuery(t=tu[it] * a**2, x=xu[ix] * a,
                                            y=yu[iy] * a, a=a)
                    red, jac = kernels.reduce_to_unit_barrier(0.5, q)
                    v1 = kernels.log_half_killed_kernel(
                        red.t, red.x, red.y) + jac
                    v2 = float(_log_half_killed_barrier(a, q.t, q.x, q.y))
                    acc.add(abs(v1 - v2),
                            {"mu": 0.5, "t": q.t, "x": q.x, "y": q.y,
                             "part": "query-route"},
                            "closed-form",
                            max(SLACK_IDENTITY, float(_ulp_slack(v1, v2))))
    return acc.result()


def _check_hitting_mass(spec, ts):
    """Total hitting mass: exact law for index 1/2; flux mass plus
    survival sums to one at the largest marched horizon otherwise."""
    acc = _Acc("hitting-mass", SLACK_CLOSED)
    tu, xu, _ = spec.scaled_unit()
    for ix, x in enumerate(xu):
        lm = hunt.source_log_mass(hunt.exact_half_source(x))
        acc.add(abs(lm - (-math.log(x))),
                {"mu": 0.5, "x": spec.x_grid[ix], "part": "exact-law"},
                "closed-form")
    pde_pos = sorted({abs(m) for m in spec.mu_list if abs(m) != 0.5})
    for m in pde_pos:
        for ix, x in enumerate(xu):
            if (m, ix) not in ts.survival_at:
                acc.skip("no_flux_record")
                continue
            horizon, log_surv = ts.survival_at[(m, ix)]
            recs = ts.flux_records.get((m, ix))
            # the mass integral peaks near (x-1)^2/3; a record that starts
            # above that cannot resolve the bulk of the hitting mass
            if recs and recs[0][1][0] > (x - 1.0) ** 2 / 12.0:
                acc.skip("under_resolved")
                continue
            src = ts.combined_source(m, ix)
            # tolerance matched to the check slack; the merged interpolant
            # carries small seams where consecutive marches meet
            cfg = hunt.QuadratureConfig(rel_tol=1e-7, max_subdivisions=4000)
            try:
                lm = hunt.source_log_mass(src, cfg=cfg, horizon=horizon)
            except hunt.ConvergenceFailure:
                acc.skip("quadrature_stall")
                continue
            total = math.exp(lm) + math.exp(log_surv)
            acc.add(abs(total - 1.0),
                    {"mu": m, "x": spec.x_grid[ix], "horizon": horizon,
                     "part": "flux-budget"},
                    "pde", SLACK_PDE)
    return acc.result()


def _check_ratio_lower(spec, ts):
    """Explicit lower bound on p_1 / p from the single-crossing estimate;
    valid above the start point with enough room to the barrier in time."""
    acc = _Acc("free-ratio-lower-bound", SLACK_CLOSED)
    tu, xu, yu = spec.scaled_unit()
    Tu = np.asarray(tu)[:, None, None]
    Xu = np.asarray(xu)[None, :, None]
    Yu = np.asarray(yu)[None, None, :]
    for m in sorted(v for v in spec.mu_list if v > 0):
        tbl = ts.tables[m]
        z = (Xu**2 - 1.0) / Tu - 2.0 * m * np.log(Xu)
        domain = ((Yu > Xu) & ((Yu - 1.0) ** 2 / Tu >= 2.0 * (m + 1.0))
                  & (z < -1e-12))
        domain = np.broadcast_to(domain, tbl.log_p1.shape)
        rhs = np.broadcast_to(log1mexp(np.minimum(z, -1e-300)),
                              tbl.log_p1.shape)
        with np.errstate(invalid="ignore"):  # -inf minus -inf at dead cells
            margin = rhs - (tbl.log_p1 - tbl.log_p)
        slack = np.maximum(tbl.slack_grid(), _ulp_slack(tbl.log_p1, tbl.log_p))
        acc.sweep(margin, tbl.ok & domain, tbl.method, slack,
                  _cellmaker(spec, m))
        acc.skip_from_tables(~tbl.ok & domain, tbl.skip)
        acc.skip("outside_domain", int(np.sum(~domain)))
    return acc.result()


def _xcheck_hunt(spec, ts, seed):
    """Convolution quadrature driven by the recorded flux against the
    marched tables on a seeded subsample of reachable cells."""
    acc = _Acc("xcheck-hunt", SLACK_XCHECK_HUNT)
    tu, xu, yu = spec.scaled_unit()
    log_a = math.log(spec.a)
    pool = []
    for m in sorted({abs(v) for v in spec.mu_list if abs(v) != 0.5}):
        tbl = ts.tables[m]
        for ix in range(len(xu)):
            hosted = set()
            for t_set, _, _ in ts.flux_records.get((m, ix), ()):
                hosted |= t_set
            for it, t in enumerate(tu):
                if t not in hosted:
                    continue
                for iy in range(len(yu)):
                    if (tbl.skip[it, ix, iy] == 0
                            and tbl.log_p1[it, ix, iy]
                            - tbl.log_p[it, ix, iy] > -3.0
                            and tbl.log_p[it, ix, iy] > -600.0):
                        pool.append((m, it, ix, iy))
    if not pool:
        acc.skip("no_eligible_cells")
        return acc.result()
    rng = np.random.Generator(np.random.Philox(
        key=np.array([seed, 0x41B2], dtype=np.uint64)))
    n_pick = min(min(64, max(8, len(pool) // 10)), len(pool))
    picks = rng.choice(len(pool), size=n_pick, replace=False)
    for k in sorted(int(v) for v in picks):
        m, it, ix, iy = pool[k]
        src = ts.source_for(m, ix, tu[it])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", hunt.CancellationWarning)
                lk = hunt.killed_kernel_via_hunt(m, tu[it], xu[ix], yu[iy],
                                                 src)
        except hunt.NegativeDensity:
            acc.skip("cancellation")
            continue
        except hunt.ConvergenceFailure:
            acc.skip("quadrature_stall")
            continue
        acc.add(abs(lk - log_a - ts.tables[m].log_p1[it, ix, iy]),
                {"mu": m, "t": spec.t_grid[it], "x": spec.x_grid[ix],
                 "y": spec.y_grid[iy]}, "pde")
    return acc.result()


def _xcheck_mc(spec, ts, seed, n_paths=40000):
    """Simulated near-peak bin masses against the tabulated kernel.

    The margin is linear: |estimate - target| minus four standard errors
    minus a small relative allowance for step bias and bin curvature;
    positive means violated.  Bins stay near the peak so the curvature
    term is controlled.
    """
    acc = _Acc("xcheck-mc", 0.0)
    tu, xu, yu = spec.scaled_unit()
    log_a = math.log(spec.a)
    pool = []
    for m in spec.mu_list:
        tbl = ts.tables[m]
        for it, t in enumerate(tu):
            st = math.sqrt(t)
            for ix, x in enumerate(xu):
                for iy, y in enumerate(yu):
                    if tbl.skip[it, ix, iy] != 0:
                        continue
                    if abs(y - x) > 2.0 * st:
                        continue
                    w = min(0.14 * st, 0.8 * (y - 1.0), 0.25 * y)
                    if w <= 0.0:
                        continue
                    mass = math.exp(tbl.log_p1[it, ix, iy] + log_a) * w
                    if mass >= 0.004:
                        pool.append((m, it, ix, iy, w, mass))
    if not pool:
        acc.skip("no_eligible_cells")
        return acc.result()
    rng = np.random.Generator(np.random.Philox(
        key=np.array([seed, 0x3C17], dtype=np.uint64)))
    n_pick = min(min(24, max(4, len(pool) // 100)), len(pool))
    picks = rng.choice(len(pool), size=n_pick, replace=False)
    for k in sorted(int(v) for v in picks):
        m, it, ix, iy, w, target = pool[k]
        cfg = mc.McConfig(n_paths=n_paths,
                          seed=(seed * 1000003 + k) % 2**63)
        est = mc.simulate_killed_histogram(
            m, xu[ix], tu[it],
            [(yu[iy] - w / 2.0, yu[iy] + w / 2.0)], cfg)[0]
        allowance = 4.0 * est.std_err + (MC_REL_SLACK + 4e-3) * target
        table_method = _METHOD_NAMES.get(
            int(ts.tables[m].method[it, ix, iy]), "pde")
        acc.add(abs(est.mean - target) - allowance,
                {"mu": m, "t": spec.t_grid[it], "x": spec.x_grid[ix],
                 "y": spec.y_grid[iy], "target_mass": target,
                 "table_method": table_method},
                "mc")
    return acc.result()


def run_inequality_suite(spec: GridSpec | None = None, *,
                         tables: TableSet | None = None, seed: int = 0,
                         threads: int = 1, pde_nodes: int = 4000,
                         include_xchecks: bool = True):
    """Run every check over the grid; returns a list of CheckResult.

    Results are ordered as in CHECK_IDS.  A prebuilt TableSet can be
    passed to share tables with the envelope report.  seed drives every
    subsample and simulation stream; threads parallelizes table building
    without changing any reported value.
    """
    spec = spec or GridSpec()
    ts = tables if tables is not None else build_tables(
        spec, pde_nodes=pde_nodes, threads=threads)
    results = [
        _check_bessel_ratio(spec),
        _check_killed_below_free(spec, ts),
        _check_half_bracket(spec, ts),
        _check_index_power(spec, ts),
        _check_small_time(spec, ts),
        _check_hitting_bracket(spec, ts),
        _check_symmetry_reflection(spec, ts, seed),
        _check_barrier_scaling(spec, ts),
        _check_hitting_mass(spec, ts),
        _check_ratio_lower(spec, ts),
    ]
    if include_xchecks:
        results.append(_xcheck_hunt(spec, ts, seed))
        results.append(_xcheck_mc(spec, ts, seed))
    return results


def _regime_key(far_free: bool, far_band: bool) -> str:
    lhs = "xy>=t" if far_free else "xy<t"
    rhs = "(x-a)(y-a)>=t" if far_band else "(x-a)(y-a)<t"
    return f"{lhs} & {rhs}"


def run_envelope_report(spec: GridSpec | None = None, *,
                        tables: TableSet | None = None,
                        pde_nodes: int = 4000,
                        threads: int = 1) -> EnvelopeReport:
    """Comparability band between the tables and the explicit envelope.

    Per index: extreme log ratios with their cells and regime tags, the
    band of the kernel-to-free ratio against its predicted bracket, and
    the residual of the envelope factorization identity (exactly zero in
    floating point by construction of the envelope assembly).
    """
    spec = spec or GridSpec()
    ts = tables if tables is not None else build_tables(
        spec, pde_nodes=pde_nodes, threads=threads)
    T = np.asarray(spec.t_grid)[:, None, None]
    X = np.asarray(spec.x_grid)[None, :, None]
    Y = np.asarray(spec.y_grid)[None, None, :]
    a = spec.a
    band = np.broadcast_to(kernels.log_rewrite_band(T, X, Y, a),
                           (len(spec.t_grid), len(spec.x_grid),
                            len(spec.y_grid)))
    far_free = np.broadcast_to(X * Y >= T, band.shape)
    far_band = np.broadcast_to((X - a) * (Y - a) >= T, band.shape)
    rows = []
    for m in spec.mu_list:
        tbl = ts.tables[m]
        env = np.broadcast_to(kernels.log_envelope(m, T, X, Y, a), band.shape)
        fenv = np.broadcast_to(kernels.log_free_envelope(m, T, X, Y),
                               band.shape)
        identity = float(np.max(np.abs(env - (band + fenv))))
        ok = tbl.ok
        ratio = np.where(ok, tbl.log_p1 - env, np.nan)
        rewrite = np.where(ok, (tbl.log_p1 - tbl.log_p) - band, np.nan)
        used = int(np.sum(ok))
        if used == 0:
            rows.append(EnvelopeRow(
                mu=m, cells_used=0, min_log_ratio=0.0, max_log_ratio=0.0,
                spread=0.0, argmin_cell={}, argmax_cell={}, regimes={},
                rewrite_min=0.0, rewrite_max=0.0,
                identity_max_abs=identity, skipped=tbl.skip_counts()))
            continue

        def cell(flat):
            it, ix, iy = np.unravel_index(flat, ratio.shape)
            return {
                "mu": m, "t": spec.t_grid[it], "x": spec.x_grid[ix],
                "y": spec.y_grid[iy],
                "log_ratio": float(ratio[it, ix, iy]),
                "regime": _regime_key(bool(far_free[it, ix, iy]),
                                      bool(far_band[it, ix, iy])),
                "method": _METHOD_NAMES[int(tbl.method[it, ix, iy])],
            }

        regimes = {}
        for ff in (True, False):
            for fb in (True, False):
                sel = ok & (far_free == ff) & (far_band == fb)
                if np.any(sel):
                    vals = ratio[sel]
                    regimes[_regime_key(ff, fb)] = {
                        "cells": int(np.sum(sel)),
                        "min_log_ratio": float(np.min(vals)),
                        "max_log_ratio": float(np.max(vals)),
                    }
        lo = float(np.nanmin(ratio))
        hi = float(np.nanmax(ratio))
        rows.append(EnvelopeRow(
            mu=m,
            cells_used=used,
            min_log_ratio=lo,
            max_log_ratio=hi,
            spread=hi - lo,
            argmin_cell=cell(int(np.nanargmin(ratio))),
            argmax_cell=cell(int(np.nanargmax(ratio))),
            regimes=regimes,
            rewrite_min=float(np.nanmin(rewrite)),
            rewrite_max=float(np.nanmax(rewrite)),
            identity_max_abs=identity,
            skipped=tbl.skip_counts(),
        ))
    return EnvelopeReport(rows=tuple(rows))


_CSV_FIELDS = (
    "record_type", "check_id", "cells_total", "cells_failed", "worst_margin",
    "slack", "worst_cell", "method_counts", "skipped", "mu", "cells_used",
    "min_log_ratio", "max_log_ratio", "spread", "argmin_cell", "argmax_cell",
    "regimes", "rewrite_min", "rewrite_max", "identity_max_abs",
)
_CHECK_INT = ("cells_total", "cells_failed")
_CHECK_FLOAT = ("worst_margin", "slack")
_CHECK_JSON = ("worst_cell", "method_counts", "skipped")
_ROW_INT = ("cells_used",)
_ROW_FLOAT = ("mu", "min_log_ratio", "max_log_ratio", "spread",
              "rewrite_min", "rewrite_max", "identity_max_abs")
_ROW_JSON = ("argmin_cell", "argmax_cell", "regimes", "skipped")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)) or v is None:
        return json.dumps(v)
    return str(v)


def emit_report(checks=None, envelope: EnvelopeReport | None = None,
                fmt: str = "json") -> str:
    """Serialize check results and the envelope report losslessly.

    JSON keeps dataclass field order; CSV is one flat table with a
    record_type column and JSON-encoded dictionary cells.  Both formats
    round-trip exactly through parse_report (floats via repr).
    """
    checks = list(checks or [])
    if fmt == "json":
        doc = {
            "schema": "bkk-report-1",
            "checks": [asdict(c) for c in checks],
            "envelope": ({"rows": [asdict(r) for r in envelope.rows]}
                         if envelope is not None else None),
        }
        return json.dumps(doc, indent=2, allow_nan=False)
    if fmt != "csv":
        raise ValueError("fmt must be json or csv")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for c in checks:
        row = {k: _fmt(v) for k, v in asdict(c).items()}
        row["record_type"] = "check"
        w.writerow(row)
    if envelope is not None:
        for r in envelope.rows:
            row = {k: _fmt(v) for k, v in asdict(r).items()}
            row["record_type"] = "envelope_row"
            w.writerow(row)
    return buf.getvalue()


def _check_from_dict(d) -> CheckResult:
    return CheckResult(**{k: d[k] for k in (
        "check_id", "cells_total", "cells_failed", "worst_margin",
        "worst_cell", "method_counts", "skipped", "slack")})


def _row_from_dict(d) -> EnvelopeRow:
    return EnvelopeRow(**{k: d[k] for k in (
        "mu", "cells_used", "min_log_ratio", "max_log_ratio", "spread",
        "argmin_cell", "argmax_cell", "regimes", "rewrite_min",
        "rewrite_max", "identity_max_abs", "skipped")})


def parse_report(text: str):
    """Inverse of emit_report; returns (checks, envelope or None)."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema") != "bkk-report-1":
            raise ValueError("unrecognized report schema")
        checks = [_check_from_dict(d) for d in doc["checks"]]
        env = doc.get("envelope")
        envelope = (EnvelopeReport(rows=tuple(
            _row_from_dict(r) for r in env["rows"])) if env else None)
        return checks, envelope
    rd = csv.DictReader(io.StringIO(text))
    checks = []
    rows = []
    for rec in rd:
        kind = rec.get("record_type")
        if kind == "check":
            d = {"check_id": rec["check_id"]}
            for k in _CHECK_INT:
                d[k] = int(rec[k])
            for k in _CHECK_FLOAT:
                d[k] = float(rec[k])
            for k in _CHECK_JSON:
                d[k] = json.loads(rec[k])
            checks.append(_check_from_dict(d))
        elif kind == "envelope_row":
            d = {}
            for k in _ROW_INT:
                d[k] = int(rec[k])
            for k in _ROW_FLOAT:
                d[k] = float(rec[k])
            for k in _ROW_JSON:
                d[k] = json.loads(rec[k])
            rows.append(_row_from_dict(d))
        else:
            raise ValueError("unrecognized record type in report")
    envelope = EnvelopeReport(rows=tuple(rows)) if rows else None
    return checks, envelope
