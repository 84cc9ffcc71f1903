"""Command-line surface: evaluate kernels, certify, tabulate, simulate.

Subcommands
-----------
eval       one killed-kernel evaluation with a chosen method
certify    run the inequality suite and envelope report over a grid
table      rectangular CSV of a chosen quantity over t/x/y lists
simulate   Monte Carlo survival and binned-mass estimates
pde-solve  one finite-difference solve, full slice to CSV

Config files use ``key = value`` lines (``#`` starts a comment); flags
override file entries.  Recognized keys match the long flag names of the
``certify`` subcommand with dashes replaced by underscores, e.g.::

    mu = -0.5, 0.5, 1.0
    t_range = 1e-3:1e3:12
    x_offset_range = 1e-3:1e3:12
    y_offset_range = 1e-3:1e3:12
    a = 1.0
    seed = 0

Ranges are ``lo:hi:n`` geometric grids.  Offsets are measured above the
barrier, so ``x_offset_range = 1e-3:1e3:12`` spans x in (a+1e-3, a+1e3).

Every file the tool writes embeds a run manifest or is accompanied by a
sibling ``<name>.manifest.json`` recording the command, the full effective
configuration, the code version, seeds, and timestamps.  JSON output
carries numbers at 17 significant digits; human output rounds to 6.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys

import numpy as np

from . import certify, hunt, kernels, mc, pde

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("bkk")
except Exception:  # pragma: no cover - metadata is present in any install
    VERSION = "unknown"

_METHODS = ("auto", "closed", "hunt", "pde", "mc")
_QUANTITIES = ("p1", "p", "envelope", "ratio", "survival", "q")


class CliError(Exception):
    """Invalid arguments or configuration; maps to exit code 2."""


# -- manifest ----------------------------------------------------------------


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def build_manifest(command: str, config: dict, seeds) -> dict:
    return {
        "command": command,
        "config": config,
        "version": VERSION,
        "seeds": list(seeds),
        "started": _utcnow(),
        "finished": None,
    }


# -- number formatting -------------------------------------------------------


def _render_json(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits (exactly round-tripping)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [
            f"{inner}{json.dumps(str(k))}: {_render_json(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        rows = [f"{inner}{_render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("non-finite value in JSON output")
        return format(v, ".17g")
    return json.dumps(obj)


def _human(v: float) -> str:
    return format(float(v), ".6g")


# -- shared option handling ---------------------------------------------------


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        n = args.threads
    else:
        env = os.environ.get("BKK_THREADS", "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise CliError("BKK_THREADS must be an integer") from None
        else:
            n = os.cpu_count() or 1
    if n < 1:
        raise CliError("threads must be at least 1")
    return n


def _parse_range(text: str, name: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(f"{name} must look like lo:hi:n")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise CliError(f"{name} must look like lo:hi:n") from None
    if not (0 < lo <= hi) or n < 1:
        raise CliError(f"{name} needs 0 < lo <= hi and n >= 1")
    if n == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, n)


def _parse_float_list(text: str, name: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"{name} must be a comma-separated list of numbers") from None
    if not vals:
        raise CliError(f"{name} must not be empty")
    return vals


def _query_or_die(t, x, y, a) -> kernels.KernelQuery:
    try:
        return kernels.KernelQuery(t=t, x=x, y=y, a=a)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from None


def _check_mu_arg(mu: float) -> float:
    if not math.isfinite(mu) or mu == 0.0:
        raise CliError("mu must be nonzero")
    return float(mu)


# -- kernel evaluation routes -------------------------------------------------


def _pde_slice(mu, tu, xu, nodes=4000):
    cap = max(pde.default_domain_cap(mu, tu, xu), xu + 8.5 * math.sqrt(tu))
    solver = pde.KilledKernelSolver(mu, cap, pde.PdeConfig(nodes=nodes))
    return solver.solve(tu, xu)


def _eval_log_p1(mu, query, method, seed):
    """(log_p1, method_used, extras) in original coordinates."""
    reduced, log_jac = kernels.reduce_to_unit_barrier(mu, query)
    tu, xu, yu = reduced.t, reduced.x, reduced.y
    closed_ok = abs(mu) == 0.5

    if method == "auto":
        method = "closed" if closed_ok else "pde"

    if method == "closed":
        if not closed_ok:
            raise CliError("closed form requires mu equal to 1/2 or -1/2")
        val = kernels.log_half_killed_kernel(tu, xu, yu)
        if mu < 0:
            val += kernels.reflect_index(0.5, xu, yu)
        return float(val) + log_jac, "closed", {}

    if method == "hunt":
        if closed_ok:
            src = hunt.exact_half_source(xu)
            if mu < 0:
                # ruin weight x turns the upward source into the downward one
                src = hunt.HittingDensitySource(
                    kind="exact_half",
                    mu=mu,
                    x=xu,
                    log_density=lambda s: kernels.log_half_hitting_density(xu, s)
                    + math.log(xu),
                )
        else:
            src = pde.hitting_density_flux(mu, xu, max(tu * 1.05, tu + 1e-12))
        val = hunt.killed_kernel_via_hunt(mu, tu, xu, yu, src)
        return float(val) + log_jac, "hunt", {}

    if method == "pde":
        sl = _pde_slice(mu, tu, xu)
        return float(sl.interp_log(yu)) + log_jac, "pde", {}

    if method == "mc":
        w = min(0.2 * math.sqrt(tu), 0.5 * (yu - 1.0), 0.25 * yu)
        if w <= 0:
            raise CliError("y is too close to the barrier for an mc estimate")
        est = mc.simulate_killed_histogram(
            mu, xu, tu, [(yu - w / 2, yu + w / 2)],
            mc.McConfig(n_paths=200_000, seed=seed),
        )[0]
        if est.mean <= 0:
            raise CliError("mc estimate vanished; enlarge the window or paths")
        val = math.log(est.mean / w)
        return val + log_jac, "mc", {
            "mc_std_err": est.std_err / est.mean,
            "mc_paths": est.n,
        }

    raise CliError(f"unknown method {method!r}")


# -- eval ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    mu = _check_mu_arg(args.mu)
    query = _query_or_die(args.t, args.x, args.y, args.a)
    manifest = build_manifest(
        "eval",
        {
            "mu": mu, "t": query.t, "x": query.x, "y": query.y,
            "a": query.a, "method": args.method, "seed": args.seed,
        },
        [args.seed],
    )
    log_p1, used, extras = _eval_log_p1(mu, query, args.method, args.seed)
    log_p = float(kernels.log_free_kernel(mu, query.t, query.x, query.y))
    log_env = float(
        kernels.log_envelope(mu, query.t, query.x, query.y, query.a)
    )
    record = {
        "mu": mu, "t": query.t, "x": query.x, "y": query.y, "a": query.a,
        "log_p1": log_p1,
        "log_p": log_p,
        "log_envelope": log_env,
        "log_ratio": log_p1 - log_env,
        "method": used,
    }
    record.update(extras)
    manifest["finished"] = _utcnow()
    if args.json:
        print(_render_json({"manifest": manifest, "result": record}))
    else:
        for key in ("log_p1", "log_p", "log_envelope", "log_ratio"):
            print(f"{key} = {_human(record[key])}")
        print(f"method = {used}")
        for key in extras:
            print(f"{key} = {_human(record[key])}")
    return 0


# -- certify -------------------------------------------------------------------


_CONFIG_KEYS = (
    "mu", "t_range", "x_offset_range", "y_offset_range", "a",
    "seed", "threads", "pde_nodes", "format", "xchecks",
)


def _read_config_file(path: str) -> dict:
    cfg = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config line {lineno} is not key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise CliError(f"unknown config key {key!r}")
        cfg[key] = val
    return cfg


def _build_grid_spec(args) -> tuple[certify.GridSpec, dict]:
    cfg = _read_config_file(args.config) if args.config else {}
    # flags override file entries
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    defaults = certify.GridSpec()
    mu_list = tuple(
        _parse_float_list(cfg["mu"], "mu") if "mu" in cfg else defaults.mu_list
    )
    try:
        a = float(cfg.get("a", defaults.a))
    except ValueError:
        raise CliError("a must be a number") from None
    t_grid = (
        _parse_range(str(cfg["t_range"]), "t_range")
        if "t_range" in cfg
        else defaults.t_grid
    )
    if a <= 0:
        raise CliError("a must be positive")
    x_grid = (
        a + _parse_range(str(cfg["x_offset_range"]), "x_offset_range")
        if "x_offset_range" in cfg
        else a * np.asarray(defaults.x_grid)
    )
    y_grid = (
        a + _parse_range(str(cfg["y_offset_range"]), "y_offset_range")
        if "y_offset_range" in cfg
        else a * np.asarray(defaults.y_grid)
    )
    try:
        spec = certify.GridSpec(
            mu_list=mu_list, t_grid=tuple(map(float, t_grid)),
            x_grid=tuple(map(float, x_grid)), y_grid=tuple(map(float, y_grid)),
            a=a,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    try:
        seed = int(cfg.get("seed", 0))
        pde_nodes = int(cfg.get("pde_nodes", 4000))
    except ValueError:
        raise CliError("seed and pde_nodes must be integers") from None
    if pde_nodes < 256:
        raise CliError("pde_nodes must be at least 256")
    effective = {
        "mu": list(spec.mu_list), "a": spec.a,
        "t_grid": list(spec.t_grid),
        "x_grid": list(spec.x_grid), "y_grid": list(spec.y_grid),
        "seed": seed,
        "pde_nodes": pde_nodes,
        "format": str(cfg.get("format", "json")),
        "xchecks": str(cfg.get("xchecks", "on")),
    }
    if effective["format"] not in ("json", "csv"):
        raise CliError("format must be json or csv")
    if effective["xchecks"] not in ("on", "off"):
        raise CliError("xchecks must be on or off")
    return spec, effective


def cmd_certify(args) -> int:
    spec, cfg = _build_grid_spec(args)
    threads = _thread_count(args)
    cfg["threads"] = threads
    manifest = build_manifest("certify", cfg, [cfg["seed"]])
    tables = certify.build_tables(
        spec, pde_nodes=cfg["pde_nodes"], threads=threads
    )
    checks = certify.run_inequality_suite(
        spec, tables=tables, seed=cfg["seed"], threads=threads,
        include_xchecks=cfg["xchecks"] == "on",
    )
    envelope = certify.run_envelope_report(spec, tables=tables)
    report = certify.emit_report(checks, envelope, cfg["format"])
    manifest["finished"] = _utcnow()

    outdir = args.out_dir
    os.makedirs(outdir, exist_ok=True)
    ext = "json" if cfg["format"] == "json" else "csv"
    report_path = os.path.join(outdir, f"report.{ext}")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report)
    with open(
        os.path.join(outdir, "manifest.json"), "w", encoding="utf-8"
    ) as fh:
        fh.write(_render_json(manifest))
    failed = sum(r.cells_failed for r in checks)
    for r in checks:
        tag = "PASS" if r.passed else "FAIL"
        print(
            f"{tag} {r.check_id}: cells={r.cells_total} "
            f"failed={r.cells_failed} worst={_human(r.worst_margin)}"
        )
    for row in envelope.rows:
        print(
            f"envelope mu={_human(row.mu)}: cells={row.cells_used} "
            f"spread={_human(row.spread)}"
        )
    print(f"report written to {report_path}")
    return 1 if failed else 0


# -- table ---------------------------------------------------------------------


def _survival_closed_half(mu, tu, xu) -> float:
    # P(no passage) = 1 - x^(-2 mu) Phi-type mass; for |mu| = 1/2 the
    # hitting CDF is an error function of (x-1)/sqrt(t)
    z = (xu - 1.0) / math.sqrt(2.0 * tu)
    cdf_half = math.erfc(z) / xu
    if mu > 0:
        return 1.0 - cdf_half
    return 1.0 - xu * cdf_half


def _table_rows(mu, a, t_list, x_list, y_list, quantity, nodes):
    """Yield (header, rows). PDE work is grouped per (t, x)."""
    per_y = quantity in ("p1", "p", "envelope", "ratio")
    header = ["mu", "a", "t", "x"] + (["y"] if per_y else [])
    col = {
        "p1": "log_p1", "p": "log_p", "envelope": "log_envelope",
        "ratio": "log_ratio", "survival": "log_survival", "q": "log_q",
    }[quantity]
    header.append(col)
    closed_ok = abs(mu) == 0.5
    rows = []
    for t in t_list:
        for x in x_list:
            tu, xu = t / a**2, x / a
            sl = None
            if not closed_ok and quantity in ("p1", "ratio", "survival"):
                sl = _pde_slice(mu, tu, xu, nodes=nodes)
            if quantity == "survival":
                if closed_ok:
                    surv = _survival_closed_half(mu, tu, xu)
                    val = math.log(surv) if surv > 0 else -math.inf
                else:
                    val = sl.log_survival()
                rows.append([mu, a, t, x, val])
                continue
            if quantity == "q":
                if closed_ok:
                    val = float(kernels.log_half_hitting_density(xu, tu))
                    if mu < 0:
                        val += math.log(xu)
                else:
                    src = pde.hitting_density_flux(
                        mu, xu, tu * 1.05, pde.PdeConfig(nodes=nodes)
                    )
                    val = float(src.log_q(np.array([tu]))[0])
                # unit-time hitting density scales by a^2
                rows.append([mu, a, t, x, val - 2.0 * math.log(a)])
                continue
            for y in y_list:
                query = _query_or_die(t, x, y, a)
                yu = query.y / a
                if quantity == "p":
                    val = float(kernels.log_free_kernel(mu, t, x, y))
                elif quantity == "envelope":
                    val = float(kernels.log_envelope(mu, t, x, y, a))
                else:
                    if closed_ok:
                        lp1 = float(kernels.log_half_killed_kernel(tu, xu, yu))
                        if mu < 0:
                            lp1 += float(kernels.reflect_index(0.5, xu, yu))
                    else:
                        lp1 = float(sl.interp_log(yu))
                    lp1 -= math.log(a)
                    if quantity == "p1":
                        val = lp1
                    else:
                        val = lp1 - float(
                            kernels.log_envelope(mu, t, x, y, a)
                        )
                rows.append([mu, a, t, x, y, val])
    return header, rows


def cmd_table(args) -> int:
    mu = _check_mu_arg(args.mu)
    if args.a <= 0:
        raise CliError("a must be positive")
    t_list = _parse_float_list(args.t_list, "t-list")
    x_list = _parse_float_list(args.x_list, "x-list")
    y_list = (
        _parse_float_list(args.y_list, "y-list") if args.y_list else []
    )
    if any(t <= 0 for t in t_list):
        raise CliError("t must be positive")
    if any(x <= args.a for x in x_list):
        raise CliError("x must exceed a")
    if any(y <= args.a for y in y_list):
        raise CliError("y must exceed a")
    if args.quantity in ("p1", "p", "envelope", "ratio") and not y_list:
        raise CliError(f"quantity {args.quantity} needs --y-list")
    manifest = build_manifest(
        "table",
        {
            "mu": mu, "a": args.a, "t_list": t_list, "x_list": x_list,
            "y_list": y_list, "quantity": args.quantity,
            "pde_nodes": args.pde_nodes,
        },
        [],
    )
    header, rows = _table_rows(
        mu, args.a, t_list, x_list, y_list, args.quantity, args.pde_nodes
    )
    manifest["finished"] = _utcnow()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(v, ".17g") if isinstance(v, float) else v
                         for v in row])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(_render_json(manifest))
        print(f"{len(rows)} rows written to {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# -- simulate --------------------------------------------------------------------


def cmd_simulate(args) -> int:
    mu = _check_mu_arg(args.mu)
    if args.a <= 0:
        raise CliError("a must be positive")
    if args.t <= 0:
        raise CliError("t must be positive")
    if args.x <= args.a:
        raise CliError("x must exceed a")
    tu, xu = args.t / args.a**2, args.x / args.a
    try:
        cfg = mc.McConfig(
            n_paths=args.n_paths, seed=args.seed,
            dt=args.dt / args.a**2 if args.dt else None,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    manifest = build_manifest(
        "simulate",
        {
            "mu": mu, "t": args.t, "x": args.x, "a": args.a,
            "n_paths": args.n_paths, "dt": args.dt, "seed": args.seed,
            "bins": args.bins,
        },
        [args.seed],
    )
    try:
        surv = mc.simulate_survival(mu, xu, tu, cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    result = {
        "survival_mean": surv.mean,
        "survival_std_err": surv.std_err,
        "n_paths": surv.n,
    }
    if args.bins:
        edges = a_edges = _parse_range(args.bins, "bins")
        if a_edges[0] <= args.a:
            raise CliError("bins must lie above a")
        pairs = [
            (edges[i] / args.a, edges[i + 1] / args.a)
            for i in range(len(edges) - 1)
        ]
        ests = mc.simulate_killed_histogram(mu, xu, tu, pairs, cfg)
        result["bins"] = [
            {
                "y_lo": float(edges[i]), "y_hi": float(edges[i + 1]),
                "mass": est.mean, "std_err": est.std_err,
            }
            for i, est in enumerate(ests)
        ]
    manifest["finished"] = _utcnow()
    if args.json:
        print(_render_json({"manifest": manifest, "result": result}))
    else:
        print(f"survival = {_human(surv.mean)} +/- {_human(surv.std_err)}")
        print(f"n_paths = {surv.n}")
        for rec in result.get("bins", []):
            print(
                f"bin ({_human(rec['y_lo'])}, {_human(rec['y_hi'])}] "
                f"mass = {_human(rec['mass'])} +/- {_human(rec['std_err'])}"
            )
    return 0


# -- pde-solve --------------------------------------------------------------------


def cmd_pde_solve(args) -> int:
    mu = _check_mu_arg(args.mu)
    if args.a <= 0:
        raise CliError("a must be positive")
    if args.t <= 0:
        raise CliError("t must be positive")
    if args.x <= args.a:
        raise CliError("x must exceed a")
    tu, xu = args.t / args.a**2, args.x / args.a
    cap = args.cap or max(
        pde.default_domain_cap(mu, tu, xu), xu + 8.5 * math.sqrt(tu)
    )
    if cap <= xu:
        raise CliError("cap must exceed x/a")
    manifest = build_manifest(
        "pde-solve",
        {
            "mu": mu, "t": args.t, "x": args.x, "a": args.a,
            "nodes": args.nodes, "cap": cap,
        },
        [],
    )
    try:
        solver = pde.KilledKernelSolver(
            mu, cap, pde.PdeConfig(nodes=args.nodes)
        )
        sl = solver.solve(tu, xu)
    except (pde.DomainTooSmall, pde.StabilityFailure, ValueError) as exc:
        raise CliError(str(exc)) from None
    manifest["finished"] = _utcnow()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["y", "log_p1"])
    log_jac = -math.log(args.a)
    for yv, lv in zip(sl.y, sl.log_values):
        if yv <= sl.y[0]:
            continue
        val = lv + log_jac if math.isfinite(lv) else -math.inf
        writer.writerow(
            [format(yv * args.a, ".17g"),
             format(val, ".17g") if math.isfinite(val) else "-inf"]
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(_render_json(manifest))
        print(f"slice written to {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# -- parser ---------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: BKK_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bkk",
        description="Killed-kernel evaluation, certification, and simulation",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_eval = sub.add_parser("eval", help="evaluate one kernel point")
    p_eval.add_argument("--mu", type=float, required=True)
    p_eval.add_argument("--t", type=float, required=True)
    p_eval.add_argument("--x", type=float, required=True)
    p_eval.add_argument("--y", type=float, required=True)
    p_eval.add_argument("--a", type=float, default=1.0)
    p_eval.add_argument("--method", choices=_METHODS, default="auto")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--json", action="store_true")
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_cert = sub.add_parser("certify", help="run the inequality suite")
    p_cert.add_argument("--config", default=None,
                        help="key = value file; flags override")
    p_cert.add_argument("--out-dir", default="certify-out")
    p_cert.add_argument("--mu", default=None,
                        help="comma-separated index list")
    p_cert.add_argument("--t-range", dest="t_range", default=None,
                        metavar="LO:HI:N")
    p_cert.add_argument("--x-offset-range", dest="x_offset_range",
                        default=None, metavar="LO:HI:N")
    p_cert.add_argument("--y-offset-range", dest="y_offset_range",
                        default=None, metavar="LO:HI:N")
    p_cert.add_argument("--a", default=None)
    p_cert.add_argument("--seed", default=None)
    p_cert.add_argument("--pde-nodes", dest="pde_nodes", default=None)
    p_cert.add_argument("--format", choices=("json", "csv"), default=None)
    p_cert.add_argument("--xchecks", choices=("on", "off"), default=None)
    _add_common(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_tab = sub.add_parser("table", help="rectangular CSV of one quantity")
    p_tab.add_argument("--mu", type=float, required=True)
    p_tab.add_argument("--a", type=float, default=1.0)
    p_tab.add_argument("--t-list", dest="t_list", required=True)
    p_tab.add_argument("--x-list", dest="x_list", required=True)
    p_tab.add_argument("--y-list", dest="y_list", default=None)
    p_tab.add_argument("--quantity", choices=_QUANTITIES, required=True)
    p_tab.add_argument("--pde-nodes", dest="pde_nodes", type=int,
                       default=4000)
    p_tab.add_argument("--out", default=None)
    _add_common(p_tab)
    p_tab.set_defaults(func=cmd_table)

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimates")
    p_sim.add_argument("--mu", type=float, required=True)
    p_sim.add_argument("--t", type=float, required=True)
    p_sim.add_argument("--x", type=float, required=True)
    p_sim.add_argument("--a", type=float, default=1.0)
    p_sim.add_argument("--n-paths", dest="n_paths", type=int,
                       default=1_000_000)
    p_sim.add_argument("--dt", type=float, default=None)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--bins", default=None, metavar="LO:HI:N",
                       help="geometric bin edges for landing-mass estimates")
    p_sim.add_argument("--json", action="store_true")
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_pde = sub.add_parser("pde-solve", help="one finite-difference slice")
    p_pde.add_argument("--mu", type=float, required=True)
    p_pde.add_argument("--t", type=float, required=True)
    p_pde.add_argument("--x", type=float, required=True)
    p_pde.add_argument("--a", type=float, default=1.0)
    p_pde.add_argument("--nodes", type=int, default=4000)
    p_pde.add_argument("--cap", type=float, default=None)
    p_pde.add_argument("--out", default=None)
    _add_common(p_pde)
    p_pde.set_defaults(func=cmd_pde_solve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        hunt.ConvergenceFailure,
        hunt.NegativeDensity,
        pde.DomainTooSmall,
        pde.StabilityFailure,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:  # pragma: no cover - interactive plumbing
        return 0


if __name__ == "__main__":
    sys.exit(main())
