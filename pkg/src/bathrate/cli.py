"""``bathrate`` command line: rate sweeps, kernel dumps, oracle runs, Gamma2 matching.

Exit status is 0 on success, 1 when every requested computation failed and
2 for configuration errors.  CSV bodies depend only on the configuration and
seeds; the run manifest carries the timestamp.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels, oracle_ed, presets, rates, spectral, stochastic
from .config import build_config, load_config
from .errors import BathrateError, ConfigError

WORKERS_ENV = "BATHRATE_WORKERS"

OVERRIDES = [
    ("delta", float, "tunnelling element"),
    ("xi0", float, "fluctuation width / bath cutoff"),
    ("gamma2", float, "spin-bath Gamma2 (>= xi0)"),
    ("alpha", float, "ohmic coupling"),
    ("temperature", float, "bath temperature"),
    ("preset", str, "SMM preset supplying delta and xi0"),
    ("xi_min", float, "first bias value"),
    ("xi_max", float, "last bias value"),
    ("xi_count", int, "number of bias values"),
    ("xi_spacing", str, "linear or log"),
    ("methods", str, "comma-separated rate methods"),
    ("highfreq", str, "'matched' adds the Gamma2-matched J' to numeric baths"),
    ("seed", int, "stochastic seed"),
    ("seeds", int, "number of central-spin coupling seeds"),
    ("n_modes", int, "oscillator modes for the ED oracle"),
    ("n_max", int, "Fock levels per mode"),
    ("n_spins", int, "bath spins for the central-spin oracle"),
    ("eta", float, "transverse/longitudinal ratio of bath-spin couplings"),
    ("n_realizations", int, "noise realizations"),
]


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_workers(flag):
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError([f"{WORKERS_ENV}: not an integer: {env!r}"]) from None
    return 1


def _config_from_args(args):
    overrides = {name: getattr(args, name) for name, _, _ in OVERRIDES}
    overrides["unit"] = args.unit
    if getattr(args, "compare", False):
        overrides["compare"] = True
    if args.out is not None:
        overrides["output"] = args.out
    if args.config:
        return load_config(args.config, overrides)
    return build_config({}, overrides)


def _manifest(command, cfg, workers, extra):
    doc = {
        "schema_version": 1,
        "artifact_version": __version__,
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "workers": workers,
        "config": cfg.to_dict() if cfg is not None else None,
        "tolerances": {"rate_epsrel": rates.RATE_EPSREL, "rate_epsabs": rates.RATE_EPSABS,
                       "kernel_epsrel": kernels.KERNEL_EPSREL,
                       "kernel_epsabs": kernels.KERNEL_EPSABS,
                       "spectral_epsrel": spectral.QUAD_EPSREL,
                       "spectral_epsabs": spectral.QUAD_EPSABS},
    }
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"


def _fmt(x):
    return rates.fmt(x)


# ------------------------------------------------------------------ rates

def compare_table(curves):
    """xi, one gamma column per method, pairwise relative errors, pi/2 ratio."""
    methods = list(curves)
    xi = curves[methods[0]].xi
    cols = {f"gamma_{m}": curves[m].gamma for m in methods}
    for a, b in itertools.combinations(methods, 2):
        ga, gb = curves[a].gamma, curves[b].gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            cols[f"relerr_{a}_vs_{b}"] = np.abs(ga - gb) / np.abs(gb)
    spin = next((m for m in (rates.SPIN_BATH_EQ9, rates.SPIN_BATH_EQ10) if m in curves), None)
    if rates.ANALYTIC in curves and spin is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            cols[f"ratio_{rates.ANALYTIC}_over_{spin}"] = (curves[rates.ANALYTIC].gamma
                                                           / curves[spin].gamma)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi"] + list(cols))
    for i, x in enumerate(xi):
        w.writerow([_fmt(x)] + [_fmt(v[i]) for v in cols.values()])
    return buf.getvalue(), cols


def cmd_rates(args, cfg, workers):
    out = Path(cfg.output)
    ctx = cfg.context()
    grid = cfg.xi_grid()
    curves, status = {}, {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            curve = rates.rate_sweep(cfg.params, grid, method, ctx, workers=workers)
        except BathrateError as exc:
            status[method] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            print(f"{method}: failed: {exc}", file=sys.stderr)
            continue
        fname = f"rates_{method}.csv"
        write_atomic(out / fname, curve.to_csv())
        failures = [{"xi": p.xi, "error": p.error} for p in curve.failures]
        ok = len(curve.points) - len(failures)
        status[method] = {"status": "ok" if ok or not curve.points else "failed",
                          "file": fname, "points": len(curve.points),
                          "failed_points": failures,
                          "seconds": round(time.perf_counter() - t0, 3)}
        curves[method] = curve
        print(f"{method}: {ok}/{len(curve.points)} points -> {out / fname}")
    extra = {"methods": status, "xi_grid": [float(x) for x in grid],
             "unit": cfg.unit, "bath": ctx.bath().describe()}
    if cfg.compare and len(curves) >= 1:
        text, cols = compare_table(curves)
        write_atomic(out / "compare.csv", text)
        extra["compare"] = {"file": "compare.csv",
                            "max": {k: _nanmax(v) for k, v in cols.items()
                                    if not k.startswith("gamma_")}}
        for k, v in extra["compare"]["max"].items():
            print(f"max {k}: {v:.3e}")
    write_atomic(out / "manifest.json", _manifest("rates", cfg, workers, extra))
    return 0 if any(s["status"] == "ok" for s in status.values()) else 1


def _nanmax(v):
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    return float(v.max()) if len(v) else math.nan


# ---------------------------------------------------------------- kernels

def cmd_kernels(args, cfg, workers):
    out = Path(cfg.output)
    mode = None if args.mode == "auto" else args.mode
    spec = cfg.sweep_bath()
    k = (kernels.BathKernels.for_spec(spec, cfg.temperature) if mode is None
         else kernels.BathKernels(spec, cfg.temperature, mode))
    times = np.geomspace(args.t_min / cfg.xi0, args.t_max / cfg.xi0, args.t_count)
    table = kernels.kernel_table(k, times)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "q1", "q2", "coherence"])
    for row in table:
        w.writerow([_fmt(x) for x in row])
    write_atomic(out / "kernels.csv", buf.getvalue())
    extra = {"kernels": k.describe(), "times": {"min": args.t_min, "max": args.t_max,
                                                 "count": args.t_count, "spacing": "log",
                                                 "in_units_of": "1/xi0"}}
    write_atomic(out / "manifest.json", _manifest("kernels", cfg, workers, extra))
    print(f"kernels: {len(times)} rows -> {out / 'kernels.csv'}")
    return 0


# --------------------------------------------------------------- validate

def cmd_validate(args, cfg, workers):
    out = Path(cfg.output)
    rows, status = [], {}
    grid = cfg.xi_grid()
    suites = ("ed", "stochastic") if args.suite == "all" else (args.suite,)
    gr = rates.analytic_rate
    for xi in grid:
        p = cfg.params.with_xi(xi)
        ref = {"analytic": gr(p, cfg.xi0), "spin_bath": rates.spin_bath_rate(
            rates.TwoLevelParams(p.delta, p.xi), cfg.xi0)}
        if "ed" in suites:
            try:
                sa = oracle_ed.central_spin_rate(p, cfg.xi0, n_spins=cfg.n_spins,
                                                 seeds=range(cfg.seeds), eta=cfg.eta)
                rows.append((xi, "central-spin", sa.rate, sa.ci[0], sa.ci[1], ref, ""))
            except BathrateError as exc:
                rows.append((xi, "central-spin", None, None, None, ref, str(exc)))
        if "stochastic" in suites:
            try:
                m = stochastic.NoiseModel(cfg.xi0, cfg.dt or 0.1 / cfg.xi0, cfg.seed)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    res = stochastic.measure_rate(p, m, cfg.n_realizations, workers=workers)
                rows.append((xi, "stochastic", res.rate, res.ci[0], res.ci[1], ref, ""))
            except BathrateError as exc:
                rows.append((xi, "stochastic", None, None, None, ref, str(exc)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi", "suite", "gamma", "ci_lo", "ci_hi", "analytic_eq26", "spin_bath_eq9",
                "error"])
    for xi, suite, g, lo, hi, ref, err in rows:
        w.writerow([_fmt(xi), suite, _fmt(g), _fmt(lo), _fmt(hi), _fmt(ref["analytic"]),
                    _fmt(ref["spin_bath"]), err])
        status.setdefault(suite, {"ok": 0, "failed": 0})
        status[suite]["ok" if g is not None else "failed"] += 1
    write_atomic(out / "validate.csv", buf.getvalue())
    write_atomic(out / "manifest.json", _manifest("validate", cfg, workers, {"suites": status}))
    for suite, s in status.items():
        print(f"{suite}: {s['ok']} ok, {s['failed']} failed")
    return 0 if any(s["ok"] for s in status.values()) else 1


# ------------------------------------------------------------------- match

def cmd_match(args, cfg, workers):
    p = cfg.params
    if p.gamma2 is None:
        raise ConfigError(["gamma2: required for match"])
    jp = rates.match_gamma2(p.delta, cfg.xi0, p.gamma2)
    d_eff = rates.delta_eff(p.delta, jp)
    doc = {
        "highfreq": jp.describe(),
        "dressing_integral": rates.dressing_integral(jp),
        "delta": p.delta,
        "delta_eff": d_eff,
        "gamma_xi0_renormalized": rates.renormalized_rate(p, cfg.xi0, d_eff),
        "gamma_xi0_target": math.pi / 2 * rates.spin_bath_rate(p, cfg.xi0),
        "unit": cfg.unit,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out is not None:
        write_atomic(Path(cfg.output) / "match.json", text)
    sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- presets

def cmd_presets(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["name", "S", "D_K", "E_K", "delta", "xi0", "notes"])
    for pr in presets.PRESETS.values():
        r = pr.row()
        w.writerow([r["name"], r["S"], r["D_K"], r["E_K"], r["delta"], r["xi0"], r["notes"]])
    return 0


# -------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(prog="bathrate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value or JSON run configuration")
        sp.add_argument("--unit", choices=sorted(presets.UNITS), default=None,
                        help="working energy unit (default K)")
        sp.add_argument("--workers", type=int, default=None,
                        help=f"parallel workers (default ${WORKERS_ENV} or 1)")
        sp.add_argument("--out", default=None, help="output directory")
        for name, typ, text in OVERRIDES:
            sp.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, help=text)

    sp = sub.add_parser("rates", help="rate sweeps over the bias grid")
    common(sp)
    sp.add_argument("--compare", action="store_true",
                    help="also write relative-error and ratio columns")
    sp = sub.add_parser("kernels", help="dump Q1, Q2 and the coherence factor")
    common(sp)
    sp.add_argument("--t-min", type=float, default=1e-3, help="in units of 1/xi0")
    sp.add_argument("--t-max", type=float, default=20.0, help="in units of 1/xi0")
    sp.add_argument("--t-count", type=int, default=32)
    sp.add_argument("--mode", choices=["auto", kernels.ANALYTIC, kernels.NUMERIC],
                    default="auto")
    sp = sub.add_parser("validate", help="exact-diagonalization and stochastic oracles")
    common(sp)
    sp.add_argument("--suite", choices=["all", "ed", "stochastic"], default="all")
    sp = sub.add_parser("match", help="solve for the high-frequency bath matching Gamma2")
    common(sp)
    sub.add_parser("presets", help="list single-molecule-magnet presets")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "presets":
        return cmd_presets(args)
    try:
        if getattr(args, "methods", None):
            args.methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        workers = resolve_workers(args.workers)
        cfg = _config_from_args(args)
        handler = {"rates": cmd_rates, "kernels": cmd_kernels, "validate": cmd_validate,
                   "match": cmd_match}[args.command]
        return handler(args, cfg, workers)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return 2
    except BathrateError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
