"""Command line entry point.

Subcommands:
  simulate  run a domain-wall Monte Carlo ensemble, write profile CSVs
  predict   solve the hydrodynamic plateau structure, write a JSON table
  tba       solve generalized Gibbs thermodynamics, write a JSON solution
  compare   score a simulation directory against a prediction file

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 comparison failure.  Output files are written atomically (temp file
plus rename) and every file embeds the full configuration and seed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, ghd, tba
from .ensemble import (
    ProfileAccumulator,
    Protocol,
    fit_step,
    measure_soliton_density,
    run_trajectory,
    sample_initial,
)

CSV_SCHEMA = "# bbs-csv v1"


# ---------------------------------------------------------------------------
# plumbing


def _write_atomic(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _density(p_value, z_value, name: str) -> float:
    """Accept a density p or a fugacity z (converted via p = z/(1+z))."""
    if p_value is not None and z_value is not None:
        raise ValueError(f"give either --p{name} or --z{name}, not both")
    if z_value is not None:
        if z_value < 0:
            raise ValueError("fugacities must be nonnegative")
        return z_value / (1.0 + z_value)
    return 0.0 if p_value is None else float(p_value)


def _metadata(args: argparse.Namespace, extra: dict | None = None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    meta = {
        "schema": CSV_SCHEMA.lstrip("# "),
        "bbs_version": __version__,
        "numpy_version": np.__version__,
        "config": config,
        "wall_clock_s": None,  # filled in just before writing
    }
    if extra:
        meta.update(extra)
    return meta


def _parse_times(text: str):
    times = tuple(int(t) for t in text.split(","))
    if not times:
        raise ValueError("need at least one snapshot time")
    return times


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("BBS_THREADS", "1"))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    p_left = _density(args.pL, args.zL, "L")
    p_right = _density(args.pR, args.zR, "R")
    protocol = Protocol(
        L=args.L,
        l=args.l,
        p_left=p_left,
        p_right=p_right,
        times=_parse_times(args.t),
        n_samples=args.samples,
        seed=args.seed,
        window=args.window,
        stride=args.stride,
        threads=_threads(args),
    )
    t0 = time.monotonic()

    nt = len(protocol.times)
    starts = np.arange(0, protocol.L - protocol.window + 1, protocol.stride)
    jmax = args.jmax if args.jmax is not None else protocol.l
    rho_sum = np.zeros((nt, starts.size, jmax))
    rho_sumsq = np.zeros_like(rho_sum)
    acc = ProfileAccumulator(protocol)
    centers = None

    def one(k):
        snaps = run_trajectory(sample_initial(protocol, k), protocol)
        rhos = np.empty_like(rho_sum[0])[None].repeat(nt, axis=0)
        cts = None
        for ti, cells in enumerate(snaps):
            cts, rhos[ti] = measure_soliton_density(
                cells, jmax, protocol.window, protocol.stride
            )
        return snaps, cts, rhos

    def fold(result):
        nonlocal centers
        snaps, cts, rhos = result
        centers = cts
        acc.add_sample(snaps)
        rho_sum[:] += rhos
        rho_sumsq[:] += rhos * rhos

    if protocol.threads > 1:
        with ThreadPoolExecutor(max_workers=protocol.threads) as pool:
            for result in pool.map(one, range(protocol.n_samples)):
                fold(result)
    else:
        for k in range(protocol.n_samples):
            fold(one(k))

    N = protocol.n_samples
    prof = io.StringIO()
    prof.write(CSV_SCHEMA + "\n")
    prof.write("t,r,zeta,h_mean,h_stderr\n")
    for ti, t in enumerate(protocol.times):
        zeta, h, err = acc.ball_density(ti)
        r = zeta * max(t, 1)
        for rj, zj, hj, ej in zip(r, zeta, h, err):
            prof.write(f"{t},{rj:.1f},{zj:.10g},{hj:.10g},{ej:.10g}\n")

    sol = io.StringIO()
    sol.write(CSV_SCHEMA + "\n")
    sol.write("t,window_center,j,rho_mean,rho_stderr\n")
    r_centers = centers - protocol.wall_index
    mean = rho_sum / N
    var = rho_sumsq / N - mean**2
    stderr = np.sqrt(np.maximum(var, 0.0) / max(N - 1, 1))
    for ti, t in enumerate(protocol.times):
        for wi, rc in enumerate(r_centers):
            for j in range(1, jmax + 1):
                sol.write(
                    f"{t},{rc:.1f},{j},{mean[ti, wi, j - 1]:.10g},"
                    f"{stderr[ti, wi, j - 1]:.10g}\n"
                )

    meta = _metadata(args, {
        "p_left": p_left,
        "p_right": p_right,
        "z_left": ghd.fugacity_from_density(p_left),
        "z_right": ghd.fugacity_from_density(p_right),
        "l": protocol.l,
        "times": list(protocol.times),
        "seed": protocol.seed,
        "n_samples": N,
        "files": {"profile": "profile.csv", "solitons": "solitons.csv"},
    })
    meta["wall_clock_s"] = round(time.monotonic() - t0, 3)

    os.makedirs(args.out, exist_ok=True)
    _write_atomic(os.path.join(args.out, "profile.csv"), prof.getvalue())
    _write_atomic(os.path.join(args.out, "solitons.csv"), sol.getvalue())
    _write_atomic(os.path.join(args.out, "metadata.json"),
                  json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {N} samples to {args.out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# predict


def cmd_predict(args) -> int:
    p_left = _density(args.pL, args.zL, "L")
    p_right = _density(args.pR, args.zR, "R")
    l = args.l
    t0 = time.monotonic()

    if p_left == p_right:
        # flat profile: a single plateau at the common density
        rows = [{"k": 0, "zeta": None, "h": p_left, "Sigma": None}]
        payload = {"sectors": rows, "closed_form": None, "profiles": {}}
    else:
        solution = ghd.solve_domain_wall(p_left, p_right, l)
        heights = solution.heights
        closed = None
        if p_right == 0:
            closed = "right-empty"
        elif p_left == 0:
            closed = "left-empty"
        rows = [{"k": 0, "zeta": None, "h": float(heights[0]), "Sigma": None}]
        for k in range(1, l + 1):
            row = {
                "k": k,
                "zeta": float(solution.zetas[k - 1]),
                "h": float(heights[k]),
                "Sigma": ghd.step_width(solution, k),
            }
            if closed == "right-empty":
                z = ghd.fugacity_from_density(p_left)
                row["zeta_closed"] = ghd.plateau_position_left(z, l, k)
                row["h_closed"] = ghd.plateau_height_left(z, k)
                row["Sigma_closed"] = ghd.step_width_left_closed(z, l, k)
            elif closed == "left-empty":
                z = ghd.fugacity_from_density(p_right)
                row["zeta_closed"] = ghd.plateau_position_right(z, k)
                row["h_closed"] = ghd.plateau_height_right(z, l, k)
            rows.append(row)

        profiles = {}
        for t in (_parse_times(args.t) if args.t else ()):
            lo = solution.zetas[0] * t - 12 * math.sqrt(max(t, 1))
            hi = solution.zetas[-1] * t + 12 * math.sqrt(max(t, 1))
            r = np.linspace(lo, hi, 512)
            h = np.full(r.size, heights[l])
            for k in range(1, l + 1):
                h += ghd.step_profile(
                    r, float(max(t, 1)), float(solution.zetas[k - 1]),
                    rows[k]["Sigma"], float(heights[k - 1]), float(heights[k])
                ) - heights[k]
            profiles[str(t)] = {"r": r.tolist(), "h": h.tolist()}
        payload = {"sectors": rows, "closed_form": closed,
                   "profiles": profiles}

    meta = _metadata(args, {
        "p_left": p_left, "p_right": p_right, "l": l,
        "z_left": ghd.fugacity_from_density(p_left),
        "z_right": ghd.fugacity_from_density(p_right),
    })
    meta["wall_clock_s"] = round(time.monotonic() - t0, 3)
    payload["metadata"] = meta
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# tba


def cmd_tba(args) -> int:
    t0 = time.monotonic()
    payload: dict
    if args.degree is not None:
        if not args.betas:
            raise ValueError("series mode needs --betas")
        betas = [float(b) for b in args.betas.split(",")]
        s = len(betas)
        w = tba.fugacity_weights(betas)
        q1 = tba.evaluate_series(tba.q_power_series((1,), s, args.degree), w)
        log_q1 = tba.evaluate_series(tba.log_q1_series(s, args.degree), w)
        rho = [tba.evaluate_series(tba.rho_series(i, s, args.degree), w)
               for i in range(1, s)]
        payload = {"mode": "series", "degree": args.degree, "Q1": q1,
                   "F": -log_q1, "rho": rho}
    elif args.a is not None or args.z is not None:
        if args.a is None or args.z is None:
            raise ValueError("closed-form mode needs both --a and --z")
        gge = tba.TwoTemperatureGGE(args.a, args.z)
        s = args.s
        idx = range(1, s + 1)
        payload = {
            "mode": "closed-form",
            "Y": [math.exp(gge.log_y(i)) for i in idx],
            "rho": [gge.soliton_density(i) for i in idx],
            "sigma": [gge.hole_density(i) for i in idx],
            "epsilon": [gge.energy_density(i) for i in idx],
            "F": gge.free_energy,
            "ball_density": gge.ball_density,
        }
    else:
        if not args.betas:
            raise ValueError("give --betas, or --a and --z")
        betas = [float(b) for b in args.betas.split(",")]
        log_y = tba.solve_y_system(betas)
        resid = tba.y_system_residual(betas, log_y)
        if resid > 1e-10:
            raise RuntimeError(f"Y-system did not converge: residual {resid}")
        y = np.exp(log_y)
        rho = tba.densities_from_y(log_y)
        j = np.arange(1, len(betas) + 1)
        eps = np.minimum.outer(j, j) @ rho
        payload = {
            "mode": "solver",
            "Y": y.tolist(),
            "rho": rho.tolist(),
            "sigma": (rho * y).tolist(),
            "epsilon": eps.tolist(),
            "F": tba.free_energy_from_y(log_y),
            "residual": float(resid),
        }

    meta = _metadata(args)
    meta["wall_clock_s"] = round(time.monotonic() - t0, 3)
    payload["metadata"] = meta
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# compare


def _read_csv(path: str):
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_SCHEMA:
            raise ValueError(f"{path}: unknown CSV schema {header!r}")
        names = f.readline().strip().split(",")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}


def cmd_compare(args) -> int:
    meta_path = os.path.join(args.sim, "metadata.json")
    if not os.path.exists(meta_path):
        raise ValueError(f"{args.sim} has no metadata.json; refusing to compare")
    with open(meta_path) as f:
        sim_meta = json.load(f)
    with open(args.prediction) as f:
        pred = json.load(f)
    if "metadata" not in pred or "sectors" not in pred:
        raise ValueError(f"{args.prediction} lacks metadata; refusing to compare")
    pm = pred["metadata"]
    for key in ("l", "p_left", "p_right"):
        if not math.isclose(float(sim_meta[key]), float(pm[key]),
                            abs_tol=1e-12):
            raise ValueError(
                f"mismatched {key}: simulation {sim_meta[key]} vs "
                f"prediction {pm[key]}"
            )

    prof = _read_csv(os.path.join(args.sim, "profile.csv"))
    sectors = sorted(pred["sectors"], key=lambda s: s["k"])
    zetas = [s["zeta"] for s in sectors if s["zeta"] is not None]
    heights = [s["h"] for s in sectors]
    widths = [s["Sigma"] for s in sectors if s["Sigma"] is not None]

    report = {"plateaus": [], "steps": [], "pass": True}
    times = sorted(set(int(t) for t in prof["t"]))
    for t in times:
        sel = prof["t"] == t
        zeta = prof["zeta"][sel]
        h = prof["h_mean"][sel]
        err = prof["h_stderr"][sel]
        for k in range(len(heights)):
            pad = args.margin / max(t, 1)
            if not zetas:  # flat profile: one plateau covering everything
                inside = np.ones(zeta.size, bool)
            else:
                lo = -np.inf if k == 0 else zetas[k - 1]
                hi = np.inf if k == len(zetas) else zetas[k]
                # keep a finite window on the outer plateaus
                lo_w = (zetas[0] - 4.0) if k == 0 else lo + pad
                hi_w = (zetas[-1] + 4.0) if k == len(zetas) else hi - pad
                inside = (zeta > lo_w) & (zeta < hi_w)
            if not np.any(inside):
                continue
            m = float(h[inside].mean())
            se = float(np.sqrt(np.sum(err[inside] ** 2)) / inside.sum())
            zscore = 0.0 if se == 0 and m == heights[k] else (
                (m - heights[k]) / se if se > 0 else math.inf
            )
            ok = abs(zscore) < 3.0
            report["plateaus"].append({
                "t": t, "k": k, "h_pred": heights[k], "h_sim": m,
                "stderr": se, "z": zscore, "pass": ok,
            })
            report["pass"] = report["pass"] and ok

        for k in range(1, len(zetas) + 1):
            sigma = widths[k - 1]
            if sigma is None or sigma <= 0:
                continue
            if abs(heights[k - 1] - heights[k]) < 1e-12:
                continue
            u = (zeta - zetas[k - 1]) * math.sqrt(max(t, 1))
            near = np.abs(u) < max(6 * sigma, 4.0)
            if near.sum() < 4:
                continue
            try:
                fit = fit_step(u[near], h[near], heights[k - 1], heights[k])
            except (ValueError, RuntimeError):
                continue
            report["steps"].append({
                "t": t, "k": k,
                "A_fit": fit.inverse_width,
                "A_pred": 1.0 / (sigma * math.sqrt(2.0)),
                "Sigma_fit": fit.width,
                "Sigma_pred": sigma,
            })

    report["metadata"] = {"sim": sim_meta, "prediction": pm}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    n_bad = sum(not p["pass"] for p in report["plateaus"])
    print(
        f"{len(report['plateaus'])} plateau checks, {n_bad} failing; "
        f"{len(report['steps'])} step-width fits",
        file=sys.stderr,
    )
    return 0 if report["pass"] else 4


# ---------------------------------------------------------------------------
# argument parsing


def _add_density_flags(p):
    p.add_argument("--pL", type=float, help="left ball density in [0, 1/2)")
    p.add_argument("--zL", type=float, help="left fugacity, p = z/(1+z)")
    p.add_argument("--pR", type=float, help="right ball density in [0, 1/2)")
    p.add_argument("--zR", type=float, help="right fugacity, p = z/(1+z)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbs", description="box-ball system laboratory"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo ensemble")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    _add_density_flags(p)
    p.add_argument("--t", required=True, help="comma list of snapshot times")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--window", type=int, default=256)
    p.add_argument("--stride", type=int, default=64)
    p.add_argument("--jmax", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="hydrodynamic plateau table")
    p.add_argument("--l", type=int, required=True)
    _add_density_flags(p)
    p.add_argument("--t", default=None, help="times for sampled profile curves")
    p.add_argument("--out", default=None, help="output JSON path (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tba", help="generalized Gibbs thermodynamics")
    p.add_argument("--betas", default=None,
                   help="comma list beta_1..beta_s (beta_s acts as the boundary)")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--z", type=float, default=None)
    p.add_argument("--s", type=int, default=40, help="truncation for closed forms")
    p.add_argument("--degree", type=int, default=None,
                   help="fugacity-series mode of this degree")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tba)

    p = sub.add_parser("compare", help="score simulation against prediction")
    p.add_argument("--sim", required=True, help="simulation output directory")
    p.add_argument("--prediction", required=True, help="predict JSON file")
    p.add_argument("--margin", type=float, default=24.0,
                   help="plateau-interior margin in lattice sites")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
