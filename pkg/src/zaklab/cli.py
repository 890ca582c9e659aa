"""zaklab command line: profile, simulate, check, rates.

Exit codes: 0 ok, 1 config error, 2 profile failure, 3 blowup stop,
4 failed check.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import io as _io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import io as zio
from . import profiles as pr

EXIT_OK, EXIT_CONFIG, EXIT_PROFILE, EXIT_BLOWUP, EXIT_CHECK = 0, 1, 2, 3, 4


def _stamp():
    # SOURCE_DATE_EPOCH pins timestamps for reproducible manifests
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return _dt.datetime.fromtimestamp(t, _dt.timezone.utc).isoformat()


def _manifest(path, command, config_hash, start, outputs, stop_reason):
    data = {"command": command, "config_hash": config_hash, "start": start, "end": _stamp(),
            "outputs": sorted(str(p) for p in outputs), "stop_reason": stop_reason}
    return zio.write_text(path, json.dumps(data, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------

def _profile_summary(prof, extra):
    lines = [f"family = {prof.family}", f"parameter = {prof.parameter!r}",
             f"P0 = {prof.P0:.10f}", f"N0 = {prof.N0:.10f}",
             f"decay_rate = {prof.decay_rate:.6g}", f"n_exponent = {prof.n_exponent:.6g}",
             f"residual = {prof.residual:.3e}"]
    lines += [f"{k} = {v}" for k, v in extra]
    return "\n".join(lines) + "\n"


def cmd_profile(args):
    start = _stamp()
    try:
        if args.family == "ladder3d":
            prof = pr.find_profile_3d(args.k, tol=args.tol or 1e-12)
            lo, hi = pr.alpha_k(args.k), pr.alpha_k(args.k + 1)
            extra = [("alpha_bracket", f"({lo:.10f}, {hi:.10f})"),
                     ("bracket_check", "pass" if lo < prof.P0 < hi else "fail"),
                     ("n0_relation_residual", f"{abs(prof.N0 - pr.n0_from_p0(prof.P0)):.3e}")]
            tag = f"ladder3d_k{args.k}"
        elif args.family == "ground2d":
            prof = pr.ground_state_2d(tol=args.tol or 1e-12)
            ok = bool(np.all(prof.P > 0) and np.all(np.diff(prof.P) < 0))
            extra = [("mass", f"{prof.meta['mass']:.8f}"),
                     ("monotone_positive", "pass" if ok else "fail")]
            tag = "ground2d"
        else:
            prof = pr.find_profile_2d(args.a, tol=args.tol or 1e-11)
            extra = [("mass", f"{prof.meta['mass']:.8f}")]
            if args.a == 0:
                extra.append(("n_plus_p2_residual", f"{np.max(np.abs(prof.N + prof.P ** 2)):.3e}"))
            tag = f"family2d_a{args.a:g}"
    except (pr.ProfileError, pr.ContinuationError, ValueError) as exc:
        print(f"profile failed: {exc}", file=sys.stderr)
        return EXIT_PROFILE
    outdir = Path(args.out) if args.out else zio.out_root() / "profiles"
    outs = [zio.write_text(outdir / f"{tag}_P.csv", zio.profile_csv_text(prof, "P")),
            zio.write_text(outdir / f"{tag}_N.csv", zio.profile_csv_text(prof, "N"))]
    summary = _profile_summary(prof, extra)
    outs.append(zio.write_text(outdir / f"{tag}_summary.txt", summary))
    _manifest(outdir / f"{tag}_manifest.json", "profile", "", start, outs, "converged")
    sys.stdout.write(summary)
    return EXIT_OK


# ---------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------

def _report(cfg, res):
    s = res.series
    out = []
    lines = [f"stop_reason = {res.stop_reason}", f"t_stop = {s.t_stop!r}", f"steps = {res.steps}"]
    for name in ("mass", "hamiltonian"):
        q = s[name]
        scale = max(abs(q[0]), 1e-300)
        drift = float(np.max(np.abs(q - q[0])) / scale)
        tol = 1e-6
        ok = drift < tol or res.stop_reason != "t_end"
        lines.append(f"{name}_drift = {drift:.3e} [{'pass' if drift < tol else ('n/a' if ok else 'fail')}]")
    fit = None
    if res.stop_reason in ("blowup", "resolution", "nonfinite"):
        try:
            fit = dg.estimate_tstar(s)
            s.meta["t_star_fit"] = fit.t_star
            lines += [f"t_star_fit = {fit.t_star!r}", f"exponent_fit = {fit.exponent!r}",
                      f"fit_residual = {fit.residual:.3e}"]
            ts = cfg.ic.params.get("t_star")
            if ts is not None and cfg.ic.family.startswith("self_similar"):
                t_cfg = float(ts) - float(cfg.ic.params.get("t0", 0.0))
                lines.append(f"t_star_configured = {t_cfg!r}")
                lines.append(f"t_star_rel_error = {abs(fit.t_star - t_cfg) / t_cfg:.3e}")
            # rate fits take t* from sup|psi|, which grows like 1/(t* - t) in any dimension
            try:
                t_rate = dg.estimate_tstar(s, "sup_psi").t_star
                lines.append(f"t_star_sup_fit = {t_rate!r}")
            except dg.FitRefused:
                t_rate = fit.t_star
            for ell in cfg.sobolev_ell:
                for hom in ((False, True) if cfg.homogeneous else (False,)):
                    try:
                        rep = dg.rate_bound_check(s, cfg.dim, ell, t_star=t_rate, homogeneous=hom)
                        lines.append(f"theta{'_hom' if hom else ''}_l{ell:g} = {rep.theta_fit:.4f} "
                                     f"bound {rep.theta_bound:.4f} [{'pass' if rep.passed else 'fail'}]")
                        out.append((ell, hom, rep))
                    except dg.FitRefused as exc:
                        lines.append(f"theta_l{ell:g} = refused ({exc})")
        except dg.FitRefused as exc:
            lines.append(f"t_star_fit = refused ({exc})")
    for w in res.warnings:
        lines.append(f"warning = boundary decay violated at t={w[1]:.6g} (ratio {w[2]:.2e})")
    buf = _io.StringIO()
    buf.write("quantity,value\n")
    if fit is not None:
        buf.write(f"t_star,{fit.t_star!r}\nexponent,{fit.exponent!r}\namplitude,{fit.amplitude!r}\n"
                  f"residual,{fit.residual!r}\n")
    for ell, hom, rep in out:
        buf.write(f"theta{'_hom' if hom else ''}_l{ell:g},{rep.theta_fit!r}\n")
    return "\n".join(lines) + "\n", buf.getvalue()


def simulate_one(cfg_path, outdir):
    """Run one config into outdir; returns (exit code, report text)."""
    from .evolve import run
    try:
        cfg = zio.read_config(cfg_path)
    except zio.ConfigError as exc:
        return EXIT_CONFIG, f"config error in {cfg_path}: {exc}\n"
    start = _stamp()
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            res = run(cfg)
        except ValueError as exc:
            return EXIT_CONFIG, f"config error in {cfg_path}: {exc}\n"
    outdir = Path(outdir)
    report, fits = _report(cfg, res)
    outs = [zio.write_text(outdir / "series.csv", res.series.to_csv_text()),
            zio.write_text(outdir / "report.txt", report),
            zio.write_text(outdir / "fits.csv", fits),
            zio.write_text(outdir / "config.ini", zio.config_to_text(cfg))]
    for i, st in enumerate(res.snapshots):
        outs += zio.snapshot_files(st, outdir / "snapshots", f"snap{i:04d}", cfg.digest())
    _manifest(outdir / "manifest.json", f"simulate {Path(cfg_path).name}", cfg.digest(),
              start, outs, res.stop_reason)
    code = EXIT_BLOWUP if res.stop_reason in ("blowup", "resolution", "nonfinite") else EXIT_OK
    return code, report


def _sim_job(job):
    return simulate_one(*job)


def cmd_simulate(args):
    paths = [args.config] + list(args.sweep or [])
    root = Path(args.out) if args.out else zio.out_root() / "runs"
    # validate everything before writing anything
    for p in paths:
        try:
            zio.read_config(p)
        except zio.ConfigError as exc:
            print(f"config error in {p}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    jobs = [(p, root / Path(p).stem) if len(paths) > 1 or not args.out else (p, root) for p in paths]
    if len(jobs) == 1:
        results = [simulate_one(*jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(_sim_job, jobs))
    codes = []
    for (p, _), (code, text) in zip(jobs, results):
        if len(jobs) > 1:
            sys.stdout.write(f"== {p}\n")
        sys.stdout.write(text)
        codes.append(code)
    if EXIT_CONFIG in codes:
        return EXIT_CONFIG
    return EXIT_BLOWUP if EXIT_BLOWUP in codes else EXIT_OK


# ---------------------------------------------------------------------
# check
# ---------------------------------------------------------------------

def run_checks(kmax=4, seed=0, samples=200):
    rows = []
    prof = {}
    for k in range(1, kmax + 1):
        try:
            prof[k] = pr.find_profile_3d(k)
        except pr.ProfileError as exc:
            rows.append((f"ladder k={k}", False, str(exc)))
            continue
        p0 = prof[k].P0
        lo, hi = pr.alpha_k(k), pr.alpha_k(k + 1)
        rows.append((f"alpha ordering k={k}", lo < p0 < hi, f"{lo:.6f} < {p0:.6f} < {hi:.6f}"))
        res = abs(prof[k].N0 - pr.n0_from_p0(p0))
        rows.append((f"N0 relation k={k}", res < 1e-8, f"residual {res:.2e}"))
    rng = np.random.default_rng(seed)
    cases = [(np.array([1.0, 0.0]), 2.0), (np.array([1.0, 1.0, 1.0]), 4.0)]
    cases += [(rng.normal(size=rng.integers(2, 4)), 1.0 + 10 * rng.random()) for _ in range(samples)]
    worst = 0.0
    for i, (xi, alpha) in enumerate(cases):
        ev, ok = dg.vector_symbol_check(xi, alpha)
        k2 = xi @ xi
        exact = np.sort([k2] + [alpha * k2] * (xi.size - 1))
        err = float(np.max(np.abs(ev - exact)) / (alpha * k2))
        worst = max(worst, err)
        if i < 2:
            rows.append((f"symbol d={xi.size} xi={xi.tolist()} alpha={alpha:g}", ok and err < 1e-10,
                         "eigenvalues " + ", ".join(f"{e:.6g}" for e in ev)))
        elif not (ok and err < 1e-10):
            rows.append((f"symbol sample {i}", False, f"error {err:.2e}"))
    rows.append((f"symbol sweep ({samples} samples)", worst < 1e-10, f"max rel error {worst:.2e}"))
    from .grid import RadialGrid
    g = RadialGrid(3, 30.0, 3000)
    ratio = dg.strauss_ratio(np.exp(-g.r), g, 1.0)
    rows.append(("Strauss ratio exp(-r), d=3, R=1", 0 < ratio <= 4, f"ratio {ratio:.4f}"))
    return rows


def cmd_check(args):
    rows = run_checks(kmax=args.kmax, seed=args.seed)
    width = max(len(r[0]) for r in rows)
    for name, ok, info in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {info}")
    return EXIT_OK if all(r[1] for r in rows) else EXIT_CHECK


# ---------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------

def cmd_rates(args):
    try:
        s = dg.DiagnosticSeries.from_csv_text(Path(args.series).read_text())
    except (OSError, ValueError, StopIteration) as exc:
        print(f"cannot read series: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        fit = dg.estimate_tstar(s, quantity=args.quantity, theta=args.theta)
    except (dg.FitRefused, ValueError) as exc:
        print(f"fit refused: {exc}", file=sys.stderr)
        return EXIT_CHECK
    print(f"t_star = {fit.t_star!r}")
    print(f"exponent = {fit.exponent!r}")
    print(f"window = {fit.window[0]!r} {fit.window[1]!r}")
    ok = True
    for ell in args.ell:
        for hom in (False, True):
            try:
                rep = dg.rate_bound_check(s, args.dim, ell, t_star=fit.t_star, homogeneous=hom)
            except (ValueError, dg.FitRefused):
                continue
            ok &= rep.passed
            print(f"theta{'_hom' if hom else ''}_l{ell:g} = {rep.theta_fit:.4f} "
                  f"bound {rep.theta_bound:.4f} [{'pass' if rep.passed else 'fail'}]")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="zaklab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("profile", help="compute a self-similar profile")
    q.add_argument("--family", choices=["ground2d", "family2d", "ladder3d"], required=True)
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--a", type=float, default=0.0)
    q.add_argument("--tol", type=float, default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_profile)

    q = sub.add_parser("simulate", help="evolve initial data from an INI config")
    q.add_argument("--config", required=True)
    q.add_argument("--sweep", nargs="*", help="further configs run in parallel")
    q.add_argument("--workers", type=int, default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("check", help="run the invariant and inequality checks")
    q.add_argument("--kmax", type=int, default=4)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_check)

    q = sub.add_parser("rates", help="re-fit blowup exponents from a series CSV")
    q.add_argument("--series", required=True)
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--ell", type=float, nargs="*", default=[0.0])
    q.add_argument("--quantity", default="grad_psi_l2")
    q.add_argument("--theta", type=float, default=1.0)
    q.set_defaults(func=cmd_rates)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
