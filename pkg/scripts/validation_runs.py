"""Run the shipped validation configs and print the blowup fits.

    python scripts/validation_runs.py selfsimilar2d collapse3d
"""
import argparse
import time
import warnings
from pathlib import Path

from zaklab import diagnostics as dg
from zaklab.evolve import run
from zaklab.io import read_config

CONFIGS = Path(__file__).resolve().parent / "configs"


def summarize(name, res, cfg):
    s = res.series
    print(f"[{name}] stop={res.stop_reason} t={s.t_stop:.5f} steps={res.steps} samples={len(s)}")
    m = s["mass"]
    print(f"  mass drift {abs(m[-1] - m[0]) / m[0]:.2e}   H(0) = {s['hamiltonian'][0]:.5f}")
    if res.stop_reason == "t_end":
        return
    for q in ("grad_psi_l2", "sup_psi"):
        try:
            f = dg.estimate_tstar(s, q)
            print(f"  t* from {q:<12} {f.t_star:.5f}  exponent {f.exponent:.3f}  residual {f.residual:.1e}")
        except dg.FitRefused as exc:
            print(f"  t* from {q}: refused ({exc})")
    for ell in cfg.sobolev_ell:
        for hom in ((False, True) if cfg.homogeneous else (False,)):
            try:
                r = dg.rate_bound_check(s, cfg.dim, ell, homogeneous=hom)
            except dg.FitRefused as exc:
                print(f"  rate l={ell:g}: refused ({exc})")
                continue
            parts = "  ".join(f"{k} {v:.3f}" for k, v in r.components.items())
            print(f"  theta{'_hom' if hom else ''} l={ell:g}: {r.theta_fit:.3f} (bound {r.theta_bound:.3f})  {parts}")
    ys = [c for c in s.columns if c.startswith("y_m")]
    if ys and s["hamiltonian"][0] < 0:
        H = abs(s["hamiltonian"][0])
        for c in ys:
            slack = s[c] - 0.5 * cfg.dim * H * s.t
            print(f"  {c}: min(y - d/2 |H| t) = {slack.min():.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=["subcritical2d", "selfsimilar2d", "collapse2d", "collapse3d"])
    args = ap.parse_args()
    for name in args.names:
        cfg = read_config(CONFIGS / f"{name}.ini")
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run(cfg, keep_snapshots=False)
        summarize(name, res, cfg)
        print(f"  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
