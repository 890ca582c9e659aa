"""Optional study: blowup constant vs mass excess above the ground state.

Gaussians psi0 = A exp(-r^2), n0 = -|psi0|^2, for masses slightly above
|R|^2.  Fits |grad psi| ~ c / (t* - t) and prints c against the excess
(mass - |R|^2); a slope of -1/2 in log-log would match the predicted
scaling of the constants.  Not an acceptance gate.
"""
import argparse
import math
import warnings

import numpy as np

from zaklab import diagnostics as dg
from zaklab import profiles as pr
from zaklab.evolve import GridSpec, ICSpec, SimConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--excess", type=float, nargs="+", default=[2.0, 4.0, 8.0])
    ap.add_argument("--M", type=int, default=800)
    args = ap.parse_args()

    crit = pr.ground_state_2d().meta["mass"]
    rows = []
    for ex in args.excess:
        # mass of A exp(-r^2) in 2D is pi A^2 / 2
        A = math.sqrt(2 * (crit + ex) / math.pi)
        cfg = SimConfig(dim=2, grid=GridSpec("radial", 12.0, args.M), dt=5e-4, t_end=20.0, output_every=0.01,
                        cfl=0.025, resolved_scale=0.1,
                        ic=ICSpec("gaussian", dict(amplitude=A, width=1.0, n_mode="minus_psi2")))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run(cfg, keep_snapshots=False)
        try:
            f = dg.estimate_tstar(res.series)
        except dg.FitRefused as exc:
            print(f"excess {ex:6.3f}: fit refused ({exc})")
            continue
        rows.append((ex, f.amplitude))
        print(f"excess {ex:6.3f}  A {A:.4f}  stop {res.stop_reason:<10} t* {f.t_star:.4f}  "
              f"exponent {f.exponent:.3f}  c {f.amplitude:.4f}")
    if len(rows) >= 2:
        x, y = np.log(np.array(rows)).T
        print(f"log-log slope of c vs excess: {np.polyfit(x, y, 1)[0]:.3f}")


if __name__ == "__main__":
    main()
