"""Print the 3D profile ladder: P_k(0), N_k(0), resonance bracket, tail fits."""
import argparse
import time

from zaklab import profiles as pr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=4)
    args = ap.parse_args()

    print(f"{'k':>2} {'P0':>10} {'N0':>11} {'alpha_k':>9} {'alpha_k+1':>9} {'delta':>7} {'N exp':>7} {'sec':>5}")
    for k in range(1, args.kmax + 1):
        t0 = time.perf_counter()
        p = pr.find_profile_3d(k)
        dt = time.perf_counter() - t0
        print(f"{k:2d} {p.P0:10.6f} {p.N0:11.5f} {pr.alpha_k(k):9.5f} {pr.alpha_k(k + 1):9.5f} "
              f"{p.decay_rate:7.3f} {p.n_exponent:7.2f} {dt:5.1f}")

    gs = pr.ground_state_2d()
    print(f"\n2D ground state: R(0) = {gs.P0:.7f} (shooting {pr.ground_state_R0():.10f}), "
          f"mass = {gs.meta['mass']:.5f}")


if __name__ == "__main__":
    main()
