"""Independent oracle for the 2D ground state: fixed-step RK4 shooting on
R'' + R'/r - R + R^3 = 0 with bisection on R(0), then trapezoid mass.

Uses nothing from zaklab. The printed numbers are frozen into the tests.
"""
import numpy as np


def rhs(r, y):
    R, dR = y
    return np.array([dR, -dR / r + R - R ** 3])


def shoot(R0, h=1e-3, rmax=12.0):
    # start off the origin with the two-term series R0 + c r^2
    r = 1e-4
    c = (R0 - R0 ** 3) / 4.0
    y = np.array([R0 + c * r * r, 2 * c * r])
    rs, Rs = [r], [y[0]]
    while r < rmax:
        k1 = rhs(r, y)
        k2 = rhs(r + h / 2, y + h / 2 * k1)
        k3 = rhs(r + h / 2, y + h / 2 * k2)
        k4 = rhs(r + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r += h
        rs.append(r)
        Rs.append(y[0])
        if y[0] < 0:
            return -1, np.array(rs), np.array(Rs)
        if y[1] > 0:
            return 1, np.array(rs), np.array(Rs)
    return 0, np.array(rs), np.array(Rs)


def ground_state(lo=2.0, hi=2.4, iters=45, h=1e-3):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s, _, _ = shoot(mid, h)
        if s < 0:
            hi = mid
        else:
            lo = mid
    R0 = 0.5 * (lo + hi)
    _, r, R = shoot(R0, h)
    # integrate only the clean part before the shot peels away
    cut = np.argmax(R < 1e-6) if np.any(R < 1e-6) else len(R)
    r, R = r[:cut], R[:cut]
    f = R ** 2 * r
    mass = 2 * np.pi * float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(r)))
    return R0, mass


if __name__ == "__main__":
    for h in (4e-3, 2e-3, 1e-3):
        R0, m = ground_state(h=h)
        print(f"h={h:g}  R(0)={R0:.10f}  mass={m:.8f}")
