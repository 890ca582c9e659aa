import math

import numpy as np
import pytest

from zaklab import diagnostics as dg
from zaklab import evolve as ev
from zaklab.grid import GridError, PeriodicGrid, RadialGrid
from zaklab.profiles import find_profile_2d


def gauss_state(grid, A=1.0, n=None, nt=None, k=None):
    st = ev.gaussian_state(grid, amplitude=A, kvec=k)
    if n is not None:
        st.n = n
    if nt is not None:
        st.nt = nt
    return st


def test_hamiltonian_zero():
    g = RadialGrid(2, 10.0, 200)
    st = ev.WaveState(0.0, np.zeros(g.M, complex), np.zeros(g.M), np.zeros(g.M), g)
    assert dg.hamiltonian(st) == 0.0


def test_hamiltonian_substituted_gaussian():
    # n = -|psi|^2, v = 0: H = int |grad psi|^2 - 1/2 int |psi|^4 = A^2 pi - A^4 pi / 8
    g = RadialGrid(2, 10.0, 2000)
    A = math.sqrt(12.0)
    st = ev.gaussian_state(g, amplitude=A, n_mode="minus_psi2")
    oracle = g.quadrature(np.abs(2 * g.r * st.psi) ** 2) - 0.5 * g.quadrature(np.abs(st.psi) ** 4)
    H = dg.hamiltonian(st)
    # the discrete gradient norm is second order (h = 0.005)
    assert H == pytest.approx(oracle, rel=1e-4)
    assert H == pytest.approx(-6 * math.pi, rel=1e-4)


def test_recover_velocity_cases():
    g = RadialGrid(3, 12.0, 1200)
    assert np.all(dg.recover_velocity(np.zeros(g.M), g) == 0)
    gfun = np.exp(-g.r ** 2)
    v = dg.recover_velocity(g.laplacian(gfun), g)
    # v = -grad g = 2 r exp(-r^2)
    assert np.max(np.abs(v - 2 * g.r * gfun)) < 10 * g.h ** 2
    rng = np.random.default_rng(3)
    c = rng.normal(size=3)
    nt = (c[0] + c[1] * g.r ** 2) * np.exp(-g.r ** 2) + c[2] * np.exp(-(g.r - 2) ** 2)
    res = g.divergence(dg.recover_velocity(nt, g)) + nt
    assert np.max(np.abs(res[g.r < 8])) < 10 * g.h ** 2


def test_recover_velocity_periodic_mean():
    g = PeriodicGrid(2, 10.0, 32)
    with pytest.raises(GridError):
        dg.recover_velocity(np.ones(g.shape), g)


def test_momenta():
    g = PeriodicGrid(2, 24.0, 96)
    st = gauss_state(g)
    P, M = dg.momenta(st)
    assert np.max(np.abs(P)) < 1e-12 and abs(M) < 1e-12
    k = np.array([0.7, -0.4])
    st = gauss_state(g, k=k)
    P, _ = dg.momenta(st)
    assert np.allclose(P, k * dg.mass(st), rtol=1e-10)
    r = RadialGrid(2, 10.0, 100)
    P, M = dg.momenta(gauss_state(r))
    assert np.all(P == 0) and M == 0


def test_variance_identity_free_flow():
    # n = 0 would be driven by |psi|^2; use a weak field so V'' = 2|grad psi|^2
    g = PeriodicGrid(2, 40.0, 128)
    st = ev.gaussian_state(g, amplitude=1e-3, kvec=(0.3, 0.0))
    s = ev.Stepper(g)
    ser = dg.DiagnosticSeries(columns=["t", "V", "V_rhs"])
    acc = 0.0
    for i in range(41):
        if i % 4 == 0:
            ser.append({"t": st.t, "V": dg.variance_static(st) + acc,
                        "V_rhs": dg.variance_rhs(st)})
        f0 = dg.variance_density_flux(st)
        st = s.step(st, 0.025)
        acc += 0.0125 * (f0 + dg.variance_density_flux(st))
    assert dg.variance_identity_residual(ser) < 1e-3


def test_variance_zero_state_and_short_series():
    g = RadialGrid(2, 10.0, 64)
    z = ev.WaveState(0.0, np.zeros(g.M, complex), np.zeros(g.M), np.zeros(g.M), g)
    assert dg.variance_static(z) == 0 and dg.variance_rhs(z) == 0 and dg.variance_rate(z) == 0
    ser = dg.DiagnosticSeries(columns=["t", "V", "V_rhs"])
    for t in range(6):
        ser.append({"t": float(t), "V": 0.0, "V_rhs": 0.0})
    assert dg.variance_identity_residual(ser) == 0.0
    short = dg.DiagnosticSeries(columns=["t", "V", "V_rhs"], rows=ser.rows[:3])
    with pytest.raises(ValueError):
        dg.variance_identity_residual(short)


def test_variance_rate_matches_time_derivative():
    g = RadialGrid(2, 12.0, 1200)
    st = ev.gaussian_state(g, amplitude=2.0, n_mode="minus_psi2")
    st.psi = st.psi * np.exp(0.3j * g.r ** 2)
    s = ev.Stepper(g)
    dt = 1e-3
    a = s.step(st, -dt)
    b = s.step(st, dt)
    # the time-integral part of V contributes its integrand directly
    fd = (dg.variance_static(b) - dg.variance_static(a)) / (2 * dt) + dg.variance_density_flux(st)
    # O(h^2) gap between the centred gradient and the discrete dynamics
    assert dg.variance_rate(st) == pytest.approx(fd, rel=2e-4)


def test_modified_rate_cases():
    g = RadialGrid(2, 10.0, 400)
    st = ev.gaussian_state(g, amplitude=1.0)
    assert dg.modified_variance_rate(st, 4.0) == 0.0
    with pytest.raises(GridError):
        dg.modified_variance_rate(ev.gaussian_state(PeriodicGrid(2, 10.0, 32)), 4.0)


def test_modified_rate_bound_selfsimilar():
    # |grad p_m| <= 2m gives |y_m| <= m (|psi|^2 + |grad psi|^2 + |v|^2 + |n|^2)
    a = 0.5
    prof = find_profile_2d(a)
    g = RadialGrid(2, 10.0, 2000)
    st = ev.self_similar_state_2d(prof, a, 0.0, 1.0, 0.0, g)
    tot = (dg.mass(st) + g.grad_norm2(st.psi) + dg.velocity_norm2(st.nt, g)
           + g.quadrature(st.n ** 2))
    for m in (1.0, 4.0, 16.0):
        y = dg.modified_variance_rate(st, m)
        assert np.isfinite(y)
        assert abs(y) <= m * tot


def test_modified_rate_reduces_to_variance_rate():
    # with p_m -> |x|^2 (m large), y_m -> -2 dV/dt
    g = RadialGrid(2, 8.0, 400)
    st = ev.gaussian_state(g, amplitude=2.0, n_mode="minus_psi2")
    st.psi = st.psi * np.exp(0.2j * g.r ** 2)
    st.nt = np.exp(-g.r ** 2) * (1 - g.r ** 2)
    assert dg.modified_variance_rate(st, 1e6) == pytest.approx(-2 * dg.variance_rate(st), rel=1e-8)


def test_weight_function():
    s = np.array([1e-3, 0.1, 1.0, 1e3])
    p = dg.weight_p(s)
    assert p[0] == pytest.approx(s[0] ** 2, rel=1e-5)
    assert p[-1] == pytest.approx(2 * s[-1], rel=2e-3)
    r = np.linspace(0.1, 20, 50)
    h = 1e-6
    fd = (9 * dg.weight_p((r + h) / 3) - 9 * dg.weight_p((r - h) / 3)) / (2 * h)
    assert np.allclose(dg.weight_dp_m(r, 3.0), fd, rtol=1e-6)


def test_strauss_examples():
    g = RadialGrid(3, 30.0, 3000)
    ratio = dg.strauss_ratio(np.exp(-g.r), g, 1.0)
    assert 0 < ratio <= 4
    f = np.where(g.r < 1, np.cos(np.pi * g.r / 2) ** 2, 0.0)
    assert dg.strauss_ratio(f, g, 1.5) == 0.0
    assert dg.strauss_ratio(5 * np.exp(-g.r), g, 1.0) == pytest.approx(ratio, rel=1e-13)
    with pytest.raises(GridError):
        dg.strauss_ratio(np.exp(-g.r), RadialGrid(1, 10.0, 100), 1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_strauss_dilation(d):
    mu = 2.5
    g1 = RadialGrid(d, 20.0, 2000)
    g2 = RadialGrid(d, 20.0 * mu, 2000)
    f = np.exp(-g1.r) * (1 + g1.r)
    # same node values on a dilated grid: f(r / mu)
    assert dg.strauss_ratio(f, g2, mu * 1.3) == pytest.approx(dg.strauss_ratio(f, g1, 1.3), rel=1e-12)


def test_symbol_examples():
    ev2, ok = dg.vector_symbol_check([1.0, 0.0], 2.0)
    assert ok and np.allclose(ev2, [1, 2])
    ev3, ok = dg.vector_symbol_check([1.0, 1.0, 1.0], 4.0)
    assert ok and np.allclose(ev3, [3, 12, 12])
    with pytest.raises(ValueError):
        dg.vector_symbol_check([0.0, 0.0], 2.0)


def test_theta_bound_values():
    assert dg.theta_bound(2, 0) == 0.5
    assert dg.theta_bound(3, 0) == 0.25
    assert dg.theta_bound(3, 1) == 0.75


def test_rate_check_needs_blowup():
    s = dg.DiagnosticSeries(columns=["t", "grad_psi_l2", "psi_H0.5", "n_H0", "nt_H-1"],
                            stop_reason="t_end")
    for t in range(10):
        s.append({"t": float(t), "grad_psi_l2": 1.0, "psi_H0.5": 1.0, "n_H0": 1.0, "nt_H-1": 1.0})
    with pytest.raises(dg.FitRefused):
        dg.rate_bound_check(s, 2, 0.0)


def test_estimate_tstar_refuses_non_monotone():
    s = dg.DiagnosticSeries(columns=["t", "grad_psi_l2"])
    for t in np.linspace(0, 1, 20):
        s.append({"t": t, "grad_psi_l2": 2 + math.sin(20 * t)})
    with pytest.raises(dg.FitRefused):
        dg.estimate_tstar(s)


def test_series_container():
    s = dg.DiagnosticSeries(columns=["t", "x"])
    s.append({"t": 0.0, "x": 1.0})
    with pytest.raises(ValueError):
        s.append({"t": 0.0, "x": 2.0})
    s.append({"t": 0.1, "x": 1 / 3})
    back = dg.DiagnosticSeries.from_csv_text(s.to_csv_text())
    assert back.rows == s.rows and back.columns == s.columns
    assert "\r" not in s.to_csv_text()


def test_rate_check_takes_tstar_from_amplitude():
    # 3D-like scaling: sup|psi| ~ tau^-1 while |grad psi| ~ tau^-2/3
    s = dg.DiagnosticSeries(columns=["t", "sup_psi", "grad_psi_l2", "psi_H0.5", "n_H0", "nt_H-1"],
                            stop_reason="resolution")
    for t in np.linspace(0, 0.049, 80):
        tau = 0.05 - t
        s.append({"t": t, "sup_psi": 1 / tau, "grad_psi_l2": tau ** (-2 / 3), "psi_H0.5": tau ** (-1 / 3),
                  "n_H0": tau ** (-1 / 3), "nt_H-1": tau ** (-2 / 3)})
    rep = dg.rate_bound_check(s, 3, 0.0)
    assert rep.t_star == pytest.approx(0.05, rel=1e-10)
    assert rep.components["psi_H0.5"] == pytest.approx(1 / 3, abs=1e-8)


def test_fit_exponent_skips_zero_samples():
    t = np.array([0.0, 0.2, 0.4, 0.6, 0.8])
    q = (1 - t) ** -0.5
    q[0] = 0.0
    expo, _, res = dg.fit_exponent(t, q, 1.0)
    assert expo == pytest.approx(0.5) and res < 1e-12
    with pytest.raises(dg.FitRefused):
        dg.fit_exponent(t[:3], np.array([0.0, 0.0, 1.0]), 1.0)
