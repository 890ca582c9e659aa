import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import solve_ivp

from zaklab import profiles as pr

# frozen output of scripts/oracle_ground_state.py (fixed-step RK4 shooting)
ORACLE_R0 = 2.2062008656
ORACLE_MASS = 11.7009


def sympy_series(p0, order):
    """Brute-force power matching of both profile equations."""
    eta = sp.Symbol("eta")
    a = sp.symbols(f"a0:{order + 1}")
    b = sp.symbols(f"b0:{order + 1}")
    P = sum(a[i] * eta ** (2 * i) for i in range(order + 1))
    N = sum(b[i] * eta ** (2 * i) for i in range(order + 1))
    lap = lambda f: sp.diff(f, eta, 2) + 2 / eta * sp.diff(f, eta)
    e1 = sp.expand(lap(P) - P - N * P)
    e2 = sp.expand(sp.Rational(2, 9) * (2 * eta ** 2 * sp.diff(N, eta, 2) + 13 * eta * sp.diff(N, eta) + 14 * N)
                   - lap(P ** 2))
    sol = {a[0]: sp.Float(p0, 30)}
    for i in range(order + 1):
        # eta^{2i} of e2 fixes b_i (with a_{i+1}); eta^{2i} of e1 fixes a_{i+1}
        unknowns = [b[i]] + ([a[i + 1]] if i + 1 <= order else [])
        eqs = [e2.coeff(eta, 2 * i).subs(sol)]
        if i + 1 <= order:
            eqs.append(e1.coeff(eta, 2 * i).subs(sol))
        s = sp.solve(eqs, unknowns, dict=True)[0]
        sol.update(s)
    return (np.array([float(sol[a[i]]) for i in range(order + 1)]),
            np.array([float(sol[b[i]]) for i in range(order + 1)]))


def test_alpha_values():
    assert pr.alpha_k(1) == pytest.approx(math.sqrt(14) / 3)
    assert pr.alpha_k(2) == pytest.approx(math.sqrt(44) / 3)
    assert pr.alpha_k(4) == pytest.approx(math.sqrt(152) / 3)
    assert pr.alpha_k(1) == pytest.approx(1.2472, abs=1e-4)
    with pytest.raises(ValueError):
        pr.alpha_k(0)


def test_n0_relation_values():
    assert pr.n0_from_p0(0.0) == 0.0
    assert pr.n0_from_p0(1.0) == pytest.approx(1.8)
    assert pr.n0_from_p0(1.38) == pytest.approx(-5.459, abs=1e-3)
    with pytest.raises(ValueError):
        pr.n0_from_p0(math.sqrt(14 / 9))


def test_series_matches_symbolic_oracle():
    a, b = pr.series_coefficients_3d(1.38, 4)
    # b_4 couples to a_5, so the oracle carries one extra order
    ao, bo = sympy_series(1.38, 5)
    assert a[0] == 1.38 and b[0] == pytest.approx(pr.n0_from_p0(1.38), rel=1e-14)
    assert np.allclose(a, ao[:5], rtol=1e-10, atol=1e-12)
    assert np.allclose(b[:5], bo[:5], rtol=1e-10, atol=1e-12)


def test_series_seed_self_consistent():
    seed = pr.series_seed_3d(1.38, order=12, tol=1e-12)
    assert 1e-3 <= seed.eta0 <= 0.1
    y0 = seed.evaluate(seed.eta0)
    sol = solve_ivp(pr._rhs3, (seed.eta0, 1.5 * seed.eta0), y0, rtol=1e-13, atol=1e-15, method="DOP853")
    assert np.allclose(sol.y[:, -1], seed.evaluate(1.5 * seed.eta0), atol=1e-10)


def test_resonant_p0_rejected():
    with pytest.raises(pr.ResonanceError):
        pr.series_seed_3d(pr.alpha_k(1))
    with pytest.raises(pr.ResonanceError):
        pr.shoot_3d(pr.alpha_k(2) + 1e-8)


def test_shooting_brackets_first_profile():
    p1 = pr.find_profile_3d(1).P0
    lo = pr.shoot_3d(p1 - 0.01)
    hi = pr.shoot_3d(p1 + 0.01)
    assert lo.classification != hi.classification


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_ladder_profile_structure(k):
    prof = pr.find_profile_3d(k)
    assert pr.alpha_k(k) < prof.P0 < pr.alpha_k(k + 1)
    assert np.all(prof.P > 0)
    assert np.all(prof.N < 0)
    assert prof.N0 == pytest.approx(pr.n0_from_p0(prof.P0), abs=1e-8)
    assert prof.residual < 1e-6
    assert prof.decay_rate > 0
    assert prof.n_exponent <= -2
    # evenness: one-sided slope at the origin vanishes
    h = prof.eta[1] - prof.eta[0]
    assert abs(prof.P[1] - prof.P[0]) / h < 10 * h
    assert abs(prof.N[1] - prof.N[0]) / h < 100 * h


def test_ladder_pointwise_ordering():
    profs = [pr.find_profile_3d(k) for k in (1, 2, 3, 4)]
    eta = profs[0].eta
    for lo, hi in zip(profs[:-1], profs[1:]):
        assert np.array_equal(lo.eta, hi.eta)
        sel = eta <= 10
        assert np.all(lo.P[sel] < hi.P[sel])


def test_ground_state_against_oracle():
    R0 = pr.ground_state_R0()
    assert R0 == pytest.approx(ORACLE_R0, abs=1e-8)
    gs = pr.ground_state_2d()
    assert gs.P0 == pytest.approx(ORACLE_R0, abs=1e-3)
    assert gs.meta["mass"] == pytest.approx(ORACLE_MASS, abs=5e-3)
    assert np.all(gs.P > 0) and np.all(np.diff(gs.P) < 0)
    assert gs.residual < 1e-8


def test_independent_oracle_agrees_coarsely():
    import importlib.util
    import pathlib
    path = pathlib.Path(__file__).resolve().parents[1] / "scripts" / "oracle_ground_state.py"
    spec = importlib.util.spec_from_file_location("oracle_gs", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    R0, mass = mod.ground_state(iters=30, h=4e-3)
    assert R0 == pytest.approx(ORACLE_R0, abs=1e-6)
    assert mass == pytest.approx(ORACLE_MASS, abs=1e-3)


def test_family_at_zero_is_townes():
    gs = pr.ground_state_2d()
    f0 = pr.find_profile_2d(0.0)
    assert np.array_equal(f0.P, gs.P)
    assert np.array_equal(f0.N, -f0.P ** 2)
    assert f0.residual < 1e-8


def test_family_small_a_tail():
    f = pr.find_profile_2d(0.3)
    assert np.all(f.P > 0)
    assert f.residual < 1e-8
    assert f.n_exponent == pytest.approx(-3.0, abs=0.25)


def test_family_tends_to_townes():
    R = pr.ground_state_2d().P
    gaps = [np.max(np.abs(pr.find_profile_2d(a).P - R)) for a in (0.4, 0.2, 0.1, 0.05, 0.02)]
    assert np.all(np.diff(gaps) < 0)


def test_family_rejects_negative_a():
    with pytest.raises(ValueError):
        pr.find_profile_2d(-0.1)


def test_continuation_failure_reports_reached_a(monkeypatch):
    real = pr._newton_2d

    def flaky(a, grid, P, tol, max_iter=30):
        return None if a > 0.1 else real(a, grid, P, tol, max_iter)

    monkeypatch.setattr(pr, "_newton_2d", flaky)
    with pytest.raises(pr.ContinuationError) as err:
        pr.find_profile_2d(0.2, extent=16.0, M=160)
    assert err.value.a_reached == pytest.approx(0.1, abs=1e-3)


def test_beyond_verified_range_warns():
    with pytest.warns(UserWarning):
        f = pr.find_profile_2d(pr.A_MAX + 0.04, extent=16.0, M=200, step=0.1)
    assert np.all(f.P > 0)
