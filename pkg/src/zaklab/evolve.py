"""Time integration of the scalar Zakharov system.

Splitting used by ``Stepper.step`` (Strang):

    half potential:  psi <- exp(-i n dt/2) psi,
                     n_t <- n_t + dt/2 (n + Lap|psi|^2)
    free flows:      psi <- exp(i dt Lap) psi,
                     (n, n_t) <- Klein-Gordon flow with w_1 = (1 - Lap)^{1/2}
    half potential

The wave equation n_tt - Lap n = Lap|psi|^2 is written as
n_tt + w_1^2 n = n + Lap|psi|^2, so the regularised propagator never
divides by a zero wavenumber and the extra ``+ n`` rides along in the kick.
On periodic grids the mean mode is advanced exactly (it only drifts).

Periodic grids use exact Fourier propagators. Radial grids use
Crank-Nicolson for both free flows: the Schrodinger part is then exactly
unitary in the grid inner product and the Klein-Gordon part conserves its
discrete energy.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics as dg
from .diagnostics import estimate_tstar  # noqa: F401  (re-export)
from .grid import GridError, PeriodicGrid, RadialGrid, make_grid


@dataclass
class WaveState:
    t: float
    psi: np.ndarray
    n: np.ndarray
    nt: np.ndarray
    grid: object

    def copy(self):
        return WaveState(self.t, self.psi.copy(), self.n.copy(), self.nt.copy(), self.grid)

    def finite(self):
        return bool(np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.n))
                    and np.all(np.isfinite(self.nt)))

    def velocity(self):
        return dg.recover_velocity(self.nt, self.grid)

    def first_order(self, regularized=True):
        return to_first_order(self.n, self.nt, self.grid, regularized)


def _omega(grid, regularized):
    if regularized:
        return lambda lam: np.sqrt(1.0 + lam)
    return lambda lam: np.sqrt(lam)


def to_first_order(n, nt, grid, regularized=True):
    """w+- = n +- i w^{-1} n_t with w = (1 - Lap)^{1/2} (or (-Lap)^{1/2})."""
    n = np.asarray(n, dtype=float)
    nt = np.asarray(nt, dtype=float)
    if isinstance(grid, PeriodicGrid) and not regularized:
        F = np.fft.fftn(nt)
        if abs(F.flat[0]) > 1e-12 * max(np.max(np.abs(nt)), 1e-300) * nt.size:
            raise GridError("zero wavenumber in (-Lap)^{-1/2}; use the regularised operator")
        with np.errstate(divide="ignore"):
            inv = np.where(grid.k2 > 0, 1.0 / np.sqrt(grid.k2), 0.0)
        q = np.fft.ifftn(inv * F).real
    else:
        om = _omega(grid, regularized)
        q = np.real(grid.apply_function(nt, lambda lam: 1.0 / om(lam)))
    return n + 1j * q, n - 1j * q


def from_first_order(wp, wm, grid, regularized=True):
    n = np.real(0.5 * (wp + wm))
    q = np.imag(0.5 * (wp - wm))
    if isinstance(grid, PeriodicGrid) and not regularized:
        nt = np.fft.ifftn(np.sqrt(grid.k2) * np.fft.fftn(q)).real
    else:
        om = _omega(grid, regularized)
        nt = np.real(grid.apply_function(q, om))
    return n, nt


class Stepper:
    """Strang splitting stepper bound to one grid."""

    def __init__(self, grid):
        self.grid = grid
        if isinstance(grid, PeriodicGrid):
            self.k2 = grid.k2
            self.w1 = np.sqrt(1.0 + grid.k2)

    # -- substeps ------------------------------------------------------
    def lap(self, f):
        return self.grid.laplacian(f)

    def kick(self, psi, n, nt, tau):
        psi = np.exp(-1j * tau * n) * psi
        if isinstance(self.grid, PeriodicGrid):
            src = n - n.mean()
        else:
            src = n
        nt = nt + tau * (src + self.lap(np.abs(psi) ** 2))
        return psi, nt

    def free_schrodinger(self, psi, dt):
        g = self.grid
        if isinstance(g, PeriodicGrid):
            return np.fft.ifftn(np.exp(-1j * dt * self.k2) * np.fft.fftn(psi))
        # (W - i dt/2 A) psi+ = (W + i dt/2 A) psi
        rhs = g._w * psi + 0.5j * dt * g.apply_A(psi)
        return solve_banded((1, 1), g.banded(1.0 + 0j, -0.5j * dt), rhs)

    def free_wave(self, n, nt, dt):
        g = self.grid
        if isinstance(g, PeriodicGrid):
            N, Nt = np.fft.fftn(n), np.fft.fftn(nt)
            c, s = np.cos(self.w1 * dt), np.sin(self.w1 * dt)
            N1 = c * N + s / self.w1 * Nt
            Nt1 = -self.w1 * s * N + c * Nt
            # mean mode: exact free drift, no regularisation
            N1.flat[0] = N.flat[0] + dt * Nt.flat[0]
            Nt1.flat[0] = Nt.flat[0]
            return np.fft.ifftn(N1).real, np.fft.ifftn(Nt1).real
        # trapezoidal rule for n_tt = (L - 1) n
        q = 0.25 * dt * dt
        W = g._w
        rhs = W * n + q * (g.apply_A(n) - W * n) + dt * W * nt
        n1 = solve_banded((1, 1), g.banded(1.0 + q, -q), rhs)
        s = n + n1
        nt1 = nt + 0.5 * dt * (g.laplacian(s) - s)
        return n1, nt1

    def step(self, state, dt):
        psi, n, nt = state.psi, state.n, state.nt
        psi, nt = self.kick(psi, n, nt, 0.5 * dt)
        psi = self.free_schrodinger(psi, dt)
        n, nt = self.free_wave(n, nt, dt)
        psi, nt = self.kick(psi, n, nt, 0.5 * dt)
        return WaveState(state.t + dt, psi, n, nt, self.grid)


def step(state, dt):
    return Stepper(state.grid).step(state, dt)


# ---------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------

def gaussian_state(grid, amplitude=1.0, width=1.0, center=None, kvec=None,
                   n_mode="zero", n_amplitude=0.0, widths=None):
    """psi = A exp(-|x - x0|^2 / w^2) exp(i k.x); n from ``n_mode``:
    'zero', 'minus_psi2' (n = -|psi|^2) or 'gaussian' (n_amplitude)."""
    if isinstance(grid, RadialGrid):
        if center is not None or kvec is not None or widths is not None:
            raise ValueError("radial grids need centred, isotropic data")
        arg = (grid.r / width) ** 2
        phase = 1.0
    else:
        x = grid.x
        c = np.zeros(grid.dim) if center is None else np.asarray(center, float)
        ws = [width] * grid.dim if widths is None else list(widths)
        arg = sum(((xi - ci) / wi) ** 2 for xi, ci, wi in zip(x, c, ws))
        k = np.zeros(grid.dim) if kvec is None else np.asarray(kvec, float)
        phase = np.exp(1j * sum(ki * xi for ki, xi in zip(k, x)))
    psi = amplitude * np.exp(-arg) * phase + 0j
    if n_mode == "zero":
        n = np.zeros(grid.shape)
    elif n_mode == "minus_psi2":
        n = -np.abs(psi) ** 2
    elif n_mode == "gaussian":
        n = n_amplitude * np.exp(-arg)
    else:
        raise ValueError(f"unknown n_mode {n_mode!r}")
    return WaveState(0.0, psi.astype(complex), n.astype(float), np.zeros(grid.shape), grid)


def self_similar_fields_2d(profile, a, r, t, t_star=1.0, theta=0.0):
    """psi, n, n_t of the exact two-dimensional self-similar solution at
    radii r."""
    if t >= t_star:
        raise ValueError("self-similar data needs t < t*")
    if a <= 0:
        raise ValueError("the self-similar solution needs a > 0")
    tau = t_star - t
    L = a * tau
    P, N, dN = profile.interpolants()
    eta = np.asarray(r) / L
    phase = theta + 1.0 / (a * a * tau) - np.asarray(r) ** 2 / (4.0 * tau)
    psi = P(eta) / L * np.exp(1j * phase)
    n = N(eta) / L ** 2
    nt = (2.0 * N(eta) + eta * dN(eta)) / (a * a * tau ** 3)
    return psi, n, nt


def self_similar_state_2d(profile, a, t, t_star, theta, grid):
    psi, n, nt = self_similar_fields_2d(profile, a, grid.radius(), t, t_star, theta)
    return WaveState(float(t), psi.astype(complex), n, nt, grid)


def self_similar_fields_3d(profile, r, t, t_star=1.0):
    """Leading-order three-dimensional collapse form at radii r."""
    if t >= t_star:
        raise ValueError("self-similar data needs t < t*")
    tau = t_star - t
    ell = math.sqrt(3.0) * tau ** (2.0 / 3.0)
    P, N, dN = profile.interpolants()
    eta = np.asarray(r) / ell
    psi = P(eta) / tau * np.exp(1j * tau ** (-1.0 / 3.0))
    n = N(eta) / (3.0 * tau ** (4.0 / 3.0))
    nt = ((4.0 / 3.0) * N(eta) + (2.0 / 3.0) * eta * dN(eta)) / (3.0 * tau ** (7.0 / 3.0))
    return psi, n, nt


def self_similar_state_3d(profile, t, t_star, grid):
    psi, n, nt = self_similar_fields_3d(profile, grid.radius(), t, t_star)
    return WaveState(float(t), psi.astype(complex), n, nt, grid)


# ---------------------------------------------------------------------
# configuration and driver
# ---------------------------------------------------------------------

@dataclass
class GridSpec:
    kind: str = "radial"
    extent: float = 10.0
    M: int = 512


@dataclass
class ICSpec:
    family: str = "gaussian"
    params: dict = field(default_factory=dict)


@dataclass
class SimConfig:
    dim: int = 2
    grid: GridSpec = field(default_factory=GridSpec)
    dt: float = 1e-3
    t_end: float = 1.0
    output_every: float = 0.01
    ic: ICSpec = field(default_factory=ICSpec)
    cfl: float | None = None
    blowup_factor: float = 1e3
    resolved_scale: float = 0.5
    sobolev_ell: tuple = (0.0,)
    homogeneous: bool = False
    m_values: tuple = ()
    snapshot_every: int = 0
    max_steps: int = 10_000_000
    seed: int = 0

    def validate(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.output_every <= 0:
            raise ValueError("output_every must be positive")
        if self.blowup_factor <= 1:
            raise ValueError("blowup_factor must exceed 1")
        if self.cfl is not None and self.cfl <= 0:
            raise ValueError("cfl must be positive")
        if self.grid.kind not in ("radial", "periodic"):
            raise ValueError("grid kind must be radial or periodic")
        return self

    def to_dict(self):
        d = asdict(self)
        d["sobolev_ell"] = list(self.sobolev_ell)
        d["m_values"] = list(self.m_values)
        return d

    def digest(self):
        d = self.to_dict()
        # 1 and 1.0 name the same configuration
        for f in fields(self):
            if f.type in (float, "float"):
                d[f.name] = float(d[f.name])
        d["ic"]["params"] = {k: float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                             for k, v in d["ic"]["params"].items()}
        blob = json.dumps(d, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_grid(cfg):
    return make_grid(cfg.grid.kind, cfg.dim, cfg.grid.extent, cfg.grid.M)


def initial_state(cfg, grid=None):
    grid = build_grid(cfg) if grid is None else grid
    fam, p = cfg.ic.family, dict(cfg.ic.params)
    if fam == "zero":
        return WaveState(0.0, np.zeros(grid.shape, complex), np.zeros(grid.shape),
                         np.zeros(grid.shape), grid)
    if fam == "gaussian":
        return gaussian_state(grid, **p)
    if fam == "self_similar_2d":
        from .profiles import find_profile_2d
        a = float(p.get("a", 0.5))
        prof = find_profile_2d(a)
        st = self_similar_state_2d(prof, a, float(p.get("t0", 0.0)),
                                   float(p.get("t_star", 1.0)), float(p.get("theta", 0.0)), grid)
        st.t = 0.0
        return st
    if fam == "self_similar_3d":
        from .profiles import find_profile_3d
        prof = find_profile_3d(int(p.get("k", 1)))
        st = self_similar_state_3d(prof, float(p.get("t0", 0.0)), float(p.get("t_star", 1.0)), grid)
        st.t = 0.0
        return st
    if fam == "random_smooth":
        rng = np.random.default_rng(cfg.seed)
        amp = float(p.get("amplitude", 0.5))
        width = float(p.get("width", 1.0))
        r = grid.radius()
        env = np.exp(-(r / width) ** 2)
        c = rng.normal(size=4)
        psi = amp * env * (c[0] + 1j * c[1]) * (1 + 0.3 * np.cos(c[2] * r))
        n = 0.1 * amp * env * c[3]
        return WaveState(0.0, psi.astype(complex), n, np.zeros(grid.shape), grid)
    raise ValueError(f"unknown initial-condition family {fam!r}")


@dataclass
class RunResult:
    series: dg.DiagnosticSeries
    snapshots: list
    final: WaveState
    stop_reason: str
    warnings: list
    steps: int


def series_columns(cfg, grid):
    cols = ["t", "mass", "hamiltonian"]
    cols += [f"P{i}" for i in range(grid.dim)] + ["M"]
    cols += ["grad_psi_l2", "n_l2", "v_l2", "sup_psi", "core_radius"]
    for ell in cfg.sobolev_ell:
        cols += [f"psi_H{ell + 0.5:g}", f"n_H{ell:g}", f"nt_H{ell - 1.0:g}"]
        if cfg.homogeneous:
            cols += [f"hom_psi_H{ell + 0.5:g}", f"hom_n_H{ell:g}", f"hom_nt_H{ell - 1.0:g}"]
    cols += ["V", "V_rate", "V_rhs"]
    if isinstance(grid, RadialGrid):
        for m in cfg.m_values:
            cols += [f"y_m{m:g}", f"U_m{m:g}"]
    return cols


def sample(state, cfg, acc):
    g = state.grid
    H = dg.hamiltonian(state)
    P, M = dg.momenta(state)
    row = {"t": state.t, "mass": dg.mass(state), "hamiltonian": H,
           "grad_psi_l2": math.sqrt(max(g.grad_norm2(state.psi), 0.0)),
           "n_l2": g.l2(state.n), "v_l2": math.sqrt(max(dg.velocity_norm2(state.nt, g), 0.0)),
           "sup_psi": dg.sup_abs(state.psi), "core_radius": dg.core_radius(state)}
    for i in range(g.dim):
        row[f"P{i}"] = P[i]
    row["M"] = float(np.linalg.norm(M)) if np.ndim(M) else float(M)
    for ell in cfg.sobolev_ell:
        a, b, c = dg.norm_triple(state, ell)
        row[f"psi_H{ell + 0.5:g}"], row[f"n_H{ell:g}"], row[f"nt_H{ell - 1.0:g}"] = a, b, c
        if cfg.homogeneous:
            a, b, c = dg.norm_triple(state, ell, homogeneous=True)
            row[f"hom_psi_H{ell + 0.5:g}"], row[f"hom_n_H{ell:g}"], row[f"hom_nt_H{ell - 1.0:g}"] = a, b, c
    row["V"] = dg.variance_static(state) + acc["V"]
    row["V_rate"] = dg.variance_rate(state)
    row["V_rhs"] = dg.variance_rhs(state, H)
    if isinstance(g, RadialGrid):
        for m in cfg.m_values:
            row[f"y_m{m:g}"] = dg.modified_variance_rate(state, m)
            row[f"U_m{m:g}"] = dg.modified_variance_static(state, m) + acc[f"U{m}"]
    return row


def _fluxes(state, cfg):
    out = {"V": dg.variance_density_flux(state)}
    if isinstance(state.grid, RadialGrid):
        for m in cfg.m_values:
            out[f"U{m}"] = dg.modified_variance_flux(state, m)
    return out


def _boundary_leak(state):
    g = state.grid
    scale = max(np.max(np.abs(state.psi)), 1e-300)
    if isinstance(g, RadialGrid):
        edge = np.abs(state.psi[-max(3, g.M // 50):])
    else:
        r = g.radius()
        edge = np.abs(state.psi[r > 0.45 * g.extent])
    return float(np.max(edge) / scale) if edge.size else 0.0


def run(cfg, state=None, keep_snapshots=True):
    cfg.validate()
    grid = build_grid(cfg) if state is None else state.grid
    state = initial_state(cfg, grid) if state is None else state
    if not state.finite():
        raise ValueError("initial data must be finite")
    stepper = Stepper(grid)
    cols = series_columns(cfg, grid)
    series = dg.DiagnosticSeries(columns=cols, meta={"config_hash": cfg.digest()})
    acc = {"V": 0.0}
    for m in cfg.m_values:
        acc[f"U{m}"] = 0.0
    fl = _fluxes(state, cfg)
    warn = []
    g0 = math.sqrt(max(grid.grad_norm2(state.psi), 0.0))
    series.append(sample(state, cfg, acc))
    snaps = [state.copy()] if keep_snapshots and cfg.snapshot_every else []
    n_out = 0
    next_out = cfg.output_every
    steps = 0
    reason = "t_end"
    tol_t = 1e-12 * max(1.0, cfg.t_end)
    while state.t < cfg.t_end - tol_t:
        dt = cfg.dt
        if cfg.cfl is not None:
            psin = math.sqrt(max(dg.mass(state), 1e-300))
            kin = grid.grad_norm2(state.psi) / psin ** 2 if psin > 1e-150 else 0.0
            rate = max(np.max(np.abs(state.n)), kin, 1e-12)
            dt = min(dt, cfg.cfl / rate)
        target = min(next_out, cfg.t_end)
        if state.t + dt >= target - tol_t:
            dt = target - state.t
        new = stepper.step(state, dt)
        steps += 1
        if not new.finite():
            reason = "nonfinite"
            break
        fl_new = _fluxes(new, cfg)
        for key in acc:
            acc[key] += 0.5 * dt * (fl[key] + fl_new[key])
        state, fl = new, fl_new
        gn = math.sqrt(max(grid.grad_norm2(state.psi), 0.0))
        at_output = abs(state.t - target) <= tol_t
        if at_output:
            state.t = target
            series.append(sample(state, cfg, acc))
            n_out += 1
            next_out = cfg.output_every * (n_out + 1)
            if keep_snapshots and cfg.snapshot_every and n_out % cfg.snapshot_every == 0:
                snaps.append(state.copy())
            if not warn or warn[-1][0] != "boundary":
                leak = _boundary_leak(state)
                if leak > 1e-10 and "boundary" not in [w[0] for w in warn]:
                    warn.append(("boundary", state.t, leak))
        if g0 > 0 and gn >= cfg.blowup_factor * g0:
            reason = "blowup"
            break
        amp = np.max(np.abs(state.psi))
        if amp > 0:
            dpsi = grid.gradient(state.psi)
            gmax = np.max(np.sqrt(np.sum(np.abs(dpsi) ** 2, axis=0))) if dpsi.ndim > 1 and not isinstance(grid, RadialGrid) else np.max(np.abs(dpsi))
            if gmax * grid.h / amp > cfg.resolved_scale:
                reason = "resolution"
                break
        if steps >= cfg.max_steps:
            reason = "max_steps"
            break
    if reason != "t_end" and series.t[-1] < state.t:
        series.append(sample(state, cfg, acc))
    series.stop_reason = reason
    series.t_stop = float(state.t)
    for w in warn:
        warnings.warn(f"field not decayed at the boundary (t={w[1]:.4g}, ratio {w[2]:.2e})")
    return RunResult(series=series, snapshots=snaps, final=state, stop_reason=reason,
                     warnings=warn, steps=steps)
