"""Conserved quantities, variance identities, rate fits and inequality
checks for the scalar Zakharov system

    i psi_t + Lap psi = n psi,    n_tt - Lap n = Lap |psi|^2,

with n_t + div v = 0 and v = -grad U (so Lap U = n_t).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridError, PeriodicGrid, RadialGrid


class FitRefused(ValueError):
    """The data do not support the requested fit."""


# ---------------------------------------------------------------------
# series container
# ---------------------------------------------------------------------

@dataclass
class DiagnosticSeries:
    columns: list
    rows: list = field(default_factory=list)
    stop_reason: str = ""
    t_stop: float = float("nan")
    meta: dict = field(default_factory=dict)

    def append(self, row):
        if self.rows and not row["t"] > self.rows[-1][0]:
            raise ValueError("sample times must increase strictly")
        self.rows.append([float(row.get(c, float("nan"))) for c in self.columns])

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    @property
    def t(self):
        return self["t"]

    def has(self, name):
        return name in self.columns

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(float(x)) for x in r])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text):
        rd = csv.reader(io.StringIO(text))
        cols = next(rd)
        s = cls(columns=cols)
        for r in rd:
            if r:
                s.rows.append([float(x) for x in r])
        return s


@dataclass
class BlowupFit:
    t_star: float
    exponent: float
    amplitude: float
    residual: float
    window: tuple
    quantity: str = ""


# ---------------------------------------------------------------------
# field functionals
# ---------------------------------------------------------------------

def mass(state):
    return state.grid.quadrature(np.abs(state.psi) ** 2)


def potential_U(nt, grid):
    if isinstance(grid, PeriodicGrid):
        return grid.invert_laplacian(nt - nt.mean())
    return grid.invert_laplacian(nt)


def recover_velocity(nt, grid):
    """v = -grad(Lap^{-1} n_t). Radial grids return the radial component,
    periodic grids an array of shape (d, ...)."""
    if isinstance(grid, PeriodicGrid):
        F = np.fft.fftn(nt)
        if abs(F.flat[0]) > 1e-10 * max(np.max(np.abs(nt)), 1e-300) * nt.size:
            raise GridError("periodic n_t must have zero mean")
        return -grid.gradient(grid.invert_laplacian(nt))
    return -grid.gradient(grid.invert_laplacian(nt))


def velocity_norm2(nt, grid):
    """int |v|^2 = -int U n_t, consistent with the discrete Laplacian."""
    if not np.any(nt):
        return 0.0
    U = potential_U(nt, grid)
    return float(-grid.quadrature(U * nt))


def hamiltonian(state):
    g = state.grid
    psi2 = np.abs(state.psi) ** 2
    return (g.grad_norm2(state.psi) + g.quadrature(state.n * psi2)
            + 0.5 * velocity_norm2(state.nt, g) + 0.5 * g.quadrature(state.n ** 2))


def momenta(state):
    """Linear momentum vector and angular momentum (scalar in 2D, vector in
    3D). Radially symmetric states carry none."""
    g = state.grid
    if isinstance(g, RadialGrid):
        d = g.dim
        return np.zeros(d), (0.0 if d == 2 else np.zeros(3) if d == 3 else 0.0)
    psi = state.psi
    dpsi = g.gradient(psi)
    v = recover_velocity(state.nt, g) if np.any(state.nt) else np.zeros((g.dim,) + g.shape)
    dens = np.array([np.imag(np.conj(psi) * dpsi[i]) + state.n * v[i] for i in range(g.dim)])
    P = np.array([g.quadrature(dens[i]) for i in range(g.dim)])
    x = g.x
    if g.dim == 1:
        M = 0.0
    elif g.dim == 2:
        M = g.quadrature(x[0] * dens[1] - x[1] * dens[0])
    else:
        M = np.array([g.quadrature(x[1] * dens[2] - x[2] * dens[1]),
                      g.quadrature(x[2] * dens[0] - x[0] * dens[2]),
                      g.quadrature(x[0] * dens[1] - x[1] * dens[0])])
    return P, M


def _x_dot(grid, vec):
    """x . vec for a radial component or a periodic vector field."""
    if isinstance(grid, RadialGrid):
        return grid.r * vec
    return sum(xi * vi for xi, vi in zip(grid.x, vec))


def _weight_grad(grid, dp):
    """grad p . F where p is radial with derivative dp(r)."""
    r = grid.radius()
    if isinstance(grid, RadialGrid):
        return dp(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = [np.where(r > 0, xi / r, 0.0) for xi in grid.x]
    return [dp(r) * u for u in unit]


def variance_density_flux(state, v=None):
    """int (x . v) n, the integrand accumulated in time for V."""
    g = state.grid
    if not np.any(state.nt):
        return 0.0
    if v is None:
        v = recover_velocity(state.nt, g)
    return g.quadrature(_x_dot(g, v) * state.n)


def variance_static(state):
    """(1/4) int |x|^2 |psi|^2."""
    g = state.grid
    return 0.25 * g.quadrature(g.radius() ** 2 * np.abs(state.psi) ** 2)


def variance_rate(state):
    """dV/dt = Im int (x . grad psi) psi* + int (x . v) n."""
    g = state.grid
    dpsi = g.gradient(state.psi)
    term = g.quadrature(np.imag(np.conj(state.psi) * _x_dot(g, dpsi)))
    return term + variance_density_flux(state)


def variance_rhs(state, H=None):
    """d H - (d - 2) |grad psi|^2 - (d - 1) |v|^2."""
    g = state.grid
    d = g.dim
    if H is None:
        H = hamiltonian(state)
    return d * H - (d - 2) * g.grad_norm2(state.psi) - (d - 1) * velocity_norm2(state.nt, g)


def variance_identity_residual(series, min_samples=5):
    """Max relative mismatch between the centred second difference of the
    recorded V(t) and the right-hand side of the variance identity.

    Needs ``V`` and ``V_rhs`` columns sampled at a uniform cadence."""
    t = series.t
    if len(t) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(t)}")
    V, rhs = series["V"], series["V_rhs"]
    dt = np.diff(t)
    if np.max(np.abs(dt - dt.mean())) > 1e-9 * max(1.0, abs(dt.mean())):
        raise ValueError("variance residual needs uniformly spaced samples")
    h = dt.mean()
    d2 = (V[2:] - 2 * V[1:-1] + V[:-2]) / h ** 2
    scale = max(np.max(np.abs(rhs)), 1e-300)
    if np.max(np.abs(rhs)) == 0 and np.max(np.abs(d2)) == 0:
        return 0.0
    return float(np.max(np.abs(d2 - rhs[1:-1])) / scale)


def weight_p(s):
    return 2.0 * (np.sqrt(1.0 + s * s) - 1.0)


def weight_dp_m(r, m):
    """d/dr of p_m(r) = m^2 p(r/m)."""
    return 2.0 * r / np.sqrt(1.0 + (r / m) ** 2)


def modified_variance_rate(state, m, v_sign=-1.0):
    """y_m = -Im int (grad p_m . grad psi) psi*  + v_sign * int (grad p_m . v) n.

    The default v_sign = -1 is y_m = -dU_m/dt for
    U_m = (1/2) int p_m |psi|^2 + int_0^t int (grad p_m . v) n; with
    p_m = |x|^2 this is -2 dV/dt.
    """
    g = state.grid
    if not isinstance(g, RadialGrid):
        raise GridError("modified variance rate is defined for radial states")
    r = g.r
    dp = weight_dp_m(r, m)
    dpsi = g.gradient(state.psi)
    term = -g.quadrature(np.imag(np.conj(state.psi) * dp * dpsi))
    if np.any(state.nt):
        v = recover_velocity(state.nt, g)
        term += v_sign * g.quadrature(dp * v * state.n)
    return float(term)


def modified_variance_flux(state, m):
    """int (grad p_m . v) n, accumulated in time for U_m."""
    g = state.grid
    if not np.any(state.nt):
        return 0.0
    v = recover_velocity(state.nt, g)
    return g.quadrature(weight_dp_m(g.r, m) * v * state.n)


def modified_variance_static(state, m):
    g = state.grid
    return 0.5 * g.quadrature(m * m * weight_p(g.r / m) * np.abs(state.psi) ** 2)


def core_radius(state):
    """sqrt(int |x|^2 |psi|^4 / int |psi|^4), a collapse length scale."""
    g = state.grid
    q = np.abs(state.psi) ** 4
    den = g.quadrature(q)
    if den == 0:
        return float("nan")
    return math.sqrt(g.quadrature(g.radius() ** 2 * q) / den)


def sup_abs(f):
    return float(np.max(np.abs(f)))


def norm_triple(state, ell, homogeneous=False):
    """(|psi|_{H^{l+1/2}}, |n|_{H^l}, |n_t|_{H^{l-1}})."""
    from .grid import sobolev_norm
    g = state.grid
    return (sobolev_norm(state.psi, g, ell + 0.5, homogeneous),
            sobolev_norm(state.n, g, ell, homogeneous),
            sobolev_norm(state.nt, g, ell - 1.0, homogeneous))


# ---------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------

def strauss_ratio(f, grid, R_cut):
    """sup_{r>R} |f|^2 / (R^{1-d} |grad f|_{L^2(r>R)} |f|_{L^2(r>R)})."""
    if not isinstance(grid, RadialGrid) or grid.dim < 2:
        raise GridError("strauss_ratio needs a radial grid with d >= 2")
    f = np.asarray(f)
    mask = grid.r > R_cut
    if not mask.any():
        return 0.0
    sup2 = float(np.max(np.abs(f[mask]) ** 2))
    if sup2 == 0.0:
        return 0.0
    df = grid.derivative(f, 1)
    w = grid.weights[mask]
    gn = math.sqrt(float(np.sum(w * np.abs(df[mask]) ** 2)))
    fn = math.sqrt(float(np.sum(w * np.abs(f[mask]) ** 2)))
    den = R_cut ** (1 - grid.dim) * gn * fn
    if den == 0.0:
        raise ZeroDivisionError("vanishing denominator in the Strauss ratio")
    return sup2 / den


def symbol_matrix(xi, alpha):
    xi = np.asarray(xi, dtype=float)
    d = xi.size
    return (1 - alpha) * np.outer(xi, xi) + alpha * (xi @ xi) * np.eye(d)


def vector_symbol_check(xi, alpha, rtol=1e-12):
    """Eigenvalues of M_d = (1 - alpha) xi xi^T + alpha |xi|^2 I and whether
    |xi|^2 I <= M_d <= alpha |xi|^2 I holds."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise ValueError("xi must be nonzero")
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    ev = np.linalg.eigvalsh(symbol_matrix(xi, alpha))
    k2 = float(xi @ xi)
    ok = ev.min() >= k2 * (1 - rtol) and ev.max() <= alpha * k2 * (1 + rtol)
    return ev, bool(ok)


# ---------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------

def last_decade(t, q):
    """Indices of the final decade of growth of q."""
    q = np.asarray(q)
    top = q[-1]
    start = len(q) - 1
    while start > 0 and q[start - 1] >= top / 10.0:
        start -= 1
    return np.arange(start, len(q))


def fit_exponent(t, q, t_star):
    """Least-squares slope of log q against -log(t* - t)."""
    t, q = np.asarray(t), np.asarray(q)
    tau = t_star - t
    if np.any(tau <= 0):
        raise FitRefused("samples at or beyond t*")
    pos = q > 0
    if pos.sum() < 3:
        raise FitRefused("fewer than three positive samples")
    tau, q = tau[pos], q[pos]
    A = np.vstack([-np.log(tau), np.ones_like(tau)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(q), rcond=None)
    fitted = A @ coef
    resid = float(np.sqrt(np.mean((np.log(q) - fitted) ** 2)))
    return float(coef[0]), float(math.exp(coef[1])), resid


def estimate_tstar(series, quantity="grad_psi_l2", theta=1.0, window=None, min_points=4):
    """Fit q^{-1/theta} = c (t* - t) over the last decade of growth of q,
    then the exponent of q against (t* - t) on the same window."""
    t = series.t if hasattr(series, "t") else np.asarray(series[0])
    q = series[quantity] if hasattr(series, "t") else np.asarray(series[1])
    ok = np.isfinite(q)
    t, q = t[ok], q[ok]
    idx = last_decade(t, q) if window is None else np.nonzero((t >= window[0]) & (t <= window[1]))[0]
    if idx.size < min_points:
        raise FitRefused(f"only {idx.size} samples in the fit window")
    tw, qw = t[idx], q[idx]
    if np.any(np.diff(qw) <= 0):
        raise FitRefused("quantity is not monotonically growing over the fit window")
    y = qw ** (-1.0 / theta)
    slope, icpt = np.polyfit(tw, y, 1)
    if slope >= 0:
        raise FitRefused("no finite-time singularity suggested by the data")
    t_star = -icpt / slope
    lin_res = float(np.sqrt(np.mean((y - (slope * tw + icpt)) ** 2)) / np.mean(np.abs(y)))
    expo, amp, res = fit_exponent(tw, qw, t_star)
    return BlowupFit(t_star=float(t_star), exponent=expo, amplitude=amp,
                     residual=max(lin_res, res), window=(float(tw[0]), float(tw[-1])),
                     quantity=quantity)


def theta_bound(d, ell):
    return (4.0 - d + 2.0 * ell) / 4.0


@dataclass
class RateReport:
    d: int
    ell: float
    theta_fit: float
    theta_bound: float
    passed: bool
    t_star: float
    components: dict


def rate_bound_check(series, d, ell, t_star=None, slack=0.05, homogeneous=False):
    """Fit the growth exponent of the norm triple against the bound
    theta_l = (4 - d + 2 l)/4."""
    tag = "hom_" if homogeneous else ""
    names = [f"{tag}psi_H{ell + 0.5:g}", f"{tag}n_H{ell:g}", f"{tag}nt_H{ell - 1.0:g}"]
    for nm in names:
        if not series.has(nm):
            raise ValueError(f"series lacks column {nm}")
    if t_star is None:
        if series.stop_reason not in ("blowup", "resolution", "nonfinite"):
            raise FitRefused("no blowup detected in this series")
        t_star = series.meta.get("t_star_fit")
        if t_star is None:
            # sup|psi| ~ 1/(t* - t) in both 2D and 3D self-similar collapse,
            # whereas |grad psi| only grows like (t* - t)^{-2/3} in 3D
            q = "sup_psi" if series.has("sup_psi") else "grad_psi_l2"
            t_star = estimate_tstar(series, q).t_star
    t = series.t
    comps = [series[nm] for nm in names]
    triple = sum(comps)
    idx = last_decade(t, triple)
    if idx.size < 4:
        raise FitRefused("too few samples in the final decade")
    th, _, _ = fit_exponent(t[idx], triple[idx], t_star)
    parts = {}
    for nm, c in zip(names, comps):
        parts[nm] = fit_exponent(t[idx], c[idx], t_star)[0]
    bound = theta_bound(d, ell)
    return RateReport(d=d, ell=ell, theta_fit=th, theta_bound=bound,
                      passed=bool(th >= bound - slack), t_star=float(t_star), components=parts)
