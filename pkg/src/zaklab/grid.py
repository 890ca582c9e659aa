"""Grids and the discrete operators shared by the profile, evolution and
diagnostic code.

Two kinds of grid are supported:

* ``RadialGrid``: uniform staggered nodes ``r_j = (j + 1/2) h`` on
  ``(0, r_max)`` for radially symmetric fields in dimension 1, 2 or 3.
  There is no node at the origin; evenness is imposed by reflection and
  the field is pinned to zero on the outer face ``r = r_max``.
* ``PeriodicGrid``: uniform Fourier collocation on the box
  ``[-L/2, L/2)^d``.

The radial Laplacian is a three-point flux-form operator
``L = W^{-1} A`` with ``A`` symmetric and ``W`` the (diagonal) quadrature
weights, so it is self-adjoint in the discrete ``L^2`` inner product used
for all integrals.  The flux coefficients are chosen so that ``L r^2 = 2d``
holds exactly at every node.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


class GridError(ValueError):
    """Raised for inconsistent grid/field combinations."""


class RadialGrid:
    kind = "radial"

    def __init__(self, dim: int, extent: float, M: int):
        if dim not in (1, 2, 3):
            raise GridError(f"radial grids support d in {{1,2,3}}, got {dim}")
        if M < 16:
            raise GridError("need at least 16 points")
        if extent <= 0:
            raise GridError("extent must be positive")
        self.dim = int(dim)
        self.extent = float(extent)
        self.M = int(M)
        self.h = self.extent / self.M
        self.r = (np.arange(self.M) + 0.5) * self.h
        self.shape = (self.M,)
        h, r = self.h, self.r

        # Midpoint weights are spectrally accurate for even integrands
        # (d = 1, 3).  For d = 2 the integrand r f(r) is odd, so add the
        # leading Euler-Maclaurin endpoint correction -h^2 f(0)/24 with
        # f(0) ~ (9 f_0 - f_1)/8.
        if self.dim == 1:
            w = np.full(self.M, h)
        elif self.dim == 2:
            w = r * h
            w[0] -= 9.0 * h * h / 192.0
            w[1] += h * h / 192.0
        else:
            w = r * r * h
        self._w = w
        self.weights = SPHERE_AREA[self.dim] * w

        # flux coefficient on face j+1/2, fixed by exactness on r^2
        faces = (np.arange(self.M) + 1.0) * h
        self._c = self.dim * np.cumsum(w) / (h * faces)
        # symmetric tridiagonal A (W L = A), Dirichlet ghost f_M = -f_{M-1}
        diag = np.zeros(self.M)
        diag[:-1] -= self._c[:-1]
        diag[1:] -= self._c[:-1]
        diag[-1] -= 2.0 * self._c[-1]
        self._A_diag = diag
        self._A_off = self._c[:-1].copy()

    def __repr__(self):
        return f"RadialGrid(dim={self.dim}, extent={self.extent}, M={self.M})"

    def key(self):
        return ("radial", self.dim, self.extent, self.M)

    @property
    def coords(self):
        return self.r

    def radius(self):
        return self.r

    # -- banded helpers -------------------------------------------------
    def banded(self, alpha, beta):
        """Return ``alpha*W + beta*A`` in LAPACK banded layout (l = u = 1)."""
        ab = np.zeros((3, self.M), dtype=np.result_type(alpha, beta, float))
        ab[0, 1:] = beta * self._A_off
        ab[1] = alpha * self._w + beta * self._A_diag
        ab[2, :-1] = beta * self._A_off
        return ab

    def apply_A(self, f):
        out = self._A_diag * f
        out[:-1] += self._A_off * f[1:]
        out[1:] += self._A_off * f[:-1]
        return out

    def laplacian(self, f):
        return self.apply_A(f) / self._w

    def invert_laplacian(self, f):
        return solve_banded((1, 1), self.banded(0.0, 1.0), self._w * f)

    def matrix(self):
        """Dense Laplacian matrix (for Newton solves)."""
        A = (np.diag(self._A_diag) + np.diag(self._A_off, 1)
             + np.diag(self._A_off, -1))
        return A / self._w[:, None]

    # -- integrals ------------------------------------------------------
    def quadrature(self, f, weight_power=None):
        f = np.asarray(f)
        if weight_power is not None:
            f = f * self.r ** weight_power
        return float(np.sum(self.weights * f))

    def inner(self, f, g):
        return np.sum(self.weights * np.conj(f) * g)

    def l2(self, f):
        return math.sqrt(max(self.quadrature(np.abs(f) ** 2), 0.0))

    def grad_norm2(self, f):
        """Discrete ``int |grad f|^2``, consistent with ``laplacian``."""
        Af = self.apply_A(f)
        return float(-SPHERE_AREA[self.dim] * np.real(np.sum(np.conj(f) * Af)))

    def gradient(self, f):
        """Radial derivative at the nodes (even reflection at the origin)."""
        ext = np.concatenate(([f[0]], f, [-f[-1]]))
        return (ext[2:] - ext[:-2]) / (2.0 * self.h)

    def derivative(self, f, order=1, parity=1):
        """Sixth-order centred d/dr or d^2/dr^2; ``parity`` is +1 for even
        fields and -1 for odd ones (radial vector components)."""
        pad = 3
        ext = np.concatenate((parity * f[pad - 1::-1], f, -f[:-pad - 1:-1]))
        n = len(f)
        if order == 1:
            cs = _D1
        elif order == 2:
            cs = _D2
        else:
            raise GridError("order must be 1 or 2")
        out = np.zeros(n, dtype=np.result_type(f, float))
        for off, c in cs:
            out += c * ext[pad + off:pad + off + n]
        return out / self.h ** order

    def divergence(self, v):
        """``v' + (d - 1) v / r`` for a radial vector component (odd in r)."""
        return self.derivative(v, 1, parity=-1) + (self.dim - 1) * v / self.r

    # -- spectral transform --------------------------------------------
    def sobolev_norm(self, f, s, homogeneous=False):
        if not homogeneous and s in (1, 2):
            # integer orders: quadrature of derivatives, sixth order
            fr = self.derivative(f, 1)
            tot = self.quadrature(np.abs(f) ** 2) + s * self.quadrature(np.abs(fr) ** 2)
            if s == 2:
                lap = self.derivative(f, 2) + (self.dim - 1) * fr / self.r
                tot += self.quadrature(np.abs(lap) ** 2)
            return math.sqrt(max(tot, 0.0))
        if self.dim == 2:
            # midpoint Hankel sums alias badly at high k in 2D; use the
            # discrete eigenbasis of the Laplacian instead (second order)
            lam, V, sqw = self.eig()
            coef = math.sqrt(SPHERE_AREA[2]) * (V.T @ (sqw * f))
            mult = lam ** s if homogeneous else (1.0 + lam) ** s
            return math.sqrt(float(np.sum(mult * np.abs(coef) ** 2)))
        k, B = _radial_transform(self.dim, self.extent, self.M)
        coef = B @ f
        mult = k ** (2 * s) if homogeneous else (1.0 + k * k) ** s
        return math.sqrt(float(np.sum(mult * np.abs(coef) ** 2)))

    def eig(self):
        """Eigenpairs of the symmetrised Laplacian, cached per grid."""
        return _radial_eig(self.dim, self.extent, self.M)

    def apply_function(self, f, func):
        """Apply ``func(-L)`` to ``f`` through the eigenbasis of ``L``."""
        lam, V, sqw = self.eig()
        g = V.T @ (sqw * f)
        return (V @ (func(lam) * g)) / sqw


_D1 = [(-3, -1 / 60), (-2, 3 / 20), (-1, -3 / 4), (1, 3 / 4), (2, -3 / 20),
       (3, 1 / 60)]
_D2 = [(-3, 1 / 90), (-2, -3 / 20), (-1, 3 / 2), (0, -49 / 18), (1, 3 / 2),
       (2, -3 / 20), (3, 1 / 90)]


@functools.lru_cache(maxsize=8)
def _radial_transform(dim, extent, M):
    # d = 1, 3 only.  Rows project onto eigenfunctions of -Delta on the
    # ball with a Dirichlet wall at r = extent, normalised so sum |coef|^2 is the
    # squared L^2 norm of the expanded field.
    grid = RadialGrid(dim, extent, M)
    r, w, R = grid.r, grid._w, extent
    m = np.arange(1, M + 1)
    if dim == 1:
        k = (m - 0.5) * np.pi / R
        phi = np.cos(np.outer(k, r))
        norm = np.full(M, R / 2.0)
    else:
        k = m * np.pi / R
        phi = np.sin(np.outer(k, r)) / r[None, :]
        norm = np.full(M, R / 2.0)
    B = phi * w[None, :] * np.sqrt(SPHERE_AREA[dim] / norm)[:, None]
    return k, B


@functools.lru_cache(maxsize=8)
def _radial_eig(dim, extent, M):
    grid = RadialGrid(dim, extent, M)
    sqw = np.sqrt(grid._w)
    d = grid._A_diag / grid._w
    e = grid._A_off / (sqw[:-1] * sqw[1:])
    lam, V = eigh_tridiagonal(-d, -e)
    return lam, V, sqw


class PeriodicGrid:
    kind = "periodic"

    def __init__(self, dim: int, extent: float, M: int):
        if dim not in (1, 2, 3):
            raise GridError(f"periodic grids support d in {{1,2,3}}, got {dim}")
        if M < 16:
            raise GridError("need at least 16 points per dimension")
        if extent <= 0:
            raise GridError("extent must be positive")
        self.dim = int(dim)
        self.extent = float(extent)
        self.M = int(M)
        self.h = self.extent / self.M
        self.shape = (self.M,) * self.dim
        x1 = -0.5 * self.extent + self.h * np.arange(self.M)
        k1 = 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)
        self.x = np.meshgrid(*([x1] * self.dim), indexing="ij")
        self.k = np.meshgrid(*([k1] * self.dim), indexing="ij")
        self.k2 = sum(ki ** 2 for ki in self.k)
        self.dV = self.h ** self.dim

    def __repr__(self):
        return f"PeriodicGrid(dim={self.dim}, extent={self.extent}, M={self.M})"

    def key(self):
        return ("periodic", self.dim, self.extent, self.M)

    @property
    def coords(self):
        return self.x

    def radius(self):
        return np.sqrt(sum(xi ** 2 for xi in self.x))

    def fft(self, f):
        return np.fft.fftn(f)

    def ifft(self, F, real=False):
        out = np.fft.ifftn(F)
        return out.real if real else out

    def _apply(self, f, mult):
        out = np.fft.ifftn(mult * np.fft.fftn(f))
        return out.real if np.isrealobj(f) else out

    def laplacian(self, f):
        return self._apply(f, -self.k2)

    def invert_laplacian(self, f, tol=1e-10):
        F = np.fft.fftn(f)
        scale = max(np.max(np.abs(f)), 1e-300) * f.size
        if abs(F.flat[0]) > tol * scale:
            raise GridError("periodic inverse Laplacian needs zero-mean input")
        with np.errstate(divide="ignore", invalid="ignore"):
            mult = np.where(self.k2 > 0, -1.0 / self.k2, 0.0)
        out = np.fft.ifftn(mult * F)
        return out.real if np.isrealobj(f) else out

    def quadrature(self, f, weight_power=None):
        f = np.asarray(f)
        if weight_power is not None:
            f = f * self.radius() ** weight_power
        return float(np.sum(f) * self.dV)

    def inner(self, f, g):
        return np.sum(np.conj(f) * g) * self.dV

    def l2(self, f):
        return math.sqrt(self.quadrature(np.abs(f) ** 2))

    def grad_norm2(self, f):
        F = np.fft.fftn(f)
        return float(np.sum(self.k2 * np.abs(F) ** 2) * self.dV / f.size)

    def gradient(self, f):
        F = np.fft.fftn(f)
        out = np.array([np.fft.ifftn(1j * ki * F) for ki in self.k])
        return out.real if np.isrealobj(f) else out

    def divergence(self, v):
        total = sum(np.fft.ifftn(1j * ki * np.fft.fftn(vi))
                    for ki, vi in zip(self.k, v))
        return total.real if np.isrealobj(v) else total

    def sobolev_norm(self, f, s, homogeneous=False):
        F = np.fft.fftn(f)
        if homogeneous:
            with np.errstate(divide="ignore"):
                mult = np.where(self.k2 > 0, self.k2 ** s, 0.0)
        else:
            mult = (1.0 + self.k2) ** s
        return math.sqrt(float(np.sum(mult * np.abs(F) ** 2) * self.dV / f.size))

    def apply_function(self, f, func):
        return self._apply(f, func(self.k2))


def make_grid(kind: str, dim: int, extent: float, M: int):
    if kind == "radial":
        return RadialGrid(dim, extent, M)
    if kind in ("periodic", "periodic-box"):
        return PeriodicGrid(dim, extent, M)
    raise GridError(f"unknown grid kind {kind!r}")


def _check(f, grid, d):
    f = np.asarray(f)
    if d is not None and d != grid.dim:
        raise GridError(f"field lives on a d={grid.dim} grid, got d={d}")
    if f.shape != grid.shape:
        raise GridError(f"field shape {f.shape} does not match grid {grid.shape}")
    return f


def laplacian(f, grid, d=None):
    """Delta f; radial grids use the second-order flux form with f'(0) = 0."""
    return grid.laplacian(_check(f, grid, d))


def invert_laplacian(f, grid, d=None):
    """Solve Delta g = f (g = 0 on r = r_max, or zero mean on a box)."""
    return grid.invert_laplacian(_check(f, grid, d))


def quadrature(f, grid, weight_power=None):
    """Integral of f over R^d (radial measure includes the sphere area)."""
    return grid.quadrature(_check(f, grid, None), weight_power)


def sobolev_norm(f, grid, s, homogeneous=False):
    """H^s norm with weights <xi>^s (or |xi|^s when ``homogeneous``)."""
    if s < -2:
        raise GridError("Sobolev index below -2 is not supported")
    f = _check(f, grid, None)
    if s == 0 and not homogeneous:
        return grid.l2(f)
    return grid.sobolev_norm(f, s, homogeneous)
