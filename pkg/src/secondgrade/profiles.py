"""
Closed-form first-order asymptotic objects and the quadratures built on them.

The Gaussian G(X) = (4 pi)^(-3/2) exp(-|X|^2/4), the linear weights p_i, the
eigenfunctions f_i = curl(G e_i) = p_i G of the scaled operator at eigenvalue
-1, their Biot-Savart images v_i, antisymmetric first moments, weighted norms
and the change to self-similar variables X = x / sqrt(t+T), tau = log(t+T).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral as sp
from .spectral import Grid3

GAUSS_PEAK = (4.0 * np.pi) ** -1.5

# smooth cutoff applied to the non-periodic coefficient X in X . grad
TAPER_START = 0.45
TAPER_END = 0.50


class BoundaryDecayWarning(UserWarning):
    """A field (or a requested profile) is not negligible near the box boundary."""


def gaussian(grid: Grid3) -> np.ndarray:
    return GAUSS_PEAK * np.exp(-0.25 * grid.radius2)


def _check_index(i):
    if i not in (1, 2, 3):
        raise ValueError(f"profile index must be 1, 2 or 3, got {i!r}")


def weight_p(i: int, grid: Grid3) -> np.ndarray:
    """p_1 = (0, -X3, X2)/2 and its cyclic analogues; div p_i = 0, curl p_i = e_i."""
    _check_index(i)
    e = np.zeros(3)
    e[i - 1] = 1.0
    return 0.5 * np.cross(e[:, None, None, None], grid.coords, axis=0)


def eigenfunction_f(i: int, grid: Grid3) -> np.ndarray:
    return weight_p(i, grid) * gaussian(grid)


def eigenfunction_f_from_curl(i: int, grid: Grid3) -> np.ndarray:
    """f_i computed as the spectral curl of G e_i (second route, for cross-checks)."""
    _check_index(i)
    ge = np.zeros((3,) + grid.shape)
    ge[i - 1] = gaussian(grid)
    return sp.inverse(sp.spectral_curl(sp.forward(ge, grid), grid), grid)


@lru_cache(maxsize=2)
def _velocity_profiles(grid: Grid3) -> np.ndarray:
    out = np.empty((3, 3) + grid.shape)
    for i in (1, 2, 3):
        fh = sp.forward(eigenfunction_f(i, grid), grid)
        out[i - 1] = sp.inverse(sp.biot_savart(fh, grid, check_mean=False), grid)
    out.setflags(write=False)
    return out


def velocity_profile(i: int, grid: Grid3) -> np.ndarray:
    """v_i, the Biot-Savart image of f_i on the periodic box (cached per grid)."""
    _check_index(i)
    return _velocity_profiles(grid)[i - 1].copy()


@dataclass(frozen=True)
class ProfileBasis:
    """G, p_i, f_i and (lazily) v_i on one grid; arrays are read-only."""

    grid: Grid3
    G: np.ndarray
    p: np.ndarray
    f: np.ndarray

    @property
    def v(self) -> np.ndarray:
        return _velocity_profiles(self.grid)


@lru_cache(maxsize=4)
def profile_basis(grid: Grid3) -> ProfileBasis:
    p = np.array([weight_p(i, grid) for i in (1, 2, 3)])
    g = gaussian(grid)
    f = p * g
    for arr in (g, p, f):
        arr.setflags(write=False)
    return ProfileBasis(grid=grid, G=g, p=p, f=f)


def profile_combination(beta, grid: Grid3) -> np.ndarray:
    """sum_i beta_i f_i = (beta x X / 2) G, without building the basis."""
    beta = np.asarray(beta, dtype=float)
    return 0.5 * np.cross(beta[:, None, None, None], grid.coords, axis=0) * gaussian(grid)


# -- boundary decay -----------------------------------------------------------

def boundary_ratio(field: np.ndarray, grid: Grid3, margin: float | None = None) -> float:
    """max |field| within ``margin`` (default L/6) of the box boundary over max |field|."""
    if margin is None:
        margin = grid.box_length / 6.0
    mag = np.sqrt(np.sum(np.reshape(field, (-1,) + grid.shape) ** 2, axis=0))
    peak = mag.max()
    if peak == 0.0:
        return 0.0
    edge = 0.5 * grid.box_length - margin
    near = np.any(np.abs(grid.coords) >= edge, axis=0)
    return float(mag[near].max() / peak)


def decays_at_boundary(field: np.ndarray, grid: Grid3, tol: float = 1e-8) -> bool:
    return boundary_ratio(field, grid) <= tol


# -- moments ----------------------------------------------------------------

@dataclass(frozen=True)
class MomentVector:
    """Antisymmetric first moments b_i = int p_i . w dx.

    ``forms`` holds the two equivalent single-component integrals
    (e.g. int X2 w3 and -int X3 w2 for i = 1) whose spread is ``discrepancy``.
    """

    b: np.ndarray
    forms: np.ndarray
    discrepancy: float
    reliable: bool

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.b, dtype=dtype)


def first_moments(w: np.ndarray, grid: Grid3, *, warn: bool = True) -> MomentVector:
    """b_i = int p_i . w dx, i.e. b = 1/2 int X x w dX, by the rectangle rule."""
    x = grid.coords
    dv = grid.cell_volume
    b = 0.5 * np.sum(np.cross(x, w, axis=0), axis=(1, 2, 3)) * dv
    forms = np.empty((3, 2))
    for i, (a, c) in enumerate(((1, 2), (2, 0), (0, 1))):
        forms[i, 0] = np.sum(x[a] * w[c]) * dv
        forms[i, 1] = -np.sum(x[c] * w[a]) * dv
    discrepancy = float(np.max(np.abs(forms[:, 0] - forms[:, 1])))
    reliable = decays_at_boundary(w, grid)
    if warn and not reliable:
        warnings.warn("first_moments: field does not decay before the boundary; "
                      "moments may be polluted by periodic images", BoundaryDecayWarning,
                      stacklevel=2)
    return MomentVector(b=b, forms=forms, discrepancy=discrepancy, reliable=reliable)


def all_first_moments(w: np.ndarray, grid: Grid3) -> np.ndarray:
    """3x3 matrix M[i, j] = int X_i w_j dx."""
    x = grid.coords
    return np.einsum("iabc,jabc->ij", x, w) * grid.cell_volume


# -- weighted norms ---------------------------------------------------------

def _derivatives(u: np.ndarray, grid: Grid3, order: int) -> np.ndarray:
    """All partial derivatives of the given order, stacked along axis 0."""
    uh = sp.forward(u, grid)
    parts = [uh]
    for _ in range(order):
        parts = [sp.spectral_gradient(p, grid) for p in parts]
    stacked = np.concatenate([np.reshape(p, (-1,) + grid.spectral_shape) for p in parts])
    return sp.inverse(stacked, grid)


def weighted_norm(u: np.ndarray, grid: Grid3, m: int = 0, deriv: int = 0) -> float:
    """|| (1+|x|^2)^(m/2) D^deriv u ||_{L^2}, derivatives taken spectrally."""
    if m not in range(5):
        raise ValueError(f"weight order m must be in 0..4, got {m}")
    if deriv not in (0, 1, 2):
        raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")
    vals = _derivatives(u, grid, deriv) if deriv else np.reshape(u, (-1,) + grid.shape)
    weight = (1.0 + grid.radius2) ** m
    return float(np.sqrt(np.sum(weight * vals**2) * grid.cell_volume))


def h2_weighted_norm(u: np.ndarray, grid: Grid3, m: int = 4) -> float:
    return float(np.sqrt(sum(weighted_norm(u, grid, m, d) ** 2 for d in (0, 1, 2))))


def radial_moment_norm2(u: np.ndarray, grid: Grid3, power: float) -> float:
    """|| |x|^power u ||^2 (u may carry any number of leading component axes)."""
    vals = np.reshape(u, (-1,) + grid.shape)
    return float(np.sum(grid.radius2**power * vals**2) * grid.cell_volume)


# -- projection onto the -1 eigenspace ---------------------------------------

def project_E_minus1(W: np.ndarray, grid: Grid3, *, warn: bool = True) -> tuple[MomentVector, np.ndarray]:
    """Split W = sum beta_i f_i + R with all first moments of R zero."""
    beta = first_moments(W, grid, warn=warn)
    return beta, W - profile_combination(beta.b, grid)


def asymptotic_profile(b, t: float, T: float, grid: Grid3) -> np.ndarray:
    """sum_i b_i (t+T)^-2 f_i(x / sqrt(t+T)) sampled on the grid."""
    if t < 0 or T < 1:
        raise ValueError("asymptotic_profile needs t >= 0 and T >= 1")
    s = t + T
    if np.sqrt(s) > grid.box_length / 6.0:
        warnings.warn(f"profile width sqrt(t+T) = {np.sqrt(s):.3g} exceeds L/6",
                      BoundaryDecayWarning, stacklevel=2)
    b = np.asarray(b, dtype=float)
    x = grid.coords / np.sqrt(s)
    g = GAUSS_PEAK * np.exp(-0.25 * np.sum(x**2, axis=0))
    out = np.zeros((3,) + grid.shape)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        out += b[i] * 0.5 * np.cross(e[:, None, None, None], x, axis=0) * g
    return out / s**2


# -- self-similar variables -------------------------------------------------

def scaled_grid(grid: Grid3, t: float, T: float) -> Grid3:
    """Grid whose samples are X = x / sqrt(t+T) for the physical samples x."""
    return Grid3(grid.n, grid.box_length / np.sqrt(t + T))


def scaled_view(w: np.ndarray, grid: Grid3, t: float, T: float) -> tuple[Grid3, np.ndarray]:
    """Exact change of variables by relabelling: W(X) = (t+T) w(sqrt(t+T) X).

    The same samples are reinterpreted on a box of side L / sqrt(t+T); no
    interpolation is involved.
    """
    return scaled_grid(grid, t, T), (t + T) * w


def scaled_velocity_view(u: np.ndarray, grid: Grid3, t: float, T: float) -> tuple[Grid3, np.ndarray]:
    return scaled_grid(grid, t, T), np.sqrt(t + T) * u


def _resample(field: np.ndarray, grid: Grid3, factor: float) -> np.ndarray:
    """Samples of x -> field(factor * x) on the same grid, zero outside the box."""
    pts = factor * grid.x1d
    inside = (pts >= grid.x1d[0] - 1e-12) & (pts <= -grid.x1d[0] + 1e-12)
    out = sp.evaluate_on_tensor_points(field, grid, pts)
    mask = inside[:, None, None] & inside[None, :, None] & inside[None, None, :]
    return out * mask


def to_scaled(w: np.ndarray, grid: Grid3, t: float, T: float) -> np.ndarray:
    """W(X) = (t+T) w(sqrt(t+T) X) on the same grid, by spectral interpolation.

    Points sqrt(t+T) X that leave the box are only allowed when w is negligible
    near the boundary (they are then taken to be zero); otherwise ValueError.
    """
    s = t + T
    if s <= 0:
        raise ValueError("t + T must be positive")
    factor = np.sqrt(s)
    if factor > 1.0 + 1e-14 and not decays_at_boundary(w, grid):
        raise ValueError("to_scaled would sample outside the box where the field is not negligible")
    if abs(factor - 1.0) < 1e-15:
        return s * np.array(w, dtype=float)
    return s * _resample(w, grid, factor)


def from_scaled(W: np.ndarray, grid: Grid3, t: float, T: float) -> np.ndarray:
    """Inverse of :func:`to_scaled`: w(x) = (t+T)^-1 W(x / sqrt(t+T))."""
    s = t + T
    factor = 1.0 / np.sqrt(s)
    if factor > 1.0 + 1e-14 and not decays_at_boundary(W, grid):
        raise ValueError("from_scaled would sample outside the box where the field is not negligible")
    if abs(factor - 1.0) < 1e-15:
        return np.array(W, dtype=float) / s
    return _resample(W, grid, factor) / s


# -- the scaled linear operator (diagnostic only) -----------------------------

@lru_cache(maxsize=8)
def taper(grid: Grid3) -> np.ndarray:
    """C-infinity radial cutoff: 1 for |X| <= 0.45 L, 0 for |X| >= 0.5 L."""
    r = np.sqrt(grid.radius2)
    r0, r1 = TAPER_START * grid.box_length, TAPER_END * grid.box_length
    s = np.clip((r1 - r) / (r1 - r0), 0.0, 1.0)

    def bump(z):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = np.exp(-1.0 / z[pos])
        return out

    num = bump(s)
    chi = num / (num + bump(1.0 - s))
    chi.setflags(write=False)
    return chi


def x_dot_grad(u: np.ndarray, grid: Grid3) -> np.ndarray:
    """X . grad u with spectral derivatives and the tapered coefficient X."""
    uh = sp.forward(u, grid)
    grads = sp.inverse(sp.spectral_gradient(uh, grid), grid)
    xt = grid.coords * taper(grid)
    return np.einsum("j...,j...->...", xt, grads) if u.ndim == 3 else np.einsum("jabc,jiabc->iabc", xt, grads)


def apply_L(W: np.ndarray, grid: Grid3) -> np.ndarray:
    """Scaled-variable operator: Delta W + W + (X/2) . grad W."""
    lap = sp.inverse(sp.spectral_laplacian(sp.forward(W, grid), grid), grid)
    return lap + W + 0.5 * x_dot_grad(W, grid)


def apply_L_adjoint(P: np.ndarray, grid: Grid3) -> np.ndarray:
    """Formal adjoint Delta - (X/2) . grad - 1/2, evaluated pointwise for linear P.

    The p_i are not periodic, so spectral derivatives do not apply; for a
    linear field Delta P = 0 and X . grad P = P hold exactly, so this routine
    differentiates by finite differences of the affine samples (exact for
    polynomials of degree <= 1) instead.
    """
    h = grid.h
    grads = np.stack([np.gradient(P, h, axis=ax) for ax in (1, 2, 3)])
    lap = np.zeros_like(P)
    for ax in (1, 2, 3):
        d1 = np.gradient(P, h, axis=ax)
        lap += np.gradient(d1, h, axis=ax)
    xdg = np.einsum("jabc,jiabc->iabc", grid.coords, grads)
    return lap - 0.5 * xdg - 0.5 * P
