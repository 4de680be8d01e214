"""
Fourier infrastructure on the periodic cube [-L/2, L/2)^3.

Fields are plain numpy arrays. A real vector field has shape (3, n, n, n)
with axis order (component, x1, x2, x3); its spectral counterpart is the
half-spectrum produced by ``numpy.fft.rfftn`` over the last three axes,
shape (3, n, n, n//2 + 1).

Derivative symbols use the wavenumber lattice with the Nyquist entries set
to zero on every axis. This keeps i*k Hermitian (so inverse transforms of
derivatives are exactly real) and makes the discrete calculus consistent:
div grad == laplacian, curl curl == grad div - laplacian, curl biot_savart
== identity on divergence-free fields, all at the level of round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

FLOAT_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid standing in for R^3.

    Sample (i, j, l) sits at x = (-L/2 + i*h, -L/2 + j*h, -L/2 + l*h), so the
    origin is the grid point (n/2, n/2, n/2).
    """

    n: int
    box_length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n!r}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length!r}")

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @cached_property
    def x1d(self) -> np.ndarray:
        return -0.5 * self.box_length + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> np.ndarray:
        """Physical coordinates, shape (3, n, n, n), measured from the box center."""
        return np.array(np.meshgrid(self.x1d, self.x1d, self.x1d, indexing="ij"))

    @cached_property
    def radius2(self) -> np.ndarray:
        return np.sum(self.coords**2, axis=0)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Full 1D lattice 2*pi/L * (0, 1, ..., n/2-1, -n/2, ..., -1)."""
        return 2.0 * np.pi / self.box_length * np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def mode_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer mode numbers broadcastable to the half-spectrum shape."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)
        mh = np.arange(self.n // 2 + 1)
        return m[:, None, None], m[None, :, None], mh[None, None, :]

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Derivative wavenumbers (Nyquist zeroed), broadcastable per axis."""
        scale = 2.0 * np.pi / self.box_length
        out = []
        for m in self.mode_index:
            k = scale * m.astype(float)
            k[np.abs(m) == self.n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.kvec
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def nonzero_k(self) -> np.ndarray:
        return self.k2 > 0

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum coefficient in the full sum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.n / 3.0
        mx, my, mz = self.mode_index
        return (np.abs(mx) <= cut) & (np.abs(my) <= cut) & (np.abs(mz) <= cut)


def make_grid(n: int, box_length: float) -> Grid3:
    return Grid3(n, float(box_length))


def _check_shape(arr: np.ndarray, expected: tuple[int, ...], what: str):
    if arr.shape[-3:] != expected:
        raise ValueError(f"{what} has trailing shape {arr.shape[-3:]}, expected {expected}")


def forward(field: np.ndarray, grid: Grid3) -> np.ndarray:
    """Real samples -> half-spectrum coefficients over the last three axes."""
    field = np.asarray(field, dtype=float)
    _check_shape(field, grid.shape, "field")
    return np.fft.rfftn(field, axes=(-3, -2, -1))


def inverse(spec: np.ndarray, grid: Grid3) -> np.ndarray:
    spec = np.asarray(spec)
    _check_shape(spec, grid.spectral_shape, "spectral field")
    return np.fft.irfftn(spec, s=grid.shape, axes=(-3, -2, -1))


# -- spectral calculus ------------------------------------------------------

def spectral_gradient(fhat: np.ndarray, grid: Grid3) -> np.ndarray:
    """Gradient of a scalar (result shape (3, ...)) or of each component of a
    vector field (result shape (3, 3, ...), index [derivative, component])."""
    kx, ky, kz = grid.kvec
    return np.stack([1j * kx * fhat, 1j * ky * fhat, 1j * kz * fhat])


def spectral_divergence(what: np.ndarray, grid: Grid3) -> np.ndarray:
    kx, ky, kz = grid.kvec
    return 1j * (kx * what[0] + ky * what[1] + kz * what[2])


def spectral_curl(what: np.ndarray, grid: Grid3) -> np.ndarray:
    kx, ky, kz = grid.kvec
    a, b, c = what
    return 1j * np.stack([ky * c - kz * b, kz * a - kx * c, kx * b - ky * a])


def spectral_laplacian(what: np.ndarray, grid: Grid3) -> np.ndarray:
    return -grid.k2 * what


def spectral_bilaplacian(what: np.ndarray, grid: Grid3) -> np.ndarray:
    return grid.k2**2 * what


def leray_project(what: np.ndarray, grid: Grid3) -> np.ndarray:
    """Remove the gradient part: w - k (k.w)/|k|^2 for k != 0."""
    kx, ky, kz = grid.kvec
    kdotw = kx * what[0] + ky * what[1] + kz * what[2]
    ratio = np.zeros_like(kdotw)
    nz = grid.nonzero_k
    ratio[nz] = kdotw[nz] / grid.k2[nz]
    return np.stack([what[0] - kx * ratio, what[1] - ky * ratio, what[2] - kz * ratio])


def mean_mode_ratio(what: np.ndarray) -> float:
    """|w_hat(0)| / ||w_hat||, the relative size of the k = 0 coefficient."""
    total = np.sqrt(np.sum(np.abs(what) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(what[..., 0, 0, 0]) ** 2)) / total)


def biot_savart(what: np.ndarray, grid: Grid3, *, check_mean: bool = True) -> np.ndarray:
    """Velocity with curl u = w and div u = 0: u_hat = i k x w_hat / |k|^2.

    Raises ValueError when the k = 0 coefficient of w exceeds 1e-8 of the
    field (vorticities are curls and must be mean-free).
    """
    _check_shape(what, grid.spectral_shape, "vorticity")
    if check_mean and mean_mode_ratio(what) > 1e-8:
        raise ValueError("biot_savart needs a mean-free vorticity (k = 0 mode is not negligible)")
    inv = np.zeros(grid.spectral_shape)
    inv[grid.nonzero_k] = 1.0 / grid.k2[grid.nonzero_k]
    return spectral_curl(what, grid) * inv


def dealias(what: np.ndarray, grid: Grid3) -> np.ndarray:
    """Two-thirds rule: zero every coefficient with some |mode index| > n/3."""
    return np.where(grid.dealias_mask, what, 0.0)


def neg_laplacian_power(what: np.ndarray, grid: Grid3, power: float) -> np.ndarray:
    """(-Delta)^power as the multiplier |k|^(2*power); k = 0 maps to 0 unless power == 0."""
    if power == 0:
        return what.copy()
    mult = np.zeros(grid.spectral_shape)
    nz = grid.nonzero_k
    mult[nz] = grid.k2[nz] ** power
    return what * mult


def fractional_neg_laplacian(what: np.ndarray, grid: Grid3, s: float,
                             zero_mode: str = "strict") -> np.ndarray:
    """Negative-order operator (-Delta)^(-s): multiply by |k|^(-2s), k = 0 -> 0.

    Valid for 0 <= s < 7/4. ``zero_mode="strict"`` rejects inputs whose mean
    coefficient is not negligible (s > 0); ``"zero"`` silently discards it.
    """
    if not 0.0 <= s < 1.75:
        raise ValueError(f"order s must satisfy 0 <= s < 7/4, got {s}")
    if zero_mode not in ("strict", "zero"):
        raise ValueError(f"unknown zero_mode policy {zero_mode!r}")
    if s > 0 and zero_mode == "strict" and mean_mode_ratio(what) > 1e-8:
        raise ValueError("fractional_neg_laplacian needs a mean-free input")
    return neg_laplacian_power(what, grid, -s)


# -- norms and inner products ----------------------------------------------

def l2_inner(f: np.ndarray, g: np.ndarray, grid: Grid3) -> float:
    """Rectangle-rule L^2 inner product of real samples (all leading axes summed)."""
    return float(np.sum(f * g) * grid.cell_volume)


def l2_norm(f: np.ndarray, grid: Grid3) -> float:
    return float(np.sqrt(np.sum(f * f) * grid.cell_volume))


def spectral_inner(fhat: np.ndarray, ghat: np.ndarray, grid: Grid3) -> float:
    """Discrete L^2 inner product evaluated from half-spectrum coefficients."""
    s = np.sum(grid.half_weights * (fhat.conj() * ghat).real)
    return float(s * grid.cell_volume / grid.n**3)


def spectral_norm(fhat: np.ndarray, grid: Grid3) -> float:
    return float(np.sqrt(max(spectral_inner(fhat, fhat, grid), 0.0)))


def divergence_residual(what: np.ndarray, grid: Grid3) -> float:
    """||k . w_hat|| / || |k| w_hat ||, zero for a field without nonzero modes."""
    kx, ky, kz = grid.kvec
    kdotw = np.sum(np.abs(kx * what[0] + ky * what[1] + kz * what[2]) ** 2)
    scale = np.sum(grid.k2 * np.sum(np.abs(what) ** 2, axis=0))
    if scale == 0.0:
        return 0.0
    return float(np.sqrt(kdotw / scale))


# -- resampling -------------------------------------------------------------

def _interp_matrix(grid: Grid3, points: np.ndarray) -> np.ndarray:
    """Rows evaluate the trigonometric interpolant of a full-FFT axis at ``points``."""
    k = grid.wavenumbers
    phase = np.outer(points - grid.x1d[0], k)
    mat = np.exp(1j * phase)
    nyq = grid.n // 2
    mat[:, nyq] = np.cos(phase[:, nyq])
    return mat / grid.n


def evaluate_on_tensor_points(field: np.ndarray, grid: Grid3, points: np.ndarray) -> np.ndarray:
    """Spectrally interpolate real samples at the tensor product points^3.

    ``field`` has shape (..., n, n, n); the result has shape (..., m, m, m)
    with m = len(points). Points are taken modulo the period.
    """
    full = np.fft.fftn(field, axes=(-3, -2, -1))
    mat = _interp_matrix(grid, np.asarray(points, dtype=float))
    out = np.einsum("am,...mjl->...ajl", mat, full)
    out = np.einsum("bj,...ajl->...abl", mat, out)
    out = np.einsum("cl,...abl->...abc", mat, out)
    return out.real


def resample(field: np.ndarray, src: Grid3, dst: Grid3) -> np.ndarray:
    """Move a band-limited field between grids on the same box by copying Fourier
    modes (truncation or zero-padding). Nyquist modes are discarded."""
    if not np.isclose(src.box_length, dst.box_length, rtol=1e-14, atol=0.0):
        raise ValueError("resample needs grids with the same box length")
    _check_shape(field, src.shape, "field")
    full = np.fft.fftn(field, axes=(-3, -2, -1))
    m = min(src.n, dst.n) // 2 - 1
    keep = np.r_[0:m + 1, -m:0]
    out = np.zeros(field.shape[:-3] + dst.shape, dtype=complex)
    ix = np.ix_(keep, keep, keep)
    out[(...,) + ix] = full[(...,) + ix]
    scale = dst.n**3 / src.n**3
    return np.fft.ifftn(out, axes=(-3, -2, -1)).real * scale
