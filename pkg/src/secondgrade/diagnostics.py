"""
Trajectory diagnostics: the energy functionals E0..E6 of the remainder R in
self-similar variables, distances to the asymptotic profile, and log-log decay
fits in t + T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import profiles as pr
from . import spectral as sp
from .evolution import SimParams, SimState
from .spectral import Grid3

DEFAULT_K = 64.0
ERROR_KINDS = ("plain", "helmholtz", "velocity")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    tau: float
    E: tuple
    K: float
    beta: np.ndarray
    b: np.ndarray
    envelope: float
    norms: dict = field(default_factory=dict)
    profile_errors: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if len(name) == 2 and name[0] == "E" and name[1].isdigit():
            return self.E[int(name[1])]
        raise AttributeError(name)

    def composite_residuals(self) -> tuple[float, float, float]:
        E = self.E
        return (E[2] - 6.0 * E[0] - E[1], E[4] - 12.0 * E[2] - E[3], E[6] - self.K * E[4] - E[5])


def _norm2_spec(what, grid):
    return sp.spectral_inner(what, what, grid)


def energies_of_remainder(R: np.ndarray, grid: Grid3, a: float, theta: float,
                          K: float = DEFAULT_K) -> tuple:
    """(E0, ..., E6) for a remainder R given on the scaled grid, with a = alpha e^-tau."""
    Rh = sp.forward(R, grid)
    s_hi, s_lo = theta / 2.0 + 1.0, (theta + 1.0) / 2.0
    E0 = 0.5 * (_norm2_spec(sp.fractional_neg_laplacian(Rh, grid, s_hi, "zero"), grid)
                + a * _norm2_spec(sp.fractional_neg_laplacian(Rh, grid, s_lo, "zero"), grid))
    grad2 = _norm2_spec(sp.spectral_gradient(Rh, grid), grid)
    lap_h = sp.spectral_laplacian(Rh, grid)
    lap2 = _norm2_spec(lap_h, grid)
    E1 = 0.5 * (_norm2_spec(Rh, grid) + a * grad2)
    E3 = 0.5 * (grad2 + a * lap2)
    helm = R - a * sp.inverse(lap_h, grid)
    E5 = 0.5 * pr.radial_moment_norm2(helm, grid, 4)
    E2 = 6.0 * E0 + E1
    E4 = 12.0 * E2 + E3
    E6 = K * E4 + E5
    return (E0, E1, E2, E3, E4, E5, E6)


def envelope_quantity(W: np.ndarray, grid: Grid3, a: float) -> float:
    """||W||^2_{L2(4)} + ||grad W||^2 + a ||Lap W||^2 + a^2 || |X|^4 Lap W ||^2."""
    lap = sp.inverse(sp.spectral_laplacian(sp.forward(W, grid), grid), grid)
    return (pr.weighted_norm(W, grid, 4, 0) ** 2 + pr.weighted_norm(W, grid, 0, 1) ** 2
            + a * sp.l2_norm(lap, grid) ** 2 + a**2 * pr.radial_moment_norm2(lap, grid, 4))


def energy_sample(state: SimState, params: SimParams, K: float = DEFAULT_K,
                  b=None, error_ps=(1, 2, np.inf)) -> EnergyReport:
    """Evaluate E0..E6 of the remainder of W = (t+T) w(sqrt(t+T) X).

    The scaled field is obtained by relabelling the grid (exact), then split
    as W = sum beta_i f_i + R. ``b`` (unscaled moments) enables profile errors.
    """
    grid, t, T = state.grid, state.t, params.T
    w = state.physical()
    sgrid, W = pr.scaled_view(w, grid, t, T)
    tau = math.log(t + T)
    a = params.alpha * math.exp(-tau)
    beta, R = pr.project_E_minus1(W, sgrid, warn=False)
    E = energies_of_remainder(R, sgrid, a, params.theta, K)
    b_now = beta.b * (t + T)
    errors = {}
    if b is not None:
        for p in error_ps:
            errors[p] = profile_error(state, b, params, p)
        errors["vel2"] = profile_error(state, b, params, 2, kind="velocity")
    norms = {
        "L2(4)": pr.weighted_norm(W, sgrid, 4, 0),
        "grad": pr.weighted_norm(W, sgrid, 0, 1),
        "R_L2": sp.l2_norm(R, sgrid),
    }
    return EnergyReport(t=t, tau=tau, E=E, K=K, beta=beta.b, b=b_now,
                        envelope=envelope_quantity(W, sgrid, a), norms=norms,
                        profile_errors=errors)


# -- profile errors -------------------------------------------------------------

def lp_norm(v: np.ndarray, grid: Grid3, p: float) -> float:
    """Discrete L^p norm of a vector field (Euclidean magnitude pointwise)."""
    mag = np.sqrt(np.sum(np.reshape(v, (-1,) + grid.shape) ** 2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    if p <= 0:
        raise ValueError("p must be positive")
    return float((np.sum(mag**p) * grid.cell_volume) ** (1.0 / p))


def comparator_velocity(b, t: float, T: float, grid: Grid3) -> np.ndarray:
    """sum_i b_i (t+T)^-3/2 v_i(x / sqrt(t+T)).

    Computed as the Biot-Savart image of the sampled vorticity profile: on the
    lattice, rescaling x -> x / sqrt(t+T) is a relabelling of the grid, under
    which Biot-Savart transforms exactly like the continuum law.
    """
    prof = pr.asymptotic_profile(b, t, T, grid)
    return sp.inverse(sp.biot_savart(sp.forward(prof, grid), grid, check_mean=False), grid)


def profile_error(state: SimState, b, params: SimParams, p: float = 2,
                  kind: str = "plain") -> float:
    """L^p distance between the state and the asymptotic profile with moments b.

    kind = "plain"      ||w - profile||
           "helmholtz"  ||(I - alpha Lap)(w - profile)||
           "velocity"   ||u - sum b_i (t+T)^-3/2 v_i(x/sqrt(t+T))||
    """
    if kind not in ERROR_KINDS:
        raise ValueError(f"unknown error kind {kind!r}")
    grid, t, T = state.grid, state.t, params.T
    if kind == "velocity":
        u = state.velocity()
        return lp_norm(u - comparator_velocity(b, t, T, grid), grid, p)
    diff = state.physical() - pr.asymptotic_profile(b, t, T, grid)
    if kind == "helmholtz":
        dh = sp.forward(diff, grid)
        diff = sp.inverse((1.0 + params.alpha * grid.k2) * dh, grid)
    return lp_norm(diff, grid, p)


def predicted_exponent(theta: float, p: float = 2, kind: str = "plain") -> float:
    """Decay exponent in t+T: -1 - theta + 3/(2p), or -1/2 - theta + 3/(2p) for velocity."""
    inv = 0.0 if np.isinf(p) else 1.5 / p
    base = -0.5 if kind == "velocity" else -1.0
    return base - theta + inv


# -- decay fits ---------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    name: str
    t: np.ndarray
    values: np.ndarray
    window: tuple
    slope: float
    intercept: float
    residual: float
    predicted: float | None
    margin: float | None
    n_window: int

    @property
    def passes(self) -> bool:
        return self.margin is None or self.margin >= 0.0


def fit_decay(t, values, T: float, predicted: float | None = None, window=None,
              name: str = "series", min_samples: int = 8) -> DecayFit:
    """Least-squares slope of log(value) against log(t + T).

    ``window`` is a (lo, hi) range of t; by default the last half of the
    samples in log(t + T). The residual is the RMS deviation of the local
    finite-difference slopes inside the window from the fitted slope, so it
    is in slope units. ``margin = predicted - slope`` (>= 0 means at least as
    fast as predicted).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("t and values must have the same length")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("fit_decay needs strictly positive finite values")
    x = np.log(t + T)
    if window is None:
        lo = x.min() + 0.5 * (x.max() - x.min())
        sel = x >= lo - 1e-12
        window = (float(np.exp(lo) - T), float(t.max()))
    else:
        sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < min_samples:
        raise ValueError(f"fit window holds {int(sel.sum())} samples, need >= {min_samples}")
    xs, ys = x[sel], np.log(v[sel])
    slope, intercept = np.polyfit(xs, ys, 1)
    dx = np.diff(xs)
    keep = dx > 0
    local = np.diff(ys)[keep] / dx[keep]
    residual = float(np.sqrt(np.mean((local - slope) ** 2))) if local.size else 0.0
    margin = None if predicted is None else float(predicted - slope)
    return DecayFit(name=name, t=t, values=v, window=tuple(window), slope=float(slope),
                    intercept=float(intercept), residual=residual, predicted=predicted,
                    margin=margin, n_window=int(sel.sum()))
