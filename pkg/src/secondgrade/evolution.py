"""
Time integration of the regularized second-grade vorticity system (nu = 1)

    d/dt (w - alpha Lap w) + eps Lap^2 w - Lap w + curl((w - alpha Lap w) x u) = 0,

in unscaled variables on the periodic box. In Fourier variables this reads
d/dt w_hat = sigma(k) w_hat + N(w_hat) with the bounded linear symbol
sigma = -(|k|^2 + eps |k|^4) / (1 + alpha |k|^2).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import profiles as pr
from . import spectral as sp
from .spectral import Grid3

log = logging.getLogger(__name__)

INIT_KINDS = ("profile-multiple", "gaussian-random-divfree", "perturbed-profile")


class CFLError(RuntimeError):
    """Raised when the requested step violates the advective CFL bound."""

    def __init__(self, dt: float, suggested_dt: float, umax: float):
        super().__init__(f"dt = {dt:.3g} exceeds the CFL limit {suggested_dt:.3g} (max |u| = {umax:.3g})")
        self.dt = dt
        self.suggested_dt = suggested_dt
        self.umax = umax


class SimulationDiverged(RuntimeError):
    """Non-finite values appeared; ``last_good_t`` is the last finite sample time."""

    def __init__(self, last_good_t: float):
        super().__init__(f"non-finite state after t = {last_good_t:.6g}")
        self.last_good_t = last_good_t


class HorizonError(ValueError):
    """The self-similar support would reach the box boundary before t_end."""


@dataclass(frozen=True)
class SimParams:
    alpha: float = 1.0
    epsilon: float = 0.0
    T: float = 1.0
    theta: float = 1.0
    dt: float = 0.05
    t_end: float = 1.0
    output_every: int = 1
    cfl: float = 0.5
    nonlinear: bool = True

    def __post_init__(self):
        checks = [
            (self.alpha >= 0, "alpha must be >= 0"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (self.T >= 1, "T must be >= 1"),
            (0 < self.theta < 1.5, "theta must lie in (0, 3/2)"),
            (self.dt > 0, "dt must be positive"),
            (self.t_end > 0, "t_end must be positive"),
            (int(self.output_every) == self.output_every and self.output_every >= 1,
             "output_every must be a positive integer"),
            (self.cfl > 0, "cfl must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    @property
    def tau0(self) -> float:
        return math.log(self.T)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    def with_(self, **kw) -> "SimParams":
        return replace(self, **kw)


def epsilon_constraint_ok(params: SimParams, M: float = 2.0, gamma: float = 1.0) -> bool:
    """Whether eps <= alpha M gamma (3/2 - theta)^2; emits a warning when it fails."""
    bound = params.alpha * M * gamma * (1.5 - params.theta) ** 2
    ok = params.epsilon <= bound
    if not ok:
        warnings.warn(f"epsilon = {params.epsilon:g} exceeds alpha*M*gamma*(3/2-theta)^2 = {bound:g}",
                      UserWarning, stacklevel=2)
    return ok


@dataclass(frozen=True)
class SimState:
    grid: Grid3
    t: float
    what: np.ndarray = field(repr=False)

    def physical(self) -> np.ndarray:
        return sp.inverse(self.what, self.grid)

    def velocity(self) -> np.ndarray:
        return sp.inverse(sp.biot_savart(self.what, self.grid, check_mean=False), self.grid)


def state_from_field(w: np.ndarray, grid: Grid3, t: float = 0.0) -> SimState:
    what = sp.leray_project(sp.forward(w, grid), grid)
    return SimState(grid=grid, t=float(t), what=what)


# -- right-hand side ---------------------------------------------------------

def linear_symbol(k2, params: SimParams):
    """sigma(k) = -(|k|^2 + eps |k|^4) / (1 + alpha |k|^2), given |k|^2."""
    k2 = np.asarray(k2, dtype=float)
    return -(k2 + params.epsilon * k2**2) / (1.0 + params.alpha * k2)


def _rhs_with_umax(what: np.ndarray, grid: Grid3, params: SimParams) -> tuple[np.ndarray, float]:
    helm = 1.0 + params.alpha * grid.k2
    u = sp.inverse(sp.biot_savart(what, grid), grid)
    q = sp.inverse(helm * what, grid)
    prod = sp.dealias(sp.forward(np.cross(q, u, axis=0), grid), grid)
    umax = float(np.sqrt(np.max(np.sum(u**2, axis=0))))
    return -sp.spectral_curl(prod, grid) / helm, umax


def nonlinear_rhs(what: np.ndarray, grid: Grid3, params: SimParams) -> np.ndarray:
    """-(1 + alpha|k|^2)^-1 i k x F[(w - alpha Lap w) x u], the product dealiased."""
    return _rhs_with_umax(what, grid, params)[0]


def max_velocity(what: np.ndarray, grid: Grid3) -> float:
    u = sp.inverse(sp.biot_savart(what, grid), grid)
    return float(np.sqrt(np.max(np.sum(u**2, axis=0))))


def cfl_limit(umax: float, grid: Grid3, params: SimParams) -> float:
    return math.inf if umax == 0.0 else params.cfl * grid.h / umax


# -- stepping ---------------------------------------------------------------

def step(state: SimState, params: SimParams, dt: float | None = None) -> SimState:
    """One integrating-factor Heun step.

    w*      = E (w + dt N(w))
    w_next  = E w + dt/2 (E N(w) + N(w*)),   E = exp(sigma dt),

    exact on the linear part and second order overall.
    """
    grid = state.grid
    dt = params.dt if dt is None else dt
    E = np.exp(linear_symbol(grid.k2, params) * dt)
    what = state.what
    if params.nonlinear:
        n0, umax = _rhs_with_umax(what, grid, params)
        limit = cfl_limit(umax, grid, params)
        if dt > limit:
            raise CFLError(dt, limit, umax)
        pred = E * (what + dt * n0)
        n1 = nonlinear_rhs(pred, grid, params)
        new = E * what + 0.5 * dt * (E * n0 + n1)
    else:
        new = E * what
    new = sp.leray_project(new, grid)
    return SimState(grid=grid, t=state.t + dt, what=new)


Observer = Callable[[float, SimState], None]


def check_horizon(grid: Grid3, params: SimParams):
    """Refuse runs whose self-similar width 6 sqrt(t_end + T) exceeds L."""
    need = 6.0 * math.sqrt(params.t_end + params.T)
    if need > grid.box_length:
        raise HorizonError(f"6*sqrt(t_end+T) = {need:.3g} exceeds box length {grid.box_length:.3g}")


def evolve(w0: np.ndarray | SimState, grid: Grid3, params: SimParams,
           observer: Observer | None = None, *, enforce_horizon: bool = True) -> SimState:
    """Integrate from w0 to t_end, calling ``observer(t, state)`` at step 0 and
    every ``output_every`` steps (and at the final step)."""
    if enforce_horizon:
        check_horizon(grid, params)
    state = w0 if isinstance(w0, SimState) else state_from_field(w0, grid)
    n_steps = params.n_steps
    dt = params.t_end / n_steps
    if observer is not None:
        observer(state.t, state)
    for i in range(1, n_steps + 1):
        new = step(state, params, dt)
        if not np.all(np.isfinite(new.what)):
            raise SimulationDiverged(state.t)
        state = new
        if observer is not None and (i % params.output_every == 0 or i == n_steps):
            observer(state.t, state)
    log.debug("evolve finished at t = %g after %d steps", state.t, n_steps)
    return state


def linear_evolution(w0: np.ndarray, grid: Grid3, params: SimParams, t: float) -> np.ndarray:
    """Closed-form linear flow: inverse(exp(sigma t) forward(w0))."""
    E = np.exp(linear_symbol(grid.k2, params) * t)
    return sp.inverse(E * sp.forward(w0, grid), grid)


# -- smallness condition ------------------------------------------------------

@dataclass(frozen=True)
class SmallnessResult:
    value: float
    threshold: float
    passed: bool
    terms: dict


def _lap(v, grid):
    return sp.inverse(sp.spectral_laplacian(sp.forward(v, grid), grid), grid)


def smallness_lhs(W0: np.ndarray, grid: Grid3, params: SimParams, gamma: float = 1.0) -> SmallnessResult:
    """Left side of the small-data condition in scaled variables.

    ||W0||^2_{L2(4)} + ||grad W0||^2 + a ||Lap W0||^2 + a^2 || |X|^4 Lap W0 ||^2,
    a = alpha / T, evaluated with ``grid`` read as the scaled grid.
    """
    a = params.alpha / params.T
    lap = _lap(W0, grid)
    terms = {
        "L2(4)": pr.weighted_norm(W0, grid, 4, 0) ** 2,
        "grad": pr.weighted_norm(W0, grid, 0, 1) ** 2,
        "lap": a * sp.l2_norm(lap, grid) ** 2,
        "x4lap": a**2 * pr.radial_moment_norm2(lap, grid, 4),
    }
    value = float(sum(terms.values()))
    thr = gamma * (1.5 - params.theta) ** 2
    return SmallnessResult(value, thr, value <= thr, terms)


def smallness_lhs_unscaled(w0: np.ndarray, grid: Grid3, params: SimParams,
                           gamma: float = 1.0) -> SmallnessResult:
    """The same condition written for unscaled data w0 and shift T."""
    T, alpha = params.T, params.alpha
    lap = _lap(w0, grid)
    terms = {
        "L2": T**0.5 * sp.l2_norm(w0, grid) ** 2,
        "x4": T**-3.5 * pr.radial_moment_norm2(w0, grid, 4),
        "grad": T**1.5 * pr.weighted_norm(w0, grid, 0, 1) ** 2,
        "lap": alpha * T**1.5 * sp.l2_norm(lap, grid) ** 2,
        "x4lap": alpha**2 * T**-1.5 * pr.radial_moment_norm2(lap, grid, 4),
    }
    value = float(sum(terms.values()))
    thr = gamma * (1.5 - params.theta) ** 2
    return SmallnessResult(value, thr, value <= thr, terms)


# -- initial data -------------------------------------------------------------

def random_divfree(grid: Grid3, seed: int, width: float = math.sqrt(2.0)) -> np.ndarray:
    """curl psi with psi_j = exp(-|x|^2 / (2 width^2)) * (random polynomial of degree <= 2)."""
    rng = np.random.default_rng(seed)
    x1, x2, x3 = grid.coords
    monomials = [np.ones(grid.shape), x1, x2, x3, x1 * x2, x2 * x3, x1 * x3, x1**2, x2**2, x3**2]
    env = np.exp(-grid.radius2 / (2.0 * width**2))
    psi = np.empty((3,) + grid.shape)
    for j in range(3):
        c = rng.standard_normal(len(monomials))
        c[1:] /= width
        c[4:] /= width
        psi[j] = env * sum(ci * m for ci, m in zip(c, monomials))
    return sp.inverse(sp.spectral_curl(sp.forward(psi, grid), grid), grid)


def make_initial_data(kind: str, amplitude: float, seed: int, grid: Grid3,
                      coeffs=(1.0, 0.0, 0.0), T: float = 1.0) -> np.ndarray:
    """Divergence-free, mean-free, Gaussian-enveloped initial vorticity.

    The field is built at unit scale as W(X) and returned as
    w0(x) = T^-2 W(x / sqrt(T)), so that profile-multiple data sit exactly on
    the asymptotic ray at t = 0 and the moments b do not depend on T. Random
    parts are normalized to the L^2 norm of f_1 (at unit scale) so that
    ``amplitude`` means the same thing for every kind.
    """
    if kind not in INIT_KINDS:
        raise ValueError(f"unknown initial-data kind {kind!r}; expected one of {INIT_KINDS}")
    if T < 1:
        raise ValueError("T must be >= 1")
    sgrid = pr.scaled_grid(grid, 0.0, T)
    basis = pr.profile_basis(sgrid)
    ref = sp.l2_norm(basis.f[0], sgrid)
    coeffs = np.asarray(coeffs, dtype=float)
    if kind == "profile-multiple":
        W = np.tensordot(coeffs, basis.f, axes=1)
    else:
        r = random_divfree(sgrid, seed)
        r *= ref / sp.l2_norm(r, sgrid)
        W = r if kind == "gaussian-random-divfree" else np.tensordot(coeffs, basis.f, axes=1) + 0.5 * r
    what = sp.leray_project(sp.forward(amplitude * W / T**2, grid), grid)
    what[:, 0, 0, 0] = 0.0
    return sp.inverse(what, grid)
