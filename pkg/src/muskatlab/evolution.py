"""Time integrators: RK4 for the contour equation, IMEX for the regularized
systems, the heat-kernel Picard map for the local system, and the exact
linear propagator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg, special

from .core import (FarField, Grid, InterfaceProfile, PhysicsParams, RegularizationParams, Trajectory,
                   check_kernel_exponent, d1)
from .singular_ops import _spectral_input, _wavenumbers, lambda_power, pv_velocity


class BlowUpError(RuntimeError):
    """The slope sup-norm more than doubled within one step."""


@dataclass(frozen=True)
class StepControl:
    T: float = 1.0
    sigma: float = 0.4
    dt_max: float = math.inf
    stride: int = 1

    def __post_init__(self):
        if not (0 < self.sigma <= 1):
            raise ValueError("sigma must lie in (0, 1]")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def dt(self, h: float, vmax: float, explicit_viscosity: float = 0.0) -> float:
        dt = min(self.dt_max, self.sigma * h / max(1.0, vmax))
        if explicit_viscosity > 0:
            dt = min(dt, self.sigma * h * h / (2.0 * explicit_viscosity))
        return dt


def slope_norm(profile: InterfaceProfile) -> float:
    return float(np.max(np.abs(d1(profile.samples, profile.grid.h))))


def _blowup_check(before: float, after: InterfaceProfile, scale: float) -> None:
    s = slope_norm(after)
    if not np.isfinite(s) or (s > 2.0 * before and s > 1e-10 * scale):
        raise BlowUpError("aborted: slope doubling")


def _scale(profile: InterfaceProfile) -> float:
    ff = profile.far_field
    return max(1.0, abs(ff.a - ff.b), float(np.max(np.abs(profile.samples))))


# --------------------------------------------------------------------------
# explicit contour equation


def step_cde(profile: InterfaceProfile, physics: PhysicsParams, dt: float, k1: Optional[np.ndarray] = None,
             threads=None) -> InterfaceProfile:
    """One classical RK4 step of the contour equation (kernel exponent 0)."""
    def rhs(f):
        return pv_velocity(profile.evolved(f, profile.t), physics, 0.0, threads=threads)

    f = profile.samples
    before = slope_norm(profile)
    k1 = rhs(f) if k1 is None else k1
    k2 = rhs(f + 0.5 * dt * k1)
    k3 = rhs(f + 0.5 * dt * k2)
    k4 = rhs(f + dt * k3)
    new = profile.evolved(f + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), profile.t + dt)
    _blowup_check(before, new, _scale(profile))
    return new


# --------------------------------------------------------------------------
# IMEX: explicit nonlocal terms, implicit second difference


def _implicit_solve(rhs: np.ndarray, nu_dt: float, h: float, far_field: FarField) -> np.ndarray:
    """Solve ``(I - nu_dt D2) u = rhs`` with the end rows pinned to ``a`` and ``b``."""
    N = rhs.size
    r = nu_dt / (h * h)
    ab = np.zeros((3, N))
    ab[0, 2:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-2] = -r
    ab[1, 0] = ab[1, -1] = 1.0
    b = rhs.copy()
    b[0] = far_field.a
    b[-1] = far_field.b
    return linalg.solve_banded((1, 1), ab, b, check_finite=True)


def step_imex(profile: InterfaceProfile, physics: PhysicsParams, dt: float, kernel_exponent: float,
              viscosity: float, lambda_coefficient: float = 0.0, velocity: Optional[np.ndarray] = None,
              threads=None) -> InterfaceProfile:
    """IMEX Euler: ``f* = f + dt (F_eps(f) - c Lambda^(1-eps) f)``, then ``(I - dt nu D2) f_new = f*``."""
    eps = check_kernel_exponent(kernel_exponent)
    f = profile.samples
    before = slope_norm(profile)
    v = pv_velocity(profile, physics, eps, threads=threads) if velocity is None else velocity
    explicit = f + dt * v
    if lambda_coefficient:
        explicit = explicit - dt * lambda_coefficient * lambda_power(
            f, profile.grid, 1.0 - eps, backend="kernel", far_field=profile.far_field, threads=threads)
    if viscosity > 0:
        new_f = _implicit_solve(explicit, dt * viscosity, profile.grid.h, profile.far_field)
    else:
        new_f = explicit
    new = profile.evolved(new_f, profile.t + dt)
    _blowup_check(before, new, _scale(profile))
    return new


def step_regularized(profile: InterfaceProfile, physics: PhysicsParams, reg: RegularizationParams, dt: float,
                     velocity: Optional[np.ndarray] = None, threads=None) -> InterfaceProfile:
    """One step of ``f_t = -eps C Lambda^(1-eps) f + eps f_xx + F_eps(f)``."""
    eps = reg.kernel_exponent
    C = reg.resolved_constant() if eps > 0 else 0.0
    return step_imex(profile, physics, dt, eps, eps, eps * C, velocity=velocity, threads=threads)


def step_local(profile: InterfaceProfile, physics: PhysicsParams, eps_prime: float, dt: float,
               velocity: Optional[np.ndarray] = None, threads=None) -> InterfaceProfile:
    """One IMEX step of the local approximate system ``f_t - eps' f_xx = F_eps'(f)``."""
    return step_imex(profile, physics, dt, eps_prime, eps_prime, 0.0, velocity=velocity, threads=threads)


# --------------------------------------------------------------------------
# exact linear propagator


def linear_evolve(values, grid: Grid, t: float, physics: PhysicsParams = PhysicsParams(),
                  far_field: Optional[FarField] = None, pad: int = 2) -> np.ndarray:
    """Apply ``exp(-pi A_rho |k| t)`` to every Fourier mode (decaying data only)."""
    buf, n = _spectral_input(values, grid, far_field, pad)
    k = _wavenumbers(n, grid.h)
    out = np.fft.irfft(np.fft.rfft(buf) * np.exp(-math.pi * physics.density_coefficient * k * t), n)
    return out[:grid.N]


# --------------------------------------------------------------------------
# heat-kernel Picard map


def discrete_heat_weights(tau: float, viscosity: float, h: float, cutoff: float = 1e-18) -> np.ndarray:
    """Discrete Gaussian kernel ``exp(-2r) I_j(2r)``, ``r = viscosity tau / h^2``.

    Exact solution operator of ``u_t = viscosity D2 u`` on the infinite grid;
    positive with unit mass.
    """
    if tau <= 0:
        return np.ones(1)
    r2 = 2.0 * viscosity * tau / (h * h)
    J = 1
    while special.ive(J, r2) > cutoff:
        J *= 2
    j = np.arange(-J, J + 1)
    w = special.ive(np.abs(j), r2)
    keep = w > cutoff * w.max()
    return w[keep] / w[keep].sum()


def _convolve_zero(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    if w.size == 1:
        return values.copy()
    m = (w.size - 1) // 2
    padded = np.concatenate([np.zeros(m), values, np.zeros(m)])
    return np.convolve(padded, w, mode="valid")


@dataclass
class HeatSemigroup:
    """``e^{nu tau Delta}`` for profiles with far-field limits ``a``, ``b``.

    The decaying part ``f - P`` is convolved with the discrete Gaussian; the
    erf-shaped background ``P`` is flowed exactly.
    """

    grid: Grid
    far_field: FarField
    viscosity: float
    background_width: float = 1.0
    _cache: dict = field(default_factory=dict)

    def background(self, tau: float = 0.0) -> np.ndarray:
        ff = self.far_field
        s = math.sqrt(self.background_width ** 2 + 4.0 * self.viscosity * tau)
        return ff.b + (ff.a - ff.b) * 0.5 * special.erfc(self.grid.x / s)

    def weights(self, tau: float) -> np.ndarray:
        key = round(tau, 15)
        if key not in self._cache:
            self._cache[key] = discrete_heat_weights(tau, self.viscosity, self.grid.h)
        return self._cache[key]

    def apply(self, values: np.ndarray, tau: float) -> np.ndarray:
        if tau <= 0:
            return np.array(values, dtype=float)
        g = values - self.background()
        return _convolve_zero(g, self.weights(tau)) + self.background(tau)

    def apply_decaying(self, values: np.ndarray, tau: float) -> np.ndarray:
        if tau <= 0:
            return np.array(values, dtype=float)
        return _convolve_zero(np.asarray(values, dtype=float), self.weights(tau))


@dataclass
class PicardReport:
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    non_contraction: bool = False
    holder_seminorms: list = field(default_factory=list)


def picard_local_solve(initial: InterfaceProfile, eps_prime: float, T: float, max_iter: int = 30, M: int = 16,
                       physics: PhysicsParams = PhysicsParams(), tol: float = 1e-10,
                       forcing: Optional[Callable[[InterfaceProfile], np.ndarray]] = None,
                       background_width: float = 1.0, gamma: float = 0.25, threads=None):
    """Fixed point of ``Sf = e^{eps' t Delta} f0 + int_0^t e^{eps'(t-s) Delta} F(f(s)) ds``.

    The candidate solution lives on ``M + 1`` equispaced times in ``[0, T]``;
    the Duhamel integral uses the trapezoid rule over those times. ``F`` is the
    velocity with kernel exponent ``eps'`` unless ``forcing`` overrides it.
    Iterates from the constant-in-time guess until the sup-norm distance
    between iterates drops below ``tol``.
    """
    if eps_prime <= 0:
        raise ValueError("eps_prime must be positive")
    check_kernel_exponent(eps_prime)
    if M < 1 or T <= 0:
        raise ValueError("need M >= 1 and T > 0")
    from .diagnostics import holder_seminorm

    grid = initial.grid
    times = np.linspace(0.0, T, M + 1)
    dt = T / M
    heat = HeatSemigroup(grid, initial.far_field, eps_prime, background_width)
    f0 = initial.samples
    free = [heat.apply(f0, t) for t in times]

    def F(values, t):
        prof = initial.evolved(values, t)
        if forcing is not None:
            return np.asarray(forcing(prof), dtype=float)
        return pv_velocity(prof, physics, eps_prime, threads=threads)

    current = [f0.copy() for _ in times]
    report = PicardReport()
    strikes = 0
    for it in range(max_iter):
        forces = [F(current[m], times[m]) for m in range(M + 1)]
        new = []
        for m in range(M + 1):
            acc = free[m].copy()
            for l in range(m + 1):
                wgt = dt * (0.5 if l in (0, m) else 1.0)
                acc += wgt * heat.apply_decaying(forces[l], times[m] - times[l])
            new.append(acc)
        dist = max(float(np.max(np.abs(new[m] - current[m]))) for m in range(M + 1))
        current = new
        report.iterations = it + 1
        report.distances.append(dist)
        report.holder_seminorms.append(holder_seminorm(current[-1], grid, gamma))
        if len(report.distances) > 1 and report.distances[-2] > 0:
            ratio = dist / report.distances[-2]
            report.ratios.append(ratio)
            strikes = strikes + 1 if ratio >= 1 else 0
            if strikes >= 3:
                report.non_contraction = True
                break
        if dist == 0.0:
            report.converged = True
            break
        if dist <= tol and len(report.ratios) >= 3 and all(r < 1 for r in report.ratios[-3:]):
            report.converged = True
            break

    traj = Trajectory("picard", {"eps_prime": eps_prime, "T": T, "M": M})
    for m, t in enumerate(times):
        traj.append(initial.evolved(current[m], float(t)))
    return traj, report


# --------------------------------------------------------------------------
# driver


SCHEMES = ("cde", "regularized", "local")


def simulate(initial: InterfaceProfile, scheme: str = "cde", physics: PhysicsParams = PhysicsParams(),
             reg: Optional[RegularizationParams] = None, control: StepControl = StepControl(),
             diagnostics=None, on_step: Optional[Callable] = None, threads=None) -> Trajectory:
    """Step to ``control.T``, keeping a snapshot every ``control.stride`` steps.

    ``diagnostics`` is a :class:`~muskatlab.diagnostics.DiagnosticsConfig`
    (records are computed for every kept snapshot). ``on_step(profile, k)``
    is called after every accepted step. A blow-up stops the run and the
    partial trajectory carries the abort reason.
    """
    from .diagnostics import DiagnosticsConfig, record_diagnostics

    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    reg = reg or RegularizationParams()
    diag = diagnostics or DiagnosticsConfig()
    params = {"scheme": scheme, "A_rho": physics.density_coefficient, "sigma": control.sigma, "T": control.T}
    if scheme != "cde":
        params.update(kernel_exponent=reg.kernel_exponent, local_viscosity=reg.local_viscosity)
    traj = Trajectory(scheme, params)
    traj.append(initial, record_diagnostics(initial, diag))
    if on_step is not None:
        on_step(initial, 0)
    h = initial.grid.h
    prof = initial
    k = 0
    while prof.t < control.T * (1 - 1e-12):
        if scheme == "cde":
            v = pv_velocity(prof, physics, 0.0, threads=threads)
        elif scheme == "regularized":
            v = pv_velocity(prof, physics, reg.kernel_exponent, threads=threads)
        else:
            v = pv_velocity(prof, physics, reg.local_viscosity, threads=threads)
        vmax = float(np.max(np.abs(v)))
        dt = control.dt(h, vmax)
        last = prof.t + dt >= control.T * (1 - 1e-12)
        if last:
            dt = control.T - prof.t
        try:
            if scheme == "cde":
                new = step_cde(prof, physics, dt, k1=v, threads=threads)
            elif scheme == "regularized":
                new = step_regularized(prof, physics, reg, dt, velocity=v, threads=threads)
            else:
                new = step_local(prof, physics, reg.local_viscosity, dt, velocity=v, threads=threads)
        except BlowUpError as exc:
            traj.abort_reason = str(exc)
            break
        if last:
            new = new.evolved(new.samples, control.T)
        prof = new
        k += 1
        if on_step is not None:
            on_step(prof, k)
        if k % control.stride == 0 or last:
            traj.append(prof, record_diagnostics(prof, diag))
    return traj
