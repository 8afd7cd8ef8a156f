"""Monitored quantities: extrema, slopes, lap number, norms, Hölder seminorm,
energy-law and weak-form residuals, dispersion fits and monotonicity checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import InterfaceProfile, PhysicsParams, Trajectory, d1, d2, d3
from .scenarios import smooth_step
from .singular_ops import _edge_distances, arctan_flux, energy_tail

_trapezoid = np.trapezoid if hasattr(np, "trapezoid") else np.trapz


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Options for :func:`record_diagnostics`.

    ``slope_floor=None`` means ``1e-7 max(1, (a - b) / L)``; the Hölder window
    keeps pairs with ``h <= |x - y| <= holder_window * L``.
    """

    gamma: float = 0.25
    probe_fraction: float = 0.9
    slope_floor: Optional[float] = None
    holder_window: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (0, 1/2)")
        if not (0.0 < self.probe_fraction <= 1.0):
            raise ValueError("probe_fraction must lie in (0, 1]")
        if not (0.0 < self.holder_window <= 1.0):
            raise ValueError("holder_window must lie in (0, 1]")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-snapshot monitored quantities of the height ``f`` (tilt excluded)."""

    t: float
    M: float
    m: float
    slope_max: float
    slope_min: float
    lap: int
    l2_dxf: float
    l2_dx3f: float
    holder_d2f: float
    ff_dev_left: float
    ff_dev_right: float

    def as_dict(self) -> dict:
        return asdict(self)


def default_slope_floor(profile: InterfaceProfile) -> float:
    ff = profile.far_field
    return 1e-7 * max(1.0, (ff.a - ff.b) / profile.grid.L)


def lap_number(slopes: np.ndarray, floor: float) -> int:
    """Strict sign changes of ``slopes`` after zeroing ``|slope| <= floor``."""
    s = np.sign(np.where(np.abs(slopes) <= floor, 0.0, slopes))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def holder_seminorm(values: np.ndarray, grid, gamma: float, window: float = 0.25) -> float:
    """``max |g(x) - g(y)| / |x - y|^gamma`` over node pairs in the window, ``g = d_xx f``."""
    g = d2(np.asarray(values, dtype=float), grid.h)
    dmax = max(1, min(grid.N - 1, int(window * grid.L / grid.h)))
    best = 0.0
    for d in range(1, dmax + 1):
        diff = np.max(np.abs(g[d:] - g[:-d]))
        best = max(best, float(diff) / (d * grid.h) ** gamma)
    return best


def far_field_deviations(profile: InterfaceProfile, probe_fraction: float = 0.9):
    L = profile.grid.L
    ff = profile.far_field
    left = abs(float(profile.at(-probe_fraction * L)) - ff.a)
    right = abs(float(profile.at(probe_fraction * L)) - ff.b)
    return left, right


def record_diagnostics(profile: InterfaceProfile, config: DiagnosticsConfig = DiagnosticsConfig()) -> DiagnosticsRecord:
    grid = profile.grid
    h = grid.h
    f = profile.samples
    s = d1(f, h)
    floor = default_slope_floor(profile) if config.slope_floor is None else config.slope_floor
    left, right = far_field_deviations(profile, config.probe_fraction)
    return DiagnosticsRecord(
        t=float(profile.t),
        M=float(np.max(f)),
        m=float(np.min(f)),
        slope_max=float(np.max(s)),
        slope_min=float(np.min(s)),
        lap=lap_number(s, floor),
        l2_dxf=math.sqrt(float(_trapezoid(s * s, dx=h))),
        l2_dx3f=math.sqrt(float(_trapezoid(d3(f, h) ** 2, dx=h))),
        holder_d2f=holder_seminorm(f, grid, config.gamma, config.holder_window),
        ff_dev_left=left,
        ff_dev_right=right,
    )


# --------------------------------------------------------------------------
# energy law


def _require_decaying(profile: InterfaceProfile) -> None:
    if not profile.far_field.decaying:
        raise ValueError("energy identity needs decaying data (a = b = 0, no tilt); "
                         "the L2 norm of step data is infinite")


def dissipation(profile: InterfaceProfile, threads=None) -> float:
    """``int int ln(1 + ((f(x) - f(y)) / (x - y))^2) dx dy`` over the whole plane."""
    _require_decaying(profile)
    grid = profile.grid
    h = grid.h
    f = np.ascontiguousarray(profile.samples)
    inner = h * kernels.active.energy_sum(f, h, kernels.resolve_threads(threads))
    inner = inner + h * np.log1p(d1(f, h) ** 2)
    Ap, Am = _edge_distances(grid)
    # x outside the grid mirrors y outside the grid
    inner = inner + 2.0 * energy_tail(f, Ap, Am)
    return float(h * math.fsum(inner))


def l2_squared(profile: InterfaceProfile) -> float:
    return float(profile.grid.h * math.fsum(profile.samples ** 2))


def _density(trajectory: Trajectory, physics: Optional[PhysicsParams]) -> float:
    if physics is not None:
        return physics.density_coefficient
    return float(trajectory.params.get("A_rho", 1.0))


def energy_identity_residual(trajectory: Trajectory, physics: Optional[PhysicsParams] = None,
                             threads=None) -> np.ndarray:
    """``||f||^2(t) + A_rho int_0^t D(s) ds - ||f_0||^2`` at every snapshot.

    The time integral is the trapezoid rule over the snapshot times.
    """
    A = _density(trajectory, physics)
    for p in trajectory.profiles[:1]:
        _require_decaying(p)
    tracker = EnergyTracker(trajectory.initial, A, threads)
    out = [0.0]
    for p in trajectory.profiles[1:]:
        out.append(tracker.update(p))
    return np.array(out)


class EnergyTracker:
    """Streaming version of :func:`energy_identity_residual`, one profile at a time."""

    def __init__(self, initial: InterfaceProfile, density_coefficient: float = 1.0, threads=None):
        _require_decaying(initial)
        self.A = density_coefficient
        self.threads = threads
        self.e0 = l2_squared(initial)
        self.t = initial.t
        self.D = dissipation(initial, threads)
        self.integral = 0.0

    def update(self, profile: InterfaceProfile) -> float:
        D = dissipation(profile, self.threads)
        self.integral += 0.5 * (profile.t - self.t) * (D + self.D)
        self.t, self.D = profile.t, D
        return l2_squared(profile) + self.A * self.integral - self.e0


# --------------------------------------------------------------------------
# weak formulation


def _smooth_step_derivative(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.where(inside, t, 0.5)
    l = np.exp(-1.0 / tc)
    r = np.exp(-1.0 / (1.0 - tc))
    val = l * r * (1.0 / tc ** 2 + 1.0 / (1.0 - tc) ** 2) / (l + r) ** 2
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(x, t) = psi((x - center) / radius) chi(t / t_end)``.

    ``psi(y) = exp(-1 / (1 - y^2))`` on ``|y| < 1`` and ``chi = 1 - smooth_step``,
    so the support is ``[center - radius, center + radius] x [0, t_end)``.
    ``scale = 0`` gives the zero function.
    """

    radius: float
    t_end: float
    center: float = 0.0
    scale: float = 1.0

    def _psi(self, x):
        y = (np.asarray(x, dtype=float) - self.center) / self.radius
        inside = np.abs(y) < 1
        yc = np.where(inside, y, 0.0)
        psi = np.where(inside, np.exp(-1.0 / (1.0 - yc ** 2)), 0.0)
        dpsi = np.where(inside, psi * (-2.0 * yc) / (1.0 - yc ** 2) ** 2, 0.0) / self.radius
        return psi, dpsi

    def _chi(self, t):
        chi = 1.0 - smooth_step(t / self.t_end)
        dchi = -_smooth_step_derivative(t / self.t_end) / self.t_end
        return chi, dchi

    def value(self, x, t):
        return self.scale * self._psi(x)[0] * self._chi(t)[0]

    def d_t(self, x, t):
        return self.scale * self._psi(x)[0] * self._chi(t)[1]

    def d_x(self, x, t):
        return self.scale * self._psi(x)[1] * self._chi(t)[0]


def weak_form_residual(trajectory: Trajectory, phi: BumpTestFunction, physics: Optional[PhysicsParams] = None,
                       threads=None) -> float:
    """``int int f phi_t + int f_0 phi(., 0) - A_rho int int Phi phi_x``.

    Space integrals by the trapezoid rule on the grid, time integrals by the
    trapezoid rule over snapshots; ``Phi`` is :func:`arctan_flux`.
    """
    grid = trajectory.grid
    if abs(phi.center) + phi.radius >= grid.L:
        raise ValueError("test function support must lie inside (-L, L)")
    if phi.t_end > trajectory.times[-1]:
        raise ValueError("test function support must end before the final snapshot")
    if phi.scale == 0:
        return 0.0
    A = _density(trajectory, physics)
    x = grid.x
    h = grid.h
    psi, _ = phi._psi(x)
    live = np.nonzero(psi)[0]
    if live.size == 0:
        return 0.0
    sl = slice(live[0], live[-1] + 1)
    rows = []
    times = np.array(trajectory.times)
    for p in trajectory.profiles:
        if p.t >= phi.t_end:
            rows.append(0.0)
            continue
        f = p.samples
        flux = arctan_flux(p, threads=threads)
        integrand = f[sl] * phi.d_t(x[sl], p.t) - A * flux[sl] * phi.d_x(x[sl], p.t)
        rows.append(h * math.fsum(integrand))
    f0 = trajectory.initial.samples
    initial = h * math.fsum(f0[sl] * phi.value(x[sl], trajectory.times[0]))
    return float(_trapezoid(np.array(rows), times) + initial)


# --------------------------------------------------------------------------
# linear dispersion


def mode_amplitude(profile: InterfaceProfile, k: float, half_width: Optional[float] = None) -> float:
    """Amplitude of ``sin(kx)``/``cos(kx)`` by projection over ``|x| <= half_width``."""
    grid = profile.grid
    hw = 0.5 * grid.L if half_width is None else half_width
    x = grid.x
    sel = np.abs(x) <= hw
    xs = x[sel]
    f = profile.samples[sel]
    basis = np.stack([np.sin(k * xs), np.cos(k * xs)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, f, rcond=None)
    return float(np.hypot(coef[0], coef[1]))


def dispersion_fit(trajectory: Trajectory, k: float, half_width: Optional[float] = None,
                   noise_floor: float = 1e-13) -> float:
    """Least-squares slope of ``ln |amplitude_k(t)|``; negative means decay."""
    amps = np.array([mode_amplitude(p, k, half_width) for p in trajectory.profiles])
    scale = max(1.0, float(np.max(np.abs(trajectory.initial.samples))))
    if np.min(amps) <= noise_floor * scale:
        raise ValueError("mode amplitude below noise floor")
    t = np.array(trajectory.times)
    slope, _ = np.polyfit(t, np.log(amps), 1)
    return float(slope)


# --------------------------------------------------------------------------
# monotonicity


@dataclass(frozen=True)
class MonotonicityVerdict:
    passed: bool
    max_slope: float
    min_slope: float
    slope_bound: float
    sup_drift: float
    range_violation: float
    min_slope_drop: float
    max_lap: int
    worst_violation: float


def monotonicity_guard(trajectory: Trajectory, tol: float = 1e-6) -> MonotonicityVerdict:
    """Check the slope maximum principle over every snapshot.

    The full slope ``tilt + d_x f`` must stay below ``tilt / 2`` (0 without
    tilt), ``min d_x f`` must not drop below its initial value, and for
    untilted data ``b <= f <= a`` and ``||f||_inf`` must not grow.
    """
    ff = trajectory.far_field
    h = trajectory.grid.h
    bound = 0.5 * ff.tilt if ff.tilt != 0 else 0.0
    f0 = trajectory.initial.samples
    sup0 = float(np.max(np.abs(f0)))
    smin0 = float(np.min(d1(f0, h)))
    max_slope = -math.inf
    min_slope = math.inf
    drift = range_v = drop = 0.0
    max_lap = 0
    for p in trajectory.profiles:
        s = d1(p.samples, h)
        full = s + ff.tilt
        max_slope = max(max_slope, float(np.max(full)))
        min_slope = min(min_slope, float(np.min(s)))
        drop = max(drop, smin0 - float(np.min(s)))
        max_lap = max(max_lap, lap_number(s, default_slope_floor(p)))
        if ff.tilt == 0:
            drift = max(drift, float(np.max(np.abs(p.samples))) - sup0)
            range_v = max(range_v, float(np.max(p.samples)) - ff.a, ff.b - float(np.min(p.samples)))
    worst = max(max_slope - bound, drift, range_v, drop)
    passed = worst <= tol and (ff.tilt != 0 or max_lap == 0)
    return MonotonicityVerdict(passed, max_slope, min_slope, bound, drift, range_v, drop, max_lap, worst)
