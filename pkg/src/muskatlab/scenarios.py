"""Initial data: monotone steps, bumps, windowed sines, tilts and mollification."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import FarField, Grid, InterfaceProfile, PhysicsParams, validate_profile

KINDS = ("tanh_step", "smoothed_ramp", "bump", "windowed_sine", "tilted", "constant")
MONOTONE_KINDS = ("tanh_step", "smoothed_ramp", "tilted")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "tanh_step"
    a: float = 1.0
    b: float = -1.0
    steepness: float = 1.0
    center: float = 0.0
    amplitude: float = 1.0
    width: float = 1.0
    k: int = 1
    tilt: float = 0.0
    mollifier_width: float = 0.0
    L: float = 40.0
    N: int = 2048

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.N)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    left = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    right = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return left / (left + right)


def window(x, L: float):
    """Smooth window: 1 on ``|x| <= L/2``, tapering to 0 at ``|x| = 0.9 L``."""
    r = np.abs(np.asarray(x, dtype=float))
    return 1.0 - smooth_step((r - 0.5 * L) / (0.4 * L))


def _check(spec: ScenarioSpec) -> None:
    if spec.kind not in KINDS:
        raise ValueError(f"unknown scenario kind {spec.kind!r}")
    if spec.kind in MONOTONE_KINDS:
        if not spec.a > spec.b:
            raise ValueError("a must exceed b")
        if spec.tilt > 0:
            raise ValueError("monotone-decreasing data needs tilt <= 0")
    if spec.kind in ("tanh_step", "tilted") and spec.steepness <= 0:
        raise ValueError("steepness must be positive")
    if spec.kind == "smoothed_ramp" and spec.width <= 0:
        raise ValueError("width must be positive")
    if spec.kind in ("bump", "windowed_sine"):
        if spec.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if spec.kind == "bump" and spec.width <= 0:
            raise ValueError("width must be positive")
    if spec.kind == "windowed_sine" and (int(spec.k) != spec.k or spec.k < 1):
        raise ValueError("k must be a positive integer")
    if spec.kind == "tilted" and spec.tilt == 0:
        raise ValueError("tilted scenario needs a nonzero tilt")


def make_profile(spec: ScenarioSpec) -> InterfaceProfile:
    _check(spec)
    grid = spec.grid
    x = grid.x
    kind = spec.kind
    if kind in ("tanh_step", "tilted"):
        f = 0.5 * (spec.a + spec.b) + 0.5 * (spec.a - spec.b) * np.tanh(-spec.steepness * (x - spec.center))
        ff = FarField(spec.a, spec.b, spec.tilt)
    elif kind == "smoothed_ramp":
        t = (x - spec.center) / spec.width + 0.5
        f = spec.a + (spec.b - spec.a) * smooth_step(t)
        ff = FarField(spec.a, spec.b, spec.tilt)
    elif kind == "bump":
        f = spec.amplitude * np.exp(-((x - spec.center) / spec.width) ** 2)
        ff = FarField(0.0, 0.0, spec.tilt)
    elif kind == "windowed_sine":
        f = spec.amplitude * np.sin(spec.k * x) * window(x, grid.L)
        ff = FarField(0.0, 0.0, spec.tilt)
    else:
        f = np.full(grid.N, float(spec.a))
        ff = FarField(spec.a, spec.a, spec.tilt)
    profile = InterfaceProfile(grid, f, ff)
    if spec.mollifier_width > 0:
        profile = mollify(profile, spec.mollifier_width)
    report = validate_profile(profile)
    if not report.settled:
        raise ValueError(
            f"profile does not settle to its far field inside [-L, L] "
            f"(deviation {max(report.left_deviation, report.right_deviation):.3g}); increase L")
    return profile


def mollifier_weights(width: float, h: float) -> np.ndarray:
    """Discrete unit-mass weights of the bump ``exp(-1/(1-(y/width)^2))``."""
    m = int(math.ceil(width / h))
    y = np.arange(-m, m + 1) * h / width
    inside = np.abs(y) < 1
    w = np.zeros(y.size)
    w[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    return w / w.sum()


def mollify(profile: InterfaceProfile, width: float) -> InterfaceProfile:
    """Convolve with the unit-mass bump mollifier; far-field values pad the ends."""
    h = profile.grid.h
    if width <= h:
        return profile
    w = mollifier_weights(width, h)
    m = (w.size - 1) // 2
    ff = profile.far_field
    padded = np.concatenate([np.full(m, ff.a), profile.samples, np.full(m, ff.b)])
    out = np.convolve(padded, w, mode="valid")
    return replace(profile, samples=out)


def rt_unstable_config(k: int = 2, amplitude: float = 1e-5, T_max: float = 0.1,
                       L: float = 40.0, N: int = 2048):
    """Windowed sine under the Rayleigh-Taylor unstable sign ``A_rho = -1``.

    Returns ``(spec, physics, T_max, growth_rate)``; the linear growth rate of
    mode ``k`` is ``pi k``. Zero amplitude gives flat data.
    """
    if amplitude == 0:
        spec = ScenarioSpec(kind="constant", a=0.0, b=0.0, L=L, N=N)
    else:
        spec = ScenarioSpec(kind="windowed_sine", amplitude=amplitude, k=k, a=0.0, b=0.0, L=L, N=N)
    physics = PhysicsParams(-1.0)
    rate = math.pi * abs(physics.density_coefficient) * k if amplitude else 0.0
    return spec, physics, T_max, rate
