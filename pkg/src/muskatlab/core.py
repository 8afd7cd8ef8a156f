"""Domain types shared by every other module.

The interface is stored on a uniform grid covering ``[-L, L)``. Outside the
grid the height is extended by its constant far-field limits: ``a`` on the
left and ``b`` on the right. A tilted background ``tilt * x`` is never stored
in the samples; the evolved unknown is the bounded remainder.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = -L + i*h`` with ``h = 2L/N``."""

    half_width: float
    point_count: int

    def __post_init__(self):
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ValueError("half_width must be positive and finite")
        n = self.point_count
        if int(n) != n or n < 16 or n % 2:
            raise ValueError("point_count must be an even integer >= 16")
        object.__setattr__(self, "point_count", int(n))

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def N(self) -> int:
        return self.point_count

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.point_count

    @property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.h * np.arange(self.point_count)
        x.setflags(write=False)
        return x

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.half_width, self.point_count * factor)


@dataclass(frozen=True)
class FarField:
    """Limits ``a`` (x -> -inf), ``b`` (x -> +inf) and background slope ``tilt``."""

    a: float = 0.0
    b: float = 0.0
    tilt: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.a, self.b, self.tilt)):
            raise ValueError("far-field values must be finite")

    @property
    def decaying(self) -> bool:
        return self.a == 0.0 and self.b == 0.0 and self.tilt == 0.0

    def default_tolerance(self) -> float:
        return 1e-8 * max(1.0, abs(self.a - self.b))


@dataclass(frozen=True, eq=False)
class InterfaceProfile:
    """Samples of the interface height on a grid, plus far-field data."""

    grid: Grid
    samples: np.ndarray
    far_field: FarField = field(default_factory=FarField)
    t: float = 0.0

    def __post_init__(self):
        f = np.array(self.samples, dtype=float, copy=True)
        if f.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {f.shape}")
        f.setflags(write=False)
        object.__setattr__(self, "samples", f)

    @property
    def f(self) -> np.ndarray:
        return self.samples

    def evolved(self, samples: np.ndarray, t: float) -> "InterfaceProfile":
        return replace(self, samples=samples, t=t)

    def at(self, x) -> np.ndarray:
        """Evaluate the extended profile; linear interpolation between nodes."""
        g = self.grid
        xs = np.concatenate([g.x, [g.L]])
        fs = np.concatenate([self.samples, [self.far_field.b]])
        x = np.asarray(x, dtype=float)
        out = np.interp(x, xs, fs)
        out = np.where(x < -g.L, self.far_field.a, out)
        out = np.where(x >= g.L, self.far_field.b, out)
        return out

    def full_slope(self) -> np.ndarray:
        return self.far_field.tilt + d1(self.samples, self.grid.h)


@dataclass(frozen=True)
class PhysicsParams:
    """``density_coefficient`` is (rho2 - rho1) / (2 pi); positive is stable."""

    density_coefficient: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.density_coefficient):
            raise ValueError("density_coefficient must be finite")

    @property
    def stable(self) -> bool:
        return self.density_coefficient > 0


@dataclass(frozen=True)
class RegularizationParams:
    kernel_exponent: float = 0.05
    local_viscosity: float = 0.0
    dissipation_constant: Optional[float] = None
    mollifier_width: float = 0.0

    def __post_init__(self):
        check_kernel_exponent(self.kernel_exponent)
        if self.local_viscosity < 0:
            raise ValueError("local_viscosity must be >= 0")
        if self.dissipation_constant is not None and self.dissipation_constant <= 0:
            raise ValueError("dissipation_constant must be positive")
        if self.mollifier_width < 0:
            raise ValueError("mollifier_width must be >= 0")

    def resolved_constant(self) -> float:
        """Default dissipation constant ``8 / c1(eps)``."""
        if self.dissipation_constant is not None:
            return self.dissipation_constant
        from .singular_ops import lambda_constant

        return 8.0 / lambda_constant(1.0 - self.kernel_exponent)


def check_kernel_exponent(eps: float) -> float:
    if not (0.0 <= eps < 0.5):
        raise ValueError("kernel_exponent must lie in [0, 0.5)")
    return float(eps)


@dataclass
class Trajectory:
    """Append-only time series of profiles and their diagnostics records."""

    scheme: str
    params: dict = field(default_factory=dict)
    times: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    records: list = field(default_factory=list)
    abort_reason: Optional[str] = None

    def append(self, profile: InterfaceProfile, record=None) -> None:
        if self.profiles:
            first = self.profiles[0]
            if profile.grid != first.grid or profile.far_field != first.far_field:
                raise ValueError("all profiles in a trajectory share one grid and far field")
            if profile.t <= self.times[-1]:
                raise ValueError("trajectory times must be strictly increasing")
        self.times.append(profile.t)
        self.profiles.append(profile)
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.profiles)

    @property
    def grid(self) -> Grid:
        return self.profiles[0].grid

    @property
    def far_field(self) -> FarField:
        return self.profiles[0].far_field

    @property
    def initial(self) -> InterfaceProfile:
        return self.profiles[0]

    @property
    def final(self) -> InterfaceProfile:
        return self.profiles[-1]

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not None

    def array(self) -> np.ndarray:
        return np.stack([p.samples for p in self.profiles])


@dataclass(frozen=True)
class ValidationReport:
    left_deviation: float
    right_deviation: float
    nonfinite: bool
    monotonicity_violation: Optional[float]
    far_field_tolerance: float

    @property
    def settled(self) -> bool:
        return max(self.left_deviation, self.right_deviation) <= self.far_field_tolerance

    @property
    def ok(self) -> bool:
        mono = self.monotonicity_violation
        return not self.nonfinite and self.settled and (mono is None or mono <= 0.0)


def validate_profile(profile: InterfaceProfile, far_field_tolerance: Optional[float] = None,
                     check_monotone: bool = False) -> ValidationReport:
    """Report settling, finiteness and (optionally) monotone-decreasing violation.

    Never raises on a bad profile; the caller decides what to do with the report.
    The monotonicity violation is ``max_i (f_{i+1} - f_i) / h`` of the full
    height (tilt included), clipped at zero.
    """
    f = profile.samples
    ff = profile.far_field
    tol = ff.default_tolerance() if far_field_tolerance is None else far_field_tolerance
    nonfinite = not bool(np.all(np.isfinite(f)))
    left = abs(f[0] - ff.a) if not nonfinite else float("inf")
    right = abs(f[-1] - ff.b) if not nonfinite else float("inf")
    mono = None
    if check_monotone:
        slopes = np.diff(f) / profile.grid.h + ff.tilt
        mono = max(0.0, float(np.max(slopes))) if not nonfinite else float("inf")
    return ValidationReport(float(left), float(right), nonfinite, mono, tol)


def d1(f: np.ndarray, h: float) -> np.ndarray:
    """First derivative: 4th-order centred inside, 2nd-order near the ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[1] = (f[2] - f[0]) / (2.0 * h)
    out[-2] = (f[-1] - f[-3]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def d2(f: np.ndarray, h: float) -> np.ndarray:
    """Second derivative: 2nd-order centred, one-sided at the two ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / (h * h)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return out


def d3(f: np.ndarray, h: float) -> np.ndarray:
    """Third derivative from centred differences of :func:`d2`."""
    return np.gradient(d2(f, h), h, edge_order=2)
