"""Nonlocal operators on extended interface profiles.

All alpha-integrals use the same quadrature: the integrand is sampled at the
grid-aligned offsets ``alpha = j h`` (midpoint rule on cells of width ``h``),
so ``f(x - alpha)`` is always a grid value or a far-field value. The cell at
``alpha = 0`` gets the removable-singularity value; when the integrand has a
``|alpha|^eps`` factor the cell value carries the matching zeta correction.
Beyond the grid every integrand is an explicit function of ``alpha`` and is
integrated in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, special

from . import kernels
from .core import FarField, Grid, InterfaceProfile, PhysicsParams, check_kernel_exponent, d1, d2


@dataclass(frozen=True)
class TailSpec:
    """Where the numeric alpha-sum stops and the closed-form tail begins.

    ``radius=None`` splits at the grid edges, which is exact for the
    far-field extension. A finite radius sums cells with ``|alpha| <= radius``
    (using far-field values off the grid) and treats everything beyond as far
    field. ``enabled=False`` drops the closed-form part.
    """

    radius: Optional[float] = None
    enabled: bool = True

    def __post_init__(self):
        if self.radius is not None and not self.radius > 0:
            raise ValueError("tail radius must be positive")


DEFAULT_TAIL = TailSpec()


def _edge_distances(grid: Grid):
    i = np.arange(grid.N)
    return (i + 0.5) * grid.h, (grid.N - 1 - i + 0.5) * grid.h


def _check_finite(profile: InterfaceProfile) -> None:
    if not np.all(np.isfinite(profile.samples)):
        raise ValueError("profile has non-finite samples")


@lru_cache(maxsize=64)
def _zeta(x: float) -> float:
    return float(special.zeta(x))


@lru_cache(maxsize=64)
def lambda_constant(s: float) -> float:
    """Normalization ``c1`` making the kernel form of ``Lambda^s`` have symbol ``|k|^s``.

    ``c1 = 1 / (2 int_0^inf (1 - cos u) / u^(1+s) du)``, integrated numerically.
    """
    if not (0.0 < s <= 1.0):
        raise ValueError("s must lie in (0, 1]")
    # (1 - cos u) / u^2 is smooth; the u^(1-s) factor goes into the weight
    near, _ = integrate.quad(lambda u: 2.0 * (math.sin(0.5 * u) / u) ** 2 if u > 0 else 0.5,
                             0.0, 1.0, weight="alg", wvar=(1.0 - s, 0.0),
                             epsabs=1e-15, epsrel=1e-13)
    # int_1^inf cos(u) u^(-1-s) du, integrated by parts once for faster decay
    rest, _ = integrate.quad(lambda u: u ** (-2.0 - s), 1.0, np.inf, weight="sin", wvar=1.0,
                             epsabs=1e-13, limit=200)
    osc = -math.sin(1.0) + (1.0 + s) * rest
    return 1.0 / (2.0 * (near + 1.0 / s - osc))


# --------------------------------------------------------------------------
# closed-form far-field tails


def _tilt_antiderivative(alpha, c, tilt):
    # antiderivative of alpha / (alpha^2 + (c + tilt*alpha)^2)
    p = 1.0 + tilt * tilt
    Q = p * alpha * alpha + 2.0 * tilt * c * alpha + c * c
    y = p * alpha + tilt * c
    return np.log(Q) / (2.0 * p) - (tilt / p) * np.arctan2(np.sign(c) * y, np.abs(c))


def _frac_remainder(A, c, eps):
    # int_A^inf c^2 u^(3eps-3) / (1 + c^2 u^(2eps-2)) du, for 0 < eps < 1/2
    k = 1.0 - eps
    g = 1.5 - 0.5 / k
    W = c * c * A ** (-2.0 * k)
    out = (np.abs(c) ** (1.0 / k - 1.0) / (2.0 * k)) * special.beta(g, 1.0 - g) \
        * special.betainc(g, 1.0 - g, W / (1.0 + W))
    return np.where(c == 0.0, 0.0, out)


def velocity_tail(fx, dfx, far_field: FarField, A_plus, A_minus=None, eps: float = 0.0):
    """Closed-form far-field part of the velocity integral.

    Covers ``alpha > A_plus`` (where ``f(x - alpha) = a``) and
    ``alpha < -A_minus`` (where ``f(x - alpha) = b``); the divergent pieces
    of the two sides cancel in the principal value. Excludes the ``A_rho``
    prefactor.
    """
    fx = np.asarray(fx, dtype=float)
    dfx = np.asarray(dfx, dtype=float)
    A_plus = np.asarray(A_plus, dtype=float)
    A_minus = A_plus if A_minus is None else np.asarray(A_minus, dtype=float)
    ca = fx - far_field.a
    cb = fx - far_field.b
    beta = far_field.tilt
    if eps == 0.0:
        p = 1.0 + beta * beta
        lim = -(beta / p) * (math.pi / 2.0) * (np.sign(ca) + np.sign(cb))
        return dfx * (lim - _tilt_antiderivative(A_plus, ca, beta)
                      + _tilt_antiderivative(-A_minus, cb, beta))
    if beta != 0.0:
        raise ValueError("tilted far field is only supported for kernel exponent 0")
    return dfx * ((A_minus ** eps - A_plus ** eps) / eps
                  - _frac_remainder(A_plus, ca, eps) + _frac_remainder(A_minus, cb, eps))


def edge_jump_velocity(fx, f_left, f_right, far_field: FarField, A_plus, A_minus, eps: float = 0.0):
    """Velocity of the jumps between the edge samples and the far-field values.

    The extended profile jumps from ``a`` to ``f_left`` at distance ``A_plus``
    and from ``f_right`` to ``b`` at distance ``A_minus``; each jump puts a
    point mass into ``d_x f`` whose contribution is a difference of arctans.
    Vanishes for settled data. Excludes the ``A_rho`` prefactor.
    """
    fx = np.asarray(fx, dtype=float)
    A_plus = np.asarray(A_plus, dtype=float)
    A_minus = np.asarray(A_minus, dtype=float)
    beta = far_field.tilt
    wp = A_plus ** eps / A_plus
    wm = A_minus ** eps / A_minus
    left = np.arctan((fx - f_left) * wp + beta) - np.arctan((fx - far_field.a) * wp + beta)
    right = np.arctan(beta - (fx - far_field.b) * wm) - np.arctan(beta - (fx - f_right) * wm)
    return left + right


def tail_correction(fx, dfx, far_field: FarField, A, eps: float = 0.0, A_minus=None):
    """Combined +/- far-field tails of the velocity integrand beyond radius ``A``."""
    if np.any(np.asarray(A) <= 0) or (A_minus is not None and np.any(np.asarray(A_minus) <= 0)):
        raise ValueError("tail radius must be positive")
    return velocity_tail(fx, dfx, far_field, A, A_minus, eps)


def flux_tail(fx, far_field: FarField, A_plus, A_minus):
    """Renormalized closed-form tail of ``PV int arctan(Delta_alpha f) d alpha``.

    The x-independent divergence ``(b - a)(1 + ln R)`` is dropped.
    """
    def F(A, c):
        return A * np.arctan2(c, A) + 0.5 * c * np.log(A * A + c * c)

    fx = np.asarray(fx, dtype=float)
    return F(A_minus, fx - far_field.b) - F(A_plus, fx - far_field.a)


def lambda_tail(fx, far_field: FarField, A_plus, A_minus, s: float):
    fx = np.asarray(fx, dtype=float)
    return ((fx - far_field.a) * A_plus ** (-s) + (fx - far_field.b) * A_minus ** (-s)) / s


def energy_tail(fx, A_plus, A_minus):
    """``int ln(1 + (f(x)/(x-y))^2) dy`` over the zero far field beyond both edges."""
    c = np.abs(np.asarray(fx, dtype=float))

    def one(A):
        return 2.0 * c * np.arctan2(c, A) - A * np.log1p((c / A) ** 2)

    return one(A_plus) + one(A_minus)


# --------------------------------------------------------------------------
# pointwise operator


def regularized_difference(profile: InterfaceProfile, node: int, alpha: float, eps: float = 0.0) -> float:
    """``(f(x) - f(x - alpha)) / (alpha / |alpha|^eps)`` at grid node ``node``.

    Off-grid shifts use the extended profile (linear between nodes).
    """
    if alpha == 0:
        raise ValueError("alpha = 0 has no difference quotient; use the limiting value")
    # the pointwise quotient is fine at the closed endpoint 1/2
    if not (0.0 <= eps <= 0.5):
        raise ValueError("kernel_exponent must lie in [0, 0.5]")
    x = profile.grid.x[node]
    f = profile.samples
    j = alpha / profile.grid.h
    if abs(j - round(j)) < 1e-12:
        n = node - int(round(j))
        if n < 0:
            fn = profile.far_field.a
        elif n >= profile.grid.N:
            fn = profile.far_field.b
        else:
            fn = f[n]
    else:
        fn = float(profile.at(x - alpha))
    return float((f[node] - fn) * abs(alpha) ** eps / alpha)


# --------------------------------------------------------------------------
# velocity


def _zeta_cell(d2f, df, h, eps, tilt):
    """Integral of the alpha -> 0 behaviour of the paired integrand, as a cell value."""
    if eps == 0.0:
        return h * d2f / (1.0 + (df + tilt) ** 2)
    r = -(df * df)
    total = np.zeros_like(np.asarray(d2f, dtype=float))
    power = np.ones_like(total)
    n = 0
    while (2 * n + 1) * eps <= 12.0:
        e = (2 * n + 1) * eps
        total = total + _zeta(-e) * power * h ** (1.0 + e)
        power = power * r
        n += 1
        if np.all(np.abs(power) * h ** (2 * n * eps) < 1e-18):
            break
    return -2.0 * d2f * total


def _pw_table(grid: Grid, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.ones(grid.N)
    d = np.arange(grid.N, dtype=float)
    pw = (d * grid.h) ** eps
    pw[0] = 0.0
    return pw


def _check_velocity_args(profile, eps):
    _check_finite(profile)
    check_kernel_exponent(eps)
    if eps > 0 and profile.far_field.tilt != 0.0:
        raise ValueError("tilted far field is only supported for kernel exponent 0")


def pv_velocity(profile: InterfaceProfile, physics: PhysicsParams = PhysicsParams(),
                eps: float = 0.0, tail: TailSpec = DEFAULT_TAIL, threads=None,
                backend=None) -> np.ndarray:
    """Velocity ``f_t`` of the (tilted, regularized) contour equation at every node.

    For ``eps = 0`` this is the principal-value integral of
    ``d_x Delta_alpha f / (1 + (Delta_alpha f + tilt)^2)``; for ``eps > 0`` the
    differences carry the ``|alpha|^eps`` regularization.
    """
    _check_velocity_args(profile, eps)
    grid = profile.grid
    h = grid.h
    f = np.ascontiguousarray(profile.samples)
    df = d1(f, h)
    ddf = d2(f, h)
    tilt = profile.far_field.tilt
    if tail.radius is not None:
        v = _velocity_radius(profile, df, ddf, eps, tail)
    else:
        impl = kernels.active if backend is None else backend
        v = h * impl.velocity_sum(f, df, h, tilt, _pw_table(grid, eps), kernels.resolve_threads(threads))
        v = v + _zeta_cell(ddf, df, h, eps, tilt)
        if tail.enabled:
            Ap, Am = _edge_distances(grid)
            v = v + velocity_tail(f, df, profile.far_field, Ap, Am, eps)
            v = v + edge_jump_velocity(f, f[0], f[-1], profile.far_field, Ap, Am, eps)
    return physics.density_coefficient * v


def _extended(profile: InterfaceProfile, df: np.ndarray, n: np.ndarray):
    N = profile.grid.N
    ff = profile.far_field
    inside = (n >= 0) & (n < N)
    nc = np.clip(n, 0, N - 1)
    fn = np.where(inside, profile.samples[nc], np.where(n < 0, ff.a, ff.b))
    dn = np.where(inside, df[nc], 0.0)
    return fn, dn


def _velocity_terms(fi, dfi, fn, dn, alpha, eps, tilt):
    inv = np.abs(alpha) ** eps / alpha
    D = (fi - fn) * inv + tilt
    return (dfi - dn) * inv / (1.0 + D * D)


def _velocity_radius(profile, df, ddf, eps, tail):
    grid = profile.grid
    h = grid.h
    J = int(math.floor(tail.radius / h))
    if J < 1:
        raise ValueError("tail radius must exceed the grid spacing")
    f = profile.samples
    idx = np.arange(grid.N)
    tilt = profile.far_field.tilt
    acc = np.zeros(grid.N)
    for j in range(1, J + 1):
        for sgn in (1, -1):
            fn, dn = _extended(profile, df, idx - sgn * j)
            acc += _velocity_terms(f, df, fn, dn, sgn * j * h, eps, tilt)
    v = h * acc + _zeta_cell(ddf, df, h, eps, tilt)
    Ap, Am = _edge_distances(grid)
    v = v + edge_jump_velocity(f, f[0], f[-1], profile.far_field, Ap, Am, eps)
    if tail.enabled:
        A = (J + 0.5) * h
        v = v + velocity_tail(f, df, profile.far_field, A, A, eps)
    return v


def velocity_extended_bruteforce(profile: InterfaceProfile, physics: PhysicsParams, nodes,
                                 radius: float, eps: float = 0.0) -> np.ndarray:
    """Plain numeric alpha-sum out to ``|alpha| <= radius``, no closed-form tail.

    Independent check of the tail formulas: beyond the grid the integrand is
    sampled from the far-field extension cell by cell.
    """
    _check_velocity_args(profile, eps)
    h = profile.grid.h
    f = profile.samples
    df = d1(f, h)
    ddf = d2(f, h)
    tilt = profile.far_field.tilt
    J = int(math.floor(radius / h))
    j = np.concatenate([np.arange(-J, 0), np.arange(1, J + 1)])
    out = []
    for i in np.atleast_1d(nodes):
        fn, dn = _extended(profile, df, i - j)
        terms = _velocity_terms(f[i], df[i], fn, dn, j * h, eps, tilt)
        # sum small-|alpha| terms last to limit cancellation loss
        order = np.argsort(-np.abs(j), kind="stable")
        s = math.fsum(terms[order])
        out.append(h * s + float(_zeta_cell(ddf[i], df[i], h, eps, tilt)))
    nodes = np.atleast_1d(nodes)
    Ap, Am = _edge_distances(profile.grid)
    out = np.array(out) + edge_jump_velocity(f[nodes], f[0], f[-1], profile.far_field, Ap[nodes], Am[nodes], eps)
    return physics.density_coefficient * np.array(out)


def velocity_reference_oracle(profile: InterfaceProfile, physics: PhysicsParams = PhysicsParams(),
                              eps: float = 0.0) -> np.ndarray:
    """Plain double loop over target and source nodes, left-to-right accumulation."""
    _check_velocity_args(profile, eps)
    grid = profile.grid
    N, h = grid.N, grid.h
    f = [float(v) for v in profile.samples]
    df_arr = d1(profile.samples, h)
    df = [float(v) for v in df_arr]
    tilt = profile.far_field.tilt
    pw = [float(v) for v in _pw_table(grid, eps)]
    out = np.empty(N)
    for i in range(N):
        fi, dfi = f[i], df[i]
        s = 0.0
        for n in range(N):
            d = i - n
            if d == 0:
                continue
            inv = pw[abs(d)] / (d * h)
            D = (fi - f[n]) * inv + tilt
            s += (dfi - df[n]) * inv / (1.0 + D * D)
        out[i] = h * s
    ddf = d2(profile.samples, h)
    out = out + _zeta_cell(ddf, df_arr, h, eps, tilt)
    Ap, Am = _edge_distances(grid)
    out = out + velocity_tail(profile.samples, df_arr, profile.far_field, Ap, Am, eps)
    out = out + edge_jump_velocity(profile.samples, f[0], f[-1], profile.far_field, Ap, Am, eps)
    return physics.density_coefficient * out


def velocity_linear_part(profile: InterfaceProfile, eps: float = 0.0, threads=None) -> np.ndarray:
    """``PV int d_x Delta^eps_alpha f d alpha`` (the velocity without its denominator)."""
    _check_velocity_args(profile, eps)
    grid = profile.grid
    h = grid.h
    f = profile.samples
    df = d1(f, h)
    ddf = d2(f, h)
    zeros = np.zeros(grid.N)
    v = h * kernels.active.velocity_sum(zeros, df, h, 0.0, _pw_table(grid, eps), kernels.resolve_threads(threads))
    v = v - 2.0 * _zeta(-eps) * ddf * h ** (1.0 + eps)
    Ap, Am = _edge_distances(grid)
    if eps == 0.0:
        v = v + df * np.log(Am / Ap)
    else:
        v = v + df * (Am ** eps - Ap ** eps) / eps
    ff = profile.far_field
    v = v + (ff.a - f[0]) * Ap ** eps / Ap + (ff.b - f[-1]) * Am ** eps / Am
    return v


# --------------------------------------------------------------------------
# flux form


def arctan_flux(profile: InterfaceProfile, tail: TailSpec = DEFAULT_TAIL, threads=None) -> np.ndarray:
    """``Phi(x) = PV int arctan(Delta_alpha f) d alpha`` at every node.

    Defined up to an x-independent constant when ``a != b``; its x-derivative
    is the untilted, unregularized velocity with ``A_rho = 1``.
    """
    _check_finite(profile)
    if profile.far_field.tilt != 0.0:
        raise ValueError("arctan_flux is defined for the untilted system")
    grid = profile.grid
    h = grid.h
    f = np.ascontiguousarray(profile.samples)
    phi = h * kernels.active.flux_sum(f, h, kernels.resolve_threads(threads)) + h * np.arctan(d1(f, h))
    if tail.enabled:
        Ap, Am = _edge_distances(grid)
        phi = phi + flux_tail(f, profile.far_field, Ap, Am)
    return phi


# --------------------------------------------------------------------------
# fractional Laplacian and Hilbert transform


def _wavenumbers(n: int, h: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.rfftfreq(n, d=h)


def _spectral_input(values, grid: Grid, far_field: Optional[FarField], pad: int):
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.N,):
        raise ValueError("values must match the grid")
    if far_field is not None and not far_field.decaying:
        raise ValueError("spectral path requires decaying data (a = b = 0, no tilt)")
    if pad < 1 or int(pad) != pad:
        raise ValueError("pad must be a positive integer")
    if pad > 1:
        edge = max(abs(values[0]), abs(values[-1]))
        if edge > 1e-8 * max(1.0, float(np.max(np.abs(values)))):
            raise ValueError("spectral path requires data that decays inside the grid")
    n = grid.N * int(pad)
    buf = np.zeros(n)
    buf[:grid.N] = values
    return buf, n


def lambda_power(values, grid: Grid, s: float, backend: str = "spectral",
                 far_field: Optional[FarField] = None, pad: int = 2, threads=None) -> np.ndarray:
    """Fractional Laplacian ``Lambda^s`` with symbol ``|k|^s``.

    ``backend="spectral"`` multiplies Fourier modes (zero-padded by ``pad``;
    ``pad=1`` treats the grid as periodic). ``backend="kernel"`` evaluates
    ``c1(s) int (f(x) - f(x-alpha)) / |alpha|^(1+s) d alpha`` on the extended
    profile.
    """
    if not (0.0 < s <= 1.0):
        raise ValueError("s must lie in (0, 1]")
    if backend == "spectral":
        buf, n = _spectral_input(values, grid, far_field, pad)
        k = _wavenumbers(n, grid.h)
        out = np.fft.irfft(np.fft.rfft(buf) * k ** s, n)
        return out[:grid.N]
    if backend != "kernel":
        raise ValueError(f"unknown backend {backend!r}")
    ff = FarField() if far_field is None else far_field
    if ff.tilt != 0.0:
        raise ValueError("kernel backend takes untilted data")
    f = np.ascontiguousarray(values, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite values")
    h = grid.h
    d = np.arange(grid.N, dtype=float)
    q = np.zeros(grid.N)
    q[1:] = (d[1:] * h) ** (-1.0 - s)
    raw = h * kernels.active.lambda_sum(f, q, kernels.resolve_threads(threads))
    raw = raw + _zeta(s - 1.0) * d2(f, h) * h ** (2.0 - s)
    Ap, Am = _edge_distances(grid)
    raw = raw + lambda_tail(f, ff, Ap, Am, s)
    return lambda_constant(s) * raw


def hilbert_transform(values, grid: Grid, backend: str = "spectral",
                      far_field: Optional[FarField] = None, pad: int = 2) -> np.ndarray:
    """``Hf(x) = (1/pi) PV int f(x - alpha) / alpha d alpha`` (multiplier ``-i sign(k)``)."""
    if backend == "spectral":
        buf, n = _spectral_input(values, grid, far_field, pad)
        fh = np.fft.rfft(buf)
        mult = np.full(fh.shape, -1j)
        mult[0] = 0.0
        if n % 2 == 0:
            mult[-1] = 0.0
        return np.fft.irfft(fh * mult, n)[:grid.N]
    if backend != "kernel":
        raise ValueError(f"unknown backend {backend!r}")
    return hilbert_kernel_at(values, grid, np.arange(grid.N), far_field)


def hilbert_kernel_at(values, grid: Grid, nodes, far_field: Optional[FarField] = None) -> np.ndarray:
    """Kernel Hilbert transform at selected nodes only."""
    ff = FarField() if far_field is None else far_field
    if ff.a != ff.b or ff.tilt != 0.0:
        raise ValueError("kernel Hilbert transform needs equal far-field limits")
    f = np.asarray(values, dtype=float)
    h = grid.h
    df = d1(f, h)
    idx = np.arange(grid.N)
    Ap, Am = _edge_distances(grid)
    res = []
    for i in np.atleast_1d(nodes):
        j = i - idx
        mask = j != 0
        val = h * np.sum(f[mask] / (j[mask] * h)) - h * df[i] + ff.a * np.log(Am[i] / Ap[i])
        res.append(val / np.pi)
    return np.array(res)
