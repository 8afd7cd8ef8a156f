"""Timing of the O(N^2) velocity sum: reference oracle vs compiled vs NumPy."""
from __future__ import annotations

import io
import time
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .core import PhysicsParams
from .scenarios import ScenarioSpec, make_profile
from .singular_ops import pv_velocity, velocity_reference_oracle


class EqualityGateError(AssertionError):
    """Optimized and reference velocities disagree beyond the tolerance."""


@dataclass
class BenchRow:
    N: int
    backend: str
    threads: int
    seconds: float
    oracle_seconds: float
    speedup: float
    rel_error: float

    def as_dict(self) -> dict:
        return asdict(self)


def _best_time(fn, repeats: int, clock=time.perf_counter) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = clock()
        fn()
        best = min(best, clock() - t0)
    return best


def _profile(N: int):
    return make_profile(ScenarioSpec(kind="tanh_step", N=N))


def oracle_doubling_ratio(sizes: Sequence[int] = (256, 362, 512, 724, 1024, 1448), repeats: int = 3) -> float:
    """Oracle cost growth per doubling of ``N`` from a log-log fit of CPU time (4 is quadratic).

    A fit over several sizes with best-of-``repeats`` process time is far less
    sensitive to scheduler noise than a single pair of wall-clock timings.
    """
    times = [_best_time(lambda p=_profile(N): velocity_reference_oracle(p), repeats, time.process_time)
             for N in sizes]
    slope = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(times), 1)[0]
    return float(2.0 ** slope)


def csv_bytes_for_threads(thread_counts: Sequence[int], N: int = 512, steps: int = 4) -> bool:
    """Run a short evolution per thread count and compare the CSV bytes."""
    from .cli_io import write_snapshot_csv
    from .evolution import StepControl, simulate

    blobs = []
    p = _profile(N)
    for t in thread_counts:
        traj = simulate(p, "cde", control=StepControl(T=steps * 0.4 * p.grid.h), threads=t)
        buf = io.StringIO()
        write_snapshot_csv(buf, traj.final)
        blobs.append(buf.getvalue().encode())
    return all(b == blobs[0] for b in blobs)


def run_benchmark(sizes: Sequence[int] = (512, 1024, 2048, 4096), thread_counts: Optional[Sequence[int]] = None,
                  repeats: int = 3, tolerance: float = 1e-13, include_fallback: bool = True) -> List[BenchRow]:
    """Time every backend against the oracle; raise on an equality-gate failure."""
    if thread_counts is None:
        thread_counts = sorted({1, kernels.max_threads()})
    backends = []
    if kernels.compiled is not None:
        backends.append(("cython", kernels.compiled))
    if include_fallback or kernels.compiled is None:
        backends.append(("numpy", kernels.fallback))
    rows = []
    physics = PhysicsParams()
    for N in sizes:
        p = _profile(N)
        t0 = time.perf_counter()
        ref = velocity_reference_oracle(p, physics)
        t_oracle = time.perf_counter() - t0
        scale = float(np.max(np.abs(ref)))
        for name, impl in backends:
            for t in thread_counts:
                v = pv_velocity(p, physics, threads=t, backend=impl)
                rel = float(np.max(np.abs(v - ref))) / scale
                if rel > tolerance:
                    raise EqualityGateError(f"{name} backend, N={N}, threads={t}: relative error {rel:.3g}")
                secs = _best_time(lambda: pv_velocity(p, physics, threads=t, backend=impl), repeats)
                rows.append(BenchRow(N, name, t, secs, t_oracle, t_oracle / secs, rel))
        for name, impl in backends:
            per_thread = [pv_velocity(p, physics, threads=t, backend=impl) for t in thread_counts]
            if any(not np.array_equal(per_thread[0], o) for o in per_thread[1:]):
                raise EqualityGateError(f"{name} backend output depends on thread count at N={N}")
    return rows


def format_rows(rows: Sequence[BenchRow]) -> str:
    lines = [f"{'N':>6} {'backend':>8} {'threads':>7} {'seconds':>10} {'oracle_s':>10} {'speedup':>9} {'rel_err':>9}"]
    for r in rows:
        lines.append(f"{r.N:6d} {r.backend:>8} {r.threads:7d} {r.seconds:10.4g} {r.oracle_seconds:10.4g} "
                     f"{r.speedup:9.1f} {r.rel_error:9.2e}")
    return "\n".join(lines)
