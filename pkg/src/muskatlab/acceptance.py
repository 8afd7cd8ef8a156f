"""The acceptance battery: twelve checkable claims, each returning a
measured value, a threshold and a pass flag."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from . import kernels
from .core import FarField, Grid, InterfaceProfile, PhysicsParams, RegularizationParams, Trajectory, d1
from .diagnostics import (BumpTestFunction, dispersion_fit, energy_identity_residual, l2_squared,
                          monotonicity_guard, weak_form_residual)
from .evolution import StepControl, picard_local_solve, simulate
from .scenarios import ScenarioSpec, make_profile, rt_unstable_config
from .singular_ops import (TailSpec, hilbert_transform, lambda_power, pv_velocity, tail_correction,
                           velocity_extended_bruteforce, velocity_reference_oracle)


@dataclass
class CriterionResult:
    id: int
    name: str
    group: str
    measured: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.id:2d} {self.name}: measured={self.measured:.4g} threshold={self.threshold:.4g}"


class Battery:
    """Runs criteria, sharing the expensive trajectories between them.

    ``N`` overrides every criterion's grid size (intentional under-resolution
    studies); ``None`` keeps the stated sizes.
    """

    def __init__(self, N: Optional[int] = None, threads=None):
        self.N = N
        self.threads = threads
        self._runs: Dict[str, Trajectory] = {}

    def n(self, default: int) -> int:
        return default if self.N is None else self.N

    def _spec(self, **kw) -> ScenarioSpec:
        N = kw.pop("N", self.n(2048))
        return ScenarioSpec(N=N, **kw)

    def run(self, key: str, make: Callable[[], Trajectory]) -> Trajectory:
        if key not in self._runs:
            self._runs[key] = make()
        return self._runs[key]

    # shared trajectories -------------------------------------------------

    def sine_run(self, k: int, A: float, T: float) -> Trajectory:
        def make():
            p = make_profile(self._spec(kind="windowed_sine", a=0.0, b=0.0, amplitude=1e-5, k=k))
            return simulate(p, "cde", PhysicsParams(A), control=StepControl(T=T), threads=self.threads)
        return self.run(f"sine:{k}:{A}:{T}", make)

    def tanh_run(self, scheme: str) -> Trajectory:
        def make():
            p = make_profile(self._spec(kind="tanh_step", a=1.0, b=-1.0, steepness=1.0))
            return simulate(p, scheme, PhysicsParams(), RegularizationParams(0.05), StepControl(T=1.0),
                            threads=self.threads)
        return self.run(f"tanh:{scheme}", make)

    def tilted_run(self) -> Trajectory:
        def make():
            p = make_profile(self._spec(kind="tilted", a=1.0, b=-1.0, tilt=-0.25))
            return simulate(p, "cde", PhysicsParams(), control=StepControl(T=0.5), threads=self.threads)
        return self.run("tilted", make)

    # criteria -------------------------------------------------------------

    def c1(self) -> CriterionResult:
        N = self.n(2048)
        grid = Grid(40.0, N)
        flat = InterfaceProfile(grid, np.full(N, 0.7), FarField(0.7, 0.7))
        tilted = InterfaceProfile(grid, np.zeros(N), FarField(0.0, 0.0, -0.5))
        v1 = float(np.max(np.abs(pv_velocity(flat, threads=self.threads))))
        v2 = float(np.max(np.abs(pv_velocity(tilted, threads=self.threads))))
        m = max(v1, v2)
        return CriterionResult(1, "steady states", "steady-state", m, 1e-12, m <= 1e-12,
                               {"constant": v1, "pure_tilt": v2})

    def c2(self) -> CriterionResult:
        errs = {}
        for k in (1, 2, 3):
            rate = dispersion_fit(self.sine_run(k, 1.0, 0.3), k)
            errs[k] = abs(rate / (-math.pi * k) - 1.0)
        m = max(errs.values())
        return CriterionResult(2, "linear dispersion", "dispersion", m, 0.02, m <= 0.02,
                               {f"k={k}": e for k, e in errs.items()})

    def c3(self) -> CriterionResult:
        spec, physics, T, rate = rt_unstable_config(2, L=40.0, N=self.n(2048))
        traj = self.run("rt", lambda: simulate(make_profile(spec), "cde", physics, control=StepControl(T=T),
                                               threads=self.threads))
        fitted = dispersion_fit(traj, 2)
        err = abs(fitted / rate - 1.0)
        return CriterionResult(3, "Rayleigh-Taylor growth", "dispersion", err, 0.05, err <= 0.05,
                               {"fitted": fitted, "predicted": rate, "aborted": traj.abort_reason})

    def c4(self) -> CriterionResult:
        rel = {}
        for s in (0.75, 0.9):
            for k in (1, 2, 3):
                p = make_profile(self._spec(kind="windowed_sine", a=0.0, b=0.0, amplitude=1.0, k=k))
                sp = lambda_power(p.samples, p.grid, s)
                ke = lambda_power(p.samples, p.grid, s, backend="kernel", far_field=p.far_field, threads=self.threads)
                rel[f"s={s},k={k}"] = float(np.max(np.abs(sp - ke)) / np.max(np.abs(sp)))
        grid = Grid(8 * math.pi, self.n(1024))
        sym = 0.0
        for k in (1, 2, 3):
            sn, cs = np.sin(k * grid.x), np.cos(k * grid.x)
            sym = max(sym,
                      float(np.max(np.abs(lambda_power(sn, grid, 1.0, pad=1) - k * sn))) / k,
                      float(np.max(np.abs(hilbert_transform(sn, grid, pad=1) + cs))),
                      float(np.max(np.abs(hilbert_transform(cs, grid, pad=1) - sn))))
        kernel_ok = max(rel.values()) <= 1e-3
        sym_ok = sym <= 1e-10
        m = max(rel.values())
        return CriterionResult(4, "operator symbols", "operators", m, 1e-3, kernel_ok and sym_ok,
                               dict(rel, symbol_error=sym, symbol_threshold=1e-10))

    def c5(self) -> CriterionResult:
        detail = {}
        worst = 0.0
        ok = True
        for scheme in ("regularized", "cde"):
            traj = self.tanh_run(scheme)
            v = monotonicity_guard(traj, 1e-6)
            recs = traj.records
            vals = {
                "max_slope": v.max_slope,
                "sup_excess": max(max(abs(r.M), abs(r.m)) for r in recs) - 1.0,
                "min_excess": -1.0 - min(r.m for r in recs),
                "max_lap": v.max_lap,
                "slope_min_drop": v.min_slope_drop,
                "aborted": traj.abort_reason,
            }
            w = max(vals["max_slope"], vals["sup_excess"], vals["min_excess"], vals["slope_min_drop"])
            ok = ok and w <= 1e-6 and v.max_lap == 0 and traj.abort_reason is None
            worst = max(worst, w)
            detail[scheme] = vals
        return CriterionResult(5, "maximum principles", "max-principle", worst, 1e-6, ok, detail)

    def c6(self) -> CriterionResult:
        traj = self.tilted_run()
        v = monotonicity_guard(traj, 1e-6)
        excess = v.max_slope - v.slope_bound
        return CriterionResult(6, "tilted monotonicity", "max-principle", excess, 1e-6,
                               excess <= 1e-6 and traj.abort_reason is None,
                               {"max_full_slope": v.max_slope, "bound": v.slope_bound})

    def c7(self) -> CriterionResult:
        runs = {f"sine k={k}": self.sine_run(k, 1.0, 0.3) for k in (1, 2, 3)}
        spec, physics, T, _ = rt_unstable_config(2, L=40.0, N=self.n(2048))
        runs["rt k=2"] = self.run("rt", lambda: simulate(make_profile(spec), "cde", physics,
                                                          control=StepControl(T=T), threads=self.threads))
        runs["tanh regularized"] = self.tanh_run("regularized")
        runs["tanh cde"] = self.tanh_run("cde")
        runs["tilted"] = self.tilted_run()
        dev = {name: max(max(r.ff_dev_left, r.ff_dev_right) for r in t.records) for name, t in runs.items()}
        m = max(dev.values())
        return CriterionResult(7, "far-field asymptotics", "asymptotics", m, 1e-6, m <= 1e-6, dev)

    def c8(self) -> CriterionResult:
        res = {}
        norm0 = None
        for N in (self.n(1024), 2 * self.n(1024)):
            p = make_profile(ScenarioSpec(kind="bump", a=0.0, b=0.0, amplitude=0.5, width=2.0, N=N))
            traj = simulate(p, "cde", control=StepControl(T=0.5), threads=self.threads)
            res[N] = abs(float(energy_identity_residual(traj, threads=self.threads)[-1]))
            if norm0 is None:
                norm0 = l2_squared(p)
        coarse, fine = res.values()
        rel = coarse / norm0
        gain = coarse / fine if fine > 0 else math.inf
        return CriterionResult(8, "energy identity", "energy", rel, 0.01, rel <= 0.01 and gain >= 1.7,
                               {"residual_coarse": coarse, "residual_fine": fine, "norm0": norm0,
                                "refinement_gain": gain, "gain_threshold": 1.7})

    def c9(self) -> CriterionResult:
        T = 1.0
        L = 40.0
        phi = BumpTestFunction(radius=L / 4, t_end=T / 2)
        res = {}
        for N in (self.n(1024), 2 * self.n(1024)):
            p = make_profile(ScenarioSpec(kind="tanh_step", L=L, N=N))
            traj = simulate(p, "cde", control=StepControl(T=T), threads=self.threads)
            res[N] = abs(weak_form_residual(traj, phi, threads=self.threads))
        coarse, fine = res.values()
        gain = coarse / fine if fine > 0 else math.inf
        return CriterionResult(9, "weak-form residual", "weak-form", gain, 2.0, gain >= 2.0,
                               {"residual_coarse": coarse, "residual_fine": fine})

    def c10(self) -> CriterionResult:
        p = make_profile(self._spec(kind="tanh_step"))
        T, M, eps = 0.01, 16, 0.1
        traj, rep = picard_local_solve(p, eps, T, M=M, threads=self.threads)
        imex = simulate(p, "local", reg=RegularizationParams(0.05, local_viscosity=eps),
                        control=StepControl(T=T), threads=self.threads)
        dt = float(np.max(np.diff(imex.times)))
        gap = float(np.max(np.abs(imex.final.samples - traj.final.samples)))
        bound = 5.0 * (dt + 1.0 / M) * float(np.max(np.abs(p.samples)))
        last = rep.ratios[-3:]
        geometric = len(rep.distances) >= 5 and len(last) == 3 and max(last) < 0.5
        worst_ratio = max(last) if last else math.inf
        return CriterionResult(10, "Picard contraction", "picard", worst_ratio, 0.5,
                               geometric and rep.converged and gap <= bound,
                               {"distances": rep.distances, "ratios": rep.ratios, "imex_gap": gap,
                                "imex_bound": bound})

    def c11(self) -> CriterionResult:
        from .bench import csv_bytes_for_threads, oracle_doubling_ratio

        rel = {}
        for N in (512, self.n(2048)):
            p = make_profile(ScenarioSpec(kind="tanh_step", N=N))
            ref = velocity_reference_oracle(p)
            scale = float(np.max(np.abs(ref)))
            for t in sorted({1, kernels.max_threads()}):
                v = pv_velocity(p, threads=t)
                rel[f"N={N},threads={t}"] = float(np.max(np.abs(v - ref))) / scale
        identical = csv_bytes_for_threads([1, max(2, kernels.max_threads())])
        ratio = oracle_doubling_ratio()
        scaling_ok = abs(ratio / 4.0 - 1.0) <= 0.3
        m = max(rel.values())
        return CriterionResult(11, "oracle and performance gate", "performance", m, 1e-13,
                               m <= 1e-13 and identical and scaling_ok,
                               dict(rel, csv_identical=identical, oracle_doubling_ratio=ratio))

    def c12(self) -> CriterionResult:
        p = make_profile(self._spec(kind="tanh_step"))
        grid = p.grid
        f = p.samples
        df = d1(f, grid.h)
        inner = np.nonzero(np.abs(grid.x) <= grid.L / 4)[0]
        A = 2 * grid.L
        vA = pv_velocity(p, tail=TailSpec(radius=A))
        v2A = pv_velocity(p, tail=TailSpec(radius=2 * A))
        change = float(np.max(np.abs(vA - v2A)[inner]))
        predicted = float(np.max(np.abs(tail_correction(f, df, p.far_field, A))[inner]))
        nodes = inner[:: max(1, inner.size // 4)][:5]
        radius = 20000.0
        brute = velocity_extended_bruteforce(p, PhysicsParams(), nodes, radius)
        gap = float(np.max(np.abs(vA[nodes] - brute)))
        ok = change <= 2 * predicted and gap <= 1e-6
        return CriterionResult(12, "tail correction", "tails", gap, 1e-6, ok,
                               {"change_on_doubling": change, "predicted_bound": predicted,
                                "bruteforce_radius": radius})


CRITERIA = {1: "c1", 2: "c2", 3: "c3", 4: "c4", 5: "c5", 6: "c6", 7: "c7", 8: "c8", 9: "c9",
            10: "c10", 11: "c11", 12: "c12"}
GROUPS = {
    "steady-state": [1], "dispersion": [2, 3], "operators": [4], "max-principle": [5, 6],
    "asymptotics": [7], "energy": [8], "weak-form": [9], "picard": [10], "performance": [11], "tails": [12],
}


def select(groups: Optional[Iterable[str]] = None) -> List[int]:
    if not groups:
        return sorted(CRITERIA)
    ids = []
    for g in groups:
        if g not in GROUPS:
            raise ValueError(f"unknown group {g!r}; choose from {sorted(GROUPS)}")
        ids.extend(GROUPS[g])
    return sorted(set(ids))


def run_suite(groups: Optional[Iterable[str]] = None, N: Optional[int] = None, threads=None,
              report: Optional[Callable[[CriterionResult], None]] = None) -> List[CriterionResult]:
    battery = Battery(N, threads)
    out = []
    for cid in select(groups):
        t0 = time.perf_counter()
        try:
            res = getattr(battery, CRITERIA[cid])()
        except (ValueError, FloatingPointError) as exc:
            group = next(g for g, ids in GROUPS.items() if cid in ids)
            res = CriterionResult(cid, CRITERIA[cid], group, math.nan, math.nan, False, {"error": str(exc)})
        res.seconds = time.perf_counter() - t0
        if report is not None:
            report(res)
        out.append(res)
    return out
