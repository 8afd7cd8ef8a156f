"""Run configuration, orchestration, on-disk formats and the command line.

Configs are flat ``dotted.key = value`` text, one key per line, ``#``
comments allowed. ``scenario = tanh_step`` is shorthand for
``scenario.kind``. Numeric ``auto`` and ``inf`` are accepted where noted.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from . import kernels
from .core import InterfaceProfile, PhysicsParams, RegularizationParams
from .diagnostics import DiagnosticsConfig, EnergyTracker, record_diagnostics
from .evolution import SCHEMES, StepControl, simulate
from .scenarios import ScenarioSpec, _check, make_profile

OUT_ENV = "MUSKATLAB_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_SUITE = 0, 2, 3, 4

NDJSON_KEYS = ("t", "M", "m", "slope_max", "slope_min", "lap", "l2_dxf", "l2_dx3f", "holder_d2f",
               "energy_residual", "ff_dev_left", "ff_dev_right")

NDJSON_SCHEMA = {
    "type": "object",
    "required": list(NDJSON_KEYS),
    "additionalProperties": False,
    "properties": {
        **{k: {"type": "number"} for k in NDJSON_KEYS},
        "lap": {"type": "integer", "minimum": 0},
        "energy_residual": {"type": ["number", "null"]},
    },
}


class ConfigError(ValueError):
    def __init__(self, key: str, line: Optional[int], message: str):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key}: {message}")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    scheme: str = "cde"
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    reg: RegularizationParams = field(default_factory=RegularizationParams)
    control: StepControl = field(default_factory=StepControl)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    tolerance: float = 1e-6
    output_dir: str = "muskatlab-out"
    seed: int = 0
    threads: int = 0
    suite_N: int = 0


# key -> (section, attribute, type); "auto" maps to None, "inf" to math.inf
_SCHEMA = {
    "scenario.kind": ("scenario", "kind", str),
    "scenario.a": ("scenario", "a", float),
    "scenario.b": ("scenario", "b", float),
    "scenario.steepness": ("scenario", "steepness", float),
    "scenario.center": ("scenario", "center", float),
    "scenario.amplitude": ("scenario", "amplitude", float),
    "scenario.width": ("scenario", "width", float),
    "scenario.k": ("scenario", "k", int),
    "scenario.tilt": ("scenario", "tilt", float),
    "scenario.mollifier_width": ("scenario", "mollifier_width", float),
    "grid.L": ("scenario", "L", float),
    "grid.N": ("scenario", "N", int),
    "scheme": (None, "scheme", str),
    "physics.A_rho": ("physics", "density_coefficient", float),
    "reg.kernel_exponent": ("reg", "kernel_exponent", float),
    "reg.local_viscosity": ("reg", "local_viscosity", float),
    "reg.dissipation_constant": ("reg", "dissipation_constant", "float?"),
    "control.T": ("control", "T", float),
    "control.sigma": ("control", "sigma", float),
    "control.dt_max": ("control", "dt_max", float),
    "control.stride": ("control", "stride", int),
    "diagnostics.gamma": ("diagnostics", "gamma", float),
    "diagnostics.probe_fraction": ("diagnostics", "probe_fraction", float),
    "diagnostics.slope_floor": ("diagnostics", "slope_floor", "float?"),
    "diagnostics.holder_window": ("diagnostics", "holder_window", float),
    "diagnostics.tolerance": (None, "tolerance", float),
    "output.dir": (None, "output_dir", str),
    "seed": (None, "seed", int),
    "threads": (None, "threads", int),
    "suite.N": (None, "suite_N", int),
}
_ALIASES = {"scenario": "scenario.kind"}


def _convert(key: str, raw: str, kind, line: int):
    try:
        if kind is str:
            if not raw:
                raise ValueError("empty value")
            return raw
        if kind == "float?":
            return None if raw.lower() == "auto" else float(raw)
        if kind is int:
            return int(raw)
        value = float(raw)
        if math.isnan(value):
            raise ValueError("nan")
        return value
    except ValueError:
        expected = {str: "text", int: "integer", float: "number", "float?": "number or 'auto'"}[kind]
        raise ConfigError(key, line, f"expected {expected}, got {raw!r}") from None


# validation messages that name a quantity differently from its attribute
_MESSAGE_NAMES = {"point_count": "N", "half_width": "L", "far-field": "a"}


def _guess_key(section: str, message: str, lines: dict) -> str:
    keys = [k for k, (sec, _, _) in _SCHEMA.items() if sec == section]
    for word, attr in _MESSAGE_NAMES.items():
        if message.startswith(word):
            message = attr + message[len(word):]
    for k in keys:
        attr = _SCHEMA[k][1]
        if message.startswith(attr + " ") or f" {attr} " in f" {message} ".replace(",", " "):
            return k
    present = [k for k in keys if k in lines]
    return present[0] if present else keys[0]


def parse_config(text: str) -> RunConfig:
    """Parse and validate; errors carry the dotted key and the line number."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(body, lineno, "expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _SCHEMA:
            raise ConfigError(key, lineno, "unknown key")
        if key in values:
            raise ConfigError(key, lineno, f"duplicate key (first set on line {lines[key]})")
        values[key] = _convert(key, value, _SCHEMA[key][2], lineno)
        lines[key] = lineno

    sections: dict = {"scenario": {}, "physics": {}, "reg": {}, "control": {}, "diagnostics": {}}
    top: dict = {}
    for key, value in values.items():
        section, attr, _ = _SCHEMA[key]
        (sections[section] if section else top)[attr] = value

    def build(section, cls):
        try:
            return cls(**sections[section])
        except (ValueError, TypeError) as exc:
            key = _guess_key(section, str(exc), lines)
            raise ConfigError(key, lines.get(key), str(exc)) from None

    scenario = build("scenario", ScenarioSpec)
    try:
        scenario.grid
        _check(scenario)
    except ValueError as exc:
        key = _guess_key("scenario", str(exc), lines)
        raise ConfigError(key, lines.get(key), str(exc)) from None
    physics = build("physics", PhysicsParams)
    reg = build("reg", RegularizationParams)
    control = build("control", StepControl)
    diagnostics = build("diagnostics", DiagnosticsConfig)
    scheme = top.get("scheme", "cde")
    if scheme not in SCHEMES:
        raise ConfigError("scheme", lines.get("scheme"), f"must be one of {', '.join(SCHEMES)}")
    if scheme == "local" and reg.local_viscosity <= 0:
        raise ConfigError("reg.local_viscosity", lines.get("reg.local_viscosity"),
                          "local scheme needs a positive local_viscosity")
    if scheme != "cde" and scenario.tilt != 0:
        raise ConfigError("scenario.tilt", lines.get("scenario.tilt"),
                          "tilted data is only supported by the cde scheme")
    for key, minimum in (("threads", 0), ("seed", 0), ("suite.N", 0)):
        attr = _SCHEMA[key][1]
        if top.get(attr, 0) < minimum:
            raise ConfigError(key, lines.get(key), f"must be >= {minimum}")
    if top.get("tolerance", 1e-6) <= 0:
        raise ConfigError("diagnostics.tolerance", lines.get("diagnostics.tolerance"), "must be positive")
    return RunConfig(scenario=scenario, physics=physics, reg=reg, control=control, diagnostics=diagnostics, **top)


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Every key, in schema order; ``parse_config`` inverts it exactly."""
    out = []
    for key, (section, attr, _) in _SCHEMA.items():
        holder = getattr(config, section) if section else config
        out.append(f"{key} = {_format(getattr(holder, attr))}")
    return "\n".join(out) + "\n"


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# artifacts


def write_snapshot_csv(stream: TextIO, profile: InterfaceProfile) -> None:
    stream.write("x,f\n")
    for x, f in zip(profile.grid.x, profile.samples):
        stream.write(f"{x:.17g},{f:.17g}\n")


def ndjson_record(record, energy_residual: Optional[float]) -> dict:
    d = record.as_dict()
    d["energy_residual"] = energy_residual
    return {k: d[k] for k in NDJSON_KEYS}


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"muskatlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "backend": kernels.BACKEND}


def resolve_output_dir(config: RunConfig, override: Optional[str] = None) -> Path:
    return Path(override or os.environ.get(OUT_ENV) or config.output_dir)


def initial_profile(config: RunConfig) -> InterfaceProfile:
    return make_profile(config.scenario)


def run(config: RunConfig, out_dir=None, threads: Optional[int] = None) -> int:
    """Evolve the configured scenario and write CSV snapshots, NDJSON diagnostics and a manifest.

    Returns the process exit status (0 success, 3 numerical abort).
    """
    out = Path(out_dir) if out_dir is not None else resolve_output_dir(config)
    snaps = out / "snapshots"
    snaps.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(serialize_config(config), encoding="utf-8")
    nthreads = threads if threads is not None else (config.threads or None)
    t0 = time.perf_counter()
    profile = initial_profile(config)
    reg = replace(config.reg, mollifier_width=config.scenario.mollifier_width)
    tracker = EnergyTracker(profile, config.physics.density_coefficient, nthreads) if profile.far_field.decaying else None
    stride = config.control.stride
    state = {"last": -1}

    with open(out / "diagnostics.ndjson", "w", encoding="utf-8") as nd:
        def on_step(p: InterfaceProfile, k: int) -> None:
            rec = record_diagnostics(p, config.diagnostics)
            energy = None
            if tracker is not None:
                energy = 0.0 if k == 0 else tracker.update(p)
            nd.write(json.dumps(ndjson_record(rec, energy)) + "\n")
            if k % stride == 0:
                _write_snapshot(snaps, k, p)
                state["last"] = k
            state["k"], state["p"] = k, p

        traj = simulate(profile, config.scheme, config.physics, reg, config.control, config.diagnostics,
                        on_step=on_step, threads=nthreads)
    if state.get("k", -1) != state["last"]:
        _write_snapshot(snaps, state["k"], state["p"])
    wall = time.perf_counter() - t0
    status = EXIT_ABORT if traj.aborted else EXIT_OK
    manifest = {
        "status": "aborted" if traj.aborted else "ok",
        "exit_code": status,
        "abort_reason": traj.abort_reason or "none",
        "scheme": config.scheme,
        "steps": state.get("k", 0),
        "final_time": repr(traj.final.t),
        "wall_seconds": f"{wall:.3f}",
        "threads": kernels.resolve_threads(nthreads),
        "effective_config": "config.echo",
        **_versions(),
    }
    (out / "manifest.txt").write_text("".join(f"{k}: {v}\n" for k, v in manifest.items()), encoding="utf-8")
    return status


def _write_snapshot(directory: Path, k: int, profile: InterfaceProfile) -> None:
    with open(directory / f"snap_{k:06d}.csv", "w", encoding="utf-8", newline="") as fh:
        write_snapshot_csv(fh, profile)


# --------------------------------------------------------------------------
# sweeps


def dispersion_table(config: RunConfig, ks=(1, 2, 3), threads=None):
    """Fitted vs predicted rates of windowed sines, one row per wavenumber."""
    from .diagnostics import dispersion_fit

    rows = []
    A = config.physics.density_coefficient
    for k in ks:
        spec = replace(config.scenario, kind="windowed_sine", a=0.0, b=0.0, k=int(k), tilt=0.0)
        traj = simulate(make_profile(spec), "cde", config.physics, control=config.control, threads=threads)
        fitted = dispersion_fit(traj, k)
        predicted = -math.pi * A * k
        rows.append({"k": int(k), "fitted": fitted, "predicted": predicted,
                     "rel_error": abs(fitted / predicted - 1.0), "aborted": traj.abort_reason})
    return rows


# --------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muskatlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads for the O(N^2) sums")
    common.add_argument("--out", default=None, help=f"output directory (overrides ${OUT_ENV} and output.dir)")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="evolve one configured scenario")
    p.add_argument("config")
    p = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    p.add_argument("config", nargs="?")
    p.add_argument("--group", action="append", help="restrict to a criterion group (repeatable)")
    p = sub.add_parser("bench", parents=[common], help="time the velocity kernels against the oracle")
    p.add_argument("config", nargs="?")
    p.add_argument("--sizes", default="512,1024,2048,4096")
    p.add_argument("--repeats", type=int, default=3)
    p = sub.add_parser("dispersion", parents=[common], help="fitted decay rate per wavenumber")
    p.add_argument("config")
    p.add_argument("--k", default="1,2,3", help="comma-separated wavenumbers")
    return parser


def _emit_json(out: Path, name: str, payload) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config_path = getattr(args, "config", None)
    try:
        config = load_config(config_path) if config_path else RunConfig()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads if args.threads is not None else (config.threads or None)
    out = resolve_output_dir(config, args.out)

    if args.command == "simulate":
        try:
            status = run(config, out, threads)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"{'aborted: slope doubling' if status == EXIT_ABORT else 'ok'}; outputs in {out}")
        return status

    if args.command == "suite":
        from .acceptance import run_suite

        try:
            results = run_suite(args.group, config.suite_N or None, threads,
                                report=lambda r: print(r.line(), flush=True))
        except ValueError as exc:
            print(f"suite error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        _emit_json(out, "suite_report.json", [r.as_dict() for r in results])
        failed = [r.id for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
        return EXIT_SUITE if failed else EXIT_OK

    if args.command == "bench":
        from .bench import EqualityGateError, format_rows, run_benchmark

        sizes = [int(s) for s in args.sizes.split(",") if s]
        counts = sorted({1, threads or kernels.max_threads()})
        try:
            rows = run_benchmark(sizes, counts, repeats=args.repeats)
        except EqualityGateError as exc:
            print(f"benchmark aborted: {exc}", file=sys.stderr)
            return EXIT_ABORT
        print(format_rows(rows))
        _emit_json(out, "bench.json", [r.as_dict() for r in rows])
        return EXIT_OK

    ks = [int(k) for k in args.k.split(",") if k]
    rows = dispersion_table(config, ks, threads)
    print(f"{'k':>3} {'fitted':>12} {'predicted':>12} {'rel_error':>10}")
    for r in rows:
        print(f"{r['k']:3d} {r['fitted']:12.6f} {r['predicted']:12.6f} {r['rel_error']:10.2e}")
    _emit_json(out, "dispersion.json", rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
