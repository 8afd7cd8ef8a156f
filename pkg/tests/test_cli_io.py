import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muskatlab.cli_io import (EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_SUITE, NDJSON_SCHEMA, OUT_ENV, ConfigError,
                              RunConfig, main, parse_config, resolve_output_dir, run, serialize_config)


def _read_ndjson(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def _manifest(path):
    return dict(line.split(": ", 1) for line in path.read_text().splitlines())


# parsing -------------------------------------------------------------------------

def test_empty_config_gives_defaults():
    assert parse_config("") == RunConfig()
    assert parse_config("# only a comment\n\n") == RunConfig()


def test_basic_keys_and_alias():
    cfg = parse_config("scenario = bump  # inline comment\nscenario.a = 0\nscenario.b = 0\n"
                       "grid.N = 256\ncontrol.dt_max = inf\nreg.dissipation_constant = auto\n")
    assert cfg.scenario.kind == "bump" and cfg.scenario.N == 256
    assert cfg.control.dt_max == math.inf and cfg.reg.dissipation_constant is None


def test_serialize_round_trip_defaults():
    cfg = RunConfig()
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(N=st.integers(8, 2048).map(lambda n: 2 * n), L=st.floats(1.0, 200.0), T=st.floats(1e-3, 10.0), sigma=st.floats(0.05, 0.9),
       eps=st.floats(0.0, 0.49), scheme=st.sampled_from(["cde", "regularized", "local"]),
       gamma=st.floats(0.01, 0.49), C=st.one_of(st.none(), st.floats(0.1, 100.0)))
def test_serialize_round_trip_property(N, L, T, sigma, eps, scheme, gamma, C):
    C_text = "auto" if C is None else repr(C)
    text = (f"grid.N = {N}\ngrid.L = {L!r}\ncontrol.T = {T!r}\ncontrol.sigma = {sigma!r}\nscheme = {scheme}\n"
            f"reg.kernel_exponent = {eps!r}\nreg.local_viscosity = 0.1\nreg.dissipation_constant = {C_text}\n"
            f"diagnostics.gamma = {gamma!r}\n")
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


@pytest.mark.parametrize("text, key, line", [
    ("scenario.kind = tanh_step\nbogus.key = 1\n", "bogus.key", 2),
    ("grid.N = many\n", "grid.N", 1),
    ("\n\nreg.kernel_exponent = 0.7\n", "reg.kernel_exponent", 3),
    ("scenario.a = -1\nscenario.b = 1\n", "scenario.a", 1),
    ("control.sigma = 0.4\ncontrol.sigma = 0.3\n", "control.sigma", 2),
    ("scheme = spectral\n", "scheme", 1),
    ("scheme = local\nreg.local_viscosity = 0\n", "reg.local_viscosity", 2),
    ("no equals sign here\n", "no equals sign here", 1),
    ("grid.N = 2\n", "grid.N", 1),
    ("control.T = nan\n", "control.T", 1),
])
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key and info.value.line == line
    assert str(info.value).startswith(f"line {line}: {key}:")


# runs ------------------------------------------------------------------------------

CONST = "scenario = constant\nscenario.a = 0.3\nscenario.b = 0.3\ngrid.N = 64\ncontrol.T = 0.5\n"


RT = ("scenario = windowed_sine\nscenario.a = 0\nscenario.b = 0\nscenario.amplitude = 0.01\nscenario.k = 2\n"
      "physics.A_rho = -1\ngrid.N = 256\ncontrol.T = 5\n")


def test_constant_run(tmp_path):
    assert run(parse_config(CONST), tmp_path) == EXIT_OK
    recs = _read_ndjson(tmp_path / "diagnostics.ndjson")
    assert len(recs) >= 2
    for r in recs:
        jsonschema.validate(r, NDJSON_SCHEMA)
        assert r["M"] == pytest.approx(0.3, abs=1e-14) and r["m"] == pytest.approx(0.3, abs=1e-14)
        assert r["lap"] == 0 and r["energy_residual"] is None
    man = _manifest(tmp_path / "manifest.txt")
    assert man["status"] == "ok" and man["exit_code"] == "0" and float(man["final_time"]) == 0.5
    assert parse_config((tmp_path / "config.echo").read_text()) == parse_config(CONST)


def test_tanh_run_keeps_monotone(tmp_path):
    cfg = parse_config("scenario = tanh_step\ngrid.N = 512\ncontrol.T = 1\ncontrol.stride = 10\n")
    assert run(cfg, tmp_path) == EXIT_OK
    recs = _read_ndjson(tmp_path / "diagnostics.ndjson")
    assert recs[-1]["t"] == 1.0
    assert all(r["lap"] == 0 and r["slope_max"] <= 1e-6 for r in recs)
    assert max(r["M"] for r in recs) <= 1.0 + 1e-6 and min(r["m"] for r in recs) >= -1.0 - 1e-6
    snaps = sorted((tmp_path / "snapshots").iterdir())
    assert snaps[0].name == "snap_000000.csv"
    lines = snaps[-1].read_text().splitlines()
    assert lines[0] == "x,f" and len(lines) == 513
    x, f = np.loadtxt(snaps[-1], delimiter=",", skiprows=1).T
    assert x[0] == -40.0 and np.all(np.diff(f) <= 1e-6)


def test_decaying_run_reports_energy(tmp_path):
    cfg = parse_config("scenario = bump\nscenario.a = 0\nscenario.b = 0\nscenario.amplitude = 0.5\n"
                       "scenario.width = 2\ngrid.L = 20\ngrid.N = 512\ncontrol.T = 0.2\n")
    assert run(cfg, tmp_path) == EXIT_OK
    recs = _read_ndjson(tmp_path / "diagnostics.ndjson")
    assert recs[0]["energy_residual"] == 0.0
    assert all(abs(r["energy_residual"]) < 1e-3 for r in recs)


def test_outputs_identical_across_threads(tmp_path):
    cfg = parse_config("scenario = tanh_step\ngrid.N = 256\ncontrol.T = 0.3\n")
    run(cfg, tmp_path / "one", threads=1)
    run(cfg, tmp_path / "two", threads=2)
    for name in ["diagnostics.ndjson", "config.echo"] + [f"snapshots/{p.name}" for p in
                                                          (tmp_path / "one" / "snapshots").iterdir()]:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_blow_up_aborts_with_manifest(tmp_path):
    cfg = parse_config(RT)
    assert run(cfg, tmp_path) == EXIT_ABORT
    man = _manifest(tmp_path / "manifest.txt")
    assert man["status"] == "aborted" and "slope doubling" in man["abort_reason"] and man["exit_code"] == "3"
    assert any((tmp_path / "snapshots").iterdir())


def test_output_dir_resolution(monkeypatch, tmp_path):
    cfg = parse_config("output.dir = from_config\n")
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert str(resolve_output_dir(cfg)) == "from_config"
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert resolve_output_dir(cfg) == tmp_path / "env"
    assert str(resolve_output_dir(cfg, "flag")) == "flag"


# command line ----------------------------------------------------------------------

def _write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_main_simulate_and_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env_out"))
    assert main(["simulate", _write(tmp_path, CONST)]) == EXIT_OK
    assert (tmp_path / "env_out" / "manifest.txt").exists()
    assert "ok" in capsys.readouterr().out


def test_main_config_error(tmp_path, capsys):
    assert main(["simulate", _write(tmp_path, "grid.N = 64\nreg.kernel_exponent = 0.7\n")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 2" in err and "reg.kernel_exponent" in err
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_main_abort_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, RT)
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == EXIT_ABORT
    assert "aborted: slope doubling" in capsys.readouterr().out


def test_main_suite_group(tmp_path, capsys):
    assert main(["suite", "--group", "steady-state", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "suite_report.json").read_text())
    assert [r["id"] for r in report] == [1] and report[0]["passed"]
    assert "[PASS]  1 steady states" in capsys.readouterr().out


def test_main_suite_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, "suite.N = 64\n")
    assert main(["suite", cfg, "--group", "operators", "--out", str(tmp_path / "o")]) == EXIT_SUITE


def test_main_suite_unknown_group(tmp_path):
    assert main(["suite", "--group", "nope", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_main_bench(tmp_path, capsys):
    assert main(["bench", "--sizes", "128,256", "--repeats", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert {r["N"] for r in rows} == {128, 256} and all(r["rel_error"] <= 1e-13 for r in rows)


def test_main_dispersion(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario.amplitude = 1e-5\ngrid.N = 512\ncontrol.T = 0.2\n")
    assert main(["dispersion", cfg, "--k", "1,2", "--out", str(tmp_path)]) == EXIT_OK
    rows = json.loads((tmp_path / "dispersion.json").read_text())
    assert [r["k"] for r in rows] == [1, 2] and all(r["rel_error"] < 0.05 for r in rows)
