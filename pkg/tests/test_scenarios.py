import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muskatlab.core import validate_profile
from muskatlab.diagnostics import record_diagnostics
from muskatlab.scenarios import (ScenarioSpec, make_profile, mollifier_weights, mollify, rt_unstable_config,
                                 smooth_step, window)


def test_bump_peak_and_lap():
    p = make_profile(ScenarioSpec(kind="bump", a=0.0, b=0.0, amplitude=1.0, width=1.0, center=0.0, N=2048))
    i = int(np.argmax(p.samples))
    assert p.samples[i] == pytest.approx(1.0) and p.grid.x[i] == pytest.approx(0.0)
    assert record_diagnostics(p).lap == 1


@pytest.mark.parametrize("kw,msg", [
    (dict(kind="tanh_step", a=0.0, b=0.0), "a must exceed b"),
    (dict(kind="tanh_step", a=0.0, b=1.0), "a must exceed b"),
    (dict(kind="bump", amplitude=0.0), "amplitude"),
    (dict(kind="bump", amplitude=-1.0), "amplitude"),
    (dict(kind="windowed_sine", k=1.5), "k must be a positive integer"),
    (dict(kind="windowed_sine", k=0), "k must be a positive integer"),
    (dict(kind="tilted", tilt=0.0), "tilt"),
    (dict(kind="tilted", tilt=0.2), "tilt"),
    (dict(kind="spiral"), "unknown"),
])
def test_parameter_violations(kw, msg):
    with pytest.raises(ValueError, match=msg):
        make_profile(ScenarioSpec(N=64, **kw))


def test_unsettled_profile_rejected():
    with pytest.raises(ValueError, match="settle"):
        make_profile(ScenarioSpec(kind="tanh_step", steepness=0.05, L=10.0, N=64))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["tanh_step", "smoothed_ramp", "tilted"]), st.floats(0.1, 3.0), st.floats(0.5, 2.0),
       st.floats(0.5, 3.0), st.floats(-3.0, 3.0), st.floats(-0.9, -0.05))
def test_monotone_kinds_have_no_violation(kind, gap, steep, width, center, tilt):
    spec = ScenarioSpec(kind=kind, a=gap / 2, b=-gap / 2, steepness=steep, width=width, center=center,
                        tilt=tilt if kind == "tilted" else 0.0, L=40.0, N=512)
    rep = validate_profile(make_profile(spec), check_monotone=True)
    assert rep.ok and rep.monotonicity_violation == 0.0


def test_window_shape():
    L = 40.0
    x = np.linspace(-50, 50, 2001)
    w = window(x, L)
    assert np.all(w[np.abs(x) <= L / 2] == 1.0)
    assert np.all(w[np.abs(x) >= 0.9 * L] == 0.0)
    assert np.all((w >= 0) & (w <= 1))


def test_smooth_step_limits():
    assert smooth_step(-1.0) == 0.0 and smooth_step(2.0) == 1.0
    assert smooth_step(0.5) == pytest.approx(0.5)
    t = np.linspace(0, 1, 101)
    assert np.all(np.diff(smooth_step(t)) >= 0)


@pytest.mark.parametrize("width", [0.1, 0.5, 2.0])
def test_mollifier_weights(width):
    w = mollifier_weights(width, 0.05)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(w >= 0) and np.allclose(w, w[::-1])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(0.2, 3.0))
def test_mollify_preserves_monotonicity_and_limits(steep, width):
    p = make_profile(ScenarioSpec(kind="tanh_step", steepness=steep, N=512))
    q = mollify(p, width)
    assert q.far_field == p.far_field
    assert np.all(np.diff(q.samples) <= 1e-15)
    assert abs(q.samples[0] - 1.0) < 1e-8 and abs(q.samples[-1] + 1.0) < 1e-8


def test_mollify_below_spacing_is_identity():
    p = make_profile(ScenarioSpec(kind="tanh_step", N=256))
    assert mollify(p, 0.5 * p.grid.h) is p


def test_mollified_scenario_is_smoother():
    rough = make_profile(ScenarioSpec(kind="smoothed_ramp", width=0.5, N=1024))
    smooth = make_profile(ScenarioSpec(kind="smoothed_ramp", width=0.5, N=1024, mollifier_width=1.0))
    assert record_diagnostics(smooth).l2_dx3f < record_diagnostics(rough).l2_dx3f


def test_rt_config():
    spec, physics, T, rate = rt_unstable_config(2)
    assert physics.density_coefficient == -1.0 and not physics.stable
    assert rate == pytest.approx(2 * np.pi) and T == 0.1
    flat_spec, _, _, flat_rate = rt_unstable_config(2, amplitude=0.0)
    p = make_profile(flat_spec)
    assert np.all(p.samples == 0.0) and flat_rate == 0.0
