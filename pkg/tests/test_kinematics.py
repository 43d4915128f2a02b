from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eventgraph.kinematics import (
    CONFIGS,
    KinematicConfig,
    ObjectState,
    closest_approach,
    predict_collisions,
    predict_scene,
    terminal_states,
)
from eventgraph.scene import make_scene


def dense_minimum(pa, va, pb, vb) -> tuple[float, float]:
    """Argmin of the sampled separation, refined by repeated grid zooms."""
    dp, dv = np.subtract(pa, pb), np.subtract(va, vb)
    span = np.linalg.norm(dp) / np.linalg.norm(dv) + 1.0
    lo, hi = -span, span
    for _ in range(12):
        ts = np.linspace(lo, hi, 2001)
        d = np.linalg.norm(dp[None, :] + ts[:, None] * dv[None, :], axis=1)
        i = int(np.argmin(d))
        step = ts[1] - ts[0]
        lo, hi = ts[i] - 2 * step, ts[i] + 2 * step
    return float(ts[i]), float(d[i])


def test_worked_example():
    assert closest_approach((0, 0), (1, 0), (10, 0), (0, 0)) == (10.0, 0.0)


def test_closed_form_matches_dense_sampling_on_1000_pairs():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 1000:
        pa, pb = rng.uniform(-10, 10, 2), rng.uniform(-10, 10, 2)
        va, vb = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        ca = closest_approach(pa, va, pb, vb)
        if ca is None:
            continue
        t, d = ca
        ts, ds = dense_minimum(pa, va, pb, vb)
        assert abs(d - ds) < 1e-6
        assert abs(t - ts) < 1e-4
        checked += 1


def test_parallel_motion_is_degenerate():
    assert closest_approach((0, 0), (1, 1), (5, 0), (1, 1)) is None


coord = st.floats(-50, 50, allow_nan=False)


@given(coord, coord, coord, coord, coord, coord, coord, coord)
def test_closest_approach_is_a_minimum(x1, y1, u1, w1, x2, y2, u2, w2):
    ca = closest_approach((x1, y1), (u1, w1), (x2, y2), (u2, w2))
    if ca is None:
        return
    t, d = ca
    dp, dv = np.subtract((x1, y1), (x2, y2)), np.subtract((u1, w1), (u2, w2))
    for s in (t - 1.0, t + 1.0, 0.0):
        assert np.linalg.norm(dp + s * dv) >= d - 1e-6 * (1 + np.linalg.norm(dp))


def test_thresholds_and_time_window():
    a = ObjectState("a", (0.0, 0.0), (1.0, 0.0))
    b = ObjectState("b", (10.0, 1.5), (0.0, 0.0))
    assert predict_collisions([a, b], CONFIGS["C"]) == {("a", "b")}
    assert predict_collisions([a, b], CONFIGS["B"]) == set()
    behind = ObjectState("c", (-10.0, 0.0), (0.0, 0.0))
    assert predict_collisions([a, behind], CONFIGS["C"]) == set()
    far = ObjectState("d", (400.0, 0.0), (0.0, 0.0))
    assert predict_collisions([a, far], CONFIGS["C"]) == set()
    with pytest.raises(ValueError):
        predict_collisions([a, a], CONFIGS["C"])


def test_configs():
    assert (CONFIGS["A"].velocity_window, CONFIGS["A"].tau) == (1, 1.4)
    assert (CONFIGS["B"].velocity_window, CONFIGS["B"].tau) == (5, 1.4)
    assert (CONFIGS["C"].velocity_window, CONFIGS["C"].tau, CONFIGS["C"].horizon) == (5, 1.7, 300)
    assert KinematicConfig.from_mapping({"tau": "2.5"}).tau == 2.5
    with pytest.raises(ValueError):
        KinematicConfig(tau=0)


def test_velocity_window_averages_recent_frames():
    # o0 accelerates in the last frame only; A sees the jump, B averages it.
    xs = [0.0] * 6 + [float(i) for i in range(1, 5)] + [9.0]
    scene = make_scene("k", [("red", "rubber", "cube")] * 2, len(xs),
                       positions={0: [(x, 0.0) for x in xs], 1: [(50.0, 0.0)] * len(xs)})
    va = dict((s.object_id, s.velocity) for s in terminal_states(scene, CONFIGS["A"]))
    vb = dict((s.object_id, s.velocity) for s in terminal_states(scene, CONFIGS["B"]))
    assert va["o0"][0] == pytest.approx(5.0)
    assert vb["o0"][0] == pytest.approx(1.8)
    assert predict_scene(scene, CONFIGS["C"]) == {("o0", "o1")}


def test_invisible_objects_are_not_extrapolated():
    scene = make_scene("k", [("red", "rubber", "cube")] * 2, 10,
                       positions={0: [(float(i), 0.0) for i in range(10)], 1: [(20.0, 0.0)] * 10},
                       visible={1: (0, 5)})
    assert [s.object_id for s in terminal_states(scene, CONFIGS["C"])] == ["o0"]
