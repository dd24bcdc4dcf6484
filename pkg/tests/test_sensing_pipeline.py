import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copess.inductive_sensing import SensorFrame, simulate_indentation_cycle
from copess.sensing_pipeline import (
    IncompleteCycleError,
    LocalizationEstimate,
    TimedStream,
    characterize,
    estimate_velocity,
    localize,
    localize_track,
    nearest_neighbor_sync,
    repeatability_correlation,
    write_track_csv,
)
from copess.tile import CoilArraySpec

ARRAY = CoilArraySpec()


def stream(t, values=None):
    t = np.asarray(t, dtype=float)
    return TimedStream(t, np.arange(t.size, dtype=float) if values is None else values)


def frame(grid, t=0.0):
    return SensorFrame(t, tuple(np.asarray(grid, dtype=float).ravel()))


# --- sync -------------------------------------------------------------------------


def test_identity_pairing():
    s = stream(np.arange(10) * 0.05)
    pair = nearest_neighbor_sync(s, s)
    assert pair.b_index.tolist() == list(range(10)) and pair.error.max() == 0


def test_hand_checked_pairs():
    pair = nearest_neighbor_sync(stream([0.00, 0.05, 0.10]), stream([0.02, 0.07]))
    assert pair.b_index.tolist() == [0, 1, 1]


def test_constant_offset():
    t = np.arange(40) / 20.0
    pair = nearest_neighbor_sync(stream(t + 0.010), stream(t))
    assert np.allclose(pair.error, 0.010)


def test_tie_goes_to_earlier_sample():
    pair = nearest_neighbor_sync(stream([0.5]), stream([0.0, 1.0]))
    assert pair.b_index.tolist() == [0]


def brute_force(ta, tb):
    return np.array([min(range(len(tb)), key=lambda j: (abs(t - tb[j]), j)) for t in ta])


# millisecond timestamps, as logged
times = st.lists(st.integers(0, 100_000), min_size=1, max_size=40, unique=True).map(
    lambda v: [k / 1000 for k in sorted(v)]
)


@settings(max_examples=100, deadline=None)
@given(times, times)
def test_sync_matches_exhaustive_search(ta, tb):
    pair = nearest_neighbor_sync(stream(ta), stream(tb))
    assert pair.b_index.tolist() == brute_force(ta, tb).tolist()


def test_stream_validation():
    with pytest.raises(ValueError):
        stream([0.0, 0.0])
    with pytest.raises(ValueError):
        TimedStream([0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        nearest_neighbor_sync(stream([]), stream([0.0]))


# --- localisation -------------------------------------------------------------------


@pytest.mark.parametrize("cell", ARRAY.cells())
def test_single_cell_exact(cell):
    g = np.zeros((4, 4))
    g[cell] = 2.0
    e = localize(frame(g))
    assert (e.x, e.y) == ARRAY.center(cell) and e.confidence == 2.0


def test_equal_neighbours_give_midpoint():
    g = np.zeros((4, 4))
    g[1, 1] = g[1, 2] = 3.0
    e = localize(frame(g))
    assert (e.x, e.y) == (75.0, 56.25)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=8, max_size=8))
def test_mirror_symmetric_frame_on_axis(half):
    left = np.array(half).reshape(4, 2)
    g = np.hstack([left, left[:, ::-1]])
    e = localize(frame(g))
    if e.detected:
        assert e.x == pytest.approx(75.0)


def test_below_floor_not_detected():
    e = localize(frame(np.full((4, 4), 0.4)))
    assert not e.detected and np.isnan(e.x)


# --- velocity ------------------------------------------------------------------------


def track(t, x, y=None):
    y = np.zeros_like(x) if y is None else y
    return [LocalizationEstimate(float(a), float(b), float(c), 1.0) for a, b, c in zip(t, x, y)]


def test_stationary_track():
    t = np.arange(20) * 0.05
    v = estimate_velocity(track(t, np.full(20, 30.0)))
    assert np.all(v[:, 1:] == 0)


def test_linear_track_exact():
    t = np.arange(30) * 0.05
    v = estimate_velocity(track(t, 10 * t, 5 * t))
    assert np.allclose(v[:, 1], 10.0) and np.allclose(v[:, 2], 5.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-500, 500), st.floats(-100, 100), st.integers(1, 9))
def test_constant_velocity_exact_for_any_window(v, x0, window):
    t = np.arange(25) * 0.05
    est = estimate_velocity(track(t, x0 + v * t), window)
    assert np.allclose(est[:, 1], v, atol=1e-9 * max(1.0, abs(v)) + 1e-9)


def test_undetected_samples_skipped():
    t = np.arange(6) * 0.05
    tr = track(t, 10 * t)
    tr[2] = LocalizationEstimate(tr[2].t, np.nan, np.nan, 0.0, detected=False)
    v = estimate_velocity(tr)
    assert v.shape == (5, 3) and np.allclose(v[:, 1], 10.0)


def test_velocity_needs_two_points():
    with pytest.raises(ValueError):
        estimate_velocity(track([0.0], [1.0]))


def test_track_csv(tmp_path):
    g = np.zeros((4, 4))
    g[0, 0] = 1.0
    write_track_csv(tmp_path / "t.csv", localize_track([frame(g, 0.0), frame(g, 0.05)]))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t_s,x_mm,y_mm,confidence_uh" and len(lines) == 3


# --- repeatability ------------------------------------------------------------------------


def test_identical_cycles_correlate_fully():
    curve = np.sin(np.linspace(0, np.pi, 50))
    assert repeatability_correlation(np.tile(curve, (200, 1))) == pytest.approx(100.0)


def test_scaled_cycles_still_correlate_fully():
    curves = np.tile(np.linspace(0, 1, 50) ** 2, (10, 1))
    curves[-3:] *= 0.5
    assert repeatability_correlation(curves) == pytest.approx(100.0)


def test_repeatability_needs_enough_cycles():
    with pytest.raises(ValueError):
        repeatability_correlation(np.ones((5, 10)))


# --- characterisation -----------------------------------------------------------------------


def cycle_streams(cal, rho, **kw):
    c = simulate_indentation_cycle(cal.lattice, cal.gap, rho, **kw)
    return TimedStream(c.t, np.column_stack([c.force, c.displacement])), TimedStream.from_frames(c.frames)


@pytest.mark.parametrize("rho,expected", [
    (0.07, (0.37, 1.78, 39.04, 20.07)),
    (0.10, (0.54, 3.61, 18.92, 17.00)),
    (0.20, (2.52, 16.68, 1.70, 8.70)),
])
def test_characterize_round_trip(cal, rho, expected):
    m = characterize(*cycle_streams(cal, rho))
    got = (m.effective_stiffness, m.operational_force_range, m.sensitivity, m.hysteresis)
    assert got == pytest.approx(expected, rel=0.01)


def test_characterize_offset_streams(cal):
    # inductance logged 10 ms after force on a different coil
    force, induct = cycle_streams(cal, 0.10, cell=(2, 1))
    shifted = TimedStream(induct.t + 0.010, induct.values)
    m = characterize(force, shifted)
    assert m.sensitivity == pytest.approx(18.92, rel=0.01)


def test_zero_amplitude_cycle_rejected(cal):
    t = np.arange(10) * 0.05
    force = TimedStream(t, np.zeros((10, 2)))
    with pytest.raises(IncompleteCycleError):
        characterize(force, TimedStream(t, np.zeros((10, 16))))


def test_short_stroke_rejected(cal):
    with pytest.raises(IncompleteCycleError):
        characterize(*cycle_streams(cal, 0.10, peak=4.0))
