import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hbtrack.channel import los_channel
from hbtrack.errors import ConfigurationError, ParameterError
from hbtrack.geometry import Point2D
from hbtrack.trackers import (
    INITIALIZING,
    RANGE_FLOOR,
    TRACKING,
    SlotResult,
    TrackerConfig,
    TrackerState,
    _check_restart,
    default_schedule,
    estimate_distance,
    estimate_location,
    phase1_slot,
    phase3_slot,
    predict_location,
    serving_beamwidth,
)

from conftest import AP, drive, noisy, point_at, quiet


def test_default_schedule():
    assert default_schedule(8) == (2, 2, 4, 4, 4, 4, 4, 4)
    assert sum(default_schedule(8)) == 28
    assert 1 - 28 / 128 == pytest.approx(0.7813, abs=5e-5)


@pytest.mark.parametrize("kwargs", [
    {"refine_depth": 0}, {"refine_depth": 6}, {"pilots_per_level": (2,) * 7},
    {"pilots_per_level": (3, 2, 4, 4, 4, 4, 4, 4)}, {"pilots_per_level": (0, 2, 4, 4, 4, 4, 4, 4)},
    {"restart_beamwidth_level": 9},
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        TrackerConfig(**kwargs).validate(8)


def test_config_rejects_bad_scalars():
    with pytest.raises(ConfigurationError):
        TrackerConfig(sigma_e=-1)
    with pytest.raises(ConfigurationError):
        TrackerConfig(fallback="retry")


def test_tracking_budget():
    assert TrackerConfig().tracking_pilots(8) == 16
    # levels 3..8 at four pilots each
    assert TrackerConfig(refine_depth=5).tracking_pilots(8) == 24
    assert TrackerConfig(pilots_per_level=(2,) * 8).tracking_pilots(8) == 8


def test_distance_noise_free():
    assert estimate_distance(1.7, 0.0, np.random.default_rng(0)) == 1.7


def test_distance_noise_std():
    rng = np.random.default_rng(12)
    d = np.array([estimate_distance(3.0, 0.5, rng) for _ in range(100_000)])
    assert d.std(ddof=1) == pytest.approx(0.5, rel=0.02)


def test_distance_floor():
    class Neg:
        def standard_normal(self):
            return -100.0
    assert estimate_distance(0.01, 0.5, Neg()) == RANGE_FLOOR


@pytest.mark.parametrize("r,theta,expect", [
    (1, 0, (1, 0)), (2, math.pi / 2, (0, 2)), (math.sqrt(2), math.pi / 4, (1, 1)),
])
def test_location_estimate(r, theta, expect):
    assert estimate_location(r, theta) == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("hist,expect", [
    ([(0, 0), (1, 0), (2, 0)], (3, 0)),
    ([(0, 0), (0, 0), (0, 0)], (0, 0)),
    ([(0, 0), (1, 0), (1, 1)], (1.5, 1.5)),
])
def test_prediction_examples(hist, expect):
    assert predict_location([Point2D(*p) for p in hist]) == pytest.approx(expect)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-1, 1), st.floats(-1, 1))
def test_prediction_exact_on_uniform_motion(x, y, dx, dy):
    pts = [Point2D(x + k * dx, y + k * dy) for k in range(4)]
    got = predict_location(pts[:3])
    scale = 1 + abs(x) + abs(y)
    assert abs(got.x - pts[3].x) <= 8 * np.finfo(float).eps * scale
    assert abs(got.y - pts[3].y) <= 8 * np.finfo(float).eps * scale


def test_prediction_needs_three_points():
    with pytest.raises(ParameterError):
        predict_location([Point2D(0, 0)] * 2)


def test_phase1_pilots_and_noiseless_descent(cb256):
    rng = np.random.default_rng(3)
    for theta in rng.uniform(-1.45, 1.45, 200):
        state = TrackerState(rng=np.random.default_rng(0))
        ch = los_channel(point_at(theta), AP, cb256.config)
        res = phase1_slot(state, cb256, ch, quiet(), TrackerConfig())
        assert res.pilots_used == 28
        lo, hi = cb256.codeword(*res.codeword).sector_bounds
        assert lo - 1e-12 <= ch.psi <= hi + 1e-12


def test_phase1_with_two_pilots_everywhere(cb256):
    state = TrackerState(rng=np.random.default_rng(0))
    ch = los_channel(point_at(0.2), AP, cb256.config)
    res = phase1_slot(state, cb256, ch, quiet(), TrackerConfig(pilots_per_level=(2,) * 8))
    assert res.pilots_used == 16


def test_phase_guards(cb256):
    state = TrackerState(rng=np.random.default_rng(0), phase=TRACKING)
    ch = los_channel(point_at(0.2), AP, cb256.config)
    with pytest.raises(ParameterError):
        phase1_slot(state, cb256, ch, quiet(), TrackerConfig())
    with pytest.raises(ParameterError):
        phase3_slot(TrackerState(rng=np.random.default_rng(0)), Point2D(1, 0), cb256, ch, quiet(), TrackerConfig())


@pytest.mark.parametrize("g,pilots", [(3, 16), (1, 8), (5, 24)])
def test_phase3_pilots_and_refinement(cb256, g, pilots):
    cfg = TrackerConfig(refine_depth=g)
    rng = np.random.default_rng(g)
    for theta in rng.uniform(-1.4, 1.4, 100):
        state = TrackerState(rng=np.random.default_rng(0), phase=TRACKING)
        p = point_at(theta)
        ch = los_channel(p, AP, cb256.config)
        res = phase3_slot(state, p, cb256, ch, quiet(), cfg)
        assert res.pilots_used == pilots
        lo, hi = cb256.codeword(*res.codeword).sector_bounds
        assert lo - 1e-12 <= ch.psi <= hi + 1e-12


def test_proposed_pilot_schedule_when_stationary(cb256):
    state, res = drive("proposed", [point_at(0.3)] * 100, cb256, quiet())
    assert [r.pilots_used for r in res[:3]] == [28] * 3
    assert all(r.phase == INITIALIZING for r in res[:3])
    assert all(r.pilots_used == 16 and r.phase == TRACKING for r in res[3:])
    assert state.pilots.count == 3 * 28 + 97 * 16 == 1636
    assert state.restarts == 0


def test_fct_pilot_schedule_when_stationary(cb256):
    state, res = drive("fct", [point_at(-0.6)] * 20, cb256, quiet())
    assert [r.pilots_used for r in res[:3]] == [128] * 3
    assert all(r.pilots_used == 16 for r in res[3:])
    # zero angular velocity: every tracking estimate repeats the last one
    assert len({r.estimated_theta for r in res[3:]}) == 1
    assert state.restarts == 0


def test_level8_budget_and_zero_error_at_sector_center(cb256):
    cw = cb256.codeword(8, 170)
    theta = math.asin(cw.sector_center / 0.5)
    state, res = drive("level8", [point_at(theta)] * 30, cb256, quiet())
    assert [r.pilots_used for r in res[:3]] == [28] * 3
    assert all(r.pilots_used == 16 for r in res[3:])
    assert max(abs(r.error) for r in res) < 1e-12


def test_fct_noiseless_init_finds_sector(cb256):
    rng = np.random.default_rng(8)
    for theta in rng.uniform(-1.4, 1.4, 100):
        state, res = drive("fct", [point_at(theta)], cb256, quiet())
        lo, hi = cb256.codeword(*res[0].codeword).sector_bounds
        psi = 0.5 * math.sin(res[0].true_theta)
        assert lo - 1e-12 <= psi <= hi + 1e-12


def _slot(est, true):
    return SlotResult(est, Point2D(1, 0), 16, False, TRACKING, true)


def test_restart_threshold_is_strict(cb256):
    cfg = TrackerConfig()
    est = 0.4
    bw = serving_beamwidth(est, cb256)
    state = TrackerState(rng=np.random.default_rng(0), phase=TRACKING)
    assert not _check_restart(state, _slot(est, est - bw * (1 - 1e-9)), cb256, cfg).restarted
    assert state.phase == TRACKING
    assert _check_restart(state, _slot(est, est - bw * (1 + 1e-9)), cb256, cfg).restarted
    assert state.phase == INITIALIZING and state.restarts == 1


def test_serving_beamwidth_defaults_to_top_level(cb256):
    assert serving_beamwidth(0.001, cb256) == pytest.approx(0.886 * 2 / 256, rel=0.2)
    # wider near endfire
    assert serving_beamwidth(1.2, cb256) > serving_beamwidth(0.0, cb256)
    assert serving_beamwidth(0.0, cb256, level=5) > serving_beamwidth(0.0, cb256)


@pytest.mark.parametrize("kind", ["proposed", "level8", "fct"])
def test_forced_error_restarts_next_slot(cb256, kind):
    pos = [point_at(0.1)] * 10
    state, res = drive(kind, pos[:5], cb256, quiet())
    assert state.phase == TRACKING
    state.inject_error = 0.5
    _, more = drive(kind, pos[5:7], cb256, quiet(), state=state)
    assert more[0].restarted
    assert more[1].phase == INITIALIZING
    assert more[1].pilots_used == (128 if kind == "fct" else 28)
    assert state.restarts == 1


@given(st.integers(0, 10_000), st.sampled_from(["proposed", "level8", "fct"]))
def test_restart_state_machine(seed, kind):
    from hbtrack.codebook import ArrayConfig, _cached_codebook
    cb = _cached_codebook(ArrayConfig())
    rng = np.random.default_rng(seed)
    # erratic UE close to the AP so that restarts actually happen
    pts = [Point2D(*rng.uniform([0.2, -2], [2, 2])) for _ in range(15)]
    _, res = drive(kind, pts, cb, noisy(seed, snr_db=5.0), seed=seed)
    done = 0  # initialisation slots completed since the last (re)start
    for prev, cur in zip(res, res[1:]):
        bw = serving_beamwidth(prev.estimated_theta, cb)
        assert prev.restarted == (prev.failed or abs(prev.error) > bw)
        if prev.restarted:
            done = 0
        elif prev.phase == INITIALIZING:
            done += 1
        assert cur.phase == (INITIALIZING if done < 3 else TRACKING)
        if cur.phase == INITIALIZING:
            assert cur.pilots_used == (128 if kind == "fct" else 28)
        else:
            assert cur.pilots_used == 16


def test_descend_fallback_recovers_with_extra_pilots(cb256):
    # at very low SNR some levels fail; the descend rule spends more pilots
    cfg_keep = TrackerConfig()
    cfg_desc = TrackerConfig(fallback="descend")
    extra = 0
    for seed in range(40):
        p = point_at(0.5)
        ch = los_channel(p, AP, cb256.config)
        a = phase3_slot(TrackerState(rng=np.random.default_rng(0), phase=TRACKING), p, cb256, ch,
                        noisy(seed, snr_db=0.0), cfg_keep)
        b = phase3_slot(TrackerState(rng=np.random.default_rng(0), phase=TRACKING), p, cb256, ch,
                        noisy(seed, snr_db=0.0), cfg_desc)
        assert a.pilots_used == 16
        assert b.pilots_used >= 16
        extra += b.pilots_used - 16
    assert extra > 0
