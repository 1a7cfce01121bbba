import math

import numpy as np
import pytest
from hypothesis import settings

from hbtrack.channel import NoiseModel, los_channel
from hbtrack.codebook import ArrayConfig, _cached_codebook
from hbtrack.geometry import Point2D
from hbtrack.trackers import TRACKERS, TrackerConfig, TrackerState

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

AP = Point2D(0.0, 0.0)


@pytest.fixture(scope="session")
def array256():
    return ArrayConfig()


@pytest.fixture(scope="session")
def cb256(array256):
    return _cached_codebook(array256)


@pytest.fixture(scope="session")
def cb16():
    return _cached_codebook(ArrayConfig(n_elements=16))


def quiet(seed=0):
    return NoiseModel(rng=np.random.default_rng(seed), no_noise=True)


def noisy(seed=0, snr_db=10.0):
    return NoiseModel(snr_db=snr_db, rng=np.random.default_rng(seed))


def point_at(theta, r=2.0):
    return Point2D(r * math.cos(theta), r * math.sin(theta))


def drive(kind, positions, codebook, noise, cfg=None, state=None, seed=0):
    """Run a tracker over fixed AP-frame positions and return (state, results)."""
    cfg = cfg or TrackerConfig()
    state = state or TrackerState(rng=np.random.default_rng(seed))
    step = TRACKERS[kind]
    out = []
    for p in positions:
        ch = los_channel(p, AP, codebook.config)
        out.append(step(state, ch, codebook, noise, cfg))
    return state, out


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
