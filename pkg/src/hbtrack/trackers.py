"""Per-timeslot beam trackers: hierarchical (proposed), FCT and level-U-only.

All trackers share the restart rule: when the estimated direction misses
the true one by more than the half-power beamwidth of the serving level-U
beam (or the search fails outright), the next timeslot restarts
initialisation from scratch.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .channel import LosChannel, NoiseModel, PilotCounter, best_codeword
from .codebook import (
    ArrayConfig,
    Codebook,
    Codeword,
    angle_from_direction,
    codewords_near,
    half_power_beamwidth,
)
from .errors import ConfigurationError, ParameterError
from .geometry import Point2D

INIT_SLOTS = 3
RANGE_FLOOR = 1e-3

INITIALIZING = "init"
TRACKING = "track"


def default_schedule(levels: int) -> tuple[int, ...]:
    """Pilots per level: 2 for levels 1-2, 4 from level 3 on."""
    return tuple(2 if u <= 2 else 4 for u in range(1, levels + 1))


@dataclass(frozen=True)
class TrackerConfig:
    pilots_per_level: tuple[int, ...] | None = None
    refine_depth: int = 3
    sigma_e: float = 0.0
    restart_beamwidth_level: int | None = None
    fct_init_pilots: int | None = None
    fct_track_pilots: int = 16
    fallback: str = "keep"
    fallback_floor: int = 1

    def __post_init__(self):
        if self.pilots_per_level is not None:
            object.__setattr__(self, "pilots_per_level", tuple(int(p) for p in self.pilots_per_level))
        if self.sigma_e < 0:
            raise ConfigurationError("sigma_e must be >= 0")
        if self.fct_track_pilots < 1:
            raise ConfigurationError("fct_track_pilots must be >= 1")
        if self.fallback not in ("keep", "descend"):
            raise ConfigurationError(f"fallback must be 'keep' or 'descend', got {self.fallback!r}")

    def schedule(self, levels: int) -> tuple[int, ...]:
        sched = self.pilots_per_level or default_schedule(levels)
        if len(sched) != levels:
            raise ConfigurationError(f"pilots_per_level needs {levels} entries, got {len(sched)}")
        for u, k in enumerate(sched, start=1):
            if not 1 <= k <= 2**u:
                raise ConfigurationError(f"level {u}: {k} pilots outside 1..{2**u}")
        return sched

    def validate(self, levels: int):
        self.schedule(levels)
        if not 1 <= self.refine_depth <= levels - 3:
            raise ConfigurationError(f"refine_depth must be in 1..{levels - 3}, got {self.refine_depth}")
        bw = self.restart_beamwidth_level
        if bw is not None and not 1 <= bw <= levels:
            raise ConfigurationError(f"restart_beamwidth_level outside 1..{levels}")
        if self.fct_init_pilots is not None and self.fct_init_pilots < 1:
            raise ConfigurationError("fct_init_pilots must be >= 1")

    def tracking_pilots(self, levels: int) -> int:
        sched = self.schedule(levels)
        return sum(sched[levels - 1 - self.refine_depth:])


@dataclass
class TrackerState:
    rng: np.random.Generator
    phase: str = INITIALIZING
    init_done: int = 0
    location_history: deque = field(default_factory=lambda: deque(maxlen=3))
    direction_history: deque = field(default_factory=lambda: deque(maxlen=2))
    current_codeword: tuple[int, int] | None = None
    pilots: PilotCounter = field(default_factory=PilotCounter)
    restarts: int = 0
    slot: int = 0
    # test hook: added to the next slot's estimate, then cleared
    inject_error: float = 0.0

    def reset(self):
        self.phase = INITIALIZING
        self.init_done = 0
        self.location_history.clear()
        self.direction_history.clear()


class SlotResult(NamedTuple):
    estimated_theta: float
    estimated_location: Point2D
    pilots_used: int
    restarted: bool
    phase: str = INITIALIZING
    true_theta: float = float("nan")
    failed: bool = False
    codeword: tuple[int, int] | None = None

    @property
    def error(self) -> float:
        return self.estimated_theta - self.true_theta


def estimate_distance(r_true: float, sigma_e: float, rng: np.random.Generator) -> float:
    """Two-way ToA range: r + N(0, sigma_e^2), floored at 1 mm."""
    if sigma_e == 0:
        return r_true
    return max(r_true + sigma_e * rng.standard_normal(), RANGE_FLOOR)


def estimate_location(r_tilde: float, theta_tilde: float) -> Point2D:
    return Point2D(r_tilde * math.cos(theta_tilde), r_tilde * math.sin(theta_tilde))


def predict_location(history: Sequence[Point2D]) -> Point2D:
    """Next point from the last three: p(t) plus the mean of the last two displacements."""
    if len(history) != 3:
        raise ParameterError("prediction needs exactly three past locations")
    (x0, y0), (x1, y1), (x2, y2) = history
    return Point2D(x2 + ((x2 - x1) + (x1 - x0)) / 2, y2 + ((y2 - y1) + (y1 - y0)) / 2)


def direction_of(p: Point2D, config: ArrayConfig) -> float:
    """psi toward an AP-frame point; points behind the array clip to endfire."""
    theta = math.atan2(p[1], p[0])
    theta = max(-math.pi / 2, min(math.pi / 2, theta))
    return config.spacing_ratio * math.sin(theta)


@lru_cache(maxsize=16)
def _beamwidths(config: ArrayConfig, level: int) -> np.ndarray:
    cb = Codebook(config)
    return np.array([half_power_beamwidth(level, cb, m) for m in range(1, 2**level + 1)])


def serving_beamwidth(theta: float, codebook: Codebook, level: int | None = None) -> float:
    """Half-power beamwidth of the level codeword whose sector holds theta."""
    level = level or codebook.levels
    psi = codebook.config.spacing_ratio * math.sin(theta)
    return float(_beamwidths(codebook.config, level)[codebook.sector_index(level, psi) - 1])


def _search_levels(
    first_level: int,
    ref_psi: float,
    codebook: Codebook,
    channel: LosChannel,
    noise: NoiseModel,
    sched: Sequence[int],
    counter: PilotCounter,
    fallback: str = "keep",
    floor: int = 1,
) -> tuple[Codeword | None, bool]:
    """Level-by-level search from ``first_level`` up to level U.

    Level u tests ``sched[u-1]`` codewords nearest the previous winner's
    centre (``ref_psi`` at the first level). A level fails when its best
    power stays under the detection threshold. Two recovery rules:

    ``keep``
        the failed level is dropped and the search carries on from the last
        winner, so the pilot count never changes. The slot fails when the
        first level fails in Phase 1, or when every level fails.
    ``descend``
        the search drops to the level below (never under ``floor``),
        repeats it around that level's reference and climbs again. Costs
        extra pilots; gives up after failing at ``floor`` or U times.

    Returns the final codeword (the level-U winner, else the latest winner at
    any level) and whether the slot failed.
    """
    levels = codebook.levels
    if fallback == "keep":
        cur = None
        first_ok = True
        for u in range(first_level, levels + 1):
            det = best_codeword(codewords_near(u, ref_psi, sched[u - 1], codebook), channel, noise, codebook,
                                counter)
            if det.success:
                cur = det.winner
                ref_psi = cur.sector_center
            elif u == first_level:
                first_ok = False
                if first_level == 1:
                    # nothing coarser to fall back on; follow the argmax anyway
                    cur = det.winner
                    ref_psi = cur.sector_center
        failed = cur is None or (first_level == 1 and not first_ok)
        return cur, failed
    if fallback != "descend":
        raise ConfigurationError(f"unknown fallback rule {fallback!r}")

    refs = {u: ref_psi for u in range(1, first_level + 1)}
    u = first_level
    fallbacks = 0
    last = None
    while True:
        det = best_codeword(codewords_near(u, refs[u], sched[u - 1], codebook), channel, noise, codebook, counter)
        if det.success:
            last = det.winner
            if u == levels:
                return det.winner, False
            refs[u + 1] = det.winner.sector_center
            u += 1
            continue
        fallbacks += 1
        if u <= max(floor, 1) or fallbacks > levels:
            return last, True
        u -= 1


def _finish(
    state: TrackerState,
    cw: Codeword | None,
    theta: float,
    channel: LosChannel,
    cfg: TrackerConfig,
    before: int,
    failed: bool,
) -> SlotResult:
    if state.inject_error:
        theta += state.inject_error
        state.inject_error = 0.0
    state.current_codeword = cw.id if cw is not None else None
    r_tilde = estimate_distance(channel.r, cfg.sigma_e, state.rng)
    return SlotResult(
        estimated_theta=theta,
        estimated_location=estimate_location(r_tilde, theta),
        pilots_used=state.pilots.count - before,
        restarted=False,
        phase=state.phase,
        true_theta=channel.theta,
        failed=failed,
        codeword=state.current_codeword,
    )


def phase1_slot(state: TrackerState, codebook: Codebook, channel: LosChannel, noise: NoiseModel,
                cfg: TrackerConfig) -> SlotResult:
    """Exhaustive level-1 search, then one refinement per level up to level U."""
    if state.phase != INITIALIZING:
        raise ParameterError("phase1_slot called outside initialisation")
    sched = cfg.schedule(codebook.levels)
    before = state.pilots.count
    cw, failed = _search_levels(1, 0.0, codebook, channel, noise, sched, state.pilots, cfg.fallback)
    psi = cw.sector_center if cw is not None else 0.0
    theta = angle_from_direction(psi, codebook.config)
    return _finish(state, cw, theta, channel, cfg, before, failed=failed)


def phase3_slot(state: TrackerState, predicted: Point2D, codebook: Codebook, channel: LosChannel,
                noise: NoiseModel, cfg: TrackerConfig) -> SlotResult:
    """Refine from level U-g toward the predicted location up to level U."""
    if state.phase != TRACKING:
        raise ParameterError("phase3_slot called before initialisation finished")
    levels = codebook.levels
    sched = cfg.schedule(levels)
    before = state.pilots.count
    psi_pred = direction_of(predicted, codebook.config)
    cw, failed = _search_levels(levels - cfg.refine_depth, psi_pred, codebook, channel, noise, sched,
                                state.pilots, cfg.fallback, cfg.fallback_floor)
    psi = psi_pred if cw is None else cw.sector_center
    theta = angle_from_direction(psi, codebook.config)
    return _finish(state, cw, theta, channel, cfg, before, failed=failed)


def _level_u_slot(state: TrackerState, psi_ref: float, count: int, codebook: Codebook,
                  channel: LosChannel, noise: NoiseModel, cfg: TrackerConfig) -> SlotResult:
    before = state.pilots.count
    det = best_codeword(codewords_near(codebook.levels, psi_ref, count, codebook), channel, noise,
                        codebook, state.pilots)
    theta = angle_from_direction(det.winner.sector_center, codebook.config)
    return _finish(state, det.winner, theta, channel, cfg, before, failed=not det.success)


def _check_restart(state: TrackerState, res: SlotResult, codebook: Codebook, cfg: TrackerConfig) -> SlotResult:
    bw = serving_beamwidth(res.estimated_theta, codebook, cfg.restart_beamwidth_level)
    if res.failed or abs(res.estimated_theta - res.true_theta) > bw:
        state.reset()
        state.restarts += 1
        res = res._replace(restarted=True)
    state.slot += 1
    return res


def _record_init(state: TrackerState, res: SlotResult):
    state.location_history.append(res.estimated_location)
    state.direction_history.append(res.estimated_theta)
    state.init_done += 1
    if state.init_done >= INIT_SLOTS:
        state.phase = TRACKING


def track_step(state: TrackerState, channel: LosChannel, codebook: Codebook, noise: NoiseModel,
               cfg: TrackerConfig) -> SlotResult:
    """One timeslot of the hierarchical tracker."""
    if state.phase == INITIALIZING:
        res = phase1_slot(state, codebook, channel, noise, cfg)
        _record_init(state, res)
    else:
        predicted = predict_location(state.location_history)
        res = phase3_slot(state, predicted, codebook, channel, noise, cfg)
        state.location_history.append(res.estimated_location)
    return _check_restart(state, res, codebook, cfg)


def level8_track_step(state: TrackerState, channel: LosChannel, codebook: Codebook, noise: NoiseModel,
                      cfg: TrackerConfig) -> SlotResult:
    """Ablation: tracking slots search only level U, with the same pilot budget."""
    if state.phase == INITIALIZING:
        res = phase1_slot(state, codebook, channel, noise, cfg)
        _record_init(state, res)
    else:
        predicted = predict_location(state.location_history)
        psi_pred = direction_of(predicted, codebook.config)
        res = _level_u_slot(state, psi_pred, cfg.tracking_pilots(codebook.levels), codebook, channel,
                            noise, cfg)
        state.location_history.append(res.estimated_location)
    return _check_restart(state, res, codebook, cfg)


def fct_initial_search(codebook: Codebook, channel: LosChannel, noise: NoiseModel, budget: int,
                       counter: PilotCounter) -> tuple[Codeword, bool]:
    """Level-U search with a pilot budget below N.

    Every fourth codeword is probed first; the rest of the budget fills in the
    skipped neighbours of the strongest probes, strongest first. The overall
    strongest measurement wins.
    """
    levels = codebook.levels
    n = 2**levels
    if budget >= n:
        det = best_codeword(codebook.level(levels), channel, noise, codebook, counter)
        return det.winner, det.success
    stride = 4 if n >= 8 else 2
    amps = codebook._conj[levels - 1] @ channel.vector
    var = noise.variance(levels, codebook)

    def observe(idx):
        a = amps[idx]
        if var:
            z = noise.rng.standard_normal((2, a.size))
            a = a + math.sqrt(var / 2) * (z[0] + 1j * z[1])
        counter.add(len(idx))
        return a.real**2 + a.imag**2

    probes = np.arange(1, n, stride)[:budget]
    powers = np.full(n, -np.inf)
    powers[probes] = observe(probes)
    left = budget - probes.size
    extra = []
    for p in probes[np.argsort(-powers[probes], kind="stable")]:
        if left <= 0:
            break
        group = [i for i in range(p - p % stride, p - p % stride + stride) if i != p][:left]
        extra.extend(group)
        left -= len(group)
    if extra:
        extra = np.array(sorted(extra))
        powers[extra] = observe(extra)
    k = int(np.argmax(powers))
    return codebook.codeword(levels, k + 1), not powers[k] < noise.threshold(levels, codebook)


def fct_track_step(state: TrackerState, channel: LosChannel, codebook: Codebook, noise: NoiseModel,
                   cfg: TrackerConfig) -> SlotResult:
    """Baseline: level-U search with angle-domain linear extrapolation."""
    levels = codebook.levels
    if state.phase == INITIALIZING:
        before = state.pilots.count
        budget = cfg.fct_init_pilots or 2 ** (levels - 1)
        cw, ok = fct_initial_search(codebook, channel, noise, budget, state.pilots)
        theta = angle_from_direction(cw.sector_center, codebook.config)
        res = _finish(state, cw, theta, channel, cfg, before, failed=not ok)
        _record_init(state, res)
    else:
        t1, t0 = state.direction_history[-1], state.direction_history[-2]
        theta_pred = max(-math.pi / 2, min(math.pi / 2, 2 * t1 - t0))
        psi_pred = codebook.config.spacing_ratio * math.sin(theta_pred)
        res = _level_u_slot(state, psi_pred, cfg.fct_track_pilots, codebook, channel, noise, cfg)
        state.direction_history.append(res.estimated_theta)
        state.location_history.append(res.estimated_location)
    return _check_restart(state, res, codebook, cfg)


StepFn = Callable[[TrackerState, LosChannel, Codebook, NoiseModel, TrackerConfig], SlotResult]

TRACKERS: dict[str, StepFn] = {
    "proposed": track_step,
    "level8": level8_track_step,
    "fct": fct_track_step,
}
