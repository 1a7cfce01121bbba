"""Monte Carlo harness: episodes, pooled metrics, sweeps and CSV output.

Episode ``i`` of a run draws all of its randomness from
``SeedSequence(base_seed, spawn_key=(i,))``, split into a motion stream and
a link stream. Results therefore do not depend on how episodes are spread
over worker processes, and different trackers see identical motions.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .channel import NoiseModel, los_channel
from .codebook import ArrayConfig, Codebook, _cached_codebook
from .errors import ConfigurationError, ParameterError
from .geometry import RoomConfig, WalkParams, generate_motion
from .trackers import TRACKERS, SlotResult, TrackerConfig, TrackerState, default_schedule

CSV_FIELDS = [
    "tracker", "q_i", "sigma_e_m", "snr_db", "episodes",
    "mse_rad2", "mse_ci95", "avg_pilots", "avg_pilots_ci95", "restart_rate",
]
Z95 = 1.959963984540054
FULL_SCALE_EPISODES = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    room: RoomConfig = field(default_factory=RoomConfig)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    step_length: float = 1.0
    num_original_steps: int = 10
    start_disk_radius: float = 1.5
    q_i: tuple[int, ...] = (10,)
    sigma_e: tuple[float, ...] = (0.0,)
    snr_db: float = 10.0
    no_noise: bool = False
    snr_reference: str = "level"
    trackers: tuple[str, ...] = ("proposed",)
    pilots_per_level: tuple[int, ...] | None = None
    refine_depth: int = 3
    fallback: str = "keep"
    fallback_floor: int = 1
    episodes: int = 1000
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("q_i", "sigma_e", "trackers"):
            val = getattr(self, name)
            if isinstance(val, (int, float, str)):
                val = (val,)
            object.__setattr__(self, name, tuple(val))
        if self.episodes < 1:
            raise ConfigurationError("episodes must be >= 1")
        if not self.q_i or not self.sigma_e or not self.trackers:
            raise ConfigurationError("q_i, sigma_e and trackers must be non-empty")
        unknown = set(self.trackers) - set(TRACKERS)
        if unknown:
            raise ConfigurationError(f"unknown tracker(s): {sorted(unknown)}")
        for q in self.q_i:
            WalkParams(self.step_length, self.num_original_steps, q, self.start_disk_radius)
        if self.start_disk_radius > min(self.room.width, self.room.height) / 2:
            raise ConfigurationError("start disk does not fit in the room")
        for s in self.sigma_e:
            self.tracker_config(s)
        NoiseModel(self.snr_db, reference=self.snr_reference, rng=np.random.default_rng(0))

    def walk_params(self, q_i: int) -> WalkParams:
        return WalkParams(self.step_length, self.num_original_steps, q_i, self.start_disk_radius, self.base_seed)

    def tracker_config(self, sigma_e: float) -> TrackerConfig:
        cfg = TrackerConfig(pilots_per_level=self.pilots_per_level, refine_depth=self.refine_depth,
                            sigma_e=sigma_e, fallback=self.fallback, fallback_floor=self.fallback_floor)
        cfg.validate(self.array.levels)
        return cfg

    def timeslots(self, q_i: int) -> int:
        return self.num_original_steps * q_i


@dataclass
class EpisodeResult:
    tracker: str
    seed: int
    pilots: int
    slots: int
    sq_errors: np.ndarray
    restarts: int
    trace: list[SlotResult] | None = None

    @property
    def mse(self) -> float:
        return float(np.mean(self.sq_errors)) if self.slots else 0.0


@dataclass
class RunMetrics:
    tracker: str
    q_i: int
    sigma_e: float
    snr_db: float
    episodes: int
    mse: float
    mse_ci95: float
    avg_pilots: float
    avg_pilots_ci95: float
    restart_rate: float
    pilots_per_level: tuple[int, ...] | None = None

    def row(self) -> dict:
        return {
            "tracker": self.tracker, "q_i": self.q_i, "sigma_e_m": repr(float(self.sigma_e)),
            "snr_db": repr(float(self.snr_db)), "episodes": self.episodes,
            "mse_rad2": repr(self.mse), "mse_ci95": repr(self.mse_ci95),
            "avg_pilots": repr(self.avg_pilots), "avg_pilots_ci95": repr(self.avg_pilots_ci95),
            "restart_rate": repr(self.restart_rate),
        }


def episode_streams(base_seed: int, episode: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(motion, link) generators for one episode."""
    seq = np.random.SeedSequence(base_seed, spawn_key=(episode,))
    motion, link = seq.spawn(2)
    return np.random.default_rng(motion), np.random.default_rng(link)


def run_episode(scenario: ScenarioConfig, tracker_kind: str, seed: int, q_i: int | None = None,
                sigma_e: float | None = None, trace: bool = False) -> EpisodeResult:
    """Generate one motion and track it over every timeslot.

    ``seed`` is the episode counter under ``scenario.base_seed``.
    """
    if tracker_kind not in TRACKERS:
        raise ConfigurationError(f"unknown tracker {tracker_kind!r}")
    q_i = scenario.q_i[0] if q_i is None else q_i
    sigma_e = scenario.sigma_e[0] if sigma_e is None else sigma_e
    motion_rng, link_rng = episode_streams(scenario.base_seed, seed)
    path = generate_motion(scenario.room, scenario.walk_params(q_i), motion_rng)

    codebook = _cached_codebook(scenario.array)
    cfg = scenario.tracker_config(sigma_e)
    noise = NoiseModel(scenario.snr_db, rng=link_rng, no_noise=scenario.no_noise,
                       reference=scenario.snr_reference)
    step = TRACKERS[tracker_kind]
    state = TrackerState(rng=link_rng)
    phase = link_rng.uniform(0.0, 2 * math.pi)
    ap = scenario.room.ap_position

    sq = np.empty(path.timeslot_count)
    records = [] if trace else None
    for t, pos in enumerate(path.positions):
        ch = los_channel(pos, ap, scenario.array, phase=phase)
        res = step(state, ch, codebook, noise, cfg)
        sq[t] = res.error ** 2
        if trace:
            records.append(res)
    return EpisodeResult(tracker_kind, seed, state.pilots.count, path.timeslot_count, sq,
                         state.restarts, records)


def _run_chunk(args) -> list[EpisodeResult]:
    scenario, kind, q_i, sigma_e, seeds = args
    return [run_episode(scenario, kind, s, q_i, sigma_e) for s in seeds]


def run_episodes(scenario: ScenarioConfig, tracker_kind: str, q_i: int, sigma_e: float,
                 workers: int | None = None) -> list[EpisodeResult]:
    """All episodes of one configuration, returned in episode order."""
    workers = scenario.workers if workers is None else workers
    seeds = list(range(scenario.episodes))
    if workers <= 1:
        return _run_chunk((scenario, tracker_kind, q_i, sigma_e, seeds))
    chunk = max(1, math.ceil(len(seeds) / (4 * workers)))
    jobs = [(scenario, tracker_kind, q_i, sigma_e, seeds[i:i + chunk]) for i in range(0, len(seeds), chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_run_chunk, jobs):
            out.extend(part)
    return out


def compute_mse(errors: Iterable[float]) -> float:
    err = np.asarray(list(errors) if not isinstance(errors, np.ndarray) else errors, dtype=float)
    if err.size == 0:
        raise ParameterError("no errors to average")
    return float(np.mean(err**2))


def compute_avg_pilots(episodes: Sequence[EpisodeResult]) -> float:
    if not episodes:
        raise ParameterError("no episodes")
    slots = sum(e.slots for e in episodes)
    if slots == 0:
        raise ParameterError("episodes contain no timeslots")
    return sum(e.pilots for e in episodes) / slots


def ci95(samples: np.ndarray) -> float:
    """Normal-approximation 95% half-width of the sample mean."""
    if samples.size < 2:
        return float("nan")
    return float(Z95 * np.std(samples, ddof=1) / math.sqrt(samples.size))


def summarize(episodes: Sequence[EpisodeResult], tracker: str, q_i: int, sigma_e: float, snr_db: float,
              pilots_per_level: tuple[int, ...] | None = None) -> RunMetrics:
    if not episodes:
        raise ParameterError("no episodes")
    slots = sum(e.slots for e in episodes)
    pooled = float(sum(float(np.sum(e.sq_errors)) for e in episodes) / slots)
    per_mse = np.array([e.mse for e in episodes])
    per_pilots = np.array([e.pilots / e.slots for e in episodes])
    return RunMetrics(
        tracker=tracker, q_i=q_i, sigma_e=sigma_e, snr_db=snr_db, episodes=len(episodes),
        mse=pooled, mse_ci95=ci95(per_mse),
        avg_pilots=compute_avg_pilots(episodes), avg_pilots_ci95=ci95(per_pilots),
        restart_rate=sum(e.restarts for e in episodes) / slots,
        pilots_per_level=pilots_per_level,
    )


def evaluate(scenario: ScenarioConfig, tracker: str, q_i: int, sigma_e: float,
             workers: int | None = None) -> RunMetrics:
    eps = run_episodes(scenario, tracker, q_i, sigma_e, workers)
    return summarize(eps, tracker, q_i, sigma_e, scenario.snr_db, scenario.pilots_per_level)


def schedule_with(levels: int, per_level: int) -> tuple[int, ...]:
    """Default schedule with every level from 3 on set to ``per_level`` pilots."""
    return tuple(p if u <= 2 else min(per_level, 2**u) for u, p in enumerate(default_schedule(levels), start=1))


def sweep(scenario: ScenarioConfig, axis: str, values: Sequence | None = None,
          workers: int | None = None) -> list[RunMetrics]:
    """One RunMetrics row per (axis value, tracker).

    Axes ``sigma_e`` and ``q_i`` vary one parameter and take the other from the
    first entry of the scenario. ``pilots_per_level`` values are the pilot
    count for levels 3..U.
    """
    if axis == "sigma_e":
        values = scenario.sigma_e if values is None else values
    elif axis == "q_i":
        values = scenario.q_i if values is None else values
    elif axis == "pilots_per_level":
        if values is None:
            raise ParameterError("pilots_per_level sweep needs explicit values")
    else:
        raise ParameterError(f"unknown sweep axis {axis!r}")
    if len(values) == 0:
        raise ParameterError("sweep axis has no values")

    rows = []
    for val in values:
        sc, q_i, sigma_e = scenario, scenario.q_i[0], scenario.sigma_e[0]
        if axis == "sigma_e":
            sigma_e = float(val)
        elif axis == "q_i":
            q_i = int(val)
        else:
            sched = schedule_with(scenario.array.levels, int(val)) if np.isscalar(val) else tuple(val)
            sc = dataclasses.replace(scenario, pilots_per_level=sched)
        for kind in scenario.trackers:
            rows.append(evaluate(sc, kind, q_i, sigma_e, workers))
    return rows


def write_csv(rows: Sequence[RunMetrics], out: TextIO) -> None:
    with_sched = any(r.pilots_per_level is not None for r in rows)
    fields = CSV_FIELDS + (["pilots_per_level"] if with_sched else [])
    writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        row = r.row()
        if with_sched:
            row["pilots_per_level"] = "-".join(map(str, r.pilots_per_level or ()))
        writer.writerow(row)


def write_trace(result: EpisodeResult, out: TextIO) -> None:
    """One JSON object per timeslot."""
    for t, res in enumerate(result.trace or [], start=1):
        out.write(json.dumps({
            "timeslot": t, "phase": res.phase, "pilots": res.pilots_used,
            "theta": res.true_theta, "theta_est": res.estimated_theta,
            "restart": res.restarted, "failed": res.failed,
            "codeword": list(res.codeword) if res.codeword else None,
        }) + "\n")
