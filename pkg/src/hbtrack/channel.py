"""LoS channel, noisy per-pilot power measurements and argmax beam selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .codebook import ArrayConfig, Codebook, Codeword, spatial_direction, steering_vector
from .errors import ParameterError
from .geometry import true_polar

DETECTION_FACTOR = 4.0


@dataclass
class LosChannel:
    beta: complex
    psi: float
    r: float
    theta: float
    vector: np.ndarray = field(repr=False)


def los_channel(
    ue: Sequence[float],
    ap: Sequence[float],
    config: ArrayConfig,
    phase: float = 0.0,
    pathloss_exponent: float = 0.0,
    reference_distance: float = 1.0,
) -> LosChannel:
    """h = beta * a(psi) for the direct path.

    |beta| is 1 unless a pathloss exponent is given, in which case it is
    ``(reference_distance / r) ** (exponent / 2)``.
    """
    r, theta = true_polar(ue, ap)
    psi = spatial_direction(theta, config)
    mag = (reference_distance / r) ** (pathloss_exponent / 2) if pathloss_exponent else 1.0
    beta = mag * complex(math.cos(phase), math.sin(phase))
    return LosChannel(beta, psi, r, theta, beta * steering_vector(config, psi))


@dataclass
class NoiseModel:
    """Complex AWGN on each pilot observation.

    ``snr_db`` is the SNR of a pilot sent through a codeword aligned with the
    UE. With ``reference="level"`` the noise variance is set per codebook
    level from that level's peak gain, so every level sees ``snr_db`` at its
    own beam peak. With ``reference="array"`` a single variance is derived
    from the full-array (level U) peak gain.
    """

    snr_db: float = 10.0
    rng: np.random.Generator | None = None
    no_noise: bool = False
    reference: str = "level"
    detection_factor: float = DETECTION_FACTOR

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ParameterError("snr_db must be finite; use no_noise for the noiseless limit")
        if self.reference not in ("level", "array"):
            raise ParameterError(f"unknown SNR reference {self.reference!r}")
        if self.rng is None:
            self.rng = np.random.default_rng()

    def nominal_variance(self, level: int, codebook: Codebook) -> float:
        ref = level if self.reference == "level" else codebook.levels
        return codebook.peak_gains[ref - 1] / 10 ** (self.snr_db / 10)

    def variance(self, level: int, codebook: Codebook) -> float:
        return 0.0 if self.no_noise else self.nominal_variance(level, codebook)

    def threshold(self, level: int, codebook: Codebook) -> float:
        return self.detection_factor * self.variance(level, codebook)


class PilotMeasurement(NamedTuple):
    codeword_id: tuple[int, int]
    power: float
    timeslot: int


class Detection(NamedTuple):
    winner: Codeword
    pilots_used: int
    success: bool
    power: float


class PilotCounter:
    """Episode-wide audit of pilot transmissions."""

    def __init__(self):
        self.count = 0

    def add(self, n: int = 1):
        self.count += n


def _observe(gain_amp: np.ndarray, var: float, rng: np.random.Generator) -> np.ndarray:
    if var == 0.0:
        return np.abs(gain_amp) ** 2
    z = rng.standard_normal((2, gain_amp.size))
    obs = gain_amp + math.sqrt(var / 2) * (z[0] + 1j * z[1])
    return obs.real**2 + obs.imag**2


def measure_pilot(
    cw: Codeword,
    ch: LosChannel,
    noise: NoiseModel,
    codebook: Codebook,
    counter: PilotCounter | None = None,
    timeslot: int = 0,
) -> PilotMeasurement:
    amp = np.array([np.vdot(cw.weights, ch.vector)])
    power = float(_observe(amp, noise.variance(cw.level, codebook), noise.rng)[0])
    if counter is not None:
        counter.add(1)
    return PilotMeasurement(cw.id, power, timeslot)


def _is_contiguous(candidates: Sequence[Codeword]) -> bool:
    first = candidates[0]
    return all(c.level == first.level and c.index == first.index + i for i, c in enumerate(candidates))


def best_codeword(
    candidates: Sequence[Codeword],
    ch: LosChannel,
    noise: NoiseModel,
    codebook: Codebook,
    counter: PilotCounter | None = None,
) -> Detection:
    """One pilot per candidate; the strongest measured power wins.

    Ties go to the earlier candidate (lower index for sorted lists). The
    detection fails when the winning power stays below
    ``detection_factor * noise variance``.
    """
    if not candidates:
        raise ParameterError("candidate list is empty")
    first = candidates[0]
    if _is_contiguous(candidates):
        amp = codebook._conj[first.level - 1][first.index - 1:first.index - 1 + len(candidates)] @ ch.vector
    else:
        amp = np.array([np.vdot(c.weights, ch.vector) for c in candidates])
    var = noise.variance(first.level, codebook)
    powers = _observe(amp, var, noise.rng)
    if counter is not None:
        counter.add(len(candidates))
    k = int(powers.argmax())
    best = float(powers[k])
    return Detection(candidates[k], len(candidates), not best < noise.detection_factor * var, best)
