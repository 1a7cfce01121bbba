"""ULA steering vectors and the U-level hierarchical beam codebook.

Spatial direction ``psi = (d/lambda) * sin(theta)`` spans
``[-spacing_ratio, spacing_ratio]``. Level ``u`` splits that span into
``2**u`` equal sectors; sector ``m`` (1-based) runs from low to high psi.

Codeword (u, 1) drives a contiguous block of ``2**u`` central elements,
steered at the centre of sector 1 and normalised to unit power. Every other
codeword of the level is a phase rotation of it, so all codewords at a level
share one pattern shape shifted in psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np
from scipy.optimize import brentq

from .errors import CodebookIndexError, ConfigurationError, ParameterError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayConfig:
    n_elements: int = 256
    spacing_ratio: float = 0.5
    carrier_frequency: float = 275e9

    def __post_init__(self):
        n = self.n_elements
        if int(n) != n or n < 2 or (int(n) & (int(n) - 1)) != 0:
            raise ConfigurationError(f"n_elements must be a power of 2 >= 2, got {n}")
        if not 0 < self.spacing_ratio <= 0.5:
            raise ConfigurationError("spacing_ratio must be in (0, 0.5]")
        if not self.carrier_frequency > 0:
            raise ConfigurationError("carrier_frequency must be positive")

    @property
    def levels(self) -> int:
        return int(self.n_elements).bit_length() - 1

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def element_spacing(self) -> float:
        return self.spacing_ratio * self.wavelength


def element_indices(n: int) -> np.ndarray:
    """Symmetric index set {l - (n-1)/2 : l = 0..n-1}."""
    return np.arange(n) - (n - 1) / 2


def steering_vector(config: ArrayConfig, psi: float) -> np.ndarray:
    n = config.n_elements
    return np.exp(-2j * np.pi * psi * element_indices(n)) / math.sqrt(n)


def spatial_direction(theta: float, config: ArrayConfig) -> float:
    if abs(theta) > math.pi / 2 + 1e-12:
        raise ParameterError(f"theta={theta} rad is outside [-pi/2, pi/2]")
    return config.spacing_ratio * math.sin(theta)


def angle_from_direction(psi: float, config: ArrayConfig) -> float:
    """Inverse of ``spatial_direction``; psi is clipped onto the visible range."""
    s = max(-1.0, min(1.0, psi / config.spacing_ratio))
    return math.asin(s)


@dataclass(frozen=True, eq=False)
class Codeword:
    level: int
    index: int
    weights: np.ndarray
    sector_center: float
    sector_width: float

    @property
    def id(self) -> tuple[int, int]:
        return (self.level, self.index)

    @property
    def sector_bounds(self) -> tuple[float, float]:
        half = self.sector_width / 2
        return (self.sector_center - half, self.sector_center + half)

    def __repr__(self):
        return f"Codeword(level={self.level}, index={self.index}, center={self.sector_center:+.6f})"


def _base_codeword(config: ArrayConfig, level: int) -> Codeword:
    n = config.n_elements
    active = 2**level
    width = 2 * config.spacing_ratio / active
    center = -config.spacing_ratio + width / 2
    idx = element_indices(n)
    lo = (n - active) // 2
    weights = np.zeros(n, dtype=complex)
    weights[lo:lo + active] = np.exp(-2j * np.pi * center * idx[lo:lo + active])
    weights /= np.linalg.norm(weights)
    return Codeword(level, 1, weights, center, width)


def rotate_codeword(base: Codeword, m: int) -> Codeword:
    """Codeword (u, m) from (u, 1) by a linear phase ramp of (m-1) sector widths."""
    if base.index != 1:
        raise ParameterError("rotation must start from the first codeword of a level")
    if not 1 <= m <= 2**base.level:
        raise CodebookIndexError(f"index {m} outside 1..{2**base.level} at level {base.level}")
    shift = (m - 1) * base.sector_width
    ramp = np.exp(-2j * np.pi * shift * element_indices(base.weights.size))
    return Codeword(base.level, m, base.weights * ramp, base.sector_center + shift, base.sector_width)


def codeword_gain(cw: Codeword, psi: float, config: ArrayConfig) -> float:
    """Beamforming gain |w^H a(psi)|^2."""
    return float(abs(np.vdot(cw.weights, steering_vector(config, psi))) ** 2)


class Codebook:
    """Immutable multi-resolution codebook; ``levels = log2(n_elements)``."""

    def __init__(self, config: ArrayConfig):
        self.config = config
        self.levels = config.levels
        self._codewords: list[list[Codeword]] = []
        self._conj: list[np.ndarray] = []
        for u in range(1, self.levels + 1):
            base = _base_codeword(config, u)
            row = [base] + [rotate_codeword(base, m) for m in range(2, 2**u + 1)]
            self._codewords.append(row)
            mat = np.conj(np.stack([cw.weights for cw in row]))
            mat.setflags(write=False)
            self._conj.append(mat)
        # peak of a uniform sub-array beam is reached at its own sector centre
        self.peak_gains = [codeword_gain(row[0], row[0].sector_center, config) for row in self._codewords]

    def level(self, u: int) -> list[Codeword]:
        self._check_level(u)
        return self._codewords[u - 1]

    def codeword(self, u: int, m: int) -> Codeword:
        self._check_level(u)
        if not 1 <= m <= 2**u:
            raise CodebookIndexError(f"index {m} outside 1..{2**u} at level {u}")
        return self._codewords[u - 1][m - 1]

    def __iter__(self) -> Iterable[Codeword]:
        for row in self._codewords:
            yield from row

    def _check_level(self, u: int):
        if not 1 <= u <= self.levels:
            raise CodebookIndexError(f"level {u} outside 1..{self.levels}")

    def sector_width(self, u: int) -> float:
        return 2 * self.config.spacing_ratio / 2**u

    def sector_edges_exact(self, u: int) -> list[Fraction]:
        """The 2**u + 1 sector edges of level u as exact rationals."""
        s = Fraction(self.config.spacing_ratio)
        width = 2 * s / 2**u
        return [-s + k * width for k in range(2**u + 1)]

    def sector_index(self, u: int, psi: float) -> int:
        """1-based index of the level-u sector containing psi (clipped to the range)."""
        s = self.config.spacing_ratio
        m = math.floor((psi + s) / self.sector_width(u)) + 1
        return min(max(m, 1), 2**u)

    def gains(self, u: int, first: int, count: int, vector: np.ndarray) -> np.ndarray:
        """|w^H v|^2 for codewords first..first+count-1 of level u against vector v."""
        return np.abs(self._conj[u - 1][first - 1:first - 1 + count] @ vector) ** 2

    def gain_table(self, u: int, points: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """Gains of every level-u codeword on a uniform psi grid, shape (2**u, points)."""
        s = self.config.spacing_ratio
        grid = np.linspace(-s, s, points)
        steer = np.exp(-2j * np.pi * np.outer(element_indices(self.config.n_elements), grid))
        steer /= math.sqrt(self.config.n_elements)
        return grid, np.abs(self._conj[u - 1] @ steer) ** 2


def build_codebook(config: ArrayConfig) -> Codebook:
    return Codebook(config)


def children(cw: Codeword, codebook: Codebook) -> tuple[Codeword, Codeword]:
    if cw.level >= codebook.levels:
        raise CodebookIndexError(f"level-{cw.level} codeword has no children")
    return (codebook.codeword(cw.level + 1, 2 * cw.index - 1),
            codebook.codeword(cw.level + 1, 2 * cw.index))


def near_window(codebook: Codebook, u: int, psi: float, k: int) -> int:
    """First index of the k consecutive level-u sectors with centres nearest psi.

    Ties go to the higher-psi side; the window is clipped at the codebook
    edges instead of wrapping.
    """
    total = 2**u
    if not 1 <= k <= total:
        raise ParameterError(f"count {k} outside 1..{total}")
    s = codebook.config.spacing_ratio
    # position of psi on the axis where sector centres sit at 1, 2, ..., total
    pos = (psi + s) / codebook.sector_width(u) + 0.5
    # window midpoint first + (k-1)/2 rounded to pos, halves rounding up
    first = math.floor(pos - (k - 1) / 2 + 0.5)
    return min(max(first, 1), total - k + 1)


def codewords_near(u: int, psi: float, k: int, codebook: Codebook) -> list[Codeword]:
    first = near_window(codebook, u, psi, k)
    return codebook.level(u)[first - 1:first - 1 + k]


@lru_cache(maxsize=None)
def _half_power_offsets(config: ArrayConfig, u: int) -> tuple[float, float]:
    """psi offsets of the -3 dB points from the sector centre of codeword (u, 1).

    Rotation shifts the whole pattern in psi, so these offsets hold for every
    codeword of the level.
    """
    cw = _cached_codebook(config).codeword(u, 1)
    c = cw.sector_center
    half = codeword_gain(cw, c, config) / 2

    def excess(p):
        return codeword_gain(cw, c + p, config) - half

    steps = np.linspace(0.0, 4 * cw.sector_width, 2049)[1:]
    edges = []
    for sign in (-1.0, 1.0):
        prev = 0.0
        for step in steps:
            p = sign * step
            if excess(p) < 0:
                edges.append(brentq(excess, min(prev, p), max(prev, p), xtol=1e-15))
                break
            prev = p
        else:
            edges.append(prev)
    return edges[0], edges[1]


def _beamwidth_psi(config: ArrayConfig, u: int, m: int) -> tuple[float, float]:
    cw = _cached_codebook(config).codeword(u, m)
    lo, hi = _half_power_offsets(config, u)
    return cw.sector_center + lo, cw.sector_center + hi


@lru_cache(maxsize=8)
def _cached_codebook(config: ArrayConfig) -> Codebook:
    return Codebook(config)


def half_power_beamwidth(u: int, codebook: Codebook, index: int | None = None) -> float:
    """Width in theta (rad) between the -3 dB points of codeword (u, index).

    ``index`` defaults to the codeword just above broadside. The psi-domain
    edges are mapped through ``theta = arcsin(psi / spacing_ratio)``, clipping
    at endfire.
    """
    codebook._check_level(u)
    m = 2 ** (u - 1) + 1 if index is None else index
    lo, hi = _beamwidth_psi(codebook.config, u, m)
    cfg = codebook.config
    return angle_from_direction(hi, cfg) - angle_from_direction(lo, cfg)


def dump_codebook(codebook: Codebook, out: TextIO) -> None:
    """One line per codeword: level index lo hi re0 im0 re1 im1 ..."""
    cfg = codebook.config
    out.write(f"# n_elements={cfg.n_elements} spacing_ratio={cfg.spacing_ratio!r} "
              f"carrier_frequency={cfg.carrier_frequency!r}\n")
    out.write("# level index sector_lo sector_hi re_0 im_0 ... re_N-1 im_N-1\n")
    for cw in codebook:
        lo, hi = cw.sector_bounds
        pairs = " ".join(f"{float(w.real)!r} {float(w.imag)!r}" for w in cw.weights)
        out.write(f"{cw.level} {cw.index} {float(lo)!r} {float(hi)!r} {pairs}\n")


def load_codebook_dump(lines: Iterable[str]) -> list[tuple[int, int, float, float, np.ndarray]]:
    records = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        vals = np.array([float(v) for v in parts[4:]])
        records.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]),
                        vals[0::2] + 1j * vals[1::2]))
    return records
