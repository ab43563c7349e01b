"""Morlet continuous wavelet transform and band-power periodicity scoring.

Frequencies are in cycles per year, sampling is weekly (52 samples/year) by
default. The transform follows the usual Torrence-Compo conventions: an
L2-normalized Morlet evaluated in the Fourier domain, zero padding to the next
power of two, and an e-folding cone of influence of ``sqrt(2) * s``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

SAMPLES_PER_YEAR = 52.0
DEFAULT_OMEGA0 = 6.0
ANNUAL_BAND = (0.8, 1.2)
SEMIANNUAL_BAND = (1.8, 2.2)
DEFAULT_THRESHOLD = 0.25


class WaveletError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    frequencies: np.ndarray  # cycles/year, strictly increasing

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise WaveletError("empty frequency grid")
        if f.size < 8:
            raise WaveletError("frequency grid needs at least 8 points")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise WaveletError("grid frequencies must be positive and strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    @classmethod
    def log_spaced(cls, fmin: float = 0.5, fmax: float = 4.0, n: int = 48) -> "FrequencyGrid":
        return cls(np.geomspace(fmin, fmax, n))

    def __len__(self):
        return self.frequencies.size


@dataclass(frozen=True)
class WaveletConfig:
    omega0: float = DEFAULT_OMEGA0
    fmin: float = 0.5
    fmax: float = 4.0
    voices: int = 48
    sampling_rate: float = SAMPLES_PER_YEAR
    annual_band: tuple[float, float] = ANNUAL_BAND
    semiannual_band: tuple[float, float] = SEMIANNUAL_BAND
    threshold: float = DEFAULT_THRESHOLD

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.log_spaced(self.fmin, self.fmax, self.voices)


@dataclass(frozen=True)
class Scalogram:
    """Power ``[F x T]`` with ``coi_mask`` True where edge effects dominate."""

    grid: FrequencyGrid
    power: np.ndarray
    coi_mask: np.ndarray
    omega0: float = DEFAULT_OMEGA0

    @property
    def valid(self) -> np.ndarray:
        return ~self.coi_mask

    def masked_power(self) -> np.ndarray:
        """Power with cone-of-influence samples zeroed."""
        return np.where(self.coi_mask, 0.0, self.power)

    def time_average(self) -> np.ndarray:
        """Mean power over valid samples per frequency; 0 for rows that lie
        entirely inside the cone of influence."""
        counts = self.valid.sum(axis=1)
        sums = self.masked_power().sum(axis=1)
        return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)

    def peak_frequency(self) -> float:
        return float(self.grid.frequencies[int(np.argmax(self.time_average()))])


def fourier_factor(omega0: float) -> float:
    """Ratio of Fourier period to wavelet scale for the Morlet wavelet."""
    return 4 * math.pi / (omega0 + math.sqrt(2 + omega0**2))


def frequency_to_scale(freqs, omega0: float = DEFAULT_OMEGA0) -> np.ndarray:
    """Scale in years for each frequency in cycles/year."""
    return 1.0 / (np.asarray(freqs, dtype=float) * fourier_factor(omega0))


def morlet_cwt(
    series,
    grid: FrequencyGrid,
    sampling_rate: float = SAMPLES_PER_YEAR,
    omega0: float = DEFAULT_OMEGA0,
) -> Scalogram:
    x = np.asarray(series, dtype=float).ravel()
    T = x.size
    if T < 16:
        raise WaveletError(f"series too short for CWT: {T} < 16 samples")
    if omega0 < 5:
        raise WaveletError("omega0 must be >= 5")
    if not isinstance(grid, FrequencyGrid):
        grid = FrequencyGrid(grid)

    dt = 1.0 / sampling_rate
    x = x - x.mean()
    n = 1 << (T - 1).bit_length()
    xhat = np.fft.fft(x, n)
    omega = 2 * np.pi * np.fft.fftfreq(n, d=dt)

    scales = frequency_to_scale(grid.frequencies, omega0)
    arg = scales[:, None] * omega[None, :]
    # Heaviside: analytic wavelet, negative frequencies dropped
    daughter = np.where(arg > 0, np.exp(-0.5 * (arg - omega0) ** 2), 0.0)
    daughter *= np.sqrt(2 * np.pi * scales[:, None] / dt) * np.pi**-0.25
    W = np.fft.ifft(xhat[None, :] * daughter, axis=1)[:, :T]
    power = np.abs(W) ** 2

    efold = np.sqrt(2) * scales / dt  # in samples
    t = np.arange(T)
    edge = np.minimum(t, T - 1 - t)
    coi_mask = edge[None, :] < efold[:, None]
    return Scalogram(grid, power, coi_mask, omega0)


def band_power_ratio(scalogram: Scalogram, band_lo: float, band_hi: float) -> float:
    """Share of valid (outside-COI) power that falls in ``[band_lo, band_hi]``."""
    f = scalogram.grid.frequencies
    tol = 1e-9 * f[-1]
    if band_lo > band_hi or band_lo < f[0] - tol or band_hi > f[-1] + tol:
        raise WaveletError(
            f"band [{band_lo}, {band_hi}] outside grid [{f[0]:g}, {f[-1]:g}]"
        )
    row_power = scalogram.masked_power().sum(axis=1)
    total = row_power.sum()
    if total <= 0:
        return 0.0
    in_band = (f >= band_lo) & (f <= band_hi)
    return float(row_power[in_band].sum() / total)


class PeriodClass(str, enum.Enum):
    ANNUAL = "ANNUAL"
    SEMIANNUAL = "SEMIANNUAL"
    BOTH = "BOTH"
    NONE = "NONE"


@dataclass(frozen=True)
class PeriodicityScore:
    annual_ratio: float
    semiannual_ratio: float
    label: PeriodClass

    @property
    def total(self) -> float:
        return self.annual_ratio + self.semiannual_ratio


def classify_periodicity(
    annual_ratio: float, semiannual_ratio: float, threshold: float = DEFAULT_THRESHOLD
) -> PeriodicityScore:
    annual = annual_ratio >= threshold
    semi = semiannual_ratio >= threshold
    if annual and semi:
        label = PeriodClass.BOTH
    elif annual:
        label = PeriodClass.ANNUAL
    elif semi:
        label = PeriodClass.SEMIANNUAL
    else:
        label = PeriodClass.NONE
    return PeriodicityScore(float(annual_ratio), float(semiannual_ratio), label)


def score_series(series, config: WaveletConfig = WaveletConfig()) -> PeriodicityScore:
    sc = morlet_cwt(series, config.grid(), config.sampling_rate, config.omega0)
    return classify_periodicity(
        band_power_ratio(sc, *config.annual_band),
        band_power_ratio(sc, *config.semiannual_band),
        config.threshold,
    )


def rank_periodic(
    dataset: Dataset, config: WaveletConfig = WaveletConfig(), rows=None
) -> list[tuple[str, PeriodicityScore]]:
    """Predictors ordered by annual + semiannual band share, most periodic first.

    ``rows`` restricts the analysis to a subset of time indices (e.g. training
    rows inside cross-validation); the subset is analysed as one series.
    """
    preds = dataset.predictors
    if not preds:
        raise WaveletError("dataset has no predictors to rank")
    scored = []
    for name in preds:
        x = dataset.column(name)
        if rows is not None:
            x = x[np.asarray(rows, dtype=int)]
        scored.append((name, score_series(x, config)))
    scored.sort(key=lambda item: (-item[1].total, item[0]))
    return scored


def scalogram_csv(scalogram: Scalogram) -> str:
    """Rows per frequency; cone-of-influence cells are left empty."""
    T = scalogram.power.shape[1]
    lines = [",".join(["freq_cy_per_year"] + [f"t{i}" for i in range(T)])]
    for f, prow, mrow in zip(scalogram.grid.frequencies, scalogram.power, scalogram.coi_mask):
        cells = ["" if m else repr(float(p)) for p, m in zip(prow, mrow)]
        lines.append(",".join([repr(float(f))] + cells))
    return "\n".join(lines) + "\n"
