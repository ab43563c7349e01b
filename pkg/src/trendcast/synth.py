"""Seeded synthetic panels with known periodic structure and known cascade
ground truth.

Random numbers come from numpy's Philox counter-based generator. Each series
gets its own stream keyed by ``SeedSequence([seed, series_index])`` and
Gaussian draws are produced by the inverse normal CDF applied to uniform
doubles, so panels are bit-identical across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np
import scipy.special

from .dataset import Dataset, PREDICTOR, TARGET, DatasetError

WEEKS_PER_YEAR = 52.0


class SynthError(ValueError):
    pass


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals by inverse CDF of uniforms shifted off zero."""
    u = rng.random(size) + 2.0**-54
    return scipy.special.ndtri(u)


@dataclass(frozen=True)
class SeriesSpec:
    name: str
    components: tuple[tuple[float, float, float], ...] = ()  # (cy/yr, amplitude, phase)
    offset: float = 0.0
    noise_sd: float = 0.0


@dataclass(frozen=True)
class CascadeSpec:
    name: str
    A: np.ndarray  # [n features x (L + 1)]
    poly: tuple[float, ...]
    noise_sd: float = 0.0
    features: tuple[str, ...] | None = None  # default: every series in order
    scale: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    T: int
    series: tuple[SeriesSpec, ...]
    seed: int = 0
    start_week: date = date(2013, 12, 30)
    clip: bool = False
    cascades: tuple[CascadeSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.T < 2:
            raise SynthError("T must be >= 2")
        if not self.series:
            raise SynthError("spec has no series")
        annual = any(abs(c[0] - 1.0) < 0.5 for s in self.series for c in s.components)
        if annual and self.T < 2 * WEEKS_PER_YEAR:
            raise SynthError("annual components need T >= 104 weeks")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        series = tuple(
            SeriesSpec(
                s["name"],
                tuple(tuple(float(v) for v in c) for c in s.get("components", [])),
                float(s.get("offset", 0.0)),
                float(s.get("noise_sd", 0.0)),
            )
            for s in d["series"]
        )
        cascades = tuple(
            CascadeSpec(
                c["name"],
                np.array(c["A"], dtype=float),
                tuple(float(v) for v in c["poly"]),
                float(c.get("noise_sd", 0.0)),
                tuple(c["features"]) if c.get("features") else None,
                float(c.get("scale", 1.0)),
                float(c.get("offset", 0.0)),
            )
            for c in d.get("cascades", [])
        )
        start = date.fromisoformat(d["start_week"]) if "start_week" in d else date(2013, 12, 30)
        return cls(int(d["T"]), series, int(d.get("seed", 0)), start, bool(d.get("clip", False)), cascades)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            return cls.from_dict(json.loads(text))
        except (KeyError, TypeError, ValueError) as exc:
            raise SynthError(f"malformed synth spec: {exc}") from None


def gen_panel(spec: SynthSpec) -> Dataset:
    """offset + sum of sinusoids + Gaussian noise per series; cascade targets
    from ``spec.cascades`` are appended afterwards."""
    t = np.arange(spec.T, dtype=float)
    cols = []
    for m, s in enumerate(spec.series):
        x = np.full(spec.T, s.offset)
        for freq, amp, phase in s.components:
            x = x + amp * np.sin(2 * np.pi * freq * t / WEEKS_PER_YEAR + phase)
        if s.noise_sd > 0:
            x = x + s.noise_sd * gaussian(philox(spec.seed, m), spec.T)
        if spec.clip:
            x = np.maximum(x, 0.0)
        cols.append(x)
    ds = Dataset(spec.start_week, tuple(s.name for s in spec.series), np.column_stack(cols))
    for c_idx, c in enumerate(spec.cascades):
        ds = gen_cascade_target(
            ds, c.A, c.poly, c.noise_sd,
            seed=spec.seed, stream=len(spec.series) + c_idx,
            features=c.features, name=c.name, scale=c.scale, offset=c.offset,
        )
    if spec.clip:
        ds = ds.with_values(np.maximum(ds.values, 0.0))
    return ds


def cascade_signal(dataset: Dataset, true_A, true_poly, features: Sequence[str] | None = None) -> np.ndarray:
    """Noise-free ``P(sum A x_z)`` for t >= L; z-scoring uses the full panel
    (population SD). Entries before L are NaN."""
    features = list(features) if features is not None else list(dataset.predictors)
    A = np.asarray(true_A, dtype=float)
    if A.ndim != 2 or A.shape[0] != len(features):
        raise SynthError(f"true A has shape {A.shape}, expected ({len(features)}, L+1)")
    L = A.shape[1] - 1
    if dataset.T <= L:
        raise SynthError("panel shorter than the lag depth")
    X = dataset.columns(features)
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise DatasetError("cannot z-score a constant feature")
    Xz = (X - X.mean(axis=0)) / sd
    u = np.full(dataset.T, np.nan)
    for t in range(L, dataset.T):
        u[t] = np.sum(A * Xz[t - L : t + 1].T)
    return np.polynomial.polynomial.polyval(u, np.asarray(true_poly, dtype=float))


def gen_cascade_target(
    dataset: Dataset,
    true_A,
    true_poly,
    noise_sd: float = 0.0,
    seed: int = 0,
    stream: int = 10_000,
    features: Sequence[str] | None = None,
    name: str = "target",
    scale: float = 1.0,
    offset: float = 0.0,
) -> Dataset:
    """Append ``offset + scale * (P(sum_ij A_ij x_z(i, t+j)) + noise)`` as a target.

    The first L samples (no full lag history) repeat the value at t = L and
    must not be used for fitting.
    """
    signal = cascade_signal(dataset, true_A, true_poly, features)
    L = np.asarray(true_A).shape[1] - 1
    y = signal.copy()
    if noise_sd > 0:
        y[L:] = y[L:] + noise_sd * gaussian(philox(seed, stream), dataset.T - L)
    y[:L] = y[L]
    return dataset.with_series(name, offset + scale * y, TARGET)


def snr_noise_sd(signal, snr: float) -> float:
    """Noise SD giving power ratio ``var(signal) / noise_var == snr``."""
    s = np.asarray(signal, dtype=float)
    s = s[np.isfinite(s)]
    return float(np.std(s) / np.sqrt(snr))


def random_filter(n: int, L: int, seed: int = 0, decay: float = 8.0) -> np.ndarray:
    """Random ``[n x (L+1)]`` filter with weights decaying away from lag 0,
    scaled so the linear output has roughly unit variance for unit-variance
    independent inputs."""
    rng = philox(seed, 20_000)
    A = gaussian(rng, n * (L + 1)).reshape(n, L + 1)
    lags = np.arange(-L, 1)
    A *= np.exp(lags / decay)
    return A / np.sqrt(np.sum(A**2))


def noise_panel(T: int, n: int, seed: int = 0, noise_sd: float = 1.0, prefix: str = "x") -> SynthSpec:
    """Spec for ``n`` independent Gaussian white-noise predictors."""
    series = tuple(SeriesSpec(f"{prefix}{i}", (), 50.0, noise_sd) for i in range(n))
    return SynthSpec(T, series, seed)
