import numpy as np
import pytest
from datetime import date

from trendcast import synth
from trendcast.dataset import Dataset
from trendcast.wavelet import (
    FrequencyGrid,
    PeriodClass,
    WaveletError,
    band_power_ratio,
    classify_periodicity,
    frequency_to_scale,
    morlet_cwt,
    rank_periodic,
    scalogram_csv,
    score_series,
)

GRID = FrequencyGrid.log_spaced()
T = 261
t = np.arange(T)


def sinusoid(f, amp=1.0, n=T, phase=0.0):
    return amp * np.sin(2 * np.pi * f * np.arange(n) / 52 + phase)


def nearest(f):
    return GRID.frequencies[np.argmin(np.abs(GRID.frequencies - f))]


def local_maxima(y):
    return [i for i in range(1, len(y) - 1) if y[i] > y[i - 1] and y[i] > y[i + 1]]


def test_grid_defaults():
    f = GRID.frequencies
    assert len(f) == 48 and f[0] == pytest.approx(0.5) and f[-1] == pytest.approx(4.0)
    assert np.all(np.diff(f) > 0)
    with pytest.raises(WaveletError):
        FrequencyGrid(np.linspace(1, 2, 5))
    with pytest.raises(WaveletError):
        FrequencyGrid(np.array([3.0, 2.0, 1.0, 4, 5, 6, 7, 8]))


def test_scale_maps_back_to_frequency():
    # Fourier period of scale s is s * 4pi / (w0 + sqrt(2 + w0^2))
    s = frequency_to_scale(1.0, 6.0)
    assert s * 4 * np.pi / (6 + np.sqrt(38)) == pytest.approx(1.0)


@pytest.mark.parametrize("f0", [0.7, 1.0, 1.5, 2.0, 3.0])
def test_sinusoid_peak_at_nearest_grid_point(f0):
    sc = morlet_cwt(sinusoid(f0), GRID)
    assert sc.peak_frequency() == nearest(f0)


def test_constant_series_has_no_power():
    sc = morlet_cwt(np.full(T, 37.0), GRID)
    assert np.all(sc.power >= 0)
    assert sc.power.max() < 1e-10 * 37.0**2


def test_two_components_give_two_peaks():
    sc = morlet_cwt(sinusoid(1.0) + sinusoid(2.0), GRID)
    avg = sc.time_average()
    # ignore edge-ripple bumps in rows that are almost entirely inside the COI
    peaks = GRID.frequencies[[i for i in local_maxima(avg) if avg[i] > 0.01 * avg.max()]]
    assert len(peaks) == 2
    assert abs(np.log(peaks[0])) < 0.05 and abs(np.log(peaks[1] / 2.0)) < 0.05


def test_coi_excludes_e_folding_edges():
    sc = morlet_cwt(sinusoid(1.0), GRID)
    efold = np.sqrt(2) * frequency_to_scale(GRID.frequencies) * 52
    for row, e in zip(sc.coi_mask, efold):
        k = int(np.floor(e))
        assert row[: min(k, T)].all() and row[max(T - k, 0):].all()
    # two-year periods cannot be resolved away from both edges in five years
    assert sc.coi_mask[0].all()


def test_errors():
    with pytest.raises(WaveletError, match="too short"):
        morlet_cwt(np.ones(10), GRID)
    with pytest.raises(WaveletError):
        morlet_cwt(np.ones(100), GRID, omega0=3)
    sc = morlet_cwt(sinusoid(1.0), GRID)
    with pytest.raises(WaveletError, match="outside grid"):
        band_power_ratio(sc, 0.1, 1.0)


def test_band_ratio_of_pure_annual_cycle():
    sc = morlet_cwt(sinusoid(1.0), GRID)
    assert band_power_ratio(sc, 0.8, 1.2) >= 0.5
    assert band_power_ratio(sc, 0.5, 4.0) == pytest.approx(1.0)


def test_band_ratio_zero_series():
    assert band_power_ratio(morlet_cwt(np.zeros(T), GRID), 0.8, 1.2) == 0.0


def test_white_noise_band_ratio_near_grid_fraction():
    f = GRID.frequencies
    frac = np.mean((f >= 0.8) & (f <= 1.2))
    ratios = [
        band_power_ratio(morlet_cwt(synth.gaussian(synth.philox(s), T), GRID), 0.8, 1.2)
        for s in range(100)
    ]
    assert abs(np.mean(ratios) - frac) <= 0.15


@pytest.mark.parametrize(
    "a, s, label",
    [
        ((0.6, 0.05), None, PeriodClass.ANNUAL),
        ((0.05, 0.6), None, PeriodClass.SEMIANNUAL),
        ((0.3, 0.3), None, PeriodClass.BOTH),
        ((0.1, 0.1), None, PeriodClass.NONE),
        ((0.25, 0.0), None, PeriodClass.ANNUAL),
    ],
)
def test_classify(a, s, label):
    assert classify_periodicity(*a).label is label


def test_classify_threshold_is_configurable():
    assert classify_periodicity(0.3, 0.0, threshold=0.4).label is PeriodClass.NONE


def test_sinusoid_labels():
    assert score_series(sinusoid(1.0)).label is PeriodClass.ANNUAL
    assert score_series(sinusoid(2.0)).label is PeriodClass.SEMIANNUAL
    assert score_series(sinusoid(1.0) + sinusoid(2.0, 1.5)).label is PeriodClass.BOTH


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
def test_amplitude_equivariance(c):
    rng = np.random.default_rng(3)
    x = sinusoid(1.0) + rng.normal(size=T)
    a, b = morlet_cwt(x, GRID), morlet_cwt(c * x, GRID)
    np.testing.assert_allclose(b.power, c**2 * a.power, rtol=1e-10, atol=1e-300)
    assert a.peak_frequency() == b.peak_frequency()
    for band in [(0.8, 1.2), (1.8, 2.2)]:
        assert band_power_ratio(a, *band) == pytest.approx(band_power_ratio(b, *band), rel=1e-10)


def test_circular_shift_covariance():
    # power-of-two length means no padding, so the FFT convolution is circular
    n = 512
    rng = np.random.default_rng(5)
    x = sinusoid(1.3, n=n) + rng.normal(size=n)
    shift = 37
    a, b = morlet_cwt(x, GRID), morlet_cwt(np.roll(x, shift), GRID)
    rolled = np.roll(a.power, shift, axis=1)
    valid = ~a.coi_mask & ~b.coi_mask
    np.testing.assert_allclose(b.power[valid], rolled[valid], rtol=1e-8)


@pytest.mark.parametrize("f0", [0.9, 1.0, 1.37, 2.2])
def test_refining_grid_moves_peak_no_farther(f0):
    x = sinusoid(f0)
    errors = []
    # 1 + 7 * 2**k points: each log-spaced grid contains the previous one
    for n in [8, 15, 29, 57]:
        g = FrequencyGrid.log_spaced(0.5, 4.0, n)
        errors.append(abs(np.log(morlet_cwt(x, g).peak_frequency() / f0)))
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors, errors[1:]))


@pytest.mark.parametrize("n", [8, 15, 29, 48, 57, 113])
def test_peak_within_one_grid_step(n):
    g = FrequencyGrid.log_spaced(0.5, 4.0, n)
    step = np.log(8.0) / (n - 1)
    for f0 in np.geomspace(0.6, 3.5, 25):
        err = abs(np.log(morlet_cwt(sinusoid(f0), g).peak_frequency() / f0))
        assert err <= step


def _panel(cols):
    names = tuple(cols)
    return Dataset(date(2014, 1, 6), names, np.column_stack([cols[n] for n in names]))


def test_rank_periodic_puts_sinusoid_first():
    noise = synth.gaussian(synth.philox(11), T)
    ds = _panel({"a_noise": noise, "z_sine": 10 * sinusoid(1.0) + noise})
    ranked = rank_periodic(ds)
    assert [n for n, _ in ranked] == ["z_sine", "a_noise"]


def test_rank_periodic_excludes_targets_and_breaks_ties_by_name():
    x = sinusoid(1.0)
    ds = _panel({"b": x, "a": x, "tgt": sinusoid(1.0) * 3}).with_targets(["tgt"])
    assert [n for n, _ in rank_periodic(ds)] == ["a", "b"]
    single = _panel({"only": x})
    assert [n for n, _ in rank_periodic(single)] == ["only"]


def test_panel_fixture_top_ten_periodic(panel_dataset):
    # the stand-in panel was built with the periodic archetypes tabulated for each term
    top = {n for n, _ in rank_periodic(panel_dataset)[:10]}
    assert top == {
        "Breast Cancer", "Cancer", "Diabetes", "Flu", "Heart Disease", "Kidney Cancer",
        "Malaria", "Respiratory Infection", "Sick", "Stroke",
    }


def test_panel_fixture_respiratory_infection_is_annual(panel_dataset):
    sc = morlet_cwt(panel_dataset.column("Respiratory Infection"), GRID)
    assert abs(sc.peak_frequency() - 1.0) < 0.05
    assert score_series(panel_dataset.column("Respiratory Infection")).label is PeriodClass.ANNUAL


def test_scalogram_csv_blanks_coi():
    sc = morlet_cwt(sinusoid(1.0), GRID)
    lines = scalogram_csv(sc).splitlines()
    assert lines[0].split(",")[:3] == ["freq_cy_per_year", "t0", "t1"]
    assert len(lines) == 1 + len(GRID)
    first = lines[1].split(",")
    assert len(first) == T + 1 and all(c == "" for c in first[1:])
