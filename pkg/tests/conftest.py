from pathlib import Path

import numpy as np
import pytest

from trendcast import synth
from trendcast.dataset import parse_trends_csv
from trendcast.synth import SeriesSpec, SynthSpec

ROOT = Path(__file__).resolve().parents[1]
PANEL_FIXTURE = ROOT / "fixtures" / "trends_panel.csv"

# predictors mixing annual/semiannual cycles with white noise, as in the
# recovery checks; true filter and a monotone cubic for the target
CASCADE_POLY = (0.0, 1.0, 0.1, 0.1)
_COMPONENTS = [
    ((1.0, 8.0, 0.3),),
    ((2.0, 5.0, 1.0),),
    ((1.0, 4.0, 2.0), (2.0, 3.0, 0.1)),
    (),
    ((0.5, 6.0, 0.7),),
]


def periodic_panel_spec(seed: int, T: int = 261) -> SynthSpec:
    series = tuple(SeriesSpec(f"x{i}", c, 50.0, 4.0) for i, c in enumerate(_COMPONENTS))
    return SynthSpec(T, series, seed)


def cascade_dataset(seed: int, L: int = 10, snr: float | None = None, T: int = 261):
    """Five-predictor panel plus a cubic cascade target named ``target``.

    ``snr`` is the ratio of signal SD to noise SD; ``None`` gives a noiseless target.
    """
    ds = synth.gen_panel(periodic_panel_spec(seed, T))
    A = synth.random_filter(5, L, seed=7)
    noise = 0.0
    if snr is not None:
        sig = synth.cascade_signal(ds, A, CASCADE_POLY)
        noise = float(np.std(sig[L:])) / snr
    return synth.gen_cascade_target(ds, A, CASCADE_POLY, noise, seed=seed), A


@pytest.fixture(scope="session")
def panel_dataset():
    return parse_trends_csv(PANEL_FIXTURE.read_text()).with_targets(["Die", "Death"])


@pytest.fixture
def tiny_csv():
    return "date,flu\n2014-01-06,10\n2014-01-13,12\n2014-01-20,15\n"


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
