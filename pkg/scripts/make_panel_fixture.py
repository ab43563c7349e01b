"""Regenerate fixtures/trends_panel.csv, the 261-week x 21-series stand-in panel.

The panel mimics the layout of the US search-index download (19 predictors,
targets "Death" and "Die", weekly from 2013-12-30). Each predictor gets the
periodic archetype assigned to it in TERMS (annual, semiannual, both, or
none); the two targets are cascades of the predictors whose per-feature
filter mass decreases with the weight rank assigned in TERMS. Values are
rounded to integers and clipped to 0-100 like a real export.

    python scripts/make_panel_fixture.py [out.csv]
"""

import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from trendcast.dataset import Dataset
from trendcast.synth import SeriesSpec, SynthSpec, gaussian, gen_cascade_target, gen_panel, philox

SEED = 2018
T = 261
L = 52

# name: (period class, die rank, death rank)
TERMS = {
    "AIDS": ("semi", 12, 11),
    "Alzheimer": ("semi", 9, 14),
    "Breast Cancer": ("annual", 13, 16),
    "Cancer": ("annual", 1, 5),
    "Car Accident": ("none", 7, 10),
    "Cirrhosis": ("semi", 8, 6),
    "Diabetes": ("both", 3, 3),
    "Diarrhoeal": ("none", 18, 18),
    "Flu": ("annual", 17, 13),
    "Heart Disease": ("annual", 4, 4),
    "Kidney Cancer": ("annual", 6, 7),
    "Lung Cancer": ("semi", 2, 2),
    "Malaria": ("both", 16, 17),
    "Obstructive Pulmonary Disease": ("both", 14, 15),
    "Respiratory Infection": ("annual", 15, 12),
    "Sick": ("annual", 10, 1),
    "Stomach Cancer": ("none", 11, 9),
    "Stroke": ("annual", 5, 8),
    "Tuberculosis": ("semi", 19, 19),
}
COLUMN_ORDER = [
    "AIDS", "Alzheimer", "Breast Cancer", "Cancer", "Car Accident", "Cirrhosis",
    "Death", "Diabetes", "Diarrhoeal", "Die", "Flu", "Heart Disease",
    "Kidney Cancer", "Lung Cancer", "Malaria", "Obstructive Pulmonary Disease",
    "Respiratory Infection", "Sick", "Stomach Cancer", "Stroke", "Tuberculosis",
]


def predictor_specs(rng):
    specs = []
    for name, (kind, _, _) in TERMS.items():
        ph = rng.uniform(0, 2 * np.pi, size=2)
        if kind == "annual":
            comps = ((1.0, rng.uniform(9, 12), ph[0]),)
        elif kind == "semi":
            comps = ((2.0, rng.uniform(5, 7), ph[1]),)
        elif kind == "both":
            # the weaker 'both' term stays below the annual group in periodicity
            amp = 4.0 if name == "Obstructive Pulmonary Disease" else 8.0
            comps = ((1.0, amp, ph[0]), (2.0, 0.8 * amp, ph[1]))
        else:
            comps = ()
        specs.append(SeriesSpec(name, comps, offset=rng.uniform(40, 60), noise_sd=4.0))
    return tuple(specs)


def rank_filter(ranks, rng, decay=0.8):
    """Per-feature mass decay**(rank-1), spread over recent lags."""
    lags = np.arange(-L, 1)
    profile = np.exp(lags / 4.0)
    profile /= profile.sum()
    mass = decay ** (np.asarray(ranks, dtype=float) - 1)
    signs = rng.choice([-1.0, 1.0], size=len(ranks))
    A = (signs * mass)[:, None] * profile[None, :]
    return A / np.sqrt((A**2).sum()) * 0.5


def build() -> Dataset:
    rng = np.random.default_rng(SEED)
    # L warm-up weeks give the targets a full lag history from the first row
    start = date(2013, 12, 30) - timedelta(weeks=L)
    panel = gen_panel(SynthSpec(T + L, predictor_specs(rng), SEED, start_week=start))
    names = list(TERMS)
    die_A = rank_filter([TERMS[n][1] for n in names], rng)
    death_A = rank_filter([TERMS[n][2] for n in names], rng)
    # death decodes worse than die: noisier, and part of its variance is an
    # unobserved semiannual driver
    panel = gen_cascade_target(panel, die_A, (0.0, 1.0, 0.15, 0.1), noise_sd=0.35,
                               seed=SEED, stream=100, features=names, name="Die")
    hidden = 0.6 * np.sin(2 * np.pi * 2.0 * np.arange(T + L) / 52 + 0.4)
    panel = gen_cascade_target(panel, death_A, (0.0, 1.0, 0.0, 0.05), noise_sd=0.9,
                               seed=SEED, stream=101, features=names, name="Death")
    death = (panel.column("Death") + hidden)[L:]
    die = panel.column("Die")[L:]

    cols = {n: panel.column(n)[L:] for n in names}
    cols["Die"] = 55 + 12 * (die - die.mean()) / die.std()
    cols["Death"] = 50 + 12 * (death - death.mean()) / death.std()
    values = np.column_stack([np.clip(np.round(cols[n]), 0, 100) for n in COLUMN_ORDER])
    return Dataset(date(2013, 12, 30), tuple(COLUMN_ORDER), values)


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "fixtures" / "trends_panel.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(build().to_csv())
    print(f"wrote {out}")
