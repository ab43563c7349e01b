"""Accuracy metrics and the blocked k-fold cross-validation driver."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.stats

from . import cascade
from .cascade import CascadeConfig
from .dataset import Dataset, DatasetError, make_fold_plan
from .selection import SelectionScope, SelectionSpec, selection_context, select_features

EXACT_MAX_N = 9


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalMetrics:
    rho: float
    p_value: float
    mse: float
    n: int

    def to_dict(self) -> dict:
        return {"rho": self.rho, "p": self.p_value, "mse": self.mse, "n": self.n}


def _ranks(x: np.ndarray) -> np.ndarray:
    return scipy.stats.rankdata(x, method="average")


def spearman_rho(a, b) -> float:
    """Pearson correlation of average ranks."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise MetricError("spearman_rho: length mismatch")
    if a.size < 2:
        raise MetricError("spearman_rho needs at least 2 points")
    ra, rb = _ranks(a), _ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        raise MetricError("spearman_rho undefined for a constant input")
    return float(np.clip((ra @ rb) / denom, -1.0, 1.0))


@lru_cache(maxsize=None)
def _null_rhos(n: int) -> np.ndarray:
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    d2 = ((perms - np.arange(n)) ** 2).sum(axis=1)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def spearman_pvalue(rho: float, n: int) -> float:
    """Two-sided p-value for Spearman rho under independence (no ties).

    Exact enumeration of all ``n!`` rank permutations when ``n <= 9``,
    otherwise the t approximation with ``n - 2`` degrees of freedom.
    """
    if n < 4:
        raise MetricError("spearman_pvalue needs n >= 4")
    if not -1.0 <= rho <= 1.0:
        raise MetricError("rho must lie in [-1, 1]")
    if n <= EXACT_MAX_N:
        null = _null_rhos(n)
        return float(np.mean(np.abs(null) >= abs(rho) - 1e-12))
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * scipy.stats.t.sf(abs(t), n - 2)))


def spearman_permutation_pvalue(a, b, n_resamples: int = 1999, seed: int = 0) -> float:
    """Monte-Carlo permutation p-value, ``(hits + 1) / (n_resamples + 1)``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    observed = abs(spearman_rho(a, b))
    rng = np.random.Generator(np.random.Philox(seed))
    hits = 0
    for _ in range(n_resamples):
        if abs(spearman_rho(a, rng.permutation(b))) >= observed - 1e-12:
            hits += 1
    return (hits + 1) / (n_resamples + 1)


def mse(actual, predicted) -> float:
    actual = np.asarray(actual, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if actual.size != predicted.size:
        raise MetricError("mse: length mismatch")
    if actual.size == 0:
        raise MetricError("mse of empty vectors")
    return float(np.mean((actual - predicted) ** 2))


def evaluate(actual, predicted) -> EvalMetrics:
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    n = actual.size
    try:
        rho = spearman_rho(predicted, actual)
    except MetricError:
        # constant decoded track: no monotone association
        rho = 0.0
    p = spearman_pvalue(rho, n) if n >= 4 else float("nan")
    return EvalMetrics(rho, p, mse(actual, predicted), int(n))


@dataclass
class CvReport:
    target: str
    scenario: SelectionSpec
    fold_metrics: list[EvalMetrics]
    pooled: EvalMetrics
    times: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    folds: np.ndarray
    lambda_chosen: list[float]
    features: list[list[str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "scenario": self.scenario.label,
            "lambda_chosen": self.lambda_chosen,
            "features": self.features,
            "fold_metrics": [m.to_dict() for m in self.fold_metrics],
            "pooled": self.pooled.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def predictions_csv(self, dataset: Dataset) -> str:
        weeks = dataset.weeks
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["week", "actual", "predicted", "fold"])
        for t, a, p, f in zip(self.times, self.actual, self.predicted, self.folds):
            w.writerow([weeks[t].isoformat(), repr(float(a)), repr(float(p)), int(f)])
        return buf.getvalue()


def cross_validate(
    dataset: Dataset,
    target: str,
    spec: SelectionSpec = SelectionSpec(),
    config: CascadeConfig = CascadeConfig(),
    k: int = 5,
    scope: SelectionScope = SelectionScope.GLOBAL,
) -> CvReport:
    """Blocked k-fold decoding of ``target``; each held-out block is predicted
    by a model fit on the remaining blocks only.

    With ``scope=GLOBAL`` the selection context (periodicity ranking or the
    all-features base model) is computed once on the full panel; ``PER_FOLD``
    recomputes it from each fold's training rows.
    """
    if target not in dataset.names:
        raise DatasetError(f"unknown target {target!r}")
    plan = make_fold_plan(dataset.T, config.lag_depth, k)

    global_features = None
    if scope is SelectionScope.GLOBAL:
        ctx = selection_context(dataset, target, spec, config)
        global_features = select_features(dataset, spec, ctx)

    times, actual, predicted, folds = [], [], [], []
    fold_metrics, lambdas, feature_sets = [], [], []
    y = dataset.column(target)
    for f in range(k):
        train_rows, test_rows = plan.train_rows(f), plan.test_rows(f)
        if global_features is None:
            ctx = selection_context(dataset, target, spec, config, train_rows)
            features = select_features(dataset, spec, ctx)
        else:
            features = global_features
        model = cascade.train(dataset, target, features, config, train_rows)
        pred = cascade.predict(model, dataset, test_rows)
        fold_metrics.append(evaluate(y[test_rows], pred))
        lambdas.append(model.config.ridge_lambda)
        feature_sets.append(list(features))
        times.append(test_rows)
        actual.append(y[test_rows])
        predicted.append(pred)
        folds.append(np.full(test_rows.size, f))

    times = np.concatenate(times)
    actual = np.concatenate(actual)
    predicted = np.concatenate(predicted)
    return CvReport(
        target=target,
        scenario=spec,
        fold_metrics=fold_metrics,
        pooled=evaluate(actual, predicted),
        times=times,
        actual=actual,
        predicted=predicted,
        folds=np.concatenate(folds),
        lambda_chosen=lambdas,
        features=feature_sets,
    )


def summary_csv(reports: list[CvReport]) -> str:
    """Table of pooled metrics, one row per (scenario, target)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["combination", "keyword", "mse", "rho", "p_value"])
    for r in reports:
        w.writerow([r.scenario.label, r.target, repr(r.pooled.mse), repr(r.pooled.rho), repr(r.pooled.p_value)])
    return buf.getvalue()
