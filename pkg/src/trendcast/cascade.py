"""Wiener cascade decoder: lagged ridge-regressed linear filter followed by a
cubic static nonlinearity.

The linear stage is the multi-input FIR filter

    u(t) = sum_i sum_{j=-L..0} A[i, j] * x_i(t + j) + intercept

fit on z-scored data, and the static stage maps ``u`` to the (z-scored) target
through a least-squares polynomial.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .dataset import Dataset, DatasetError, NormParams, block_labels, zscore_apply, zscore_fit, zscore_invert

DEFAULT_LAMBDA_GRID = (1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3)


class CascadeError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """Linear system could not be solved (e.g. singular at zero penalty)."""


class DegenerateInputWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CascadeConfig:
    lag_depth: int = 52
    ridge_lambda: float | None = None  # None: pick from lambda_grid by inner CV
    poly_degree: int = 3
    include_intercept: bool = True
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    inner_folds: int = 3
    refine_iters: int = 0  # 0: single linear-then-polynomial pass

    def __post_init__(self):
        if self.lag_depth < 0:
            raise CascadeError("lag_depth must be >= 0")
        if self.ridge_lambda is not None and self.ridge_lambda < 0:
            raise CascadeError("ridge lambda must be >= 0")
        if self.poly_degree < 1:
            raise CascadeError("poly_degree must be >= 1")
        if not self.lambda_grid or any(lam < 0 for lam in self.lambda_grid):
            raise CascadeError("lambda grid must be nonempty and non-negative")
        if self.refine_iters < 0:
            raise CascadeError("refine_iters must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_grid"] = list(self.lambda_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeConfig":
        d = dict(d)
        if "lambda_grid" in d:
            d["lambda_grid"] = tuple(d["lambda_grid"])
        return cls(**d)


@dataclass(frozen=True)
class DesignMatrix:
    rows: np.ndarray
    row_times: np.ndarray
    column_map: list[tuple[int, int]]  # (feature index, lag); lag in -L..0
    intercept: bool


@dataclass(frozen=True)
class FilterWeights:
    A: np.ndarray  # [n features x (L + 1) lags], column 0 is lag -L
    intercept: float = 0.0

    @property
    def n_features(self) -> int:
        return self.A.shape[0]

    @property
    def lag_depth(self) -> int:
        return self.A.shape[1] - 1

    def flat(self) -> np.ndarray:
        return self.A.ravel()


@dataclass(frozen=True)
class PolynomialNonlinearity:
    coefficients: np.ndarray  # ascending powers c0..cd

    def __call__(self, u) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(u, dtype=float), self.coefficients)


@dataclass(frozen=True)
class WienerCascadeModel:
    config: CascadeConfig
    target_name: str
    feature_names: tuple[str, ...]
    weights: FilterWeights
    nonlinearity: PolynomialNonlinearity
    norm: NormParams
    lambda_scores: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "config": self.config.to_dict(),
            "target_name": self.target_name,
            "feature_names": list(self.feature_names),
            "A": self.weights.A.tolist(),
            "intercept": float(self.weights.intercept),
            "poly": [float(c) for c in self.nonlinearity.coefficients],
            "norm": self.norm.to_dict(),
        }
        # json uses repr for floats: shortest round-trip decimal
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "WienerCascadeModel":
        try:
            doc = json.loads(text)
            config = CascadeConfig.from_dict(doc["config"])
            A = np.array(doc["A"], dtype=float).reshape(len(doc["feature_names"]), -1)
            return cls(
                config=config,
                target_name=doc["target_name"],
                feature_names=tuple(doc["feature_names"]),
                weights=FilterWeights(A, float(doc["intercept"])),
                nonlinearity=PolynomialNonlinearity(np.array(doc["poly"], dtype=float)),
                norm=NormParams.from_dict(doc["norm"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CascadeError(f"malformed model JSON: {exc}") from None


def build_design_matrix(
    dataset: Dataset,
    feature_names: Sequence[str],
    L: int,
    row_times,
    intercept: bool = False,
) -> DesignMatrix:
    """Rows ``x_i(t-L) .. x_i(t)`` for each feature, feature-major.

    ``dataset`` is expected to be z-scored already.
    """
    if not feature_names:
        raise CascadeError("no features given")
    times = np.asarray(row_times, dtype=int).ravel()
    if times.size and (times.min() < L or times.max() >= dataset.T):
        raise CascadeError(f"row times must lie in [{L}, {dataset.T})")
    X = dataset.columns(list(feature_names))  # raises on unknown names
    offsets = np.arange(-L, 1)
    # [R, L+1] time indices; fancy-index gives [R, L+1, n]
    lagged = X[times[:, None] + offsets[None, :]]
    F = lagged.transpose(0, 2, 1).reshape(times.size, -1)
    column_map = [(i, int(j)) for i in range(len(feature_names)) for j in offsets]
    if intercept:
        F = np.hstack([F, np.ones((times.size, 1))])
    return DesignMatrix(F, times, column_map, intercept)


def ridge_solve(design: DesignMatrix | np.ndarray, y, lam: float, n_features: int | None = None) -> FilterWeights:
    """Solve ``(F'F + lam*I) a = F'y`` by Cholesky; the intercept is unpenalized.

    A plain array ``F`` is treated as a design without intercept, giving a
    single-row ``A``.
    """
    if isinstance(design, DesignMatrix):
        F, has_icpt = design.rows, design.intercept
        n = n_features or (max(i for i, _ in design.column_map) + 1)
    else:
        F, has_icpt, n = np.asarray(design, dtype=float), False, n_features or 1
    y = np.asarray(y, dtype=float).ravel()
    if F.ndim != 2 or F.shape[0] != y.size:
        raise CascadeError(f"dimension mismatch: design {F.shape} vs target {y.shape}")
    if F.shape[0] < 1:
        raise CascadeError("ridge_solve needs at least one row")
    if lam < 0:
        raise CascadeError("ridge lambda must be >= 0")
    a = _ridge_coefficients(F.T @ F, F.T @ y, lam, has_icpt)
    if has_icpt:
        return FilterWeights(a[:-1].reshape(n, -1), float(a[-1]))
    return FilterWeights(a.reshape(n, -1), 0.0)


def _ridge_coefficients(gram: np.ndarray, rhs: np.ndarray, lam: float, has_icpt: bool) -> np.ndarray:
    penalty = np.full(gram.shape[0], float(lam))
    if has_icpt:
        penalty[-1] = 0.0
    system = gram + np.diag(penalty)
    try:
        factor = scipy.linalg.cho_factor(system, lower=True, check_finite=False)
        a = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"normal equations are singular at lambda={lam:g}; use a positive ridge penalty"
        ) from None
    # Cholesky can succeed on a numerically singular matrix; refuse garbage.
    resid = np.linalg.norm(system @ a - rhs)
    if not np.all(np.isfinite(a)) or resid > 1e-6 * max(np.linalg.norm(rhs), 1e-300):
        raise NumericalError(f"ill-conditioned normal equations at lambda={lam:g}")
    return a


def fit_nonlinearity(u, y, degree: int = 3) -> PolynomialNonlinearity:
    """Least-squares polynomial of ``y`` on powers of ``u`` (ascending)."""
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise CascadeError("u and y lengths differ")
    if u.size < degree + 1:
        raise CascadeError(f"need at least {degree + 1} points for a degree-{degree} fit")
    if np.ptp(u) <= 1e-12 * max(1.0, np.abs(u).max()):
        warnings.warn("constant linear output; using a constant nonlinearity", DegenerateInputWarning)
        c = np.zeros(degree + 1)
        c[0] = y.mean()
        return PolynomialNonlinearity(c)
    V = np.vander(u, degree + 1, increasing=True)
    c, *_ = np.linalg.lstsq(V, y, rcond=None)
    return PolynomialNonlinearity(c)


def linear_output(design: DesignMatrix, weights: FilterWeights) -> np.ndarray:
    a = weights.flat()
    if design.intercept:
        return design.rows[:, :-1] @ a + weights.intercept
    return design.rows @ a + weights.intercept


def refine_cascade(
    design: DesignMatrix,
    y,
    weights: FilterWeights,
    poly: PolynomialNonlinearity,
    lam: float,
    max_iter: int = 50,
    tol: float = 1e-12,
) -> tuple[FilterWeights, PolynomialNonlinearity]:
    """Jointly adjust filter and polynomial to minimize
    ``||y - P(F a)||^2 + lam * ||a||^2`` (intercept unpenalized).

    Levenberg-Marquardt steps on the filter alternate with an exact
    least-squares refit of the polynomial, starting from the single-pass
    solution. Steps are only accepted when the penalized loss decreases.
    """
    F = design.rows
    y = np.asarray(y, dtype=float)
    degree = poly.coefficients.size - 1
    n = weights.n_features
    a = weights.flat()
    if design.intercept:
        a = np.append(a, weights.intercept)
    pen = np.full(a.size, float(lam))
    if design.intercept:
        pen[-1] = 0.0
    c = poly.coefficients

    def loss(a, c):
        r = y - np.polynomial.polynomial.polyval(F @ a, c)
        return float(r @ r + pen @ (a * a))

    current = loss(a, c)
    mu = 1e-3
    for _ in range(max_iter):
        u = F @ a
        r = y - np.polynomial.polynomial.polyval(u, c)
        slope = np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(c))
        J = slope[:, None] * F
        H = J.T @ J + np.diag(pen)
        g = J.T @ r - pen * a
        scale = max(float(np.mean(np.diag(H))), 1e-300)
        accepted = False
        while mu < 1e10:
            try:
                step = scipy.linalg.solve(H + mu * scale * np.eye(a.size), g, assume_a="pos")
            except (np.linalg.LinAlgError, ValueError):
                mu *= 4
                continue
            a_new = a + step
            u_new = F @ a_new
            if np.ptp(u_new) <= 0:
                mu *= 4
                continue
            c_new = np.linalg.lstsq(np.vander(u_new, degree + 1, increasing=True), y, rcond=None)[0]
            trial = loss(a_new, c_new)
            if trial < current:
                accepted = True
                done = current - trial <= tol * max(current, 1e-300)
                a, c, current = a_new, c_new, trial
                mu = max(mu / 3, 1e-12)
                break
            mu *= 4
        if not accepted or done:
            break

    if design.intercept:
        w = FilterWeights(a[:-1].reshape(n, -1), float(a[-1]))
    else:
        w = FilterWeights(a.reshape(n, -1), 0.0)
    return w, PolynomialNonlinearity(c)


def _fit_fixed(dataset, target_name, features, config, train_rows, lam):
    train_rows = np.asarray(train_rows, dtype=int)
    norm = zscore_fit(dataset, train_rows, list(features) + [target_name])
    zdata = zscore_apply(_subset(dataset, list(features) + [target_name]), norm)
    design = build_design_matrix(zdata, features, config.lag_depth, train_rows, config.include_intercept)
    y = zdata.column(target_name)[train_rows]
    weights = ridge_solve(design, y, lam, len(features))
    u = linear_output(design, weights)
    poly = fit_nonlinearity(u, y, config.poly_degree)
    if config.refine_iters and np.any(poly.coefficients[1:]):
        weights, poly = refine_cascade(design, y, weights, poly, lam, config.refine_iters)
    return WienerCascadeModel(
        replace(config, ridge_lambda=float(lam)), target_name, tuple(features), weights, poly, norm
    )


def _subset(dataset: Dataset, names: list[str]) -> Dataset:
    seen = list(dict.fromkeys(names))
    return Dataset(dataset.start_week, tuple(seen), dataset.columns(seen))


def choose_lambda(dataset, target_name, features, config, train_rows) -> tuple[float, dict]:
    """Pick the grid penalty with the best mean Spearman rho over inner
    blocked folds of ``train_rows``. Ties keep the earlier grid value."""
    from .evaluation import spearman_rho

    rows = np.sort(np.asarray(train_rows, dtype=int))
    labels = block_labels(rows.size, config.inner_folds)
    scores = {}
    for lam in config.lambda_grid:
        rhos = []
        for f in range(config.inner_folds):
            tr, te = rows[labels != f], rows[labels == f]
            try:
                m = _fit_fixed(dataset, target_name, features, config, tr, lam)
                pred = predict(m, dataset, te)
                rhos.append(spearman_rho(pred, dataset.column(target_name)[te]))
            except (DatasetError, NumericalError, ValueError):
                rhos.append(float("nan"))
        rhos = np.asarray(rhos)
        scores[float(lam)] = float(np.mean(rhos)) if np.all(np.isfinite(rhos)) else float("-inf")
    best = max(scores, key=lambda lam: (scores[lam], -config.lambda_grid.index(lam)))
    return best, scores


def train(
    dataset: Dataset,
    target_name: str,
    feature_names: Sequence[str],
    config: CascadeConfig = CascadeConfig(),
    train_rows=None,
) -> WienerCascadeModel:
    """Fit normalization, filter and nonlinearity on ``train_rows`` only."""
    features = list(feature_names)
    if not features:
        raise CascadeError("no features given")
    dataset.index(target_name)
    for f in features:
        dataset.index(f)
    if target_name in features:
        raise CascadeError(f"target {target_name!r} cannot also be a feature")
    L = config.lag_depth
    if train_rows is None:
        train_rows = np.arange(L, dataset.T)
    train_rows = np.asarray(train_rows, dtype=int)
    if train_rows.size == 0:
        raise CascadeError("no training rows")
    if train_rows.min() < L:
        raise CascadeError(f"training rows must be >= lag depth {L}")

    scores = {}
    lam = config.ridge_lambda
    if lam is None:
        lam, scores = choose_lambda(dataset, target_name, features, config, train_rows)
    model = _fit_fixed(dataset, target_name, features, config, train_rows, lam)
    return replace(model, lambda_scores=scores)


def predict(model: WienerCascadeModel, dataset: Dataset, row_times) -> np.ndarray:
    """Decoded target at ``row_times`` in original index units."""
    names = list(model.feature_names)
    L = model.config.lag_depth
    rows = np.asarray(row_times, dtype=int).ravel()
    if rows.size and (rows.min() < L or rows.max() >= dataset.T):
        raise CascadeError(f"row times must lie in [{L}, {dataset.T})")
    zdata = zscore_apply(_subset(dataset, names), model.norm)
    design = build_design_matrix(zdata, names, L, rows, model.config.include_intercept)
    u = linear_output(design, model.weights)
    return zscore_invert(model.nonlinearity(u), model.norm, model.target_name)


@dataclass(frozen=True)
class Importance:
    name: str
    score: float
    rank: int


def feature_importance(weights: FilterWeights, names: Sequence[str] | None = None) -> list[Importance]:
    """Sum of absolute filter coefficients over lags, per feature.

    Returned in feature order; ``rank`` 1 is the largest score, ties ranked by
    feature order.
    """
    scores = np.abs(np.asarray(weights.A, dtype=float)).sum(axis=1)
    if names is None:
        names = [str(i) for i in range(scores.size)]
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    ranks = np.empty(scores.size, dtype=int)
    ranks[order] = np.arange(1, scores.size + 1)
    return [Importance(n, float(s), int(r)) for n, s, r in zip(names, scores, ranks)]


def importance_csv(items: Sequence[Importance]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "score", "rank"])
    for it in sorted(items, key=lambda it: it.rank):
        w.writerow([it.name, repr(it.score), it.rank])
    return buf.getvalue()
