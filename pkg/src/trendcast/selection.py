"""Predictor subsets: all predictors, the most periodic ones, or the ones with
the largest filter weight in an all-predictor model."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


class SelectionError(ValueError):
    pass


class Mode(str, enum.Enum):
    ALL = "all"
    TOP_PERIODIC = "periodic"
    TOP_WEIGHTED = "weighted"


class SelectionScope(str, enum.Enum):
    GLOBAL = "global"
    PER_FOLD = "per-fold"


@dataclass(frozen=True)
class SelectionSpec:
    mode: Mode = Mode.ALL
    k: int = 10
    base_target: str | None = None  # TOP_WEIGHTED: defaults to the decoded target

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.k < 1:
            raise SelectionError("k must be >= 1")

    @property
    def label(self) -> str:
        return "all" if self.mode is Mode.ALL else f"{self.mode.value}:{self.k}"

    @classmethod
    def parse(cls, text: str) -> "SelectionSpec":
        """Parse ``all``, ``periodic:K`` or ``weighted:K``."""
        text = text.strip().lower()
        if text == "all":
            return cls(Mode.ALL)
        mode, _, k = text.partition(":")
        try:
            return cls(Mode(mode), int(k) if k else 10)
        except ValueError:
            raise SelectionError(
                f"bad feature selection {text!r}; expected all, periodic:K or weighted:K"
            ) from None


def selection_context(dataset: Dataset, target: str, spec: SelectionSpec, config=None, rows=None):
    """Build what :func:`select_features` needs for ``spec``.

    ``rows`` restricts the computation to training rows when selecting inside
    cross-validation. Returns ``None`` for ``ALL``, a periodicity ranking for
    ``TOP_PERIODIC`` and an all-predictor model for ``TOP_WEIGHTED``.
    """
    from . import cascade, wavelet

    if spec.mode is Mode.ALL:
        return None
    if spec.mode is Mode.TOP_PERIODIC:
        return wavelet.rank_periodic(dataset, rows=rows)
    config = config or cascade.CascadeConfig()
    base_target = spec.base_target or target
    if rows is None:
        rows = np.arange(config.lag_depth, dataset.T)
    return cascade.train(dataset, base_target, dataset.predictors, config, rows)


def select_features(dataset: Dataset, spec: SelectionSpec, context=None) -> list[str]:
    from .cascade import WienerCascadeModel, feature_importance

    preds = dataset.predictors
    if spec.mode is Mode.ALL:
        return list(preds)
    if spec.k > len(preds):
        raise SelectionError(f"k={spec.k} exceeds the {len(preds)} available predictors")

    if spec.mode is Mode.TOP_PERIODIC:
        if not isinstance(context, list):
            raise SelectionError("periodic selection needs a periodicity ranking")
        ranked = [name for name, _ in context if name in preds]
        return ranked[: spec.k]

    if not isinstance(context, WienerCascadeModel):
        raise SelectionError("weighted selection needs an all-predictor base model")
    if set(context.feature_names) != set(preds):
        raise SelectionError("base model must be trained on all predictors")
    if spec.base_target and context.target_name != spec.base_target:
        raise SelectionError("base model was trained for a different target")
    imp = feature_importance(context.weights, context.feature_names)
    return [it.name for it in sorted(imp, key=lambda it: it.rank)][: spec.k]
