"""Group fairness metrics and the bias indicator.

Both metrics compare the two groups induced by a binary sensitive
attribute over a node subset: statistical parity looks at positive
prediction rates, equal opportunity at true positive rates.  A metric is
undefined when one of its subgroups is empty; callers decide how to treat
that (the certification pipeline counts such draws as biased-free votes of
0 and logs them).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

STATISTICAL_PARITY = "sp"
EQUAL_OPPORTUNITY = "eo"


class UndefinedMetricError(ValueError):
    """A subgroup needed by the metric is empty on the evaluated node set."""


@dataclass(frozen=True)
class BiasThreshold:
    """Bias level eta a prediction must stay strictly below to count as fair.

    Absolute thresholds carry the level directly; relative ones record the
    multiplier and the measured bias of the undefended model they scale.
    """

    eta: float
    provenance: str = "absolute"
    multiplier: float | None = None
    vanilla_bias: float | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.provenance not in ("absolute", "relative"):
            raise ValueError(f"provenance must be 'absolute' or 'relative', got {self.provenance!r}")

    @classmethod
    def absolute(cls, eta: float) -> "BiasThreshold":
        return cls(eta=float(eta))

    @classmethod
    def relative(cls, multiplier: float, vanilla_bias: float) -> "BiasThreshold":
        if multiplier <= 0:
            raise ValueError(f"multiplier must be positive, got {multiplier}")
        return cls(
            eta=float(multiplier) * float(vanilla_bias),
            provenance="relative",
            multiplier=float(multiplier),
            vanilla_bias=float(vanilla_bias),
        )


def _classes_of(yhat: np.ndarray) -> np.ndarray:
    """Accept either a one-hot (n, C) matrix or a class vector."""
    yhat = np.asarray(yhat)
    if yhat.ndim == 2:
        return yhat.argmax(axis=1)
    return yhat


def delta_sp(yhat: np.ndarray, s: np.ndarray, nodes) -> float:
    """Statistical parity gap |P(yhat=1 | s=0) - P(yhat=1 | s=1)| over nodes."""
    idx = np.asarray(list(nodes), dtype=np.int64)
    if idx.size == 0:
        raise UndefinedMetricError("empty node set")
    cls = _classes_of(yhat)[idx]
    sv = np.asarray(s)[idx]
    g0 = cls[sv == 0]
    g1 = cls[sv == 1]
    if g0.size == 0 or g1.size == 0:
        raise UndefinedMetricError("one sensitive group is empty on this node set")
    return float(abs((g0 == 1).mean() - (g1 == 1).mean()))


def delta_eo(yhat: np.ndarray, y: np.ndarray, s: np.ndarray, nodes) -> float:
    """Equal opportunity gap: statistical parity restricted to y = 1 nodes."""
    idx = np.asarray(list(nodes), dtype=np.int64)
    if idx.size == 0:
        raise UndefinedMetricError("empty node set")
    yv = np.asarray(y)[idx]
    pos = idx[yv == 1]
    if pos.size == 0:
        raise UndefinedMetricError("no positive-label nodes in this node set")
    return delta_sp(yhat, s, pos)


def accuracy(yhat: np.ndarray, y: np.ndarray, nodes) -> float:
    idx = np.asarray(list(nodes), dtype=np.int64)
    if idx.size == 0:
        raise UndefinedMetricError("empty node set")
    return float((_classes_of(yhat)[idx] == np.asarray(y)[idx]).mean())


def bias_value(yhat: np.ndarray, labels, nodes, metric: str) -> float:
    """Dispatch to the requested metric; labels carries both y and s."""
    if metric == STATISTICAL_PARITY:
        return delta_sp(yhat, labels.s, nodes)
    if metric == EQUAL_OPPORTUNITY:
        return delta_eo(yhat, labels.y, labels.s, nodes)
    raise ValueError(f"unknown metric {metric!r}")


def bias_indicator(model, g, X, eta: BiasThreshold, metric: str, test_nodes, labels) -> int:
    """1 when the model's bias on the test nodes is strictly below eta.

    Raises UndefinedMetricError when the metric is undefined on the node
    set; the caller chooses the fallback.
    """
    from .gnn import predict_classes  # deferred to keep import order flexible

    cls = predict_classes(model, g, X)
    return int(bias_value(cls, labels, test_nodes, metric) < eta.eta)
