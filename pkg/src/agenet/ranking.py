"""Interval points, ranking labels, the error-compression ranking loss, and
the evaluation metric.

Ages are integers; the K fixed interval points sit at half-integers, one half
year below each age in the range, so the starting age already carries one
active label bit. The network emits a single regression value h per sample
and the loss is the summed binary cross-entropy of sigmoid(h - b_k) against
the K-dimensional ranking label.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, accumulate_grad, make_op, softplus, _sigmoid
from .ops import softmax_xent

__all__ = [
    "IntervalPoints",
    "RankingLabel",
    "LossKind",
    "make_interval_points",
    "encode_ranking_label",
    "encode_ages",
    "ecr_loss",
    "ecr_loss_values",
    "ecr_minimizer_oracle",
    "decode_age",
    "mae",
    "l1_loss",
    "baseline_loss",
]


@dataclass(frozen=True)
class IntervalPoints:
    """K fixed thresholds b_k = a_min - 0.5 + (k-1), spacing exactly one year."""

    a_min: int
    a_max: int

    def __post_init__(self):
        if self.a_max < self.a_min:
            raise ValueError(f"a_max {self.a_max} below a_min {self.a_min}")

    @property
    def k(self) -> int:
        return self.a_max - self.a_min + 1

    @property
    def b(self) -> np.ndarray:
        return self.a_min - 0.5 + np.arange(self.k, dtype=np.float64)


def make_interval_points(a_min: int, a_max: int) -> IntervalPoints:
    if a_min >= a_max:
        raise ValueError(f"need a_min < a_max, got {a_min} >= {a_max}")
    return IntervalPoints(a_min, a_max)


@dataclass(frozen=True)
class RankingLabel:
    """K-length binary vector: a prefix of ones whose length encodes the age."""

    age: int
    y: np.ndarray

    @property
    def k(self) -> int:
        return self.y.shape[0]


def encode_ranking_label(age: int, points: IntervalPoints) -> RankingLabel:
    if not points.a_min <= age <= points.a_max:
        raise ValueError(f"age {age} outside [{points.a_min}, {points.a_max}]")
    y = (age > points.b).astype(np.float64)
    return RankingLabel(age=age, y=y)


def encode_ages(ages, points: IntervalPoints) -> np.ndarray:
    """Stack ranking labels for a batch of ages into an N x K matrix."""
    return np.stack([encode_ranking_label(int(a), points).y for a in ages])


def _label_matrix(labels, points: IntervalPoints) -> np.ndarray:
    if isinstance(labels, np.ndarray):
        y = labels.astype(np.float64)
    else:
        y = np.stack([lab.y for lab in labels]).astype(np.float64)
    if y.ndim != 2 or y.shape[1] != points.k:
        raise ValueError(f"labels have K={y.shape[-1]}, interval points have K={points.k}")
    return y


def ecr_loss(h: Tensor, labels, points: IntervalPoints, reduction: str = "sum") -> Tensor:
    """Error-compression ranking loss.

    loss = -sum_i sum_k [ y_ik * log sigmoid(h_i - b_k)
                          + (1 - y_ik) * log(1 - sigmoid(h_i - b_k)) ]

    evaluated through the branch-split softplus so large |h - b_k| never
    overflows; ``reduction="mean"`` divides by the batch size.
    dL/dh_i = sum_k (sigmoid(h_i - b_k) - y_ik), scaled accordingly.
    """
    if reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    if h.data.ndim != 1:
        raise ValueError(f"ecr_loss expects h of shape (N,), got {h.data.shape}")
    y = _label_matrix(labels, points)
    if y.shape[0] != h.data.shape[0]:
        raise ValueError(f"batch mismatch: h has {h.data.shape[0]}, labels have {y.shape[0]}")
    n = h.data.shape[0]
    z = h.data[:, None] - points.b[None, :]
    # y * -log(sig(z)) + (1-y) * -log(1-sig(z)) == y*softplus(-z) + (1-y)*softplus(z)
    terms = y * softplus(-z) + (1.0 - y) * softplus(z)
    total = float(np.sum(terms))
    denom = n if reduction == "mean" else 1
    out_data = np.asarray(total / denom)

    def bw(go: np.ndarray) -> None:
        dh = np.sum(_sigmoid(z) - y, axis=1) / denom
        accumulate_grad(h, float(go) * dh)

    return make_op(out_data, (h,), bw)


def ecr_loss_values(h: np.ndarray, y: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-sample loss values on plain arrays (no tape); used by the oracle."""
    z = np.asarray(h, dtype=np.float64)[:, None] - b[None, :]
    return np.sum(y * softplus(-z) + (1.0 - y) * softplus(z), axis=1)


def ecr_minimizer_oracle(label: RankingLabel, points: IntervalPoints,
                         margin: float = 5.0, grid_step: float = 1e-3) -> tuple[float, bool]:
    """Brute-force argmin over h of the single-sample loss.

    Grid search on [a_min - margin, a_max + margin] at ``grid_step``, then
    ternary-search refinement between the grid neighbours (the loss is
    strictly convex in h). Returns (minimizer, hit_boundary); a boundary hit
    means the true minimizer lies outside the search interval.
    """
    lo = points.a_min - margin
    hi = points.a_max + margin
    grid = np.arange(lo, hi + grid_step / 2, grid_step)
    y = label.y[None, :]
    vals = ecr_loss_values(grid, np.repeat(y, len(grid), axis=0), points.b)
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        return float(grid[i]), True
    a, c = grid[i - 1], grid[i + 1]

    def f(hh: float) -> float:
        return float(ecr_loss_values(np.array([hh]), y, points.b)[0])

    while c - a > 1e-10:
        m1 = a + (c - a) / 3
        m2 = c - (c - a) / 3
        if f(m1) <= f(m2):
            c = m2
        else:
            a = m1
    return (a + c) / 2, False


def decode_age(h: float) -> float:
    """Predicted age is the raw regression value; no rounding, no clamping."""
    return float(h)


def mae(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("mae of an empty set")
    return float(np.mean(np.abs(pred - truth)))


class LossKind(enum.Enum):
    ECR = "ecr"
    L1 = "l1"
    MULTICLASS_CE = "ce"


def l1_loss(h: Tensor, ages) -> Tensor:
    """sum_i |h_i - age_i|; subgradient sign(h - age), zero exactly at zero."""
    if h.data.ndim != 1:
        raise ValueError(f"l1_loss expects h of shape (N,), got {h.data.shape}")
    target = np.asarray(ages, dtype=np.float64)
    if target.shape != h.data.shape:
        raise ValueError(f"batch mismatch: h {h.data.shape}, ages {target.shape}")
    diff = h.data - target
    out_data = np.asarray(np.sum(np.abs(diff)))

    def bw(go: np.ndarray) -> None:
        accumulate_grad(h, float(go) * np.sign(diff))

    return make_op(out_data, (h,), bw)


def baseline_loss(kind: LossKind, output: Tensor, ages, points: IntervalPoints) -> Tensor:
    """Ablation losses sharing the network body: L1 on the scalar head, or
    K-way cross-entropy on a per-age classification head."""
    ages = np.asarray(ages)
    if kind == LossKind.L1:
        if output.data.ndim != 1:
            raise ValueError(f"L1 baseline needs a scalar head, got output {output.data.shape}")
        return l1_loss(output, ages)
    if kind == LossKind.MULTICLASS_CE:
        if output.data.ndim != 2 or output.data.shape[1] != points.k:
            raise ValueError(
                f"CE baseline needs N x {points.k} logits, got {output.data.shape}")
        return softmax_xent(output, ages - points.a_min)
    if kind == LossKind.ECR:
        return ecr_loss(output, encode_ages(ages, points), points)
    raise ValueError(f"unknown loss kind {kind}")
