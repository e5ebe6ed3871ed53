"""Dielectric and target-depth estimation from fitted hyperbolas.

The hyperbola curvature yields the propagation velocity, the velocity
yields the dielectric (v = C / sqrt(D)), and apex time plus velocity
yield depth. The evaluation side computes the weighted signed-error loss
in both its literal (signed mean) and mean-square readings, since the two
disagree whenever errors cancel, plus mean absolute depth error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .detect import HyperbolaFit
from .medium import SPEED_OF_LIGHT


@dataclass(frozen=True)
class DepthPrediction:
    """Estimated depth and dielectric for one detected target."""

    target_id: int
    depth: float
    dielectric: float

    def __post_init__(self):
        if self.depth <= 0:
            raise ValueError(f"depth must be > 0, got {self.depth}")
        if self.dielectric < 1.0:
            raise ValueError(f"dielectric must be >= 1, got {self.dielectric}")


@dataclass(frozen=True)
class DepthEvalRecord:
    """Ground truth vs prediction for one target (depth + dielectric)."""

    ground_truth_depth: float
    predicted_depth: float
    ground_truth_dielectric: float
    predicted_dielectric: float

    def __post_init__(self):
        vals = (
            self.ground_truth_depth,
            self.predicted_depth,
            self.ground_truth_dielectric,
            self.predicted_dielectric,
        )
        if not all(np.isfinite(vals)) or any(v <= 0 for v in vals):
            raise ValueError("all record fields must be positive and finite")


class DielectricEstimate(NamedTuple):
    value: float
    clamped: bool


class DepthLoss(NamedTuple):
    """Both readings of the weighted-sum loss (see module docstring)."""

    signed: float
    mse: float


def estimate_dielectric(fit: HyperbolaFit) -> DielectricEstimate:
    """Dielectric from the fitted velocity: (C / v)^2, clamped to >= 1.

    The clamp flag marks fits whose velocity numerically exceeded C.
    """
    v = fit.velocity_estimate
    if v <= 0:
        raise ValueError(f"velocity must be > 0, got {v}")
    d = (SPEED_OF_LIGHT / v) ** 2
    if d < 1.0:
        return DielectricEstimate(1.0, True)
    return DielectricEstimate(d, False)


def predict_depth(fit: HyperbolaFit, d_hat: float, target_id: int = 0) -> DepthPrediction:
    """Depth from apex time and dielectric: (C / sqrt(d_hat)) * t0 / 2."""
    if d_hat < 1.0:
        raise ValueError(f"dielectric must be >= 1, got {d_hat}")
    depth = SPEED_OF_LIGHT / np.sqrt(d_hat) * fit.apex_time / 2.0
    return DepthPrediction(target_id=target_id, depth=float(depth), dielectric=float(d_hat))


def depth_loss(records, lambda_dielectric: float = 1.0, lambda_depth: float = 1.0) -> DepthLoss:
    """Weighted-sum evaluation loss over ground-truth/prediction records.

    signed: lam_d * mean(gt_diel - pred_diel) + lam_z * mean(gt_depth - pred_depth)
    mse:    same weights over squared differences.
    Signed errors can cancel; that is why both are returned.
    """
    records = list(records)
    if not records:
        raise ValueError("depth_loss needs at least one record")
    if lambda_dielectric < 0 or lambda_depth < 0:
        raise ValueError("weights must be >= 0")
    d_err = np.array([r.ground_truth_dielectric - r.predicted_dielectric for r in records])
    z_err = np.array([r.ground_truth_depth - r.predicted_depth for r in records])
    signed = lambda_dielectric * d_err.mean() + lambda_depth * z_err.mean()
    mse = lambda_dielectric * np.mean(d_err**2) + lambda_depth * np.mean(z_err**2)
    return DepthLoss(signed=float(signed), mse=float(mse))


def mean_abs_depth_error(records) -> float:
    """Mean absolute depth error in meters."""
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    return float(np.mean([abs(r.ground_truth_depth - r.predicted_depth) for r in records]))
