"""The two training loss terms and their gradients.

The joint term is the mean squared distance between pooled predictor
outputs and pooled targets, averaged over targets; targets never receive
gradient (the target encoder is EMA-updated). The semantic term is a
smooth-L1 (Huber) penalty on the gap between the GMM and K-means
pseudo-label score projections of the embeddings; the label vectors are
constants in the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import PseudoLabels
from .errors import ShapeError


@dataclass(frozen=True)
class LossBreakdown:
    joint: float
    semantic: float
    total: float
    per_target: tuple[float, ...] = ()

    def __post_init__(self):
        if abs(self.total - (self.joint + self.semantic)) > 1e-12:
            raise ValueError("total must equal joint + semantic")


@dataclass(frozen=True)
class ScoreVector:
    """Normalized pseudo-label projection of the embeddings, one entry per
    embedding dimension."""

    value: np.ndarray


def joint_loss(
    preds: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """(1/t) * sum_k ||pred_k - target_k||^2 over pooled vectors.

    Returns the loss, the gradient w.r.t. each prediction, and the
    per-target squared errors. Targets are constants.
    """
    preds = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if preds.shape != targets.shape:
        raise ShapeError("joint_loss: prediction/target shape mismatch")
    t = preds.shape[0]
    diff = preds - targets
    per_target = np.sum(diff * diff, axis=1)
    loss = float(per_target.mean())
    grads = (2.0 / t) * diff
    return loss, grads, per_target


def _label_vector(labels: PseudoLabels) -> np.ndarray:
    # Cluster indices are cast 1-based so the projection denominator
    # (sum of entries times Euclidean norm) can never vanish.
    return labels.labels.astype(np.float64) + 1.0


def score_projection(labels: PseudoLabels, h: np.ndarray) -> ScoreVector:
    """V^T H / (sum(V) * ||V||) with V the 1-based real-cast label vector."""
    if labels.labels.size != h.shape[0]:
        raise ShapeError("score_projection: label count != embedding rows")
    v = _label_vector(labels)
    denom = v.sum() * np.linalg.norm(v)
    return ScoreVector(value=(v @ h) / denom)


def semantic_loss(
    vg: PseudoLabels,
    vk: PseudoLabels,
    h: np.ndarray,
    beta: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Smooth-L1 gap between the two score projections, averaged over
    embedding dimensions.

    ``vk`` must already be aligned to ``vg``. The gradient flows into the
    embeddings through both projections; the label vectors themselves are
    constants.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    if vg.labels.size != vk.labels.size:
        raise ShapeError("semantic_loss: pseudo-label vectors differ in length")
    d = h.shape[1]
    s_gmm = score_projection(vg, h).value
    s_km = score_projection(vk, h).value
    x = s_gmm - s_km
    small = np.abs(x) < beta
    elems = np.where(small, 0.5 * x * x / beta, np.abs(x) - 0.5 * beta)
    loss = float(elems.mean())
    dx = np.where(small, x / beta, np.sign(x)) / d
    v_g = _label_vector(vg)
    v_k = _label_vector(vk)
    denom_g = v_g.sum() * np.linalg.norm(v_g)
    denom_k = v_k.sum() * np.linalg.norm(v_k)
    grad_h = np.outer(v_g, dx) / denom_g - np.outer(v_k, dx) / denom_k
    return loss, grad_h


def total_loss(
    joint: float, semantic: float, per_target: tuple[float, ...] = ()
) -> LossBreakdown:
    """Unweighted sum of the two terms."""
    if not (np.isfinite(joint) and np.isfinite(semantic)):
        raise ValueError("loss terms must be finite")
    return LossBreakdown(
        joint=float(joint),
        semantic=float(semantic),
        total=float(joint) + float(semantic),
        per_target=tuple(float(x) for x in per_target),
    )
