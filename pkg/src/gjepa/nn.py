"""Dense numerical kernels for the GCN encoders and their training.

There is no general autodiff here: the architecture is fixed (3-layer
encoders, 2-layer predictors, 1-layer probe), so each backward pass is
hand-derived and verified against central finite differences by
:func:`grad_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMaskError, DivergenceError, ShapeError
from .graph import NormalizedAdjacency, spmm

ACTIVATIONS = ("relu", "tanh", "identity")

# Largest double strictly below 1; tanh outputs are clamped into the open
# interval (-1, 1) so the bounded-range contract survives float rounding.
_TANH_CAP = np.nextafter(1.0, 0.0)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.clip(np.tanh(z), -_TANH_CAP, _TANH_CAP)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - out * out
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class GcnLayer:
    """One graph-convolution layer: out = g(spmm(adj, x) @ weight)."""

    weight: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not np.all(np.isfinite(self.weight)):
            raise ShapeError("layer weight contains non-finite entries")

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]


def init_weight(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    """Standard-normal init scaled by 1/sqrt(d_in) to keep Tanh unsaturated."""
    return rng.standard_normal((d_in, d_out)) / math.sqrt(d_in)


@dataclass
class GcnCache:
    """Forward tape retained for the hand-derived backward pass."""

    layer: GcnLayer
    adj: NormalizedAdjacency
    ax: np.ndarray
    pre: np.ndarray
    out: np.ndarray


def gcn_forward(
    layer: GcnLayer, adj: NormalizedAdjacency, x: np.ndarray
) -> tuple[np.ndarray, GcnCache]:
    if x.shape[1] != layer.d_in:
        raise ShapeError(f"gcn_forward: input dim {x.shape[1]} != weight rows {layer.d_in}")
    ax = spmm(adj, x)
    pre = ax @ layer.weight
    out = _activate(layer.activation, pre)
    return out, GcnCache(layer=layer, adj=adj, ax=ax, pre=pre, out=out)


def gcn_backward(cache: GcnCache, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. the layer input and weight.

    The adjacency is symmetric, so the transpose propagation reuses the
    same spmm.
    """
    if grad_out.shape != cache.out.shape:
        raise ShapeError("gcn_backward: grad shape mismatch")
    dpre = grad_out * _activation_grad(cache.layer.activation, cache.pre, cache.out)
    grad_w = cache.ax.T @ dpre
    grad_x = spmm(cache.adj, dpre @ cache.layer.weight.T)
    return grad_x, grad_w


def global_mean_pool(x: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Mean of the active rows; ``active=None`` pools every node."""
    if active is None:
        rows = x
    else:
        active = np.asarray(active, dtype=np.int64)
        if active.size == 0:
            raise DegenerateMaskError("degenerate mask: no active nodes to pool")
        rows = x[active]
    return rows.mean(axis=0)


@dataclass
class AdamState:
    """Per-parameter Adam moments with bias correction."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, **kwargs) -> "AdamState":
        return cls(
            first_moment=np.zeros_like(param),
            second_moment=np.zeros_like(param),
            **kwargs,
        )


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """Apply one Adam update in place; returns the updated parameter."""
    if grad.shape != param.shape or state.first_moment.shape != param.shape:
        raise ShapeError("adam_step: shape mismatch")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("divergence: non-finite gradient")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    state.first_moment *= b1
    state.first_moment += (1.0 - b1) * grad
    state.second_moment *= b2
    state.second_moment += (1.0 - b2) * grad * grad
    m_hat = state.first_moment / (1.0 - b1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - b2 ** state.step_count)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param


@dataclass(frozen=True)
class LrSchedule:
    """Cosine annealing with warm restarts every ``restart_period`` epochs."""

    base_lr: float
    restart_period: int
    min_lr: float

    def __post_init__(self):
        if self.restart_period <= 0:
            raise ValueError("restart_period must be positive")
        if self.min_lr > self.base_lr:
            raise ValueError("min_lr must not exceed base_lr")


def cosine_lr(schedule: LrSchedule, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    phase = (epoch % schedule.restart_period) / schedule.restart_period
    return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) * (
        1.0 + math.cos(math.pi * phase)
    )


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    worst_param: str = ""
    entries_checked: int = 0

    def __str__(self):
        return (
            f"grad check: max relative error {self.max_rel_error:.3e} "
            f"(worst parameter {self.worst_param!r}, {self.entries_checked} entries)"
        )


def grad_check(
    loss_fn,
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
    floor: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` takes no arguments, reads the (shared) arrays in
    ``params``, and returns ``(loss, grads)`` with ``grads`` keyed like
    ``params``. Every entry of every parameter is perturbed by ±eps; the
    relative error uses ``max(|analytic|, |numeric|, floor)`` as the
    denominator so near-zero gradients are judged on an absolute scale.
    Report-only: nothing is raised on mismatch.
    """
    _, analytic = loss_fn()
    report = GradCheckReport(max_rel_error=0.0)
    for name, param in params.items():
        grad = analytic[name]
        if grad.shape != param.shape:
            raise ShapeError(f"grad_check: gradient shape mismatch for {name!r}")
        flat = param.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus, _ = loss_fn()
            flat[i] = orig - eps
            minus, _ = loss_fn()
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * eps)
            a = grad.reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
        report.per_param[name] = worst
        report.entries_checked += flat.size
        if worst >= report.max_rel_error:
            report.max_rel_error = worst
            report.worst_param = name
    return report
