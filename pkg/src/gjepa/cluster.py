"""Gaussian mixture EM, K-means, and pseudo-label extraction.

The mixture fit alternates the closed-form E and M steps (responsibilities,
then mixing weights / means / covariances) until the log-likelihood gain
falls below tolerance. Covariances are diagonal by default; full
covariances are supported for small embedding widths. All randomness comes
from the caller's generator, so fits are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import CovarianceCollapseError, EmptyComponentError, GjepaError, ShapeError

COVARIANCE_TYPES = ("diag", "full")
# Diagonal jitter is scale-relative: 1e-6 * trace(cov)/dim per component.
COV_REG_SCALE = 1e-6


@dataclass
class GmmModel:
    """K Gaussian components: mixing weights, means, covariances.

    ``covariances`` has shape (k, d) of variances for ``diag`` and
    (k, d, d) for ``full``. ``history`` records the log-likelihood after
    each EM iteration of the fit that produced the model.
    """

    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_type: str = "diag"
    log_likelihood: float = float("-inf")
    history: tuple[float, ...] = ()

    def __post_init__(self):
        if self.covariance_type not in COVARIANCE_TYPES:
            raise ValueError(f"unknown covariance type {self.covariance_type!r}")
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights <= 0.0):
            raise GjepaError("mixing weights must be positive and sum to 1")
        if self.means.shape[0] != self.k or self.weights.shape != (self.k,):
            raise ShapeError("component count mismatch")

    @property
    def d(self) -> int:
        return self.means.shape[1]


@dataclass
class Responsibilities:
    """Posterior component memberships, one row per point."""

    gamma: np.ndarray

    def __post_init__(self):
        g = self.gamma
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise GjepaError("responsibilities must lie in [0, 1]")
        if np.any(np.abs(g.sum(axis=1) - 1.0) > 1e-9):
            raise GjepaError("responsibility rows must sum to 1")


@dataclass(frozen=True)
class PseudoLabels:
    """Cluster indices assigned to each point by one clustering route."""

    source: str
    labels: np.ndarray
    k: int

    def __post_init__(self):
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise GjepaError("pseudo-labels out of range")


def _log_densities(model: GmmModel, h: np.ndarray) -> np.ndarray:
    """Per-point, per-component log N(h_n | mu_k, Sigma_k)."""
    n, d = h.shape
    out = np.empty((n, model.k))
    with np.errstate(divide="ignore", invalid="ignore"):
        if model.covariance_type == "diag":
            for j in range(model.k):
                var = model.covariances[j]
                diff = h - model.means[j]
                out[:, j] = -0.5 * (
                    d * np.log(2.0 * np.pi)
                    + np.sum(np.log(var))
                    + np.sum(diff * diff / var, axis=1)
                )
        else:
            for j in range(model.k):
                try:
                    chol = np.linalg.cholesky(model.covariances[j])
                except np.linalg.LinAlgError as exc:
                    raise CovarianceCollapseError(
                        f"covariance collapse: component {j} not positive definite"
                    ) from exc
                diff = (h - model.means[j]).T
                half = scipy.linalg.solve_triangular(chol, diff, lower=True)
                out[:, j] = -0.5 * (
                    d * np.log(2.0 * np.pi)
                    + 2.0 * np.sum(np.log(np.diag(chol)))
                    + np.sum(half * half, axis=0)
                )
    if not np.all(np.isfinite(out)):
        raise CovarianceCollapseError("covariance collapse: non-finite density")
    return out


def e_step(model: GmmModel, h: np.ndarray) -> Responsibilities:
    """Posterior responsibilities gamma[n, k], normalized in log space."""
    if h.shape[1] != model.d:
        raise ShapeError("e_step: embedding width mismatch")
    joint = _log_densities(model, h) + np.log(model.weights)
    gamma = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
    return Responsibilities(gamma=gamma)


def log_likelihood(model: GmmModel, h: np.ndarray) -> float:
    joint = _log_densities(model, h) + np.log(model.weights)
    return float(np.sum(logsumexp(joint, axis=1)))


def m_step(
    h: np.ndarray,
    gamma: Responsibilities,
    covariance_type: str = "diag",
) -> GmmModel:
    """Closed-form parameter updates from the current responsibilities."""
    g = gamma.gamma
    n, d = h.shape
    k = g.shape[1]
    mass = g.sum(axis=0)
    if np.any(mass < 1e-12):
        raise EmptyComponentError(
            f"empty component: responsibility mass {mass.min():.3e}"
        )
    weights = mass / n
    means = (g.T @ h) / mass[:, None]
    if covariance_type == "diag":
        covariances = np.empty((k, d))
        for j in range(k):
            diff = h - means[j]
            var = (g[:, j, None] * diff * diff).sum(axis=0) / mass[j]
            covariances[j] = var + COV_REG_SCALE * var.sum() / d
    else:
        covariances = np.empty((k, d, d))
        for j in range(k):
            diff = h - means[j]
            cov = (g[:, j, None] * diff).T @ diff / mass[j]
            cov += COV_REG_SCALE * np.trace(cov) / d * np.eye(d)
            covariances[j] = cov
    return GmmModel(
        k=k,
        weights=weights,
        means=means,
        covariances=covariances,
        covariance_type=covariance_type,
    )


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    g = np.zeros((labels.size, k))
    g[np.arange(labels.size), labels] = 1.0
    return g


def fit_gmm(
    h: np.ndarray,
    k: int,
    max_iter: int = 100,
    tol: float = 1e-4,
    rng: np.random.Generator | None = None,
    covariance_type: str = "diag",
) -> tuple[GmmModel, PseudoLabels]:
    """EM fit initialized from a K-means run on the same generator.

    Stops when the absolute log-likelihood gain drops below ``tol`` or
    after ``max_iter`` iterations; the likelihood trajectory is stored on
    the returned model. Pseudo-labels are argmax responsibilities.
    """
    n = h.shape[0]
    if k > n:
        raise GjepaError(f"cannot fit {k} components to {n} points")
    rng = np.random.default_rng() if rng is None else rng
    init_labels, _, _ = lloyd_kmeans(h, k, max_iter=max_iter, rng=rng)
    model = m_step(h, Responsibilities(_one_hot(init_labels, k)), covariance_type)
    ll = log_likelihood(model, h)
    history = [ll]
    for _ in range(max_iter):
        gamma = e_step(model, h)
        model = m_step(h, gamma, covariance_type)
        new_ll = log_likelihood(model, h)
        history.append(new_ll)
        if abs(new_ll - ll) < tol:
            ll = new_ll
            break
        ll = new_ll
    model.log_likelihood = ll
    model.history = tuple(history)
    labels = assign_gmm(model, h)
    return model, labels


def assign_gmm(model: GmmModel, h: np.ndarray) -> PseudoLabels:
    gamma = e_step(model, h).gamma
    return PseudoLabels("gmm", np.argmax(gamma, axis=1).astype(np.int64), model.k)


def lloyd_kmeans(
    h: np.ndarray,
    k: int,
    max_iter: int = 100,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm with k-means++ seeding.

    Returns (labels, centroids, per-iteration WCSS). An emptied cluster is
    re-seeded from the point farthest from its assigned centroid, which
    keeps the WCSS trajectory nonincreasing.
    """
    n = h.shape[0]
    if k > n:
        raise GjepaError(f"cannot place {k} centroids on {n} points")
    rng = np.random.default_rng() if rng is None else rng
    centroids = _kmeanspp_seed(h, k, rng)
    labels: np.ndarray | None = None
    wcss_history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_distances(h, centroids)
        new_labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(point_d2))
                centroids[j] = h[far]
                new_labels[far] = j
                point_d2[far] = 0.0
        wcss_history.append(float(point_d2.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = h[labels == j].mean(axis=0)
    return labels, centroids, wcss_history


def _kmeanspp_seed(h: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = h.shape[0]
    centroids = np.empty((k, h.shape[1]))
    centroids[0] = h[rng.integers(n)]
    d2 = np.sum((h - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = h[idx]
        d2 = np.minimum(d2, np.sum((h - centroids[j]) ** 2, axis=1))
    return centroids


def _sq_distances(h: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = h[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def fit_kmeans(
    h: np.ndarray,
    k: int,
    max_iter: int = 100,
    rng: np.random.Generator | None = None,
) -> PseudoLabels:
    labels, _, _ = lloyd_kmeans(h, k, max_iter=max_iter, rng=rng)
    return PseudoLabels("kmeans", labels, k)


def assign_kmeans(centroids: np.ndarray, h: np.ndarray) -> PseudoLabels:
    labels = np.argmin(_sq_distances(h, centroids), axis=1).astype(np.int64)
    return PseudoLabels("kmeans", labels, centroids.shape[0])


def align_labels(a: PseudoLabels, b: PseudoLabels) -> PseudoLabels:
    """Relabel b so clusters that overlap with a share indices.

    Maximum-overlap assignment on the k-by-k contingency table; ties are
    broken toward the existing numbering, which makes alignment
    idempotent.
    """
    if a.k != b.k or a.labels.size != b.labels.size:
        raise ShapeError("align_labels: label vectors must share N and k")
    k = a.k
    contingency = np.zeros((k, k))
    np.add.at(contingency, (a.labels, b.labels), 1.0)
    # Sub-unit diagonal bonus: total < 1, so it only breaks exact ties.
    contingency[np.diag_indices(k)] += 0.5 / k
    rows, cols = linear_sum_assignment(-contingency)
    mapping = np.empty(k, dtype=np.int64)
    mapping[cols] = rows
    return PseudoLabels(b.source, mapping[b.labels], k)
