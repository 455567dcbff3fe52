"""Bernoulli node masking: context drops, target masks, test-time distortion.

Every sampler is a pure function of its RNG stream, so identical seeds
reproduce identical masks bit-for-bit. Context and target masks must be
drawn from independent streams (see :func:`rng_stream`) so changing the
number of targets never perturbs the context sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, ShapeError
from .graph import CsrGraph, induced_subgraph

MAX_RESAMPLES = 16


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...) — e.g. (seed, epoch, role)."""
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


@dataclass(frozen=True)
class MaskSet:
    """A sampled node set plus the parameters that produced it.

    ``node_ids`` holds the kept nodes for ``context_drop``, the active
    (unmasked) nodes for ``target_mask``, and the replaced nodes for
    ``distortion``. ``seed`` is recorded for reproducibility and is -1
    when the caller supplied a bare generator.
    """

    kind: str
    node_ids: np.ndarray
    probability: float
    seed: int = -1


def sample_context(
    g: CsrGraph, p1: float, rng: np.random.Generator, seed: int = -1
) -> tuple[CsrGraph, MaskSet]:
    """Drop each node independently with probability p1; return the induced
    subgraph of the survivors.

    Resamples up to MAX_RESAMPLES times when every node is dropped.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError("p1 must lie in (0, 1)")
    for _ in range(MAX_RESAMPLES):
        kept = np.flatnonzero(rng.random(g.n_nodes) >= p1)
        if kept.size:
            sub, _ = induced_subgraph(g, kept)
            return sub, MaskSet("context_drop", kept, p1, seed)
    raise DegenerateSampleError(
        "degenerate sampling configuration: context sample empty "
        f"{MAX_RESAMPLES} times in a row"
    )


def sample_target_masks(
    n_nodes: int, p2: float, t: int, rng: np.random.Generator, seed: int = -1
) -> list[MaskSet]:
    """Draw t independent Bernoulli(p2) masks; each returned set holds the
    active (unmasked) nodes that define one pooled target."""
    if not 0.0 < p2 < 1.0:
        raise ValueError("p2 must lie in (0, 1)")
    if t < 1:
        raise ValueError("need at least one target")
    masks = []
    for _ in range(t):
        for _ in range(MAX_RESAMPLES):
            active = np.flatnonzero(rng.random(n_nodes) >= p2)
            if active.size:
                masks.append(MaskSet("target_mask", active, p2, seed))
                break
        else:
            raise DegenerateSampleError(
                "degenerate sampling configuration: target mask empty "
                f"{MAX_RESAMPLES} times in a row"
            )
    return masks


def distort_features(
    g: CsrGraph, p: float, test_ids: np.ndarray, rng: np.random.Generator
) -> CsrGraph:
    """Replace the feature rows of floor(p * |test_ids|) test nodes with
    i.i.d. standard-normal draws; every other row is untouched."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("distortion ratio must lie in [0, 1]")
    test_ids = np.asarray(test_ids, dtype=np.int64)
    if test_ids.size == 0:
        raise ShapeError("distort_features: empty test set")
    n_replace = int(np.floor(p * test_ids.size))
    features = g.features.copy()
    if n_replace:
        chosen = rng.choice(test_ids, size=n_replace, replace=False)
        features[chosen] = rng.standard_normal((n_replace, g.n_features))
    return g.with_features(features)
