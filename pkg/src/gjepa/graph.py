"""Sparse graph container, symmetric normalization, and subgraph extraction.

Graphs are undirected and simple: edge lists are symmetrized and
deduplicated on construction, self-loops are never stored (normalization
adds them transiently). Adjacency lives in CSR form; features are a dense
row-major float64 matrix with one row per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateSampleError, ShapeError


@dataclass(frozen=True)
class CsrGraph:
    """Immutable undirected graph with per-node dense feature rows.

    ``n_edges`` counts directed arcs after symmetrization, so an
    undirected edge contributes 2. ``labels`` uses -1 for unlabeled
    nodes; ``splits`` optionally carries train/val/test node index
    arrays for downstream evaluation.
    """

    n_nodes: int
    n_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    splits: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        ro, ci = self.row_offsets, self.col_indices
        if len(ro) != self.n_nodes + 1 or ro[0] != 0 or ro[-1] != self.n_edges:
            raise ShapeError("row_offsets inconsistent with node/arc counts")
        if np.any(np.diff(ro) < 0):
            raise ShapeError("row_offsets must be nondecreasing")
        if len(ci) != self.n_edges:
            raise ShapeError("col_indices length != n_edges")
        if self.n_edges and (ci.min() < 0 or ci.max() >= self.n_nodes):
            raise ShapeError("col index out of range")
        if self.features.shape[0] != self.n_nodes:
            raise ShapeError("feature rows != n_nodes")
        rows = np.repeat(np.arange(self.n_nodes), np.diff(ro))
        if np.any(rows == ci):
            raise ShapeError("stored adjacency must not contain self-loops")
        fwd = rows * self.n_nodes + ci
        if len(np.unique(fwd)) != self.n_edges:
            raise ShapeError("duplicate arcs within a row")
        # Symmetry: the arc set must equal its own transpose.
        rev = ci * self.n_nodes + rows
        if not np.array_equal(np.sort(fwd), np.sort(rev)):
            raise ShapeError("adjacency is not symmetric")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        """Neighbor counts, excluding the transient self-loop."""
        return np.diff(self.row_offsets)

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u]:self.row_offsets[u + 1]]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as a (m, 2) array with u < v."""
        rows = np.repeat(np.arange(self.n_nodes), self.degrees)
        mask = rows < self.col_indices
        return np.stack([rows[mask], self.col_indices[mask]], axis=1)

    def with_features(self, features: np.ndarray) -> "CsrGraph":
        if features.shape != self.features.shape:
            raise ShapeError("replacement features must keep the same shape")
        return replace(self, features=features)


def csr_from_edges(
    n_nodes: int,
    edges: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray | None = None,
    splits: dict[str, np.ndarray] | None = None,
) -> CsrGraph:
    """Build a CsrGraph from an (m, 2) array of unordered node pairs.

    Pairs are symmetrized and deduplicated; self-loops in the input are
    dropped.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
        raise ShapeError("edge endpoint out of range")
    u = np.concatenate([edges[:, 0], edges[:, 1]])
    v = np.concatenate([edges[:, 1], edges[:, 0]])
    keep = u != v
    u, v = u[keep], v[keep]
    key = u * n_nodes + v
    key = np.unique(key)
    u, v = key // n_nodes, key % n_nodes
    row_offsets = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(row_offsets, u + 1, 1)
    row_offsets = np.cumsum(row_offsets)
    features = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
    return CsrGraph(
        n_nodes=n_nodes,
        n_edges=len(v),
        row_offsets=row_offsets,
        col_indices=v.astype(np.int64),
        features=features,
        labels=labels,
        splits=splits,
    )


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops materialized.

    The value on arc (u, v) is 1/sqrt((deg(u)+1)(deg(v)+1)); degrees
    count stored neighbors, so an isolated node carries a lone self-loop
    of weight 1.
    """

    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_nodes, self.n_nodes),
        )

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()


def build_normalized_adjacency(g: CsrGraph) -> NormalizedAdjacency:
    """Return D^{-1/2} (A + I) D^{-1/2} in CSR form."""
    inv_sqrt = 1.0 / np.sqrt(g.degrees.astype(np.float64) + 1.0)
    rows = np.repeat(np.arange(g.n_nodes), g.degrees)
    cols = g.col_indices
    # Append the diagonal, then re-sort into canonical CSR order.
    rows = np.concatenate([rows, np.arange(g.n_nodes)])
    cols = np.concatenate([cols, np.arange(g.n_nodes)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    row_offsets = np.zeros(g.n_nodes + 1, dtype=np.int64)
    np.add.at(row_offsets, rows + 1, 1)
    return NormalizedAdjacency(
        n_nodes=g.n_nodes,
        row_offsets=np.cumsum(row_offsets),
        col_indices=cols.astype(np.int64),
        values=vals,
    )


def spmm(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product adj @ x with row-deterministic accumulation."""
    if x.shape[0] != adj.n_nodes:
        raise ShapeError(f"spmm: got {x.shape[0]} rows for {adj.n_nodes} nodes")
    return adj._csr @ x


def induced_subgraph(g: CsrGraph, keep: np.ndarray) -> tuple[CsrGraph, np.ndarray]:
    """Extract the subgraph induced by the kept nodes.

    Returns the subgraph and an old-to-new index map of length
    ``g.n_nodes`` with -1 for dropped nodes. Arcs survive only when both
    endpoints are kept; feature and label rows are copied.
    """
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    if keep.size == 0:
        raise DegenerateSampleError("degenerate sample: empty keep set")
    if keep[0] < 0 or keep[-1] >= g.n_nodes:
        raise ShapeError("keep index out of range")
    old_to_new = np.full(g.n_nodes, -1, dtype=np.int64)
    old_to_new[keep] = np.arange(keep.size)
    rows = np.repeat(np.arange(g.n_nodes), g.degrees)
    mask = (old_to_new[rows] >= 0) & (old_to_new[g.col_indices] >= 0)
    new_rows = old_to_new[rows[mask]]
    new_cols = old_to_new[g.col_indices[mask]]
    row_offsets = np.zeros(keep.size + 1, dtype=np.int64)
    np.add.at(row_offsets, new_rows + 1, 1)
    sub = CsrGraph(
        n_nodes=keep.size,
        n_edges=len(new_cols),
        row_offsets=np.cumsum(row_offsets),
        col_indices=new_cols,
        features=g.features[keep].copy(),
        labels=None if g.labels is None else g.labels[keep].copy(),
    )
    return sub, old_to_new
