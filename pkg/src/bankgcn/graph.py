"""Sparse undirected graphs, normalized Laplacian products and batching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bankgcn import kernels
from bankgcn.errors import DimensionError, GraphConstructionError


def _readonly(a):
    a.setflags(write=False)
    return a


class Graph:
    """Immutable undirected graph stored as symmetric CSR plus node features.

    Attributes
    ----------
    n : int
        Number of nodes.
    indptr, indices, weights : ndarray
        CSR arrays of the symmetric adjacency ``A``; every undirected edge
        is stored in both directions, self-loops once.
    features : ndarray, shape (n, d)
        Node signals, row ``m`` is ``x(v_m)``.
    label : int
        Graph class index.
    """

    __slots__ = (
        "n",
        "indptr",
        "indices",
        "weights",
        "features",
        "label",
        "degrees",
        "norm_weights",
        "_op",
    )

    def __init__(self, n, indptr, indices, weights, features, label=0):
        self.n = int(n)
        self.indptr = _readonly(np.asarray(indptr, dtype=np.int64))
        self.indices = _readonly(np.asarray(indices, dtype=np.int64))
        self.weights = _readonly(np.asarray(weights, dtype=np.float64))
        self.features = _readonly(np.array(features, dtype=np.float64, order="C"))
        self.label = int(label)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        deg = np.bincount(rows, weights=self.weights, minlength=self.n)
        self.degrees = _readonly(deg)
        with np.errstate(divide="ignore"):
            dis = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        self.norm_weights = _readonly(self.weights * dis[rows] * dis[self.indices])
        self._op = None

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def num_stored_edges(self):
        return len(self.indices)

    def num_undirected_edges(self):
        """Edge count with each undirected pair (and each self-loop) counted once."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return int(np.count_nonzero(rows <= self.indices))

    def operator(self):
        """Kernel-side handle for ``L - I = -D^{-1/2} A D^{-1/2}``."""
        if self._op is None:
            op = kernels.make_operator(self.n, self.indptr, self.indices, -self.norm_weights)
            object.__setattr__(self, "_op", op)
        return self._op

    def dense_adjacency(self):
        A = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        A[rows, self.indices] = self.weights
        return A

    def with_features(self, features, label=None):
        """Same topology, new node signals (and optionally a new label)."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        if features.shape[0] != self.n:
            raise DimensionError(f"features have {features.shape[0]} rows, graph has {self.n} nodes")
        g = Graph.__new__(Graph)
        for name in ("n", "indptr", "indices", "weights", "degrees", "norm_weights"):
            object.__setattr__(g, name, getattr(self, name))
        g.features = _readonly(np.array(features, order="C"))
        g.label = self.label if label is None else int(label)
        g._op = self._op
        return g

    def __setattr__(self, name, value):
        if hasattr(self, "_op") and name != "_op":
            raise AttributeError("Graph is immutable")
        object.__setattr__(self, name, value)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.label == other.label
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_undirected_edges()}, d={self.d}, label={self.label})"


def build_graph(n, edge_list, features=None, label=0):
    """Build a symmetric CSR graph from an undirected edge list.

    Each ``(i, j, w)`` is stored as both ``(i, j)`` and ``(j, i)``; repeated
    entries are coalesced by summing weights. Self-loops are kept once and
    never added implicitly.
    """
    n = int(n)
    if n < 1:
        raise GraphConstructionError(f"graph needs at least one node, got n={n}")
    if features is None:
        features = np.zeros((n, 0))
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if features.ndim != 2 or features.shape[0] != n:
        raise GraphConstructionError(f"features must have shape (n={n}, d), got {features.shape}")

    edges = list(edge_list)
    if edges:
        arr = np.array([(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges], dtype=np.float64)
        src = arr[:, 0].astype(np.int64)
        dst = arr[:, 1].astype(np.int64)
        w = arr[:, 2]
        if np.any(arr[:, 0] != src) or np.any(arr[:, 1] != dst):
            raise GraphConstructionError("edge endpoints must be integers")
    else:
        src = dst = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    bad = (src < 0) | (src >= n) | (dst < 0) | (dst >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GraphConstructionError(f"edge ({src[k]}, {dst[k]}) out of range for n={n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise GraphConstructionError("edge weights must be finite and non-negative")

    off = src != dst
    rows = np.concatenate([src, dst[off]])
    cols = np.concatenate([dst, src[off]])
    vals = np.concatenate([w, w[off]])
    return _from_coo(n, rows, cols, vals, features, label)


def _from_coo(n, rows, cols, vals, features, label):
    keys = rows * n + cols
    uniq, inv = np.unique(keys, return_inverse=True)
    summed = np.bincount(inv.ravel(), weights=vals, minlength=len(uniq))
    r = uniq // n
    c = uniq % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    return Graph(n, indptr, c, summed, features, label)


def _check_rows(g, X):
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != g.n:
        raise DimensionError(f"signal has {X.shape[0]} rows, graph has {g.n} nodes")
    return np.ascontiguousarray(X), squeeze


def as_graph(g):
    """Accept a Graph or Batch and return the Graph to operate on."""
    return g.merged if isinstance(g, Batch) else g


def scaled_laplacian_matvec(g, X):
    """Return ``(L - I) X = -D^{-1/2} A D^{-1/2} X`` without forming L."""
    g = as_graph(g)
    X, squeeze = _check_rows(g, X)
    out = kernels.matmat(g.operator(), X)
    return out[:, 0] if squeeze else out


def laplacian_matvec(g, X):
    """Return ``L X`` for ``L = I - D^{-1/2} A D^{-1/2}``.

    Zero-degree nodes use ``(D^{-1/2})_ii = 0``, so they map ``x -> x``.
    """
    g = as_graph(g)
    X, squeeze = _check_rows(g, X)
    out = X + kernels.matmat(g.operator(), X)
    return out[:, 0] if squeeze else out


def dense_laplacian(g):
    """Dense ``I - D^{-1/2} A D^{-1/2}``; for oracles on small graphs only."""
    g = as_graph(g)
    deg = g.degrees
    dis = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    return np.eye(g.n) - dis[:, None] * g.dense_adjacency() * dis[None, :]


@dataclass(frozen=True, eq=False)
class Batch:
    """Block-diagonal merge of several graphs.

    ``graph_of_node[i]`` is the source graph of merged node ``i``;
    ``offsets[k]:offsets[k+1]`` is the node range of graph ``k``.
    """

    merged: Graph
    graph_of_node: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray

    @property
    def num_graphs(self):
        return len(self.labels)

    @property
    def sizes(self):
        return np.diff(self.offsets)


def batch_graphs(graphs):
    """Merge graphs into one block-diagonal graph, preserving node order."""
    graphs = list(graphs)
    if not graphs:
        raise DimensionError("cannot batch an empty list of graphs")
    d = graphs[0].d
    for k, g in enumerate(graphs):
        if g.d != d:
            raise DimensionError(f"graph {k} has feature width {g.d}, expected {d}")
    sizes = np.array([g.n for g in graphs], dtype=np.int64)
    offsets = np.zeros(len(graphs) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    nnz = np.array([g.num_stored_edges for g in graphs], dtype=np.int64)
    nnz_off = np.concatenate([[0], np.cumsum(nnz)])
    indptr = np.concatenate([[0]] + [g.indptr[1:] + nnz_off[k] for k, g in enumerate(graphs)])
    indices = np.concatenate([g.indices + offsets[k] for k, g in enumerate(graphs)])
    weights = np.concatenate([g.weights for g in graphs])
    features = np.concatenate([g.features for g in graphs], axis=0)
    merged = Graph(int(offsets[-1]), indptr, indices, weights, features, graphs[0].label)
    gon = _readonly(np.repeat(np.arange(len(graphs)), sizes))
    labels = _readonly(np.array([g.label for g in graphs], dtype=np.int64))
    return Batch(merged, gon, labels, _readonly(offsets))


def permute_graph(g, perm):
    """Relabel nodes so that output node ``m`` is input node ``perm[m]``."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (g.n,) or not np.array_equal(np.sort(perm), np.arange(g.n)):
        raise GraphConstructionError("perm must be a bijection on 0..n-1")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.n)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    return _from_coo(g.n, inv[rows], inv[g.indices], g.weights, g.features[perm], g.label)
