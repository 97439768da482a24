"""TU-format datasets, feature synthesis, stratified splits, synthetic data."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from bankgcn.checkpoint import atomic_write
from bankgcn.errors import ParseError, SplitError
from bankgcn.graph import build_graph, dense_laplacian

logger = logging.getLogger(__name__)

ONEHOT = "categorical-onehot"
ATTRIBUTES = "attributes"
ONEHOT_ATTRIBUTES = "categorical+attributes"
STRUCTURAL = "structural-synthetic"


@dataclass(eq=False)
class Dataset:
    """Graphs with contiguous labels ``0..num_classes-1`` and equal feature width.

    ``metadata`` records what is needed to rebuild features consistently:
    ``class_values`` (original graph labels in sorted order),
    ``node_label_values``, ``attribute_columns`` ``(start, stop)``, and
    ``max_degree`` for structural features.
    """

    graphs: list
    name: str
    num_classes: int
    feature_kind: str
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.graphs)

    @property
    def feature_width(self):
        return self.graphs[0].d if self.graphs else 0

    @property
    def labels(self):
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def subset(self, indices):
        return [self.graphs[i] for i in indices]

    def statistics(self):
        """Counts and means in the form reported for TU benchmarks."""
        nodes = np.array([g.n for g in self.graphs], dtype=np.float64)
        edges = np.array([g.num_undirected_edges() for g in self.graphs], dtype=np.float64)
        return {
            "name": self.name,
            "num_graphs": len(self.graphs),
            "num_classes": self.num_classes,
            "avg_nodes": float(nodes.mean()),
            "avg_edges": float(edges.mean()),
            "feature_kind": self.feature_kind,
            "feature_width": self.feature_width,
        }

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.num_classes == other.num_classes
            and self.feature_kind == other.feature_kind
            and len(self.graphs) == len(other.graphs)
            and all(a == b for a, b in zip(self.graphs, other.graphs))
        )

    __hash__ = None


def _read_lines(path, mandatory=True):
    if not os.path.exists(path):
        if mandatory:
            raise ParseError("required file is missing", path)
        return None
    with open(path) as fh:
        lines = fh.read().split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _parse_ints(path, lines, per_line):
    out = np.empty((len(lines), per_line), dtype=np.int64)
    for k, line in enumerate(lines):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != per_line:
            raise ParseError(f"expected {per_line} comma-separated integer(s), got {line!r}", path, k + 1)
        try:
            out[k] = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"not an integer: {line!r}", path, k + 1) from None
    return out


def _parse_floats(path, lines):
    rows, width = [], None
    for k, line in enumerate(lines):
        parts = [p.strip() for p in line.split(",")]
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ParseError(f"ragged attribute row: {len(parts)} values, expected {width}", path, k + 1)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"not a real number in {line!r}", path, k + 1) from None
    return np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)


def parse_tu_dataset(directory, name, structural_max_degree=None):
    """Read ``{name}_A.txt``, ``_graph_indicator.txt``, ``_graph_labels.txt``
    and the optional ``_node_labels.txt`` / ``_node_attributes.txt``.

    Node ids in ``_A.txt`` are 1-based and global. Both directions of an
    edge collapse into one undirected unit-weight edge; a direction listed
    twice is a benign duplicate and is dropped with a warning. Categorical
    node labels become one-hot vectors over the dataset-wide alphabet,
    followed by the attributes when both exist. Without either, node degree
    one-hot plus clustering coefficient is synthesized.
    """
    prefix = os.path.join(directory, name)
    path_a = f"{prefix}_A.txt"
    path_gi = f"{prefix}_graph_indicator.txt"
    path_gl = f"{prefix}_graph_labels.txt"
    path_nl = f"{prefix}_node_labels.txt"
    path_na = f"{prefix}_node_attributes.txt"
    lines_a = _read_lines(path_a)
    lines_gi = _read_lines(path_gi)
    lines_gl = _read_lines(path_gl)
    lines_nl = _read_lines(path_nl, mandatory=False)
    lines_na = _read_lines(path_na, mandatory=False)
    for suffix in ("edge_labels", "edge_attributes"):
        if os.path.exists(f"{prefix}_{suffix}.txt"):
            logger.warning("%s: ignoring %s", name, suffix.replace("_", " "))

    graph_of = _parse_ints(path_gi, lines_gi, 1)[:, 0]
    graph_labels = _parse_ints(path_gl, lines_gl, 1)[:, 0]
    num_nodes = len(graph_of)
    num_graphs = len(graph_labels)
    if num_nodes == 0 or num_graphs == 0:
        raise ParseError("dataset has no nodes or no graphs", path_gi)
    if np.any(graph_of < 1) or np.any(graph_of > num_graphs):
        k = int(np.flatnonzero((graph_of < 1) | (graph_of > num_graphs))[0])
        raise ParseError(f"graph id {graph_of[k]} outside 1..{num_graphs}", path_gi, k + 1)
    if np.any(np.diff(graph_of) < 0):
        k = int(np.flatnonzero(np.diff(graph_of) < 0)[0]) + 1
        raise ParseError("graph ids must be non-decreasing over node lines", path_gi, k + 1)
    sizes = np.bincount(graph_of - 1, minlength=num_graphs)
    if np.any(sizes == 0):
        raise ParseError(f"graph {int(np.flatnonzero(sizes == 0)[0]) + 1} has no nodes", path_gi)
    first_node = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    edges = _parse_ints(path_a, lines_a, 2) if lines_a else np.zeros((0, 2), dtype=np.int64)
    bad = (edges < 1) | (edges > num_nodes)
    if np.any(bad):
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ParseError(f"node id out of range 1..{num_nodes}", path_a, k + 1)
    e0 = edges - 1
    g_src = graph_of[e0[:, 0]]
    g_dst = graph_of[e0[:, 1]]
    if np.any(g_src != g_dst):
        k = int(np.flatnonzero(g_src != g_dst)[0])
        raise ParseError(
            f"edge joins node {edges[k, 0]} (graph {g_src[k]}) and node {edges[k, 1]} (graph {g_dst[k]})",
            path_a,
            k + 1,
        )
    directed = e0[:, 0] * num_nodes + e0[:, 1]
    _, counts = np.unique(directed, return_counts=True)
    if np.any(counts > 1):
        logger.warning("%s: %d repeated edge directions coalesced", name, int((counts - 1).sum()))
    lo = np.minimum(e0[:, 0], e0[:, 1])
    hi = np.maximum(e0[:, 0], e0[:, 1])
    und = np.unique(lo * num_nodes + hi)
    und_lo, und_hi = und // num_nodes, und % num_nodes

    blocks, kinds, meta = [], [], {}
    if lines_nl is not None:
        if len(lines_nl) != num_nodes:
            raise ParseError(f"{len(lines_nl)} node labels for {num_nodes} nodes", path_nl)
        node_labels = _parse_ints(path_nl, lines_nl, 1)[:, 0]
        alphabet, codes = np.unique(node_labels, return_inverse=True)
        blocks.append(np.eye(len(alphabet))[codes.ravel()])
        kinds.append("L")
        meta["node_label_values"] = [int(v) for v in alphabet]
    if lines_na is not None:
        if len(lines_na) != num_nodes:
            raise ParseError(f"{len(lines_na)} attribute rows for {num_nodes} nodes", path_na)
        attrs = _parse_floats(path_na, lines_na)
        start = sum(b.shape[1] for b in blocks)
        meta["attribute_columns"] = (start, start + attrs.shape[1])
        blocks.append(attrs)
        kinds.append("A")

    class_values, class_idx = np.unique(graph_labels, return_inverse=True)
    meta["class_values"] = [int(v) for v in class_values]
    edge_owner = graph_of[und_lo] - 1
    order = np.argsort(edge_owner, kind="stable")
    edge_ptr = np.concatenate([[0], np.cumsum(np.bincount(edge_owner, minlength=num_graphs))])
    und_lo, und_hi = und_lo[order], und_hi[order]
    features = np.concatenate(blocks, axis=1) if blocks else None

    graphs = []
    for gi in range(num_graphs):
        base, n = first_node[gi], sizes[gi]
        sl = slice(edge_ptr[gi], edge_ptr[gi + 1])
        elist = [(int(a - base), int(b - base), 1.0) for a, b in zip(und_lo[sl], und_hi[sl])]
        x = features[base : base + n] if features is not None else np.zeros((n, 0))
        graphs.append(build_graph(int(n), elist, x, int(class_idx[gi])))

    if not kinds:
        kind = STRUCTURAL
        max_deg = structural_max_degree
        if max_deg is None:
            max_deg = max(int(np.max(np.diff(g.indptr))) for g in graphs)
        meta["max_degree"] = int(max_deg)
        graphs = [g.with_features(synthesize_structural_features(g, max_deg)) for g in graphs]
    else:
        kind = {("L",): ONEHOT, ("A",): ATTRIBUTES, ("L", "A"): ONEHOT_ATTRIBUTES}[tuple(kinds)]
    return Dataset(graphs, name, len(class_values), kind, meta)


def _fmt(x):
    return repr(float(x))


def write_tu_dataset(ds, directory, name=None):
    """Serialize to TU text files; inverse of ``parse_tu_dataset``."""
    name = name or ds.name
    os.makedirs(directory, exist_ok=True)
    prefix = os.path.join(directory, name)
    a_lines, gi_lines, nl_lines, na_lines = [], [], [], []
    class_values = ds.metadata.get("class_values", list(range(ds.num_classes)))
    label_values = ds.metadata.get("node_label_values")
    attr_cols = ds.metadata.get("attribute_columns")
    base = 0
    for gi, g in enumerate(ds.graphs):
        rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
        for r, c in zip(rows, g.indices):
            a_lines.append(f"{r + base + 1}, {c + base + 1}")
        gi_lines += [str(gi + 1)] * g.n
        if ds.feature_kind in (ONEHOT, ONEHOT_ATTRIBUTES):
            width = len(label_values)
            codes = np.argmax(g.features[:, :width], axis=1)
            nl_lines += [str(label_values[k]) for k in codes]
        if ds.feature_kind in (ATTRIBUTES, ONEHOT_ATTRIBUTES):
            start, stop = attr_cols
            na_lines += [", ".join(_fmt(v) for v in row) for row in g.features[:, start:stop]]
        base += g.n
    gl_lines = [str(class_values[g.label]) for g in ds.graphs]

    def dump(suffix, lines):
        atomic_write(f"{prefix}_{suffix}.txt", "\n".join(lines) + ("\n" if lines else ""))

    dump("A", a_lines)
    dump("graph_indicator", gi_lines)
    dump("graph_labels", gl_lines)
    if nl_lines:
        dump("node_labels", nl_lines)
    if na_lines:
        dump("node_attributes", na_lines)
    return prefix


def normalize_attributes(ds):
    """Min-max scale each attribute column to [0, 1] over the whole dataset.

    Constant columns become 0. Categorical one-hot columns are untouched.
    """
    cols = ds.metadata.get("attribute_columns")
    if cols is None:
        if ds.feature_kind == ATTRIBUTES:
            cols = (0, ds.feature_width)
        else:
            return ds
    start, stop = cols
    stacked = np.concatenate([g.features[:, start:stop] for g in ds.graphs], axis=0)
    lo = stacked.min(axis=0)
    span = stacked.max(axis=0) - lo
    scale = np.where(span > 0, span, 1.0)
    graphs = []
    for g in ds.graphs:
        x = g.features.copy()
        block = (x[:, start:stop] - lo) / scale
        x[:, start:stop] = np.where(span > 0, block, 0.0)
        graphs.append(g.with_features(x))
    return replace(ds, graphs=graphs, metadata=dict(ds.metadata, attribute_columns=cols))


def synthesize_structural_features(g, max_degree):
    """Per node: one-hot degree (capped at ``max_degree``) and clustering coefficient."""
    A = (g.dense_adjacency() > 0).astype(np.float64)
    np.fill_diagonal(A, 0.0)
    deg = A.sum(axis=1).astype(np.int64)
    triangles = np.einsum("ij,jk,ki->i", A, A, A) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        clustering = np.where(deg >= 2, 2.0 * triangles / (deg * (deg - 1.0)), 0.0)
    onehot = np.zeros((g.n, max_degree + 1))
    onehot[np.arange(g.n), np.minimum(deg, max_degree)] = 1.0
    return np.concatenate([onehot, clustering[:, None]], axis=1)


@dataclass(frozen=True)
class SplitIndices:
    train: list
    val: list
    test: list


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stratified_split(labels, ratios=(0.8, 0.1, 0.1), seed=0):
    """Seeded per-class shuffle and 8:1:1-style allocation.

    Global split sizes are ``round(r_train N)``, ``round(r_val N)`` and the
    remainder. Each class contributes floor or ceil of its ideal share to
    every split; the leftover units of a class go to the splits currently
    furthest behind their global target, so class proportions stay within
    one graph of the global ones.
    """
    labels = np.asarray(labels)
    N = len(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts < 3):
        bad = classes[counts < 3][0]
        raise SplitError(f"class {bad} has fewer than 3 members")
    ratios = np.asarray(ratios, dtype=np.float64)
    ratios = ratios / ratios.sum()
    rng = np.random.default_rng(seed)
    out = [[], [], []]
    assigned = np.zeros(3)
    seen = 0
    for cls, n_c in zip(classes, counts):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        ideal = ratios * n_c
        alloc = np.floor(ideal + 1e-12).astype(np.int64)
        frac = ideal - alloc
        seen += n_c
        deficit = ratios * seen - (assigned + alloc)
        for _ in range(int(n_c - alloc.sum())):
            cand = [k for k in range(3) if frac[k] > 1e-12]
            k = max(cand, key=lambda j: (round(deficit[j], 9), -j))
            alloc[k] += 1
            deficit[k] -= 1
            frac[k] = 0.0
        assigned += alloc
        cut1, cut2 = alloc[0], alloc[0] + alloc[1]
        out[0] += members[:cut1].tolist()
        out[1] += members[cut1:cut2].tolist()
        out[2] += members[cut2:].tolist()
    targets = (_round_half_up(ratios[0] * N), _round_half_up(ratios[1] * N))
    if (len(out[0]), len(out[1])) != targets:
        logger.debug("split sizes %s differ from rounded targets %s", [len(o) for o in out], targets)
    return SplitIndices(sorted(out[0]), sorted(out[1]), sorted(out[2]))


def random_connected_graph(n, rng, edge_prob=0.25):
    """Random spanning tree plus independent extra edges."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        a, b = int(order[k]), int(parent)
        edges.add((min(a, b), max(a, b)))
    iu, ju = np.triu_indices(n, k=1)
    extra = rng.random(len(iu)) < edge_prob
    edges.update(zip(iu[extra].tolist(), ju[extra].tolist()))
    return sorted(edges)


def synthetic_spectral_dataset(n_graphs, nodes_per_graph, seed=0, channels=4, noise=0.05, edge_prob=0.25):
    """Two-class frequency-separation benchmark.

    Class 0 signals are random combinations of the 3 lowest-frequency
    Laplacian eigenvectors, class 1 of the 3 highest. Each channel is
    scaled to unit mean energy per node, then Gaussian noise is added.
    """
    if nodes_per_graph < 8:
        raise ValueError("nodes_per_graph must be at least 8")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_graphs) % 2
    rng.shuffle(labels)
    graphs = []
    n = nodes_per_graph
    for label in labels:
        elist = random_connected_graph(n, rng, edge_prob)
        g = build_graph(n, [(a, b, 1.0) for a, b in elist], np.zeros((n, channels)), int(label))
        _, U = np.linalg.eigh(dense_laplacian(g))
        basis = U[:, :3] if label == 0 else U[:, -3:]
        x = basis @ rng.standard_normal((3, channels))
        x *= np.sqrt(n / np.sum(x * x, axis=0))
        x += noise * rng.standard_normal(x.shape)
        graphs.append(g.with_features(x))
    meta = {"class_values": [0, 1], "seed": seed, "channels": channels}
    return Dataset(graphs, "SYNTHETIC", 2, ATTRIBUTES, meta | {"attribute_columns": (0, channels)})
