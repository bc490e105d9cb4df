"""Immutable undirected graph container and label-homophily statistics.

Provides
--------
Graph           frozen CSR graph with dense features and integer labels
SplitMasks      disjoint train/val/test node-index sets
build_graph     validate + canonicalize an edge list into a Graph
node_homophily  fraction of a node's neighbors sharing its label
graph_homophily mean node homophily over non-isolated nodes
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "SplitMasks",
    "build_graph",
    "node_homophily",
    "node_homophily_vector",
    "graph_homophily",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form.

    The adjacency is symmetric, deduplicated, and self-loop free.
    ``features`` is a dense (num_nodes, num_features) float64 matrix and
    ``labels[v]`` is a class index below ``num_classes``. Arrays are marked
    read-only at construction; build new graphs instead of mutating.
    """

    num_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    @property
    def num_edges(self) -> int:
        """Undirected edge count (half the stored directed arcs)."""
        return self.csr_targets.shape[0] // 2

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.csr_targets[self.csr_offsets[v] : self.csr_offsets[v + 1]]


@dataclass(frozen=True)
class SplitMasks:
    """Sorted, pairwise-disjoint node index arrays for train/val/test."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            raw = np.asarray(getattr(self, name))
            if arr.size != raw.size:
                raise ValueError(f"{name} mask contains duplicate node indices")
            if arr.size and arr.min() < 0:
                raise ValueError(f"{name} mask contains negative node indices")
            object.__setattr__(self, name, _frozen(arr))
        n_union = np.union1d(np.union1d(self.train, self.val), self.test).size
        if n_union != self.train.size + self.val.size + self.test.size:
            raise ValueError("split masks overlap")

    def mask(self, which: str) -> np.ndarray:
        if which not in ("train", "val", "test"):
            raise ValueError(f"unknown split {which!r}")
        return getattr(self, which)


def build_graph(edges, features, labels, num_classes: int | None = None) -> Graph:
    """Build a canonical Graph from an edge list.

    Parameters
    ----------
    edges : array-like of shape (E, 2)
        Integer endpoint pairs. Direction is ignored; duplicates and
        self-loops are dropped.
    features : array-like of shape (N, d)
        Dense real feature rows, one per node.
    labels : array-like of shape (N,)
        Integer class per node.
    num_classes : int, optional
        Total class count; inferred as max(labels)+1 when omitted.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D (num_nodes, d) matrix")
    if not np.isfinite(features).all():
        raise ValueError("features contain non-finite values")
    n = features.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(
            f"labels shape {labels.shape} does not match {n} feature rows"
        )
    if num_classes is None:
        if n == 0:
            raise ValueError("cannot infer num_classes from an empty graph")
        num_classes = int(labels.max()) + 1
    num_classes = int(num_classes)
    if num_classes < 2:
        raise ValueError("graphs need at least 2 classes")
    if n and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("labels must lie in [0, num_classes)")

    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError("edges must have shape (E, 2)")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")

    # Symmetrize, drop self-loops, dedup. unique() also sorts rows, which
    # yields sorted neighbor lists per node.
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    keep = src != dst
    pairs = np.unique(np.stack([src[keep], dst[keep]], axis=1), axis=0)

    counts = np.bincount(pairs[:, 0], minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    targets = np.ascontiguousarray(pairs[:, 1])

    return Graph(
        num_nodes=n,
        csr_offsets=_frozen(offsets),
        csr_targets=_frozen(targets),
        features=_frozen(features),
        labels=_frozen(labels),
        num_classes=num_classes,
    )


def node_homophily(g: Graph, v: int) -> float:
    """Fraction of ``v``'s neighbors sharing its label; 1.0 for isolated nodes."""
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range for {g.num_nodes} nodes")
    nbr = g.neighbors(v)
    if nbr.size == 0:
        return 1.0
    return float(np.mean(g.labels[nbr] == g.labels[v]))


def node_homophily_vector(g: Graph) -> np.ndarray:
    """node_homophily for every node at once (isolated nodes get 1.0)."""
    deg = g.degrees()
    same = (g.labels[g.csr_targets] == np.repeat(g.labels, deg)).astype(np.float64)
    sums = np.zeros(g.num_nodes)
    np.add.at(sums, np.repeat(np.arange(g.num_nodes), deg), same)
    out = np.ones(g.num_nodes)
    active = deg > 0
    out[active] = sums[active] / deg[active]
    return out


def graph_homophily(g: Graph) -> float:
    """Mean node homophily over nodes with at least one neighbor."""
    deg = g.degrees()
    active = deg > 0
    if not active.any():
        raise ValueError("graph_homophily is undefined on an edgeless graph")
    return float(node_homophily_vector(g)[active].mean())
