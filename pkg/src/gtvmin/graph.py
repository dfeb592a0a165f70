"""Weighted undirected similarity graphs.

Nodes stand for data generators; a positive edge weight quantifies how
statistically similar two generators are believed to be. This module holds
the graph container, its Laplacian and spectral quantities, cluster
boundaries, and two graph constructors (a planted-cluster random model and
a k-nearest-neighbor graph built from vector embeddings of the local
datasets).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "DISCONNECTION_RTOL",
    "SimilarityGraph",
    "ClusterSpec",
    "Embedding",
    "GraphParams",
    "laplacian",
    "lambda2",
    "is_disconnected",
    "induced_subgraph",
    "cluster_boundary",
    "generate_planted_clusters",
    "graph_from_embedding",
    "write_graph",
    "read_graph",
]

# lambda2 below this fraction of the largest weighted degree is treated as
# zero, i.e. the graph counts as disconnected. Downstream bound reports flag
# this instead of dividing by a numerically meaningless eigenvalue.
DISCONNECTION_RTOL = 1e-9


class SimilarityGraph:
    """Undirected weighted graph on nodes ``0..n-1``.

    Edges are canonicalized to ``(min(i, j), max(i, j))``; self-loops,
    duplicate pairs and non-positive weights are rejected. Instances are
    immutable after construction and safe to share across threads.
    """

    __slots__ = ("_n", "_edges")

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]] = ()):
        n = int(n)
        if n < 1:
            raise ValueError(f"node count must be >= 1, got {n}")
        canon: dict[tuple[int, int], float] = {}
        for i, j, w in edges:
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if not np.isfinite(w) or w <= 0.0:
                raise ValueError(f"edge ({i}, {j}) needs a positive finite weight, got {w}")
            key = (i, j) if i < j else (j, i)
            if key in canon:
                raise ValueError(f"duplicate edge {key}")
            canon[key] = w
        self._n = n
        self._edges = canon

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> Mapping[tuple[int, int], float]:
        """Read-only edge map ``{(i, j): weight}`` with ``i < j``."""
        return MappingProxyType(self._edges)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Endpoints and weights as parallel arrays in canonical sorted order."""
        if not self._edges:
            empty_i = np.zeros(0, dtype=int)
            return empty_i, empty_i.copy(), np.zeros(0)
        items = sorted(self._edges.items())
        ii = np.array([k[0] for k, _ in items], dtype=int)
        jj = np.array([k[1] for k, _ in items], dtype=int)
        ww = np.array([w for _, w in items], dtype=float)
        return ii, jj, ww

    def adjacency(self) -> np.ndarray:
        """Dense symmetric weight matrix with zero diagonal."""
        a = np.zeros((self._n, self._n))
        for (i, j), w in self._edges.items():
            a[i, j] = w
            a[j, i] = w
        return a

    def weighted_degrees(self) -> np.ndarray:
        deg = np.zeros(self._n)
        for (i, j), w in self._edges.items():
            deg[i] += w
            deg[j] += w
        return deg

    def total_weight(self) -> float:
        return float(sum(self._edges.values()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimilarityGraph):
            return NotImplemented
        return self._n == other._n and self._edges == other._edges

    def __hash__(self):
        return hash((self._n, tuple(sorted(self._edges.items()))))

    def __repr__(self) -> str:
        return f"SimilarityGraph(n={self._n}, edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class ClusterSpec:
    """A node subset believed to share one parameter vector.

    ``reference_params`` (the shared vector) and ``epsilon`` (the total loss
    that vector incurs over the cluster) stay ``None`` until a scenario
    supplies them; graph-level operations only need ``members``.
    """

    members: tuple[int, ...]
    reference_params: np.ndarray | None = None
    epsilon: float | None = None

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        if not members:
            raise ValueError("cluster must have at least one member")
        if any(i < 0 for i in members):
            raise ValueError("cluster members must be non-negative node indices")
        if len(set(members)) != len(members):
            raise ValueError("cluster members must be distinct")
        object.__setattr__(self, "members", members)
        if self.reference_params is not None:
            ref = np.asarray(self.reference_params, dtype=float)
            if ref.ndim != 1 or not np.all(np.isfinite(ref)):
                raise ValueError("reference_params must be a finite 1-d vector")
            object.__setattr__(self, "reference_params", ref)
        if self.epsilon is not None:
            eps = float(self.epsilon)
            if not np.isfinite(eps) or eps < 0.0:
                raise ValueError(f"epsilon must be finite and >= 0, got {eps}")
            object.__setattr__(self, "epsilon", eps)

    @property
    def size(self) -> int:
        return len(self.members)

    def check_against(self, n: int) -> None:
        """Validate that every member index exists in a graph with n nodes."""
        if any(i >= n for i in self.members):
            raise ValueError(f"cluster members {self.members} exceed node count {n}")


@dataclass(frozen=True, eq=False)
class Embedding:
    """One real vector per node, all of a common dimension."""

    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] < 1 or vecs.shape[1] < 1:
            raise ValueError("embedding must be a 2-d array (one row per node)")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("embedding vectors must be finite")
        object.__setattr__(self, "vectors", vecs)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class GraphParams:
    """Parameters of the planted-cluster random graph model."""

    p_in: float = 0.9
    p_out: float = 0.1
    w_in: float = 1.0
    w_out: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.p_out <= self.p_in <= 1.0):
            raise ValueError(
                f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}"
            )
        if self.w_in <= 0.0 or self.w_out <= 0.0:
            raise ValueError("edge weights must be positive")


def laplacian(graph: SimilarityGraph) -> np.ndarray:
    """Dense graph Laplacian: weighted degrees on the diagonal, minus the
    adjacency off it. Symmetric, positive semidefinite, zero row sums."""
    a = graph.adjacency()
    return np.diag(a.sum(axis=1)) - a


def lambda2(graph: SimilarityGraph) -> float:
    """Second-smallest Laplacian eigenvalue (algebraic connectivity).

    Computed with a dense symmetric eigensolver; tiny negative values from
    roundoff are clipped to zero. Zero (up to roundoff) iff the graph is
    disconnected. Requires at least two nodes.
    """
    if graph.n < 2:
        raise ValueError("lambda2 needs a graph with at least 2 nodes")
    vals = np.linalg.eigvalsh(laplacian(graph))
    return float(max(vals[1], 0.0))


def is_disconnected(graph: SimilarityGraph) -> bool:
    """Whether the graph splits into more than one component.

    Uses the spectral test ``lambda2 < DISCONNECTION_RTOL * max_degree``
    so that numerically-zero eigenvalues of barely-coupled graphs are
    classified as disconnected rather than fed into bound denominators.
    """
    if graph.n < 2:
        return False
    dmax = float(graph.weighted_degrees().max())
    if dmax == 0.0:
        return True
    return lambda2(graph) < DISCONNECTION_RTOL * dmax


def induced_subgraph(graph: SimilarityGraph, cluster: ClusterSpec) -> SimilarityGraph:
    """Subgraph on the cluster nodes, re-indexed ``0..|C|-1`` in member
    order, keeping exactly the edges with both endpoints in the cluster."""
    cluster.check_against(graph.n)
    pos = {node: idx for idx, node in enumerate(cluster.members)}
    sub_edges = [
        (pos[i], pos[j], w)
        for (i, j), w in sorted(graph.edges.items())
        if i in pos and j in pos
    ]
    return SimilarityGraph(len(cluster.members), sub_edges)


def cluster_boundary(graph: SimilarityGraph, cluster: ClusterSpec) -> float:
    """Total weight of edges with exactly one endpoint in the cluster.

    For a singleton cluster this is the node's weighted degree.
    """
    cluster.check_against(graph.n)
    inside = set(cluster.members)
    return float(
        sum(w for (i, j), w in graph.edges.items() if (i in inside) != (j in inside))
    )


def generate_planted_clusters(
    rng_seed: int,
    cluster_sizes: Sequence[int],
    p_in: float = 0.9,
    p_out: float = 0.1,
    w_in: float = 1.0,
    w_out: float = 1.0,
) -> tuple[SimilarityGraph, list[ClusterSpec]]:
    """Random graph with consecutive planted clusters.

    Each intra-cluster pair is independently connected with probability
    ``p_in`` and weight ``w_in``; pairs from different clusters with
    probability ``p_out`` and weight ``w_out``. Deterministic for a fixed
    seed. Returns the graph together with one ClusterSpec per block
    (reference parameters and epsilon left unset).
    """
    params = GraphParams(p_in=p_in, p_out=p_out, w_in=w_in, w_out=w_out)
    sizes = [int(s) for s in cluster_sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"cluster sizes must be positive, got {cluster_sizes}")
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)

    rng = np.random.default_rng(rng_seed)
    ii, jj = np.triu_indices(n, k=1)
    u = rng.random(ii.size)
    same = labels[ii] == labels[jj]
    prob = np.where(same, params.p_in, params.p_out)
    weight = np.where(same, params.w_in, params.w_out)
    keep = u < prob
    edges = list(zip(ii[keep].tolist(), jj[keep].tolist(), weight[keep].tolist()))
    graph = SimilarityGraph(n, edges)

    clusters = []
    start = 0
    for size in sizes:
        clusters.append(ClusterSpec(members=tuple(range(start, start + size))))
        start += size
    return graph, clusters


def graph_from_embedding(emb: Embedding, k: int, sigma: float) -> SimilarityGraph:
    """Symmetric k-nearest-neighbor graph with Gaussian edge weights.

    Node i links to its k closest nodes in Euclidean distance; an edge is
    kept if either endpoint selects the other (union rule, which guarantees
    minimum degree k). Edge weight is ``exp(-dist^2 / sigma^2)``.
    """
    k = int(k)
    n = emb.n
    if not (1 <= k < n):
        raise ValueError(f"neighbor count must satisfy 1 <= k < n, got k={k}, n={n}")
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0.0:
        raise ValueError(f"sigma must be positive and finite, got {sigma}")

    sq_dist = cdist(emb.vectors, emb.vectors, metric="sqeuclidean")
    np.fill_diagonal(sq_dist, np.inf)
    pairs: set[tuple[int, int]] = set()
    for i in range(n):
        # stable sort: ties resolved toward the smaller index, deterministically
        nearest = np.argsort(sq_dist[i], kind="stable")[:k]
        for j in nearest:
            j = int(j)
            pairs.add((i, j) if i < j else (j, i))
    edges = [(i, j, float(np.exp(-sq_dist[i, j] / sigma**2))) for i, j in sorted(pairs)]
    return SimilarityGraph(n, edges)


def write_graph(graph: SimilarityGraph, path: str | Path) -> None:
    """Write the line-oriented text format: first line ``n``, then one
    ``i j weight`` line per edge in canonical sorted order."""
    lines = [f"{graph.n}\n"]
    for (i, j), w in sorted(graph.edges.items()):
        lines.append(f"{i} {j} {w:.17g}\n")
    Path(path).write_text("".join(lines), encoding="ascii")


def read_graph(path: str | Path) -> SimilarityGraph:
    """Parse the text format written by :func:`write_graph`.

    Rejects self-loops, duplicate pairs, non-positive weights and
    out-of-range indices.
    """
    path = Path(path)
    text = path.read_text(encoding="ascii")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"{path}: first line must be the node count") from None
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i j weight', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed edge line {line!r}") from None
    try:
        return SimilarityGraph(n, edges)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
