"""Local datasets, quadratic losses, and synthetic clustered scenarios.

A scenario bundles one linear-regression dataset per node with a similarity
graph whose planted clusters match the data: all nodes of a cluster share
one true parameter vector, and labels are that cluster model's predictions
plus Gaussian noise. The noise energy is recorded per cluster so the
cluster deviation bound can be evaluated with the tightest admissible
clustering error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import (
    ClusterSpec,
    GraphParams,
    SimilarityGraph,
    generate_planted_clusters,
    read_graph,
    write_graph,
)

__all__ = [
    "LocalDataset",
    "Scenario",
    "quadratic_loss",
    "quadratic_loss_gradient",
    "generate_scenario",
    "clustering_error",
    "save_scenario",
    "load_scenario",
]

_CENTER_RETRIES = 1000


@dataclass(frozen=True, eq=False)
class LocalDataset:
    """Feature matrix (m x d) and label vector (length m) of one node."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-d matrix")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("labels must be 1-d with one entry per feature row")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def quadratic_loss(ds: LocalDataset, w: np.ndarray) -> float:
    """Mean squared residual (1/m) * ||y - X w||^2. Zero at an exact fit."""
    w = np.asarray(w, dtype=float)
    if w.shape != (ds.dim,):
        raise ValueError(f"parameter vector must have shape ({ds.dim},), got {w.shape}")
    r = ds.labels - ds.features @ w
    return float(r @ r) / ds.num_samples


def quadratic_loss_gradient(ds: LocalDataset, w: np.ndarray) -> np.ndarray:
    """Gradient (2/m) * X^T (X w - y) of :func:`quadratic_loss`."""
    w = np.asarray(w, dtype=float)
    if w.shape != (ds.dim,):
        raise ValueError(f"parameter vector must have shape ({ds.dim},), got {w.shape}")
    return (2.0 / ds.num_samples) * (ds.features.T @ (ds.features @ w - ds.labels))


@dataclass(eq=False)
class Scenario:
    """One dataset per graph node plus the clusters that generated them."""

    datasets: list[LocalDataset]
    graph: SimilarityGraph
    clusters: list[ClusterSpec]
    d: int
    rng_seed: int | None = None
    generator: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.datasets) != self.graph.n:
            raise ValueError(
                f"{len(self.datasets)} datasets for a graph with {self.graph.n} nodes"
            )
        if any(ds.dim != self.d for ds in self.datasets):
            raise ValueError("all datasets must share the scenario dimension")
        covered = set()
        for cluster in self.clusters:
            cluster.check_against(self.graph.n)
            covered.update(cluster.members)
        if covered != set(range(self.graph.n)):
            raise ValueError("every node must belong to at least one cluster")

    @property
    def n(self) -> int:
        return self.graph.n


def _draw_separated_centers(rng, k: int, d: int, separation: float) -> np.ndarray:
    """Cluster centers on a sphere of radius separation/2 * sqrt(d), redrawn
    until all pairwise distances reach the separation (bounded retries)."""
    radius = 0.5 * separation * np.sqrt(d)
    # tiny relative slack so the exactly-antipodal d=1 case survives roundoff
    min_dist = separation * (1.0 - 1e-12)
    for _ in range(_CENTER_RETRIES):
        raw = rng.standard_normal((k, d))
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms == 0.0):
            continue
        centers = radius * raw / norms[:, None]
        if k == 1:
            return centers
        ok = all(
            np.linalg.norm(centers[a] - centers[b]) >= min_dist
            for a in range(k)
            for b in range(a + 1, k)
        )
        if ok:
            return centers
    raise ValueError(
        f"could not place {k} cluster centers at separation {separation} in "
        f"dimension {d} after {_CENTER_RETRIES} attempts"
    )


def generate_scenario(
    rng_seed: int,
    cluster_sizes: Sequence[int],
    d: int,
    m_per_node: int,
    noise_std: float,
    separation: float,
    graph_params: GraphParams | None = None,
) -> Scenario:
    """Synthesize a clustered linear-regression scenario.

    Per cluster a reference vector is drawn (pairwise separated), then each
    node gets i.i.d. standard-normal features and labels equal to the
    cluster model's predictions plus Gaussian noise of standard deviation
    ``noise_std``. The recorded per-cluster epsilon is the exact noise
    energy sum_{i in C} (1/m_i) ||noise_i||^2, so the clustering assumption
    holds with equality. The graph comes from the planted-cluster model.
    Pure function of its arguments: same inputs give bit-identical output.
    """
    sizes = [int(s) for s in cluster_sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"cluster sizes must be positive, got {cluster_sizes}")
    d = int(d)
    m_per_node = int(m_per_node)
    if d < 1 or m_per_node < 1:
        raise ValueError("d and m_per_node must be >= 1")
    noise_std = float(noise_std)
    if noise_std < 0.0 or not np.isfinite(noise_std):
        raise ValueError(f"noise_std must be finite and >= 0, got {noise_std}")
    separation = float(separation)
    if separation <= 0.0 or not np.isfinite(separation):
        raise ValueError(f"separation must be positive, got {separation}")
    params = graph_params or GraphParams()

    rng = np.random.default_rng(rng_seed)
    graph_seed = int(rng.integers(0, 2**63 - 1))
    graph, bare_clusters = generate_planted_clusters(
        graph_seed, sizes, params.p_in, params.p_out, params.w_in, params.w_out
    )
    centers = _draw_separated_centers(rng, len(sizes), d, separation)

    datasets: list[LocalDataset] = []
    clusters: list[ClusterSpec] = []
    for cluster, center in zip(bare_clusters, centers):
        epsilon = 0.0
        for _node in cluster.members:
            x = rng.standard_normal((m_per_node, d))
            noise = rng.normal(0.0, noise_std, m_per_node)
            y = x @ center + noise
            datasets.append(LocalDataset(features=x, labels=y))
            epsilon += float(noise @ noise) / m_per_node
        clusters.append(
            ClusterSpec(members=cluster.members, reference_params=center, epsilon=epsilon)
        )

    generator = {
        "cluster_sizes": sizes,
        "m_per_node": m_per_node,
        "noise_std": noise_std,
        "separation": separation,
        "p_in": params.p_in,
        "p_out": params.p_out,
        "w_in": params.w_in,
        "w_out": params.w_out,
    }
    return Scenario(
        datasets=datasets,
        graph=graph,
        clusters=clusters,
        d=d,
        rng_seed=int(rng_seed),
        generator=generator,
    )


def clustering_error(scenario: Scenario, cluster: ClusterSpec, w_bar: np.ndarray) -> float:
    """Total loss sum_{i in C} L_i(w_bar) a single candidate vector incurs
    over the cluster. Checking it against a budget epsilon is exactly the
    clustering assumption for that candidate."""
    cluster.check_against(scenario.n)
    w_bar = np.asarray(w_bar, dtype=float)
    return float(sum(quadratic_loss(scenario.datasets[i], w_bar) for i in cluster.members))


def save_scenario(scenario: Scenario, directory: str | Path) -> Path:
    """Serialize to a directory: graph.txt, meta.json and per-node CSVs.

    All floats are written with 17 significant digits so the round trip is
    bit exact and repeated saves are byte identical.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_graph(scenario.graph, directory / "graph.txt")
    meta = {
        "n": scenario.n,
        "d": scenario.d,
        "seed": scenario.rng_seed,
        "clusters": [
            {
                "members": list(c.members),
                "reference_params": None
                if c.reference_params is None
                else c.reference_params.tolist(),
                "epsilon": c.epsilon,
            }
            for c in scenario.clusters
        ],
        "generator": scenario.generator,
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )
    for i, ds in enumerate(scenario.datasets):
        table = np.column_stack([ds.features, ds.labels])
        np.savetxt(directory / f"node_{i}.csv", table, fmt="%.17g", delimiter=",")
    return directory


def load_scenario(directory: str | Path) -> Scenario:
    """Read back a directory written by :func:`save_scenario`."""
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="ascii"))
    graph = read_graph(directory / "graph.txt")
    d = int(meta["d"])
    clusters = [
        ClusterSpec(
            members=tuple(entry["members"]),
            reference_params=None
            if entry["reference_params"] is None
            else np.asarray(entry["reference_params"], dtype=float),
            epsilon=entry["epsilon"],
        )
        for entry in meta["clusters"]
    ]
    datasets = []
    for i in range(graph.n):
        table = np.loadtxt(directory / f"node_{i}.csv", delimiter=",", ndmin=2)
        if table.shape[1] != d + 1:
            raise ValueError(
                f"node_{i}.csv has {table.shape[1]} columns, expected {d + 1}"
            )
        datasets.append(LocalDataset(features=table[:, :d], labels=table[:, d]))
    return Scenario(
        datasets=datasets,
        graph=graph,
        clusters=clusters,
        d=d,
        rng_seed=meta.get("seed"),
        generator=meta.get("generator"),
    )
