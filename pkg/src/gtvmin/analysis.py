"""Cluster-wise analysis of trained parameters.

Centers on one quantitative claim: when a cluster's nodes admit a common
parameter vector with small total loss (budget epsilon), the solutions of
the graph-coupled training problem deviate from their cluster average by at
most

    sum_{i in C} ||w_i - avg||^2
        <= (1 / (alpha * lambda2)) * (epsilon + 2 alpha bd (||wbar||^2 + R^2))

with lambda2 the algebraic connectivity of the cluster's induced subgraph,
bd the cluster boundary weight, and R the largest parameter norm outside
the cluster (measured from the solution; zero when the cluster covers all
nodes). This module evaluates both sides, the spectral lower bound on the
intra-cluster variation that drives the proof, and the full certificate
chain of inequalities that makes the bound checkable step by step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable

import numpy as np

from .graph import (
    ClusterSpec,
    SimilarityGraph,
    cluster_boundary,
    induced_subgraph,
    is_disconnected,
    lambda2,
)
from .solver import GTVMinProblem, SolveResult, StackedParams, total_variation

__all__ = [
    "DeviationVector",
    "BoundReport",
    "TVBoundCheck",
    "CertificateRecord",
    "cluster_average",
    "deviations",
    "project_consensus",
    "project_disagreement",
    "tv_lower_bound_check",
    "cluster_objective",
    "deviation_bound_report",
    "certificate_check",
    "report_to_dict",
    "save_report",
    "bound_report_row",
    "write_reports_csv",
    "CSV_COLUMNS",
]

# hybrid tolerance: tol * max(1, scale); scenarios span orders of magnitude
_SLACK_RTOL = 1e-9

CSV_COLUMNS = [
    "seed",
    "n",
    "d",
    "alpha",
    "lambda2",
    "boundary",
    "epsilon",
    "R",
    "lhs",
    "rhs",
    "slack",
    "satisfied",
    "degenerate",
]


@dataclass(frozen=True, eq=False)
class DeviationVector:
    """Per-node deviations from the cluster average, w_i - avg, for i in C.

    The rows sum to the zero vector by construction.
    """

    per_node: np.ndarray
    cluster: ClusterSpec

    @property
    def sum_sq(self) -> float:
        """Total squared deviation sum_{i in C} ||w_i - avg||^2."""
        return float(np.einsum("nd,nd->", self.per_node, self.per_node))


@dataclass
class BoundReport:
    """Both sides of the cluster deviation bound plus every ingredient.

    ``degenerate`` marks clusters whose induced subgraph is disconnected
    (or a singleton): the bound's denominator vanishes, the right-hand side
    is reported as +inf, and ``satisfied`` is trivially true.
    """

    lhs: float
    lambda2: float
    boundary: float
    epsilon: float
    r_outside: float
    w_bar_norm_sq: float
    alpha: float
    rhs: float
    satisfied: bool
    slack: float
    degenerate: bool


@dataclass(frozen=True)
class TVBoundCheck:
    """Spectral lower bound on intra-cluster variation: the edge-weighted
    variation inside the cluster versus lambda2 times the squared deviation
    from the cluster average."""

    lhs_tv: float
    rhs: float
    holds: bool


@dataclass
class CertificateRecord:
    """The inequality chain certifying the deviation bound.

    f is the part of the joint objective that depends on the cluster's
    parameters (cluster losses plus all penalty terms on edges touching the
    cluster). The three inequalities: the constant candidate's value is at
    most epsilon + 2 alpha bd (||wbar||^2 + R^2); the solution's value is at
    least alpha lambda2 times the squared deviations; and the solution beats
    the candidate. Chaining them yields the bound.
    """

    f_candidate: float
    f_solution: float
    candidate_upper: float
    solution_lower: float
    deviation_sum: float
    candidate_slack: float
    spectral_slack: float
    optimality_slack: float
    holds: bool
    degenerate: bool


def cluster_average(params: StackedParams, cluster: ClusterSpec) -> np.ndarray:
    """Mean parameter vector (1/|C|) sum_{i in C} w_i."""
    cluster.check_against(params.n)
    return params.per_node[list(cluster.members)].mean(axis=0)


def deviations(params: StackedParams, cluster: ClusterSpec) -> DeviationVector:
    """Per-node deviations from the cluster average; they sum to zero."""
    avg = cluster_average(params, cluster)
    rows = params.per_node[list(cluster.members)] - avg
    return DeviationVector(per_node=rows, cluster=cluster)


def _blocks(delta: np.ndarray, d: int) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    d = int(d)
    if d < 1:
        raise ValueError("block dimension must be >= 1")
    if delta.ndim != 1 or delta.size == 0 or delta.size % d != 0:
        raise ValueError(
            f"stacked vector length {delta.size} is not a positive multiple of d={d}"
        )
    return delta.reshape(-1, d)


def project_consensus(delta: np.ndarray, d: int) -> np.ndarray:
    """Orthogonal projection onto the consensus subspace (stacked vectors
    whose d-blocks are all equal): replicate the block average."""
    blocks = _blocks(delta, d)
    avg = blocks.mean(axis=0)
    return np.tile(avg, blocks.shape[0])


def project_disagreement(delta: np.ndarray, d: int) -> np.ndarray:
    """Complementary projection: the stacked block deviations from the block
    average. Together with :func:`project_consensus` this is an orthogonal
    decomposition of the input."""
    blocks = _blocks(delta, d)
    return np.asarray(delta, dtype=float) - np.tile(blocks.mean(axis=0), blocks.shape[0])


def tv_lower_bound_check(
    graph: SimilarityGraph, cluster: ClusterSpec, params: StackedParams
) -> TVBoundCheck:
    """Check that the intra-cluster variation dominates lambda2 times the
    squared deviations from the cluster average (min-max characterization
    of the second eigenvalue). Needs at least two cluster members."""
    cluster.check_against(graph.n)
    if cluster.size < 2:
        raise ValueError("the spectral lower bound needs a cluster with >= 2 nodes")
    if params.n != graph.n:
        raise ValueError(f"params have {params.n} nodes, graph has {graph.n}")
    sub = induced_subgraph(graph, cluster)
    sub_params = StackedParams(params.per_node[list(cluster.members)].copy())
    lhs_tv = total_variation(sub, sub_params)
    rhs = lambda2(sub) * deviations(params, cluster).sum_sq
    holds = lhs_tv >= rhs - _SLACK_RTOL * max(1.0, rhs)
    return TVBoundCheck(lhs_tv=float(lhs_tv), rhs=float(rhs), holds=bool(holds))


def cluster_objective(
    problem: GTVMinProblem, params: StackedParams, cluster: ClusterSpec
) -> float:
    """The part of the joint objective that depends on the cluster's
    parameters: cluster losses plus alpha times the penalty on every edge
    with at least one endpoint in the cluster."""
    problem._check_params(params)
    cluster.check_against(problem.n)
    inside = set(cluster.members)
    value = sum(problem.losses[i].value(params.vector(i)) for i in cluster.members)
    if problem.alpha > 0.0:
        tv = 0.0
        w = params.per_node
        for (i, j), weight in problem.graph.edges.items():
            if i in inside or j in inside:
                diff = w[i] - w[j]
                tv += weight * float(diff @ diff)
        value += problem.alpha * tv
    return float(value)


def _require_cluster_data(cluster: ClusterSpec) -> tuple[np.ndarray, float]:
    if cluster.reference_params is None or cluster.epsilon is None:
        raise ValueError(
            "cluster must carry reference parameters and a clustering-error budget"
        )
    return cluster.reference_params, float(cluster.epsilon)


def _exterior_norm_max(params: StackedParams, cluster: ClusterSpec) -> float:
    outside = [i for i in range(params.n) if i not in set(cluster.members)]
    if not outside:
        return 0.0
    return float(np.max(np.linalg.norm(params.per_node[outside], axis=1)))


def _cluster_spectrum(
    graph: SimilarityGraph, cluster: ClusterSpec
) -> tuple[float, bool]:
    """(lambda2 of the induced subgraph, degenerate flag). Singleton and
    disconnected clusters are degenerate: the bound denominator vanishes."""
    if cluster.size < 2:
        return 0.0, True
    sub = induced_subgraph(graph, cluster)
    return lambda2(sub), is_disconnected(sub)


def deviation_bound_report(
    problem: GTVMinProblem, result: SolveResult, cluster: ClusterSpec
) -> BoundReport:
    """Evaluate the cluster deviation bound on a solver result.

    Requires alpha > 0 and a cluster carrying its reference vector and
    error budget. R is measured from the solution as the largest parameter
    norm outside the cluster (zero when the cluster covers every node). A
    disconnected (or singleton) cluster subgraph yields a degenerate report
    with rhs = +inf instead of an error.
    """
    w_bar, epsilon = _require_cluster_data(cluster)
    if problem.alpha <= 0.0:
        raise ValueError("the deviation bound needs alpha > 0")
    problem._check_params(result.params)
    cluster.check_against(problem.n)
    if w_bar.shape != (problem.d,):
        raise ValueError(
            f"reference parameters have shape {w_bar.shape}, expected ({problem.d},)"
        )

    lhs = deviations(result.params, cluster).sum_sq
    lam2, degenerate = _cluster_spectrum(problem.graph, cluster)
    boundary = cluster_boundary(problem.graph, cluster)
    r_outside = _exterior_norm_max(result.params, cluster)
    w_bar_norm_sq = float(w_bar @ w_bar)
    alpha = problem.alpha

    if degenerate:
        rhs = float("inf")
        satisfied = True
        slack = float("inf")
    else:
        rhs = (epsilon + alpha * boundary * 2.0 * (w_bar_norm_sq + r_outside**2)) / (
            alpha * lam2
        )
        satisfied = lhs <= rhs + _SLACK_RTOL * max(1.0, rhs)
        slack = rhs - lhs
    return BoundReport(
        lhs=float(lhs),
        lambda2=float(lam2),
        boundary=float(boundary),
        epsilon=epsilon,
        r_outside=r_outside,
        w_bar_norm_sq=w_bar_norm_sq,
        alpha=alpha,
        rhs=rhs,
        satisfied=bool(satisfied),
        slack=slack,
        degenerate=degenerate,
    )


def certificate_check(
    problem: GTVMinProblem, result: SolveResult, cluster: ClusterSpec
) -> CertificateRecord:
    """Evaluate the certificate chain behind the deviation bound.

    Builds the constant candidate (reference vector on the cluster,
    solution values elsewhere) and compares the cluster-restricted
    objective at the candidate and at the solution against their closed
    form bounds. All three slacks should be non-negative up to numerical
    tolerance whenever the result is an (approximate) minimizer.
    """
    w_bar, epsilon = _require_cluster_data(cluster)
    if problem.alpha <= 0.0:
        raise ValueError("the certificate chain needs alpha > 0")
    problem._check_params(result.params)
    cluster.check_against(problem.n)

    members = list(cluster.members)
    f_solution = cluster_objective(problem, result.params, cluster)
    candidate = result.params.copy()
    candidate.per_node[members] = w_bar
    f_candidate = cluster_objective(problem, candidate, cluster)

    lam2, degenerate = _cluster_spectrum(problem.graph, cluster)
    boundary = cluster_boundary(problem.graph, cluster)
    r_outside = _exterior_norm_max(result.params, cluster)
    deviation_sum = deviations(result.params, cluster).sum_sq

    candidate_upper = epsilon + 2.0 * problem.alpha * boundary * (
        float(w_bar @ w_bar) + r_outside**2
    )
    solution_lower = problem.alpha * lam2 * deviation_sum

    candidate_slack = candidate_upper - f_candidate
    spectral_slack = f_solution - solution_lower
    optimality_slack = f_candidate - f_solution
    holds = (
        candidate_slack >= -_SLACK_RTOL * max(1.0, candidate_upper)
        and spectral_slack >= -_SLACK_RTOL * max(1.0, solution_lower)
        and optimality_slack >= -_SLACK_RTOL * max(1.0, abs(f_candidate))
    )
    return CertificateRecord(
        f_candidate=float(f_candidate),
        f_solution=float(f_solution),
        candidate_upper=float(candidate_upper),
        solution_lower=float(solution_lower),
        deviation_sum=float(deviation_sum),
        candidate_slack=float(candidate_slack),
        spectral_slack=float(spectral_slack),
        optimality_slack=float(optimality_slack),
        holds=bool(holds),
        degenerate=degenerate,
    )


def report_to_dict(report: BoundReport | CertificateRecord) -> dict:
    return asdict(report)


def save_report(report: BoundReport | CertificateRecord, path: str | Path) -> None:
    """JSON serialization; infinities appear as JSON 'Infinity' literals."""
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="ascii",
    )


def bound_report_row(report: BoundReport, seed, n: int, d: int) -> dict:
    """Flatten a report into one CSV row keyed by the scenario metadata."""
    return {
        "seed": seed,
        "n": n,
        "d": d,
        "alpha": report.alpha,
        "lambda2": report.lambda2,
        "boundary": report.boundary,
        "epsilon": report.epsilon,
        "R": report.r_outside,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "slack": report.slack,
        "satisfied": report.satisfied,
        "degenerate": report.degenerate,
    }


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_reports_csv(path: str | Path, rows: Iterable[dict]) -> None:
    """Fixed-column CSV with '.' decimals and 17 significant digits, one
    row per (scenario, cluster, alpha)."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row[col]) for col in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
