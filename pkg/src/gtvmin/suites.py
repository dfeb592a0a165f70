"""Randomized verification suites.

Shared between the CLI ``selftest`` subcommand and the acceptance tests so
both exercise identical code paths. Every suite is deterministic: scenario
parameters are derived from a base seed plus the scenario index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (
    bound_report_row,
    certificate_check,
    deviation_bound_report,
    tv_lower_bound_check,
)
from .data import Scenario, generate_scenario
from .graph import (
    ClusterSpec,
    GraphParams,
    SimilarityGraph,
    generate_planted_clusters,
    is_disconnected,
)
from .solver import (
    GTVMinProblem,
    StackedParams,
    solve_exact,
    solve_iterative,
)

__all__ = [
    "random_scenario",
    "bound_suite",
    "spectral_suite",
    "certificate_suite",
    "cross_solver_suite",
]

_ALPHAS = (0.1, 1.0, 10.0)
_NOISES = (0.0, 0.1, 1.0)


def random_scenario(index: int, base_seed: int = 77000) -> tuple[Scenario, float]:
    """Deterministic random scenario number ``index``: n in [4, 40],
    d in [1, 8], alpha cycling over {0.1, 1, 10} and noise over
    {0, 0.1, 1}."""
    seed = base_seed + index
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 9))
    k = int(rng.integers(1, 4))
    if d == 1:
        # a 1-d sphere has two points, so at most two separated centers exist
        k = min(k, 2)
    low = 4 if k == 1 else 2
    sizes = [int(s) for s in rng.integers(low, 14, size=k)]
    m = int(d + rng.integers(1, 2 * d + 2))
    alpha = _ALPHAS[index % len(_ALPHAS)]
    noise = _NOISES[(index // len(_ALPHAS)) % len(_NOISES)]
    params = GraphParams(
        p_in=0.75 + 0.25 * float(rng.random()),
        p_out=0.25 * float(rng.random()),
        w_in=1.0,
        w_out=0.5,
    )
    scenario = generate_scenario(
        rng_seed=seed,
        cluster_sizes=sizes,
        d=d,
        m_per_node=m,
        noise_std=noise,
        separation=2.0,
        graph_params=params,
    )
    return scenario, alpha


@dataclass
class BoundSuiteResult:
    rows: list[dict]
    num_reports: int
    num_degenerate: int
    num_violations: int
    worst_slack: float

    @property
    def ok(self) -> bool:
        return self.num_violations == 0


def bound_suite(num_scenarios: int = 100, base_seed: int = 77000) -> BoundSuiteResult:
    """Solve ``num_scenarios`` random scenarios exactly and evaluate the
    deviation bound on every cluster; a violation is a non-degenerate
    report with ``satisfied`` false."""
    rows: list[dict] = []
    num_reports = 0
    num_degenerate = 0
    num_violations = 0
    worst_slack = float("inf")
    for index in range(num_scenarios):
        scenario, alpha = random_scenario(index, base_seed)
        problem = GTVMinProblem.from_scenario(scenario, alpha)
        result = solve_exact(problem)
        for cluster in scenario.clusters:
            report = deviation_bound_report(problem, result, cluster)
            rows.append(
                bound_report_row(report, scenario.rng_seed, scenario.n, scenario.d)
            )
            num_reports += 1
            if report.degenerate:
                num_degenerate += 1
                continue
            worst_slack = min(worst_slack, report.slack)
            if not report.satisfied:
                num_violations += 1
    return BoundSuiteResult(
        rows=rows,
        num_reports=num_reports,
        num_degenerate=num_degenerate,
        num_violations=num_violations,
        worst_slack=worst_slack,
    )


@dataclass
class SpectralSuiteResult:
    num_checks: int
    num_violations: int
    max_complete_mismatch: float

    @property
    def ok(self) -> bool:
        return self.num_violations == 0 and self.max_complete_mismatch <= 1e-9


def spectral_suite(num_graphs: int = 100, base_seed: int = 55000) -> SpectralSuiteResult:
    """Spot-check the spectral lower bound on random planted graphs with
    random parameters, plus the equality case on complete unit-weight
    clusters (where both sides coincide)."""
    num_checks = 0
    num_violations = 0
    for index in range(num_graphs):
        seed = base_seed + index
        rng = np.random.default_rng(seed)
        sizes = [int(s) for s in rng.integers(2, 11, size=2)]
        graph, clusters = generate_planted_clusters(
            seed,
            sizes,
            p_in=0.6 + 0.4 * float(rng.random()),
            p_out=0.3 * float(rng.random()),
            w_in=float(0.5 + rng.random()),
            w_out=0.5,
        )
        d = int(rng.integers(1, 6))
        params = StackedParams(rng.normal(size=(graph.n, d)))
        check = tv_lower_bound_check(graph, clusters[0], params)
        num_checks += 1
        if not check.holds:
            num_violations += 1

    max_mismatch = 0.0
    rng = np.random.default_rng(base_seed)
    for m in range(2, 11):
        complete = SimilarityGraph(
            m, [(i, j, 1.0) for i in range(m) for j in range(i + 1, m)]
        )
        cluster = ClusterSpec(members=tuple(range(m)))
        params = StackedParams(rng.normal(size=(m, 3)))
        check = tv_lower_bound_check(complete, cluster, params)
        rel = abs(check.lhs_tv - check.rhs) / max(1.0, abs(check.rhs))
        max_mismatch = max(max_mismatch, rel)
    return SpectralSuiteResult(
        num_checks=num_checks,
        num_violations=num_violations,
        max_complete_mismatch=max_mismatch,
    )


@dataclass
class CertificateSuiteResult:
    num_records: int
    min_candidate_slack: float
    min_spectral_slack: float
    min_optimality_slack: float

    @property
    def ok(self) -> bool:
        return (
            self.min_candidate_slack >= -1e-9
            and self.min_spectral_slack >= -1e-9
            and self.min_optimality_slack >= -1e-9
        )


def certificate_suite(
    num_scenarios: int = 50, base_seed: int = 66000
) -> CertificateSuiteResult:
    """Evaluate the certificate chain on random scenarios solved exactly."""
    min_candidate = float("inf")
    min_spectral = float("inf")
    min_optimality = float("inf")
    num_records = 0
    for index in range(num_scenarios):
        scenario, alpha = random_scenario(index, base_seed)
        problem = GTVMinProblem.from_scenario(scenario, alpha)
        result = solve_exact(problem)
        for cluster in scenario.clusters:
            record = certificate_check(problem, result, cluster)
            num_records += 1
            min_candidate = min(min_candidate, record.candidate_slack)
            min_spectral = min(min_spectral, record.spectral_slack)
            min_optimality = min(min_optimality, record.optimality_slack)
    return CertificateSuiteResult(
        num_records=num_records,
        min_candidate_slack=min_candidate,
        min_spectral_slack=min_spectral,
        min_optimality_slack=min_optimality,
    )


@dataclass
class CrossSolverSuiteResult:
    num_scenarios: int
    max_linf: float
    max_residual_ratio: float

    @property
    def ok(self) -> bool:
        return self.max_linf <= 1e-5 and self.max_residual_ratio <= 1e-8


def cross_solver_suite(
    num_scenarios: int = 20, base_seed: int = 88000
) -> CrossSolverSuiteResult:
    """Compare the direct and iterative solvers on random connected
    scenarios with n*d <= 400 (iterative: tol 1e-12, up to 1e5 rounds)."""
    max_linf = 0.0
    max_ratio = 0.0
    produced = 0
    index = 0
    while produced < num_scenarios:
        seed = base_seed + index
        index += 1
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 6))
        sizes = [int(s) for s in rng.integers(2, 9, size=2)]
        scenario = generate_scenario(
            rng_seed=seed,
            cluster_sizes=sizes,
            d=d,
            m_per_node=3 * d + 2,
            noise_std=0.1,
            separation=2.0,
            graph_params=GraphParams(p_in=0.9, p_out=0.25, w_in=1.0, w_out=0.5),
        )
        if is_disconnected(scenario.graph):
            continue
        produced += 1
        problem = GTVMinProblem.from_scenario(scenario, alpha=0.5)
        exact = solve_exact(problem)
        iterative = solve_iterative(problem, max_iter=10**5, tol=1e-12)
        linf = float(
            np.max(np.abs(exact.params.per_node - iterative.params.per_node))
        )
        max_linf = max(max_linf, linf)
        q_norm = float(
            np.linalg.norm(np.concatenate([loss.moment for loss in problem.losses]))
        )
        max_ratio = max(max_ratio, exact.residual / q_norm if q_norm > 0 else 0.0)
    return CrossSolverSuiteResult(
        num_scenarios=produced,
        max_linf=max_linf,
        max_residual_ratio=max_ratio,
    )
