"""The joint training objective and its two solvers.

The objective couples per-node losses through a squared-difference penalty
over the similarity graph edges,

    f(w) = sum_i L_i(w_i) + alpha * sum_{edges} A_ij ||w_i - w_j||^2,

which for quadratic losses is itself quadratic with Hessian
2 Q + 2 alpha (L kron I_d), Q = blockdiag((1/m_i) X_i^T X_i). The direct
solver assembles the stationarity system once and factorizes it; the
iterative solver runs synchronous gradient descent in which every node
reads only its own loss gradient and its neighbors' parameters.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .data import LocalDataset, Scenario, quadratic_loss, quadratic_loss_gradient
from .errors import DivergenceError, SingularSystemError
from .graph import SimilarityGraph, laplacian

__all__ = [
    "LocalLoss",
    "QuadraticLoss",
    "StackedParams",
    "GTVMinProblem",
    "SolveResult",
    "total_variation",
    "objective",
    "objective_gradient",
    "solve_exact",
    "solve_iterative",
    "synchronous_step",
    "save_result",
    "load_result",
]

# the direct solver refuses solutions whose stationarity residual exceeds
# this fraction of ||q||; beyond it the system counts as numerically singular
_RESIDUAL_RTOL = 1e-8


class LocalLoss(ABC):
    """Contract a node's loss must satisfy to be trained jointly.

    ``smoothness`` must return an upper bound on the Lipschitz constant of
    the gradient; the iterative solver derives its step size from it. The
    objective itself must be non-negative.
    """

    @abstractmethod
    def value(self, w: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def smoothness(self) -> float: ...


class QuadraticLoss(LocalLoss):
    """Mean squared residual (1/m) ||y - X w||^2 of one local dataset."""

    def __init__(self, dataset: LocalDataset):
        self.dataset = dataset
        m = dataset.num_samples
        # (1/m) X^T X and (1/m) X^T y, reused by the direct solver
        self.gram = dataset.features.T @ dataset.features / m
        self.moment = dataset.features.T @ dataset.labels / m
        self.label_energy = float(dataset.labels @ dataset.labels) / m

    def value(self, w: np.ndarray) -> float:
        return quadratic_loss(self.dataset, w)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return quadratic_loss_gradient(self.dataset, w)

    def smoothness(self) -> float:
        return float(2.0 * max(np.linalg.eigvalsh(self.gram)[-1], 0.0))


class StackedParams:
    """Per-node parameter vectors as an (n, d) array.

    ``flat`` is the node-major stacked view (w_1^T, ..., w_n^T)^T of length
    n*d. Treated as a value object: operations return fresh instances.
    """

    __slots__ = ("per_node",)

    def __init__(self, per_node: np.ndarray):
        arr = np.asarray(per_node, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"expected an (n, d) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("parameters must be finite")
        self.per_node = arr

    @classmethod
    def zeros(cls, n: int, d: int) -> "StackedParams":
        return cls(np.zeros((n, d)))

    @classmethod
    def from_flat(cls, vec: np.ndarray, n: int, d: int) -> "StackedParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (n * d,):
            raise ValueError(f"expected a flat vector of length {n * d}, got {vec.shape}")
        return cls(vec.reshape(n, d).copy())

    @property
    def n(self) -> int:
        return self.per_node.shape[0]

    @property
    def d(self) -> int:
        return self.per_node.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.per_node.reshape(-1)

    def vector(self, i: int) -> np.ndarray:
        return self.per_node[i]

    def copy(self) -> "StackedParams":
        return StackedParams(self.per_node.copy())


class GTVMinProblem:
    """Per-node losses on a similarity graph plus the coupling strength."""

    def __init__(
        self,
        losses: Sequence[LocalLoss],
        graph: SimilarityGraph,
        alpha: float,
        d: int,
    ):
        if len(losses) != graph.n:
            raise ValueError(f"{len(losses)} losses for a graph with {graph.n} nodes")
        alpha = float(alpha)
        if not np.isfinite(alpha) or alpha < 0.0:
            raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
        if int(d) < 1:
            raise ValueError("parameter dimension must be >= 1")
        self.losses = list(losses)
        self.graph = graph
        self.alpha = alpha
        self.d = int(d)

    @classmethod
    def from_scenario(cls, scenario: Scenario, alpha: float) -> "GTVMinProblem":
        return cls(
            [QuadraticLoss(ds) for ds in scenario.datasets],
            scenario.graph,
            alpha,
            scenario.d,
        )

    @property
    def n(self) -> int:
        return self.graph.n

    def _check_params(self, params: StackedParams) -> None:
        if params.n != self.n or params.d != self.d:
            raise ValueError(
                f"params shape {params.per_node.shape} does not match "
                f"problem shape ({self.n}, {self.d})"
            )


@dataclass
class SolveResult:
    """Solver output: the parameters plus convergence diagnostics.

    ``residual`` is the linear-system residual for the direct solver and
    the final full-gradient norm for the iterative one.
    """

    params: StackedParams
    objective_value: float
    iterations: int
    converged: bool
    residual: float
    alpha: float


def total_variation(graph: SimilarityGraph, params: StackedParams) -> float:
    """Edge-weighted sum of squared parameter differences,
    sum_{edges} A_ij ||w_i - w_j||^2."""
    if params.n != graph.n:
        raise ValueError(f"params have {params.n} nodes, graph has {graph.n}")
    if graph.num_edges == 0:
        return 0.0
    ii, jj, ww = graph.edge_arrays()
    diff = params.per_node[ii] - params.per_node[jj]
    return float(ww @ np.einsum("ed,ed->e", diff, diff))


def objective(problem: GTVMinProblem, params: StackedParams) -> float:
    """Sum of local losses plus alpha times the total variation."""
    problem._check_params(params)
    loss_sum = sum(loss.value(params.vector(i)) for i, loss in enumerate(problem.losses))
    return float(loss_sum + problem.alpha * total_variation(problem.graph, params))


def objective_gradient(problem: GTVMinProblem, params: StackedParams) -> np.ndarray:
    """Gradient of :func:`objective` as an (n, d) array: per-node loss
    gradients plus 2 alpha (L kron I) applied to the stacked parameters."""
    problem._check_params(params)
    grad = np.empty_like(params.per_node)
    for i, loss in enumerate(problem.losses):
        grad[i] = loss.gradient(params.vector(i))
    if problem.alpha > 0.0 and problem.graph.num_edges > 0:
        lap = laplacian(problem.graph)
        grad += 2.0 * problem.alpha * (lap @ params.per_node)
    return grad


def _assemble_system(problem: GTVMinProblem, ridge: float) -> tuple[np.ndarray, np.ndarray]:
    """Stationarity system (Q + alpha L kron I + ridge I) w = q for
    quadratic losses."""
    n, d = problem.n, problem.d
    mat = np.zeros((n * d, n * d))
    rhs = np.empty(n * d)
    for i, loss in enumerate(problem.losses):
        mat[i * d : (i + 1) * d, i * d : (i + 1) * d] = loss.gram
        rhs[i * d : (i + 1) * d] = loss.moment
    if problem.alpha > 0.0:
        mat += problem.alpha * np.kron(laplacian(problem.graph), np.eye(d))
    if ridge:
        mat[np.diag_indices_from(mat)] += ridge
    return mat, rhs


def solve_exact(problem: GTVMinProblem, ridge: float = 0.0) -> SolveResult:
    """Direct solve of the stationarity system for quadratic losses.

    Factorizes the dense symmetric positive-definite matrix
    Q + alpha (L kron I); raises :class:`SingularSystemError` when the
    system is singular or numerically indefinite (for instance alpha = 0
    with a rank-deficient local design matrix, or a graph component whose
    pooled design matrix is rank-deficient). ``ridge`` > 0 opts into an
    explicit diagonal shift instead of any silent pseudo-inverse.
    """
    if any(not isinstance(loss, QuadraticLoss) for loss in problem.losses):
        raise TypeError("solve_exact requires quadratic losses on every node")
    ridge = float(ridge)
    if ridge < 0.0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    mat, rhs = _assemble_system(problem, ridge)
    try:
        factor = scipy.linalg.cho_factor(mat, lower=True, check_finite=False)
        w = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "stationarity matrix Q + alpha*(L kron I) is singular or indefinite "
            "(typical causes: alpha = 0 with a rank-deficient local design "
            "matrix, or a disconnected component whose pooled design matrix is "
            "rank-deficient); pass ridge > 0 to regularize explicitly"
        ) from exc
    residual = float(np.linalg.norm(mat @ w - rhs))
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm > 0.0 and residual > _RESIDUAL_RTOL * rhs_norm:
        raise SingularSystemError(
            f"stationarity system is numerically singular: residual {residual:.3e} "
            f"exceeds {_RESIDUAL_RTOL:.0e} * ||q|| = {_RESIDUAL_RTOL * rhs_norm:.3e}"
        )
    params = StackedParams.from_flat(w, problem.n, problem.d)
    return SolveResult(
        params=params,
        objective_value=objective(problem, params),
        iterations=0,
        converged=True,
        residual=residual,
        alpha=problem.alpha,
    )


class _SyncEngine:
    """Precomputed state for synchronous gradient rounds.

    The update of node i reads only that node's loss gradient and the
    parameters of its graph neighbors (row i of the adjacency matrix is
    zero elsewhere), so one round has Jacobi semantics: all nodes step
    from the previous round's parameters.
    """

    def __init__(self, problem: GTVMinProblem):
        self.problem = problem
        self.alpha = problem.alpha
        self.adjacency = problem.graph.adjacency()
        self.degrees = self.adjacency.sum(axis=1)
        if problem.graph.n > 1 and problem.graph.num_edges > 0:
            lap_lmax = float(np.linalg.eigvalsh(laplacian(problem.graph))[-1])
        else:
            lap_lmax = 0.0
        smooth = max(loss.smoothness() for loss in problem.losses)
        self.lipschitz = smooth + 2.0 * problem.alpha * lap_lmax
        self.step = 1.0 / self.lipschitz if self.lipschitz > 0.0 else 0.0

        self.quadratic = all(isinstance(loss, QuadraticLoss) for loss in problem.losses)
        if self.quadratic:
            self.gram = np.stack([loss.gram for loss in problem.losses])
            self.moment = np.stack([loss.moment for loss in problem.losses])
            self.energy = float(sum(loss.label_energy for loss in problem.losses))

    def lap_apply(self, w: np.ndarray) -> np.ndarray:
        return self.degrees[:, None] * w - self.adjacency @ w

    def value_and_gradient(self, w: np.ndarray, lw: np.ndarray) -> tuple[float, np.ndarray]:
        tv = float(np.einsum("nd,nd->", w, lw))
        if self.quadratic:
            gw = np.einsum("nij,nj->ni", self.gram, w)
            value = (
                float(np.einsum("nd,nd->", w, gw))
                - 2.0 * float(np.einsum("nd,nd->", self.moment, w))
                + self.energy
            )
            grad = 2.0 * (gw - self.moment)
        else:
            value = 0.0
            grad = np.empty_like(w)
            for i, loss in enumerate(self.problem.losses):
                value += loss.value(w[i])
                grad[i] = loss.gradient(w[i])
        if self.alpha > 0.0:
            value += self.alpha * tv
            grad = grad + 2.0 * self.alpha * lw
        return value, grad


def synchronous_step(problem: GTVMinProblem, params: StackedParams) -> StackedParams:
    """One synchronous gradient round with the solver's fixed step 1/L.

    Exposed so the message-passing locality of the update can be exercised
    directly: node i's new parameters depend only on its own dataset and
    its neighbors' current parameters.
    """
    problem._check_params(params)
    engine = _SyncEngine(problem)
    w = params.per_node
    _, grad = engine.value_and_gradient(w, engine.lap_apply(w))
    return StackedParams(w - engine.step * grad)


def solve_iterative(
    problem: GTVMinProblem,
    max_iter: int = 10000,
    tol: float = 1e-10,
) -> SolveResult:
    """Synchronous full-gradient descent with the conservative fixed step
    1/L, L = max_i smoothness_i + 2 alpha lambda_max(Laplacian).

    Starts from all zeros and stops once the objective decrease is
    non-negative and below ``tol * max(1, |objective|)``, or after
    ``max_iter`` rounds; the ``converged`` flag records which. The fixed
    step guarantees a non-increasing objective sequence, so an increase
    signals a loss that misreports its smoothness bound; such runs keep
    iterating and raise :class:`DivergenceError` once the objective turns
    non-finite.
    """
    if int(max_iter) < 1:
        raise ValueError("max_iter must be >= 1")
    tol = float(tol)
    if tol < 0.0:
        raise ValueError("tol must be >= 0")

    engine = _SyncEngine(problem)
    w = np.zeros((problem.n, problem.d))
    lw = engine.lap_apply(w)
    f_prev, grad = engine.value_and_gradient(w, lw)
    converged = False
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        w = w - engine.step * grad
        lw = engine.lap_apply(w)
        f_cur, grad = engine.value_and_gradient(w, lw)
        if not np.isfinite(f_cur):
            raise DivergenceError(
                f"objective became non-finite at iteration {iterations}"
            )
        decrease = f_prev - f_cur
        if 0.0 <= decrease < tol * max(1.0, abs(f_prev)):
            converged = True
            break
        f_prev = f_cur

    params = StackedParams(w)
    grad_norm = float(np.linalg.norm(objective_gradient(problem, params)))
    return SolveResult(
        params=params,
        objective_value=objective(problem, params),
        iterations=iterations,
        converged=converged,
        residual=grad_norm,
        alpha=problem.alpha,
    )


def save_result(result: SolveResult, path: str | Path) -> None:
    """JSON serialization: flattened parameters plus diagnostics."""
    payload = {
        "n": result.params.n,
        "d": result.params.d,
        "params": result.params.flat.tolist(),
        "objective": result.objective_value,
        "iterations": result.iterations,
        "converged": result.converged,
        "residual": result.residual,
        "alpha": result.alpha,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )


def load_result(path: str | Path) -> SolveResult:
    payload = json.loads(Path(path).read_text(encoding="ascii"))
    params = StackedParams.from_flat(
        np.asarray(payload["params"], dtype=float), int(payload["n"]), int(payload["d"])
    )
    return SolveResult(
        params=params,
        objective_value=float(payload["objective"]),
        iterations=int(payload["iterations"]),
        converged=bool(payload["converged"]),
        residual=float(payload["residual"]),
        alpha=float(payload["alpha"]),
    )
