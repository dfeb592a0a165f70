"""Command line front end.

Subcommands: ``generate`` (write a synthetic scenario directory), ``solve``
(train on a scenario and dump the result JSON), ``analyze`` (deviation
bound reports per cluster, JSON plus CSV), ``sweep`` (a full
generate/solve/analyze pipeline over a list of alphas and optionally a
list of inter-cluster edge probabilities), and ``selftest`` (the
randomized verification suites).

Configuration is a single JSON document; every flag mirrors a config key
and overrides it. All artifacts regenerate byte-identically from
(config, seed). Exit codes: 0 success, 1 validation error, 2 numerical
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import bound_report_row, deviation_bound_report, save_report, write_reports_csv
from .data import generate_scenario, load_scenario, save_scenario
from .errors import GTVMinError
from .graph import GraphParams
from .solver import GTVMinProblem, load_result, save_result, solve_exact, solve_iterative
from .suites import bound_suite, certificate_suite, cross_solver_suite, spectral_suite

__all__ = ["ExperimentConfig", "main", "entrypoint"]


@dataclass
class ExperimentConfig:
    """One experiment: scenario generation, solver choice and alpha sweep."""

    seed: int = 0
    cluster_sizes: list[int] = field(default_factory=lambda: [5, 5])
    d: int = 2
    m_per_node: int = 10
    noise_std: float = 0.1
    separation: float = 2.0
    p_in: float = 0.9
    p_out: float = 0.1
    w_in: float = 1.0
    w_out: float = 1.0
    alpha_list: list[float] = field(default_factory=lambda: [1.0])
    solver: str = "exact"
    max_iter: int = 100000
    tol: float = 1e-10
    out_dir: str = "gtvmin_out"
    p_out_list: list[float] | None = None

    def validate(self) -> None:
        if not self.alpha_list:
            raise ValueError("alpha_list must not be empty")
        if any(a < 0 for a in self.alpha_list):
            raise ValueError("alpha_list entries must be >= 0")
        if self.solver not in ("exact", "iterative"):
            raise ValueError(f"solver must be 'exact' or 'iterative', got {self.solver!r}")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("solver parameters max_iter and tol must be positive")
        if not self.cluster_sizes or any(s < 1 for s in self.cluster_sizes):
            raise ValueError("cluster_sizes must be positive")
        if self.p_out_list is not None and not self.p_out_list:
            raise ValueError("p_out_list, when given, must not be empty")
        # graph probabilities validated by GraphParams
        self.graph_params()
        if self.p_out_list is not None:
            for p in self.p_out_list:
                GraphParams(p_in=self.p_in, p_out=p, w_in=self.w_in, w_out=self.w_out)

    def graph_params(self, p_out: float | None = None) -> GraphParams:
        return GraphParams(
            p_in=self.p_in,
            p_out=self.p_out if p_out is None else p_out,
            w_in=self.w_in,
            w_out=self.w_out,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text(encoding="ascii"))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = (
        ExperimentConfig.from_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    overrides = {
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
        "solver": getattr(args, "solver", None),
        "max_iter": getattr(args, "max_iter", None),
        "tol": getattr(args, "tol", None),
    }
    alpha = getattr(args, "alpha", None)
    if alpha is not None:
        cfg.alpha_list = [alpha]
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _generate(cfg: ExperimentConfig, out_dir: Path, p_out: float | None = None):
    scenario = generate_scenario(
        rng_seed=cfg.seed,
        cluster_sizes=cfg.cluster_sizes,
        d=cfg.d,
        m_per_node=cfg.m_per_node,
        noise_std=cfg.noise_std,
        separation=cfg.separation,
        graph_params=cfg.graph_params(p_out),
    )
    save_scenario(scenario, out_dir)
    return scenario


def _solve(scenario, alpha: float, solver: str, max_iter: int, tol: float):
    problem = GTVMinProblem.from_scenario(scenario, alpha)
    if solver == "iterative":
        return problem, solve_iterative(problem, max_iter=max_iter, tol=tol)
    return problem, solve_exact(problem)


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    out_dir = Path(cfg.out_dir)
    _generate(cfg, out_dir)
    print(f"scenario written to {out_dir}")
    return 0


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    alpha = args.alpha
    solver = args.solver or "exact"
    _, result = _solve(
        scenario,
        alpha,
        solver,
        args.max_iter if args.max_iter is not None else 100000,
        args.tol if args.tol is not None else 1e-10,
    )
    out_path = Path(args.out) if args.out else Path(args.scenario) / "result.json"
    save_result(result, out_path)
    print(
        f"solved alpha={alpha:g} solver={solver} objective={result.objective_value:.12g} "
        f"iterations={result.iterations} converged={result.converged} -> {out_path}"
    )
    return 0


def _analyze_rows(scenario, result, cluster_selection):
    if result.params.n != scenario.n or result.params.d != scenario.d:
        raise ValueError(
            f"result shape ({result.params.n}, {result.params.d}) does not match "
            f"scenario shape ({scenario.n}, {scenario.d})"
        )
    if cluster_selection == "all":
        indices = range(len(scenario.clusters))
    else:
        idx = int(cluster_selection)
        if not (0 <= idx < len(scenario.clusters)):
            raise ValueError(
                f"cluster index {idx} out of range (scenario has "
                f"{len(scenario.clusters)} clusters)"
            )
        indices = [idx]
    problem = GTVMinProblem.from_scenario(scenario, result.alpha)
    reports = []
    for idx in indices:
        report = deviation_bound_report(problem, result, scenario.clusters[idx])
        reports.append((idx, report))
    return reports


def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    result = load_result(args.result)
    out_dir = Path(args.out) if args.out else Path(args.scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = _analyze_rows(scenario, result, args.cluster)
    rows = []
    for idx, report in reports:
        save_report(report, out_dir / f"report_cluster_{idx}.json")
        rows.append(bound_report_row(report, scenario.rng_seed, scenario.n, scenario.d))
        print(
            f"cluster {idx}: lhs={report.lhs:.6g} rhs={report.rhs:.6g} "
            f"satisfied={report.satisfied} degenerate={report.degenerate}"
        )
    write_reports_csv(out_dir / "reports.csv", rows)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p_outs = cfg.p_out_list if cfg.p_out_list is not None else [cfg.p_out]
    rows = []
    for ip, p_out in enumerate(p_outs):
        scen_dir = out_dir / f"scenario_{ip:02d}"
        scenario = _generate(cfg, scen_dir, p_out)
        for ia, alpha in enumerate(cfg.alpha_list):
            problem, result = _solve(scenario, alpha, cfg.solver, cfg.max_iter, cfg.tol)
            save_result(result, scen_dir / f"result_{ia:02d}.json")
            for cluster in scenario.clusters:
                report = deviation_bound_report(problem, result, cluster)
                rows.append(
                    bound_report_row(report, scenario.rng_seed, scenario.n, scenario.d)
                )
    csv_path = out_dir / "sweep.csv"
    write_reports_csv(csv_path, rows)
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def cmd_selftest(args) -> int:
    quick = args.quick
    checks = [
        (
            "deviation bound suite",
            bound_suite(20 if quick else 100),
            lambda r: f"{r.num_reports} reports, {r.num_degenerate} degenerate, "
            f"{r.num_violations} violations",
        ),
        (
            "spectral lower-bound suite",
            spectral_suite(20 if quick else 100),
            lambda r: f"{r.num_checks} checks, {r.num_violations} violations, "
            f"complete-cluster mismatch {r.max_complete_mismatch:.3e}",
        ),
        (
            "certificate chain suite",
            certificate_suite(10 if quick else 50),
            lambda r: f"{r.num_records} records, min slacks "
            f"({r.min_candidate_slack:.3e}, {r.min_spectral_slack:.3e}, "
            f"{r.min_optimality_slack:.3e})",
        ),
        (
            "solver cross-validation suite",
            cross_solver_suite(5 if quick else 20),
            lambda r: f"{r.num_scenarios} scenarios, max linf {r.max_linf:.3e}, "
            f"max residual ratio {r.max_residual_ratio:.3e}",
        ),
    ]
    all_ok = True
    for name, outcome, describe in checks:
        status = "PASS" if outcome.ok else "FAIL"
        all_ok &= outcome.ok
        print(f"[{status}] {name}: {describe(outcome)}")
    return 0 if all_ok else 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which collides with the
    # numerical-failure exit code; route them through ValueError instead
    def error(self, message):
        raise ValueError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gtvmin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--alpha", type=float, help="override alpha_list with one value")
        p.add_argument("--solver", choices=["exact", "iterative"])
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--tol", type=float)

    p_gen = sub.add_parser("generate", help="write a synthetic scenario directory")
    add_config_flags(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_solve = sub.add_parser("solve", help="train on a scenario directory")
    p_solve.add_argument("scenario", help="scenario directory")
    p_solve.add_argument("--alpha", type=float, required=True)
    p_solve.add_argument("--solver", choices=["exact", "iterative"])
    p_solve.add_argument("--max-iter", dest="max_iter", type=int)
    p_solve.add_argument("--tol", type=float)
    p_solve.add_argument("--out", help="result JSON path")
    p_solve.set_defaults(func=cmd_solve)

    p_an = sub.add_parser("analyze", help="deviation bound reports per cluster")
    p_an.add_argument("scenario", help="scenario directory")
    p_an.add_argument("result", help="result JSON written by solve")
    p_an.add_argument("--cluster", default="all", help="cluster index or 'all'")
    p_an.add_argument("--out", help="output directory (default: scenario dir)")
    p_an.set_defaults(func=cmd_analyze)

    p_sweep = sub.add_parser("sweep", help="generate/solve/analyze over alpha_list")
    add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_self = sub.add_parser("selftest", help="run the verification suites")
    p_self.add_argument("--quick", action="store_true", help="smaller suite sizes")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GTVMinError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
