"""
Solver comparison on one credible tube.

Every configured backend solves the same problem; smoothing backends run
once per smoothing parameter. Objective traces are normalized so the best
objective over all runs maps to 0 and each run's initial value to 1.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from core.exceptions import TvUlogError
from core.models.experiment import bench_defaults, load_experiment
from core.models.records import RunSummary, SolveRecord
from core.monitoring.logger import get_logger, metrics
from core.registry.solver_registry import get_solver, solver_registry
from core.services import artifacts, figures
from core.services.solvers import SolverResult, SolverStatus, TvUlogProblem, socp_iteration_trace
from tasks.pipeline import list_artifacts, sample_stage, simulate_experiment, tube_stage, write_timings

logger = get_logger(__name__)

SMOOTHING_SOLVERS = ("dual-smoothing", "primal-smoothing", "primal-lbfgsb")


def run_label(solver: str, mu: Optional[float]) -> str:
    return solver if mu is None else f"{solver} mu={mu:g}"


def bench_runs(solvers: List[str], mus: List[float]) -> List[Tuple[str, Optional[float]]]:
    """(solver, mu) pairs; backends without a smoothing parameter run once."""
    runs = []
    for solver in solvers:
        get_solver(solver)
        if solver in SMOOTHING_SOLVERS:
            runs.extend((solver, mu) for mu in mus)
        else:
            runs.append((solver, None))
    return runs


def run_one(problem: TvUlogProblem, solver: str, mu: Optional[float], tol: Optional[float], max_iters: Optional[int]) -> SolverResult:
    opts = get_solver(solver).default_options(mu=mu, tol=tol, max_iters=max_iters)
    with metrics.timer("solve"):
        if solver == "socp":
            # capped re-solves; each trace time is the time to reach that iteration
            return socp_iteration_trace(problem, opts)
        return solver_registry.run(solver, problem, opts)


def normalize_traces(traces: Dict[str, List[Tuple[int, float, float]]]) -> Dict[str, List[Tuple[int, float, float, float]]]:
    """Append the normalized objective ``(v - best) / (v0 - best)`` to each trace row."""
    finite = [v for rows in traces.values() for _, _, v in rows if np.isfinite(v)]
    if not finite:
        return {name: [] for name in traces}
    best = min(finite)
    normalized = {}
    for name, rows in traces.items():
        if not rows:
            normalized[name] = []
            continue
        span = rows[0][2] - best
        normalized[name] = [
            (i, s, v, (v - best) / span if span > 0 else 0.0)
            for i, s, v in rows
        ]
    return normalized


def bench_frame(normalized: Dict[str, List[Tuple[int, float, float, float]]]) -> pd.DataFrame:
    rows = [
        {"run": name, "iter": i, "seconds": s, "objective": v, "normalized": n}
        for name, points in normalized.items()
        for i, s, v, n in points
    ]
    return pd.DataFrame(rows, columns=["run", "iter", "seconds", "objective", "normalized"])


def run_bench(config_path: Optional[str], out_dir: str, overrides: Optional[Dict[str, Any]] = None) -> RunSummary:
    """
    Run every configured backend on one tube and write the comparison.

    A failing run is recorded with status numerical-failure and the bench
    carries on with the remaining runs.
    """
    exp = load_experiment(config_path, 1, overrides, base=bench_defaults())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.reset()

    experiment = simulate_experiment(exp)
    sample_set = sample_stage(experiment, out)
    estimate = tube_stage(sample_set, experiment.spatial, experiment.scale, exp.alpha, exp.max_bisect, out)
    problem = TvUlogProblem(estimate.tube)

    runs = bench_runs(exp.solvers, exp.mus)
    logger.info("Starting bench", runs=len(runs), size=problem.size)

    traces: Dict[str, List[Tuple[int, float, float]]] = {}
    records: List[SolveRecord] = []
    for solver, mu in runs:
        label = run_label(solver, mu)
        try:
            result = run_one(problem, solver, mu, exp.tol, exp.max_iters)
        except TvUlogError as e:
            logger.error(f"Bench run failed: {label}", error=e.message)
            traces[label] = []
            records.append(SolveRecord(solver=label, status=SolverStatus.NUMERICAL_FAILURE.value,
                                       iterations=0, mu=mu))
            continue
        failed = result.status is SolverStatus.NUMERICAL_FAILURE
        # failed runs stay out of the normalization
        traces[label] = [] if failed else [(p.iteration, p.seconds, p.objective) for p in result.trace]
        records.append(SolveRecord(
            solver=label,
            status=result.status.value,
            objective=None if failed else result.objective,
            iterations=result.iterations,
            seconds=result.trace[-1].seconds if result.trace else None,
            mu=result.info.get("mu"),
            gap=result.info.get("gap"),
        ))
        logger.info(f"Bench run finished: {label}", status=result.status.value, objective=result.objective)

    for name in dict.fromkeys(solver for solver, _ in runs):
        logger.info("Solver backend state", **get_solver(name).to_dict())

    normalized = normalize_traces(traces)
    bench_frame(normalized).to_csv(out / "bench.csv", index=False)
    figures.plot_bench(out / "bench.svg", {
        name: [(s, n) for _, s, _, n in points] for name, points in normalized.items()
    })

    summary = RunSummary(
        command="bench",
        experiment=exp.model_dump(),
        bench=records,
    )
    write_timings(out)
    summary.artifacts = list_artifacts(out) + ["summary.json"]
    artifacts.write_model(out / "summary.json", summary)
    return summary


def cmd_bench(config_path: Optional[str], out_dir: str, overrides: Optional[Dict[str, Any]] = None) -> int:
    run_bench(config_path, out_dir, overrides)
    return 0
