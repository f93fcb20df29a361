"""Experiment harness: job-count sweeps, paired instances, CSV/SVG output, brute-force oracle."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import baselines, hybrid_ga
from .charts import line_chart
from .cloud import (
    Infrastructure,
    Job,
    Schedule,
    check_instance,
    evaluate_schedule,
    exec_time_matrix,
    generate_infrastructure,
    generate_workload,
)
from .config import ExperimentConfig
from .fuzzy import get_model

ORACLE_GUARD = 10**7

CSV_HEADER = (
    "scheduler", "n_jobs", "replication", "seed", "makespan_s", "di_paper",
    "di_conventional", "total_cost", "iterations", "wall_clock_ms",
)


class OracleTooLarge(ValueError):
    pass


class BenchError(RuntimeError):
    pass


def sig6(x: float) -> str:
    """Six significant digits, always written in fixed-point notation."""
    if not math.isfinite(x):
        raise ValueError(f"cannot format non-finite value {x!r}")
    return format(Decimal(f"{x:#.6g}"), "f")


def round6(x: float) -> float:
    return float(sig6(x))


def derive_seed(master_seed: int, n_jobs: int, replication: int) -> int:
    """Cell seed: first 32-bit word of ``SeedSequence([master_seed, n_jobs, replication])``.

    SeedSequence hashes its entropy words, so neighbouring cells get
    unrelated seeds.
    """
    return int(np.random.SeedSequence([master_seed, n_jobs, replication]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentRow:
    scheduler: str
    n_jobs: int
    replication: int
    seed: int
    makespan_s: float
    di_paper: float
    di_conventional: float
    total_cost: float
    iterations: int
    wall_clock_ms: int

    def sort_key(self):
        return (self.scheduler, self.n_jobs, self.replication)


@dataclass(frozen=True)
class SummaryRow:
    scheduler: str
    n_jobs: int
    count: int
    makespan_mean: float
    makespan_sd: float
    di_paper_mean: float
    di_paper_sd: float
    di_conventional_mean: float
    di_conventional_sd: float
    cost_mean: float
    cost_sd: float


# --- running schedulers -----------------------------------------------------


def make_instance(cfg: ExperimentConfig, n_jobs: int, seed: int) -> tuple[list[Job], Infrastructure]:
    return generate_workload(n_jobs, seed, cfg.workload), generate_infrastructure(cfg.infrastructure, seed)


def run_scheduler(name: str, jobs: Sequence[Job], infra: Infrastructure, cfg: ExperimentConfig,
                  seed: int) -> tuple[Schedule, int]:
    """Run one scheduler; returns the schedule and its generation/iteration count."""
    if name == "hybrid":
        ga_cfg = dataclasses.replace(cfg.ga, seed=seed)
        schedule, diag = hybrid_ga.run(jobs, infra, ga_cfg, get_model(cfg.fuzzy))
        return schedule, diag.generations
    if name in ("aco", "maco"):
        aco_cfg = dataclasses.replace(cfg.aco, seed=seed)
        result = baselines.aco_search(jobs, infra, aco_cfg, load_aware=(name == "maco"))
        return result.schedule, result.iterations
    if name == "round_robin":
        return baselines.round_robin_schedule(jobs, infra), 0
    if name == "random":
        return baselines.random_schedule(jobs, infra, seed), 0
    if name == "greedy":
        return baselines.greedy_schedule(jobs, infra), 0
    raise ValueError(f"unknown scheduler {name!r}")


def run_cell(cfg: ExperimentConfig, n_jobs: int, replication: int) -> list[ExperimentRow]:
    seed = derive_seed(cfg.master_seed, n_jobs, replication)
    jobs, infra = make_instance(cfg, n_jobs, seed)
    rows = []
    for name in cfg.schedulers:
        start = time.perf_counter()
        try:
            schedule, iters = run_scheduler(name, jobs, infra, cfg, seed)
            metrics = evaluate_schedule(schedule, jobs, infra, cfg.di_mode)
        except Exception as exc:
            raise BenchError(f"scheduler {name!r} failed on n_jobs={n_jobs} seed={seed}: {exc}") from exc
        elapsed = round((time.perf_counter() - start) * 1000) if cfg.record_timing else 0
        rows.append(ExperimentRow(
            scheduler=name,
            n_jobs=n_jobs,
            replication=replication,
            seed=seed,
            makespan_s=round6(metrics.makespan),
            di_paper=round6(metrics.di_paper),
            di_conventional=round6(metrics.di_conventional),
            total_cost=round6(metrics.total_cost),
            iterations=iters,
            wall_clock_ms=elapsed,
        ))
    return rows


def _cell_task(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[ExperimentRow]:
    """Every (n_jobs, replication) cell, each scheduler fed the same instance."""
    cells = [(cfg, n, r) for n in cfg.job_counts for r in range(cfg.replications)]
    rows: list[ExperimentRow] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for chunk in pool.map(_cell_task, cells):
                rows.extend(chunk)
                if progress:
                    progress(chunk)
    else:
        for cell in cells:
            chunk = run_cell(*cell)
            rows.extend(chunk)
            if progress:
                progress(chunk)
    return sorted(rows, key=ExperimentRow.sort_key)


# --- oracle -----------------------------------------------------------------


def assignment_count(jobs: Sequence[Job], infra: Infrastructure) -> int:
    mask = check_instance(jobs, infra)
    return math.prod(int(row.sum()) for row in mask)


def brute_force_optimal(jobs: Sequence[Job], infra: Infrastructure, guard: int = ORACLE_GUARD):
    """Exhaustive minimum-makespan search; returns ``(Schedule, makespan)``.

    Among optimal schedules the lexicographically smallest VM-id vector (in
    job-id order) is returned. Branches whose partial makespan already
    reaches the incumbent are cut, which cannot lose a lexicographically
    earlier optimum because the search runs in lexicographic order.
    """
    jobs = sorted(jobs, key=lambda j: j.id)
    total = assignment_count(jobs, infra)
    if total > guard:
        raise OracleTooLarge(f"instance too large for oracle: {total} assignments > guard {guard}")
    mask = check_instance(jobs, infra)
    times = exec_time_matrix(jobs, infra).tolist()
    vm_ids = [vm.id for vm in infra.vms]
    options = [sorted(np.flatnonzero(row).tolist(), key=lambda v: vm_ids[v]) for row in mask]
    n = len(jobs)
    loads = [0.0] * len(infra.vms)
    current = [0] * n
    best = {"span": math.inf, "vec": None}

    def search(j: int, span: float) -> None:
        if j == n:
            if span < best["span"]:
                best["span"], best["vec"] = span, list(current)
            return
        row = times[j]
        for v in options[j]:
            old = loads[v]
            new_load = old + row[v]
            new_span = new_load if new_load > span else span
            if new_span >= best["span"]:
                continue
            loads[v] = new_load
            current[j] = v
            search(j + 1, new_span)
            loads[v] = old

    search(0, 0.0)
    schedule = Schedule.from_indices(jobs, infra, best["vec"])
    return schedule, evaluate_schedule(schedule, jobs, infra).makespan


# --- aggregation and output -------------------------------------------------


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def aggregate(rows: Iterable[ExperimentRow]) -> list[SummaryRow]:
    groups: dict[tuple[str, int], list[ExperimentRow]] = {}
    for row in rows:
        groups.setdefault((row.scheduler, row.n_jobs), []).append(row)
    summary = []
    for (name, n), group in sorted(groups.items()):
        ms = _mean_sd([r.makespan_s for r in group])
        dp = _mean_sd([r.di_paper for r in group])
        dc = _mean_sd([r.di_conventional for r in group])
        cost = _mean_sd([r.total_cost for r in group])
        summary.append(SummaryRow(name, n, len(group), *ms, *dp, *dc, *cost))
    return summary


def rows_to_csv(rows: Iterable[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow((r.scheduler, r.n_jobs, r.replication, r.seed, sig6(r.makespan_s), sig6(r.di_paper),
                    sig6(r.di_conventional), sig6(r.total_cost), r.iterations, r.wall_clock_ms))
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ExperimentRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for rec in reader:
        out.append(ExperimentRow(rec[0], int(rec[1]), int(rec[2]), int(rec[3]), float(rec[4]), float(rec[5]),
                                 float(rec[6]), float(rec[7]), int(rec[8]), int(rec[9])))
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def emit_csv(rows: Iterable[ExperimentRow], path: str | Path) -> Path:
    path = Path(path)
    _write(path, rows_to_csv(rows))
    return path


CHARTS = {
    "makespan": ("makespan_mean", "Average makespan", "makespan (s)"),
    "di_paper": ("di_paper_mean", "Average Degree of Imbalance ((Tmax + Tmin) / Tavg)", "DI"),
    "di_conventional": ("di_conventional_mean", "Average Degree of Imbalance ((Tmax - Tmin) / Tavg)", "DI"),
    "cost": ("cost_mean", "Average execution cost", "cost units"),
}


# MACO is a reconstruction of an unavailable reference design; say so on the charts.
LEGEND_NAMES = {"maco": "maco (best-effort)"}


def emit_charts(summary: Sequence[SummaryRow], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for stem, (attr, title, y_label) in CHARTS.items():
        series: dict[str, list[tuple[float, float]]] = {}
        for s in summary:
            series.setdefault(LEGEND_NAMES.get(s.scheduler, s.scheduler), []).append((float(s.n_jobs), getattr(s, attr)))
        path = out_dir / f"{stem}.svg"
        _write(path, line_chart(series, title, "number of jobs", y_label))
        written.append(path)
    return written


def format_summary(summary: Sequence[SummaryRow]) -> str:
    lines = [f"{'scheduler':<12} {'n_jobs':>6} {'makespan':>12} {'sd':>10} {'DI(paper)':>10} "
             f"{'DI(conv)':>10} {'cost':>12}"]
    for s in summary:
        lines.append(f"{s.scheduler:<12} {s.n_jobs:>6} {s.makespan_mean:>12.3f} {s.makespan_sd:>10.3f} "
                     f"{s.di_paper_mean:>10.4f} {s.di_conventional_mean:>10.4f} {s.cost_mean:>12.2f}")
    return "\n".join(lines)
