"""Command-line entry point: ``hybridsched <bench|schedule|fuzzy-eval|oracle|gen>``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import bench
from .cloud import DI_MODES, Job, VmSpec, evaluate_schedule, jobs_to_csv, vms_to_csv
from .config import SCHEDULERS, ConfigFileError, ExperimentConfig, apply_overrides, load_config
from .fuzzy import CROSSOVER, TYPE_A, TYPE_B, VARIANT_INPUTS, fuzzify, get_model

log = logging.getLogger("hybridsched")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> tuple[str, ...]:
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [n for n in names if n not in SCHEDULERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheduler(s) {bad}; choose from {list(SCHEDULERS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridsched", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, output=True):
        p.add_argument("--config", default="default", help="YAML config file, or 'default'")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--di-mode", choices=DI_MODES)
        if output:
            p.add_argument("--output-dir", help="defaults to $HYBRIDSCHED_OUTPUT_DIR or ./results")

    p = sub.add_parser("bench", help="run the job-count sweep and write CSV + SVG charts")
    common(p)
    p.add_argument("--job-counts", type=_int_list, help="e.g. 100,200,300")
    p.add_argument("--replications", type=int)
    p.add_argument("--schedulers", type=_name_list, help="comma-separated subset of " + ",".join(SCHEDULERS))
    p.add_argument("--workers", type=int, help="worker processes for the experiment grid")
    p.add_argument("--timing", action="store_true", help="record wall-clock times (output no longer reproducible)")

    p = sub.add_parser("schedule", help="run one scheduler on one seeded instance")
    common(p, output=False)
    p.add_argument("--scheduler", choices=SCHEDULERS, default="hybrid")
    p.add_argument("--jobs", type=int, default=100)
    p.add_argument("--vms", type=int, help="VM count override")

    p = sub.add_parser("fuzzy-eval", help="fuzzify crisp inputs and print suitability scores")
    p.add_argument("--config", default="default")
    p.add_argument("--length", type=float, help="job length (MI)")
    p.add_argument("--mips", type=float)
    p.add_argument("--ram", type=float, help="VM RAM (MB)")
    p.add_argument("--bandwidth", type=float)

    p = sub.add_parser("oracle", help="brute-force optimum of a small seeded instance")
    common(p, output=False)
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--vms", type=int, default=3)

    p = sub.add_parser("gen", help="write a seeded workload and infrastructure as CSV")
    common(p)
    p.add_argument("--jobs", type=int, default=100)
    p.add_argument("--vms", type=int)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {
        "master_seed": getattr(args, "seed", None),
        "di_mode": getattr(args, "di_mode", None),
        "output_dir": getattr(args, "output_dir", None),
        "job_counts": getattr(args, "job_counts", None),
        "replications": getattr(args, "replications", None),
        "schedulers": getattr(args, "schedulers", None),
        "workers": getattr(args, "workers", None),
    }
    if getattr(args, "timing", False):
        overrides["record_timing"] = True
    cfg = apply_overrides(cfg, **overrides)
    if getattr(args, "vms", None) is not None:
        infra = dataclasses.replace(cfg.infrastructure, vm_count=args.vms)
        cfg = dataclasses.replace(cfg, infrastructure=infra)
    return cfg


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = Path(cfg.output_dir)
    total = len(cfg.job_counts) * cfg.replications
    done = [0]

    def progress(chunk):
        done[0] += 1
        log.info("cell %d/%d (n_jobs=%d) done", done[0], total, chunk[0].n_jobs)

    rows = bench.run_experiment(cfg, progress)
    summary = bench.aggregate(rows)
    csv_path = bench.emit_csv(rows, out / "results.csv")
    charts = bench.emit_charts(summary, out)
    print(bench.format_summary(summary))
    print(f"wrote {csv_path} and {len(charts)} charts to {out}")
    return 0


def cmd_schedule(args) -> int:
    cfg = _config(args)
    n = args.jobs
    jobs, infra = bench.make_instance(cfg, n, cfg.master_seed)
    schedule, iters = bench.run_scheduler(args.scheduler, jobs, infra, cfg, cfg.master_seed)
    m = evaluate_schedule(schedule, jobs, infra, cfg.di_mode)
    print(f"scheduler       {args.scheduler}")
    print(f"jobs / vms      {n} / {len(infra.vms)}")
    print(f"seed            {cfg.master_seed}")
    print(f"iterations      {iters}")
    print(f"makespan_s      {m.makespan:.6f}")
    print(f"t_min / t_avg   {m.t_min:.6f} / {m.t_avg:.6f}")
    print(f"{'di[' + cfg.di_mode + ']':<16}{m.di:.6f}")
    print(f"di_paper        {m.di_paper:.6f}")
    print(f"di_conventional {m.di_conventional:.6f}")
    print(f"total_cost      {m.total_cost:.6f}")
    return 0


def cmd_fuzzy_eval(args) -> int:
    model = get_model(load_config(args.config).fuzzy)
    given = {"job_length": args.length, "vm_mips": args.mips, "vm_ram": args.ram, "vm_bandwidth": args.bandwidth}
    if all(v is None for v in given.values()):
        raise ConfigFileError("fuzzy-eval needs at least one of --length, --mips, --ram, --bandwidth")
    for name, value in given.items():
        if value is None:
            continue
        var = model.variables[name]
        degrees = fuzzify(var, value)
        text = ", ".join(f"{lab}={d:.4g}" for lab, d in zip(var.labels, degrees))
        print(f"{name} = {value:g}: {text}")
    job = Job(0, args.length) if args.length is not None else None
    vm = VmSpec(0, mips=args.mips or 1.0, ram_mb=args.ram or 0.0, bandwidth=args.bandwidth or 0.0)
    for variant in (TYPE_A, TYPE_B, CROSSOVER):
        if job is None or any(given[n] is None for n in VARIANT_INPUTS[variant][1:]):
            continue
        print(f"suitability[{variant}] = {model.score(job, vm, variant):.6f}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    infra_cfg = dataclasses.replace(cfg.infrastructure, vm_count=args.vms)
    cfg = dataclasses.replace(cfg, infrastructure=infra_cfg)
    jobs, infra = bench.make_instance(cfg, args.jobs, cfg.master_seed)
    schedule, span = bench.brute_force_optimal(jobs, infra)
    print(f"optimal makespan_s {span:.6f}")
    print("assignment (job -> vm): " + " ".join(f"{j}->{v}" for j, v in sorted(schedule.assignment.items())))
    return 0


def cmd_gen(args) -> int:
    cfg = _config(args)
    jobs, infra = bench.make_instance(cfg, args.jobs, cfg.master_seed)
    out = Path(cfg.output_dir)
    bench._write(out / "jobs.csv", jobs_to_csv(jobs))
    bench._write(out / "vms.csv", vms_to_csv(infra))
    print(f"wrote {len(jobs)} jobs and {len(infra.vms)} vms to {out}")
    return 0


COMMANDS = {
    "bench": cmd_bench,
    "schedule": cmd_schedule,
    "fuzzy-eval": cmd_fuzzy_eval,
    "oracle": cmd_oracle,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigFileError, bench.OracleTooLarge, bench.BenchError, OSError, ValueError) as exc:
        print(f"hybridsched {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
