"""Comparison schedulers: ACO, load-aware ACO (MACO), round-robin, random, greedy.

MACO is a reconstruction: the heuristic desirability of a VM also accounts
for the busy time the ant has already put on it, which is the usual
modification in cloud-scheduling ACO variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cloud import Infrastructure, Job, Schedule, check_instance, exec_time_matrix

_MIN_TIME = 1e-12


@dataclass(frozen=True)
class AcoConfig:
    ants: int = 10
    iterations: int = 50
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.5
    q: float = 100.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ants < 1 or self.iterations < 1:
            raise ValueError("ants and iterations must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie strictly inside (0, 1), got {self.rho}")


@dataclass
class AcoResult:
    schedule: Schedule
    makespan: float
    iterations: int
    best_history: list[float] = field(default_factory=list)


def _sorted_jobs(jobs: Sequence[Job]) -> list[Job]:
    return sorted(jobs, key=lambda j: j.id)


def _roulette(weights: np.ndarray, u: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Pick one column per row of ``weights`` with probability proportional to weight.

    Rows whose weights are all zero fall back to uniform over ``mask``.
    """
    total = weights.sum(axis=-1, keepdims=True)
    dead = total[..., 0] <= 0
    if np.any(dead):
        weights = np.where(dead[..., None], mask.astype(float), weights)
        total = weights.sum(axis=-1, keepdims=True)
    cum = np.cumsum(weights, axis=-1)
    pick = (cum <= (u[..., None] * total)).sum(axis=-1)
    return np.minimum(pick, weights.shape[-1] - 1)


def _scaled(x: np.ndarray, exponent: float) -> np.ndarray:
    # Dividing by the row maximum keeps large exponents from underflowing;
    # roulette probabilities are scale invariant.
    peak = x.max(axis=-1, keepdims=True)
    peak = np.where(peak > 0, peak, 1.0)
    return (x / peak) ** exponent


def _loads(choice: np.ndarray, times: np.ndarray) -> np.ndarray:
    ants, n = choice.shape
    n_vms = times.shape[1]
    spent = times[np.arange(n)[None, :], choice]
    flat = choice + n_vms * np.arange(ants)[:, None]
    return np.bincount(flat.ravel(), weights=spent.ravel(), minlength=ants * n_vms).reshape(ants, n_vms)


def _construct_static(tau, eta_w, mask, cfg, rng):
    w = _scaled(tau, cfg.alpha) * eta_w * mask
    u = rng.random((cfg.ants, len(tau)))
    return _roulette(w[None, :, :], u, mask[None, :, :])


def _construct_load_aware(tau, times, mask, cfg, rng):
    n, n_vms = times.shape
    u = rng.random((cfg.ants, n))
    loads = np.zeros((cfg.ants, n_vms))
    choice = np.empty((cfg.ants, n), dtype=np.intp)
    rows = np.arange(cfg.ants)
    tau_w = _scaled(tau, cfg.alpha) * mask
    top = n_vms - 1
    for j in range(n):
        # eta = 1 / (exec time + ant's load); scaled by its row max, which is
        # min(time + load) over feasible VMs.
        finish = np.maximum(times[j] + loads, _MIN_TIME)
        best = np.where(mask[j], finish, np.inf).min(axis=1, keepdims=True)
        ratio = np.where(mask[j], best / finish, 0.0)  # infeasible columns could exceed 1
        w = tau_w[j] * ratio ** cfg.beta
        cum = np.cumsum(w, axis=1)
        if not cum[:, -1].all():
            pick = _roulette(w, u[:, j], np.broadcast_to(mask[j], w.shape))
        else:
            pick = (cum <= u[:, j, None] * cum[:, -1:]).sum(axis=1)
        np.minimum(pick, top, out=pick)
        choice[:, j] = pick
        loads[rows, pick] += times[j, pick]
    return choice


def aco_search(jobs: Sequence[Job], infra: Infrastructure, cfg: AcoConfig = AcoConfig(),
               load_aware: bool = False) -> AcoResult:
    jobs = _sorted_jobs(jobs)
    mask = check_instance(jobs, infra)
    times = exec_time_matrix(jobs, infra)
    rng = np.random.default_rng(cfg.seed)
    n = len(jobs)
    tau = np.ones_like(times)
    eta_w = _scaled(mask / np.maximum(times, _MIN_TIME), cfg.beta)
    best, best_ms = None, np.inf
    history = []
    for _ in range(cfg.iterations):
        if load_aware:
            choice = _construct_load_aware(tau, times, mask, cfg, rng)
        else:
            choice = _construct_static(tau, eta_w, mask, cfg, rng)
        spans = _loads(choice, times).max(axis=1)
        ib = int(np.argmin(spans))
        tau *= 1.0 - cfg.rho
        tau[np.arange(n), choice[ib]] += cfg.q / max(spans[ib], _MIN_TIME)
        if spans[ib] < best_ms:
            best, best_ms = choice[ib].copy(), float(spans[ib])
        history.append(best_ms)
    return AcoResult(Schedule.from_indices(jobs, infra, best), best_ms, cfg.iterations, history)


def aco_schedule(jobs: Sequence[Job], infra: Infrastructure, cfg: AcoConfig = AcoConfig()) -> Schedule:
    return aco_search(jobs, infra, cfg).schedule


def maco_schedule(jobs: Sequence[Job], infra: Infrastructure, cfg: AcoConfig = AcoConfig()) -> Schedule:
    return aco_search(jobs, infra, cfg, load_aware=True).schedule


def round_robin_schedule(jobs: Sequence[Job], infra: Infrastructure) -> Schedule:
    jobs = _sorted_jobs(jobs)
    mask = check_instance(jobs, infra)
    picks = []
    for i, row in enumerate(mask):
        options = np.flatnonzero(row)
        picks.append(options[i % len(options)])
    return Schedule.from_indices(jobs, infra, picks)


def random_schedule(jobs: Sequence[Job], infra: Infrastructure, seed: int = 0) -> Schedule:
    jobs = _sorted_jobs(jobs)
    mask = check_instance(jobs, infra)
    rng = np.random.default_rng(seed)
    counts = mask.sum(axis=1)
    pick = np.floor(rng.random(len(jobs)) * counts).astype(np.intp)
    idx = np.argmax(np.cumsum(mask, axis=1) > pick[:, None], axis=1)
    return Schedule.from_indices(jobs, infra, idx)


def greedy_schedule(jobs: Sequence[Job], infra: Infrastructure) -> Schedule:
    """Longest job first, each onto the feasible VM that finishes it earliest."""
    jobs = _sorted_jobs(jobs)
    mask = check_instance(jobs, infra)
    times = exec_time_matrix(jobs, infra)
    vm_ids = np.array([vm.id for vm in infra.vms])
    loads = np.zeros(len(infra.vms))
    picks = np.empty(len(jobs), dtype=np.intp)
    for j in sorted(range(len(jobs)), key=lambda k: (-jobs[k].length_mi, jobs[k].id)):
        finish = np.where(mask[j], loads + times[j], np.inf)
        ties = np.flatnonzero(finish == finish.min())
        v = ties[np.argmin(vm_ids[ties])]
        picks[j] = v
        loads[v] += times[j, v]
    return Schedule.from_indices(jobs, infra, picks)
