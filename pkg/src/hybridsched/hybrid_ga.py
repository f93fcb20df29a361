"""Fuzzy-guided genetic scheduler with two chromosome populations.

Population A is scored with the (job length, VM mips, VM ram) fuzzy system,
population B with (job length, VM bandwidth). Each generation the fittest
chromosome of each population is crossed gene by gene: for every job the
child keeps whichever parent's VM the four-input crossover system rates more
suitable. The child joins both populations. The loop ends when the two
selected parents are homologous (identical assignments) or when the
generation cap is hit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .cloud import Infrastructure, Job, Schedule, check_instance, exec_time_matrix
from .fuzzy import CROSSOVER, TYPE_A, TYPE_B, SuitabilityModel, get_model

log = logging.getLogger(__name__)

TIE_EPS = 1e-12


class Gene(NamedTuple):
    job_id: int
    vm_id: int


@dataclass(frozen=True)
class GaConfig:
    population_size_per_type: int = 20
    max_generations: int = 100
    seed: int = 0
    mutation_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.population_size_per_type < 2:
            raise ValueError("population_size_per_type must be >= 2")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")


class Problem:
    """A scheduling instance with the lookup tables the GA needs.

    Jobs are kept in id order; chromosome positions follow that order and
    hold VM *indices* into ``infra.vms``.
    """

    def __init__(self, jobs: Sequence[Job], infra: Infrastructure, model: SuitabilityModel | None = None):
        self.jobs = sorted(jobs, key=lambda j: j.id)
        if len({j.id for j in self.jobs}) != len(self.jobs):
            raise ValueError("duplicate job ids")
        self.infra = infra
        self.model = model or get_model()
        self.mask = check_instance(self.jobs, infra)
        self.times = exec_time_matrix(self.jobs, infra)
        self._suit: dict[str, np.ndarray] = {}

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    def suitability(self, variant: str) -> np.ndarray:
        if variant not in self._suit:
            self._suit[variant] = self.model.matrix(self.jobs, self.infra.vms, variant)
        return self._suit[variant]

    def random_feasible(self, rng: np.random.Generator, rows: np.ndarray | None = None) -> np.ndarray:
        """One uniformly drawn feasible VM index per job (or per selected row)."""
        mask = self.mask if rows is None else self.mask[rows]
        counts = mask.sum(axis=1)
        pick = np.floor(rng.random(len(mask)) * counts).astype(np.intp)
        return np.argmax(np.cumsum(mask, axis=1) > pick[:, None], axis=1)


@dataclass
class Chromosome:
    vms: tuple[int, ...]
    variant: str
    fitness: float | None = None

    def genes(self, problem: Problem) -> tuple[Gene, ...]:
        return tuple(Gene(j.id, problem.infra.vms[v].id) for j, v in zip(problem.jobs, self.vms))

    @property
    def array(self) -> np.ndarray:
        return np.fromiter(self.vms, dtype=np.intp, count=len(self.vms))


@dataclass
class Diagnostics:
    generations: int
    crossovers: int
    stop_reason: str
    fitness_a: float
    fitness_b: float
    best_crossover_suitability: float
    best_history: list[float] = field(default_factory=list)


def gene_scores(chrom: Chromosome, problem: Problem, variant: str) -> np.ndarray:
    table = problem.suitability(variant)
    return table[np.arange(problem.n_jobs), chrom.array]


def fitness(chrom: Chromosome, problem: Problem, variant: str | None = None) -> float:
    """Mean per-gene fuzzy suitability under the chromosome's own variant."""
    return float(gene_scores(chrom, problem, variant or chrom.variant).mean())


def score(chrom: Chromosome, problem: Problem) -> Chromosome:
    chrom.fitness = fitness(chrom, problem)
    return chrom


def init_populations(problem: Problem, cfg: GaConfig, rng: np.random.Generator | None = None):
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    pops = []
    for variant in (TYPE_A, TYPE_B):
        pop = [
            score(Chromosome(tuple(problem.random_feasible(rng).tolist()), variant), problem)
            for _ in range(cfg.population_size_per_type)
        ]
        pops.append(pop)
    return pops[0], pops[1]


def _argmax_first(pop: Sequence[Chromosome]) -> int:
    best = 0
    for i, c in enumerate(pop):
        if c.fitness > pop[best].fitness:
            best = i
    return best


def select_parents(pop_a: Sequence[Chromosome], pop_b: Sequence[Chromosome]):
    if not pop_a or not pop_b:
        raise ValueError("both populations must be non-empty")
    return pop_a[_argmax_first(pop_a)], pop_b[_argmax_first(pop_b)]


def fuzzy_crossover(parent_a: Chromosome, parent_b: Chromosome, problem: Problem) -> Chromosome:
    a, b = parent_a.array, parent_b.array
    table = problem.suitability(CROSSOVER)
    rows = np.arange(problem.n_jobs)
    take_b = table[rows, b] > table[rows, a] + TIE_EPS
    child = np.where(take_b, b, a)
    return Chromosome(tuple(child.tolist()), TYPE_A)


def is_homolog(a: Chromosome, b: Chromosome) -> bool:
    return a.vms == b.vms


def _mutate(chrom: Chromosome, problem: Problem, rate: float, rng: np.random.Generator) -> Chromosome:
    hit = np.flatnonzero(rng.random(problem.n_jobs) < rate)
    if hit.size == 0:
        return chrom
    arr = chrom.array
    arr[hit] = problem.random_feasible(rng, hit)
    return Chromosome(tuple(arr.tolist()), chrom.variant)


def evolve(pop_a: list[Chromosome], pop_b: list[Chromosome], problem: Problem, cfg: GaConfig,
           rng: np.random.Generator | None = None):
    """Run the selection/crossover loop on given populations (mutated in place).

    Returns ``(best chromosome, Diagnostics)``.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    for c in (*pop_a, *pop_b):
        if c.fitness is None:
            score(c, problem)

    def cross_fit(c: Chromosome) -> float:
        return fitness(c, problem, CROSSOVER)

    best, best_val = None, -np.inf
    for c in (*pop_a, *pop_b):
        v = cross_fit(c)
        if v > best_val:
            best, best_val = c, v
    history = []
    crossovers = 0

    for generation in range(1, cfg.max_generations + 1):
        parent_a, parent_b = select_parents(pop_a, pop_b)
        if is_homolog(parent_a, parent_b):
            fa, fb = cross_fit(parent_a), cross_fit(parent_b)
            winner = parent_b if fb > fa + TIE_EPS else parent_a
            history.append(best_val)
            log.debug("homolog parents at generation %d", generation)
            return winner, Diagnostics(generation, crossovers, "homolog", parent_a.fitness,
                                       parent_b.fitness, max(fa, fb), history)
        child = fuzzy_crossover(parent_a, parent_b, problem)
        if cfg.mutation_rate > 0:
            child = _mutate(child, problem, cfg.mutation_rate, rng)
        crossovers += 1
        pop_a.append(score(Chromosome(child.vms, TYPE_A), problem))
        pop_b.append(score(Chromosome(child.vms, TYPE_B), problem))
        v = cross_fit(child)
        if v > best_val:
            best, best_val = pop_a[-1], v
        history.append(best_val)

    parent_a, parent_b = select_parents(pop_a, pop_b)
    return best, Diagnostics(cfg.max_generations, crossovers, "cap", parent_a.fitness,
                             parent_b.fitness, best_val, history)


def run(jobs: Sequence[Job], infra: Infrastructure, cfg: GaConfig = GaConfig(),
        model: SuitabilityModel | None = None):
    """Schedule ``jobs`` on ``infra``; returns ``(Schedule, Diagnostics)``."""
    problem = Problem(jobs, infra, model)
    rng = np.random.default_rng(cfg.seed)
    pop_a, pop_b = init_populations(problem, cfg, rng)
    best, diag = evolve(pop_a, pop_b, problem, cfg, rng)
    return Schedule.from_indices(problem.jobs, infra, best.vms), diag
