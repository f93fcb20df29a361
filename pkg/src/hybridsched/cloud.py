"""Batch cloud model: jobs, VMs, seeded generators and schedule metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

DI_MODES = ("paper", "conventional")

# Stream tags mixed into generator seeds so workload and infrastructure
# draws never share a random stream.
_WORKLOAD_STREAM = 0x10B5
_INFRA_STREAM = 0x1AF4


class ConfigError(ValueError):
    pass


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Job:
    id: int
    length_mi: float
    required_pes: int = 1


@dataclass(frozen=True)
class VmSpec:
    id: int
    mips: float
    ram_mb: float = 1024.0
    bandwidth: float = 750.0
    pe_count: int = 4
    price_rate: float = 1.0
    host_id: int = 0
    datacenter_id: int = 0


@dataclass(frozen=True)
class Host:
    id: int
    datacenter_id: int


@dataclass(frozen=True)
class Datacenter:
    id: int
    hosts: tuple[Host, ...]


@dataclass(frozen=True)
class Infrastructure:
    datacenters: tuple[Datacenter, ...]
    vms: tuple[VmSpec, ...]

    def __post_init__(self) -> None:
        host_ids = {h.id for dc in self.datacenters for h in dc.hosts}
        for vm in self.vms:
            if self.datacenters and vm.host_id not in host_ids:
                raise ConfigError(f"vm {vm.id} references unknown host {vm.host_id}")
        ids = [vm.id for vm in self.vms]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate vm ids")

    @classmethod
    def flat(cls, vms: Iterable[VmSpec]) -> "Infrastructure":
        """Single datacenter/host holding every VM; handy for hand-built instances."""
        vms = tuple(replace(v, host_id=0, datacenter_id=0) for v in vms)
        return cls((Datacenter(0, (Host(0, 0),)),), vms)

    @property
    def hosts(self) -> list[Host]:
        return [h for dc in self.datacenters for h in dc.hosts]

    def vm_index(self) -> dict[int, int]:
        return {vm.id: i for i, vm in enumerate(self.vms)}


@dataclass(frozen=True)
class Schedule:
    """Total mapping from job id to VM id."""

    assignment: Mapping[int, int]

    @classmethod
    def from_indices(cls, jobs: Sequence[Job], infra: Infrastructure, vm_idx) -> "Schedule":
        return cls({job.id: infra.vms[int(v)].id for job, v in zip(jobs, vm_idx)})

    def vector(self, jobs: Sequence[Job]) -> tuple[int, ...]:
        return tuple(self.assignment[j.id] for j in jobs)


@dataclass(frozen=True)
class ScheduleMetrics:
    per_vm_time: tuple[float, ...]
    makespan: float
    t_max: float
    t_min: float
    t_avg: float
    di: float
    di_paper: float
    di_conventional: float
    total_cost: float


@dataclass(frozen=True)
class InfraConfig:
    vm_count: int = 50
    datacenter_count: int = 10
    hosts_min: int = 2
    hosts_max: int = 6
    mips: tuple[float, float] = (500.0, 2000.0)
    ram_mb: tuple[float, float] = (256.0, 2048.0)
    bandwidth: tuple[float, float] = (500.0, 1000.0)
    pes: tuple[int, int] = (1, 4)
    price_rate: float = 1.0


@dataclass(frozen=True)
class WorkloadConfig:
    length_mi: tuple[float, float] = (1000.0, 20000.0)
    pes: tuple[int, int] = (1, 4)


def execution_time(job: Job, vm: VmSpec) -> float:
    if vm.mips <= 0:
        raise ConfigError(f"vm {vm.id}: mips must be positive, got {vm.mips}")
    return job.length_mi / vm.mips


def feasible(job: Job, vm: VmSpec) -> bool:
    return vm.pe_count >= job.required_pes


def feasibility_mask(jobs: Sequence[Job], infra: Infrastructure) -> np.ndarray:
    """Boolean ``(n_jobs, n_vms)``: True where the VM has enough PEs for the job."""
    need = np.array([j.required_pes for j in jobs])
    have = np.array([v.pe_count for v in infra.vms])
    return have[None, :] >= need[:, None]


def check_instance(jobs: Sequence[Job], infra: Infrastructure) -> np.ndarray:
    """Return the feasibility mask, or raise naming the first job no VM can host."""
    mask = feasibility_mask(jobs, infra)
    for job, row in zip(jobs, mask):
        if not row.any():
            raise ScheduleError(f"job {job.id} (needs {job.required_pes} PEs) has no feasible VM")
    return mask


def exec_time_matrix(jobs: Sequence[Job], infra: Infrastructure) -> np.ndarray:
    mips = np.array([v.mips for v in infra.vms], dtype=float)
    if np.any(mips <= 0):
        raise ConfigError("every vm needs positive mips")
    lengths = np.array([j.length_mi for j in jobs], dtype=float)
    return lengths[:, None] / mips[None, :]


def degree_of_imbalance(t_max: float, t_min: float, t_avg: float, mode: str = "paper") -> float:
    if mode not in DI_MODES:
        raise ValueError(f"di_mode must be one of {DI_MODES}, got {mode!r}")
    if t_avg == 0:
        return 0.0
    if mode == "paper":
        return (t_max + t_min) / t_avg
    return (t_max - t_min) / t_avg


def evaluate_schedule(
    schedule: Schedule, jobs: Sequence[Job], infra: Infrastructure, di_mode: str = "paper"
) -> ScheduleMetrics:
    index = infra.vm_index()
    busy = [0.0] * len(infra.vms)
    cost = 0.0
    for job in jobs:
        if job.id not in schedule.assignment:
            raise ScheduleError(f"job {job.id} is not assigned")
        vm_id = schedule.assignment[job.id]
        if vm_id not in index:
            raise ScheduleError(f"job {job.id} assigned to unknown vm {vm_id}")
        vm = infra.vms[index[vm_id]]
        if not feasible(job, vm):
            raise ScheduleError(
                f"job {job.id} needs {job.required_pes} PEs but vm {vm_id} has {vm.pe_count}"
            )
        t = execution_time(job, vm)
        busy[index[vm_id]] += t
        cost += t * vm.price_rate * vm.mips / 1000.0
    t_max, t_min = max(busy), min(busy)
    t_avg = sum(busy) / len(busy)
    di_p = degree_of_imbalance(t_max, t_min, t_avg, "paper")
    di_c = degree_of_imbalance(t_max, t_min, t_avg, "conventional")
    return ScheduleMetrics(
        per_vm_time=tuple(busy),
        makespan=t_max,
        t_max=t_max,
        t_min=t_min,
        t_avg=t_avg,
        di=degree_of_imbalance(t_max, t_min, t_avg, di_mode),
        di_paper=di_p,
        di_conventional=di_c,
        total_cost=cost,
    )


def makespan_of(vm_idx, times: np.ndarray) -> float:
    """Makespan of an index assignment given a precomputed exec-time matrix."""
    vm_idx = np.asarray(vm_idx)
    loads = np.bincount(vm_idx, weights=times[np.arange(len(vm_idx)), vm_idx], minlength=times.shape[1])
    return float(loads.max())


# --- generators -------------------------------------------------------------


def generate_workload(n_jobs: int, seed: int, config: WorkloadConfig = WorkloadConfig()) -> list[Job]:
    if n_jobs < 1:
        raise ConfigError(f"n_jobs must be >= 1, got {n_jobs}")
    rng = np.random.default_rng([int(seed), _WORKLOAD_STREAM])
    lo, hi = config.length_mi
    lengths = rng.uniform(lo, hi, n_jobs)
    pes = rng.integers(config.pes[0], config.pes[1], endpoint=True, size=n_jobs)
    return [Job(i, float(length), int(p)) for i, (length, p) in enumerate(zip(lengths, pes))]


def generate_infrastructure(config: InfraConfig = InfraConfig(), seed: int = 0) -> Infrastructure:
    if config.vm_count < 1 or config.datacenter_count < 1:
        raise ConfigError("vm_count and datacenter_count must be >= 1")
    rng = np.random.default_rng([int(seed), _INFRA_STREAM])
    datacenters = []
    host_id = 0
    for dc in range(config.datacenter_count):
        n_hosts = int(rng.integers(config.hosts_min, config.hosts_max, endpoint=True))
        hosts = tuple(Host(host_id + k, dc) for k in range(n_hosts))
        host_id += n_hosts
        datacenters.append(Datacenter(dc, hosts))
    hosts = [h for dc in datacenters for h in dc.hosts]

    def draw_vm(i: int) -> VmSpec:
        host = hosts[i % len(hosts)]
        return VmSpec(
            id=i,
            mips=float(rng.uniform(*config.mips)),
            ram_mb=float(rng.uniform(*config.ram_mb)),
            bandwidth=float(rng.uniform(*config.bandwidth)),
            pe_count=int(rng.integers(config.pes[0], config.pes[1], endpoint=True)),
            price_rate=config.price_rate,
            host_id=host.id,
            datacenter_id=host.datacenter_id,
        )

    vms = [draw_vm(i) for i in range(config.vm_count)]
    # Every generated workload must be schedulable: keep re-drawing the last
    # VM until some VM offers the maximum PE count.
    while not any(vm.pe_count >= config.pes[1] for vm in vms):
        vms[-1] = draw_vm(config.vm_count - 1)
    return Infrastructure(tuple(datacenters), tuple(vms))


# --- CSV snapshots ----------------------------------------------------------

JOB_HEADER = ("id", "length_mi", "required_pes")
VM_HEADER = ("id", "mips", "ram_mb", "bandwidth", "pe_count", "price_rate", "host_id", "datacenter_id")


def jobs_to_csv(jobs: Sequence[Job]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(JOB_HEADER)
    for j in jobs:
        w.writerow((j.id, repr(j.length_mi), j.required_pes))
    return buf.getvalue()


def jobs_from_csv(text: str) -> list[Job]:
    rows = csv.DictReader(io.StringIO(text))
    return [Job(int(r["id"]), float(r["length_mi"]), int(r["required_pes"])) for r in rows]


def vms_to_csv(infra: Infrastructure) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VM_HEADER)
    for v in infra.vms:
        w.writerow((v.id, repr(v.mips), repr(v.ram_mb), repr(v.bandwidth), v.pe_count,
                    repr(v.price_rate), v.host_id, v.datacenter_id))
    return buf.getvalue()


def vms_from_csv(text: str) -> list[VmSpec]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append(VmSpec(
            id=int(r["id"]), mips=float(r["mips"]), ram_mb=float(r["ram_mb"]),
            bandwidth=float(r["bandwidth"]), pe_count=int(r["pe_count"]),
            price_rate=float(r["price_rate"]), host_id=int(r["host_id"]),
            datacenter_id=int(r["datacenter_id"]),
        ))
    return out
