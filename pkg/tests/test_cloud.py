import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsched.cloud import (
    ConfigError,
    InfraConfig,
    Infrastructure,
    Job,
    Schedule,
    ScheduleError,
    VmSpec,
    evaluate_schedule,
    execution_time,
    generate_infrastructure,
    generate_workload,
    jobs_from_csv,
    jobs_to_csv,
    vms_from_csv,
    vms_to_csv,
)


def two_vm_case():
    infra = Infrastructure.flat([VmSpec(0, 1000), VmSpec(1, 2000)])
    jobs = [Job(0, 4000), Job(1, 6000)]
    return jobs, infra, Schedule({0: 0, 1: 1})


@pytest.mark.parametrize("length, mips, expected", [(1000, 500, 2.0), (20000, 2000, 10.0), (0, 777, 0.0)])
def test_execution_time(length, mips, expected):
    assert execution_time(Job(0, length), VmSpec(0, mips)) == expected


def test_execution_time_rejects_non_positive_mips():
    with pytest.raises(ConfigError):
        execution_time(Job(0, 10), VmSpec(3, 0))


def test_evaluate_two_vm_case():
    jobs, infra, sched = two_vm_case()
    m = evaluate_schedule(sched, jobs, infra)
    assert m.per_vm_time == (4.0, 3.0)
    assert m.makespan == m.t_max == 4.0
    assert m.t_avg == 3.5
    assert m.di_paper == pytest.approx(2.0, abs=1e-12)
    assert m.di_conventional == pytest.approx(0.285714, abs=1e-6)
    assert m.di == m.di_paper
    assert evaluate_schedule(sched, jobs, infra, "conventional").di == m.di_conventional


def test_balanced_case():
    infra = Infrastructure.flat([VmSpec(i, 1000) for i in range(4)])
    jobs = [Job(i, 3000) for i in range(4)]
    m = evaluate_schedule(Schedule({i: i for i in range(4)}), jobs, infra)
    assert m.di_paper == pytest.approx(2.0)
    assert m.di_conventional == 0.0


def test_single_job_on_fifty_vms():
    infra = Infrastructure.flat([VmSpec(i, 1000) for i in range(50)])
    m = evaluate_schedule(Schedule({0: 7}), [Job(0, 5000)], infra)
    assert m.t_min == 0.0
    assert m.di_conventional == pytest.approx(50.0)
    assert m.di_paper == pytest.approx(50.0)


def test_zero_work_gives_zero_di():
    infra = Infrastructure.flat([VmSpec(0, 1000), VmSpec(1, 1000)])
    m = evaluate_schedule(Schedule({0: 0}), [Job(0, 0)], infra)
    assert m.di_paper == m.di_conventional == 0.0


def test_cost_model():
    infra = Infrastructure.flat([VmSpec(0, 1000, price_rate=2.0), VmSpec(1, 500, price_rate=1.0)])
    jobs = [Job(0, 4000), Job(1, 1000)]
    m = evaluate_schedule(Schedule({0: 0, 1: 1}), jobs, infra)
    # 4 s * 2 * 1000/1000 + 2 s * 1 * 500/1000
    assert m.total_cost == pytest.approx(9.0)


def test_evaluate_errors_name_the_job():
    jobs, infra, _ = two_vm_case()
    with pytest.raises(ScheduleError, match="job 1 is not assigned"):
        evaluate_schedule(Schedule({0: 0}), jobs, infra)
    with pytest.raises(ScheduleError, match="unknown vm 9"):
        evaluate_schedule(Schedule({0: 0, 1: 9}), jobs, infra)
    narrow = Infrastructure.flat([VmSpec(0, 1000, pe_count=1), VmSpec(1, 1000, pe_count=4)])
    with pytest.raises(ScheduleError, match="job 0 needs 3 PEs"):
        evaluate_schedule(Schedule({0: 0}), [Job(0, 10, 3)], narrow)
    with pytest.raises(ValueError):
        evaluate_schedule(Schedule({0: 0, 1: 1}), jobs, infra, "sideways")


# --- generators -------------------------------------------------------------


def test_workload_ranges_and_determinism():
    jobs = generate_workload(100, 42)
    assert len(jobs) == 100
    assert all(1000 <= j.length_mi <= 20000 and 1 <= j.required_pes <= 4 for j in jobs)
    assert [j.id for j in jobs] == list(range(100))
    assert generate_workload(100, 42) == jobs
    assert generate_workload(100, 43) != jobs


def test_workload_mean_length():
    lengths = [j.length_mi for j in generate_workload(1000, 7)]
    mean, sd = 10500.0, 19000.0 / math.sqrt(12.0)
    band = 3 * sd / math.sqrt(1000)  # about 520 MI
    assert abs(np.mean(lengths) - mean) <= band
    assert 9500 <= np.mean(lengths) <= 11500


def test_workload_rejects_empty():
    with pytest.raises(ConfigError):
        generate_workload(0, 1)


def test_infrastructure_defaults():
    infra = generate_infrastructure(InfraConfig(), seed=1)
    assert len(infra.datacenters) == 10
    assert all(2 <= len(dc.hosts) <= 6 for dc in infra.datacenters)
    assert len(infra.vms) == 50
    host_ids = {h.id for h in infra.hosts}
    for vm in infra.vms:
        assert 500 <= vm.mips <= 2000
        assert 256 <= vm.ram_mb <= 2048
        assert 500 <= vm.bandwidth <= 1000
        assert 1 <= vm.pe_count <= 4
        assert vm.host_id in host_ids
    assert any(vm.pe_count == 4 for vm in infra.vms)
    assert generate_infrastructure(InfraConfig(), seed=1) == infra


def test_vms_placed_round_robin_over_hosts():
    infra = generate_infrastructure(InfraConfig(), seed=3)
    hosts = infra.hosts
    assert [vm.host_id for vm in infra.vms] == [hosts[i % len(hosts)].id for i in range(50)]


def test_single_vm_forced_to_four_pes():
    for seed in range(20):
        infra = generate_infrastructure(InfraConfig(vm_count=1), seed)
        assert infra.vms[0].pe_count == 4


def test_infrastructure_rejects_bad_counts():
    with pytest.raises(ConfigError):
        generate_infrastructure(InfraConfig(vm_count=0))


def test_infrastructure_rejects_dangling_host():
    from hybridsched.cloud import Datacenter, Host

    with pytest.raises(ConfigError, match="unknown host"):
        Infrastructure((Datacenter(0, (Host(0, 0),)),), (VmSpec(0, 1000, host_id=5),))


def test_csv_round_trip():
    jobs = generate_workload(25, 5)
    infra = generate_infrastructure(InfraConfig(vm_count=7, datacenter_count=2), 5)
    text = jobs_to_csv(jobs)
    assert text.splitlines()[0] == "id,length_mi,required_pes"
    assert jobs_from_csv(text) == jobs
    assert tuple(vms_from_csv(vms_to_csv(infra))) == infra.vms


# --- properties -------------------------------------------------------------

instance = st.integers(1, 12).flatmap(lambda n_vms: st.tuples(
    st.lists(st.floats(100, 5000), min_size=n_vms, max_size=n_vms),
    st.lists(st.tuples(st.floats(0, 20000), st.integers(0, n_vms - 1)), min_size=1, max_size=25),
))


def _build(data):
    mips, jobs = data
    infra = Infrastructure.flat([VmSpec(i, m) for i, m in enumerate(mips)])
    job_list = [Job(i, length) for i, (length, _) in enumerate(jobs)]
    return job_list, infra, Schedule({i: v for i, (_, v) in enumerate(jobs)})


@settings(max_examples=1000, deadline=None)
@given(data=instance, perm_seed=st.integers(0, 2**32 - 1))
def test_metrics_permutation_invariant_and_bounded(data, perm_seed):
    jobs, infra, sched = _build(data)
    m = evaluate_schedule(sched, jobs, infra)
    shuffled = list(np.random.default_rng(perm_seed).permutation(len(jobs)))
    m2 = evaluate_schedule(sched, [jobs[i] for i in shuffled], infra)
    np.testing.assert_allclose(m2.per_vm_time, m.per_vm_time, rtol=1e-12, atol=1e-12)
    assert m.di_conventional >= 0
    if m.t_avg > 0:
        assert m.di_paper >= m.t_max / m.t_avg - 1e-12 >= 1 - 1e-9
    quickest_largest = max(min(execution_time(j, v) for v in infra.vms) for j in jobs)
    assert m.makespan >= quickest_largest - 1e-9


@settings(max_examples=1000, deadline=None)
@given(data=instance, mover=st.integers(0, 24), target=st.integers(0, 11))
def test_untouched_vm_times_are_local(data, mover, target):
    jobs, infra, sched = _build(data)
    mover %= len(jobs)
    target %= len(infra.vms)
    before = evaluate_schedule(sched, jobs, infra).per_vm_time
    moved = dict(sched.assignment)
    source = moved[mover]
    moved[mover] = target
    after = evaluate_schedule(Schedule(moved), jobs, infra).per_vm_time
    for v in range(len(infra.vms)):
        if v not in (source, target):
            assert after[v] == before[v]
