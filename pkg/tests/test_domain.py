import pytest

from slaprov.domain import (
    ClusterState,
    RevenueLedger,
    ServerStatus,
    ServiceClass,
    SessionState,
    TrafficEstimate,
    session_mean_wait,
    session_sla_violated,
)
from slaprov.workload import DistributionDescriptor


def make_class(**kw):
    base = dict(id=1, charge=10, penalty=10, obligation=1.0, jobs_per_session=50, job_rate=2.0, session_rate=0.1)
    base.update(kw)
    return ServiceClass(**base)


def finished(cls, waits):
    s = SessionState(0, 0, 0.0)
    for w in waits:
        s.record_wait(w)
    return s


def test_mean_wait_of_empty_session_is_zero():
    assert session_mean_wait(SessionState(0, 0, 0.0)) == 0.0


def test_mean_wait_is_arithmetic_mean():
    assert session_mean_wait(finished(None, [1.0, 3.0])) == 2.0


def test_waits_equal_to_obligation_meet_sla():
    cls = make_class()
    s = finished(cls, [cls.obligation] * 50)
    assert s.mean_wait == cls.obligation
    assert not session_sla_violated(s, cls)


def test_violation_is_strict():
    cls = make_class(jobs_per_session=2)
    assert not session_sla_violated(finished(cls, [1.0, 1.0]), cls)
    assert session_sla_violated(finished(cls, [1.0, 1.0 + 1e-9]), cls)


def test_wait_sum_below_obligation_is_met():
    cls = make_class()
    s = finished(cls, [49.0 / 50] * 50)
    assert s.mean_wait == pytest.approx(0.98)
    assert not session_sla_violated(s, cls)


def test_incomplete_session_cannot_be_judged():
    with pytest.raises(ValueError):
        session_sla_violated(finished(None, [0.0] * 3), make_class())


@pytest.mark.parametrize("kw", [
    dict(jobs_per_session=0), dict(job_rate=0.0), dict(obligation=0.0), dict(charge=-1.0),
    dict(penalty=-1.0), dict(weight=0.0), dict(session_rate=-0.1), dict(job_spacing="bursty"),
])
def test_service_class_rejects_invalid_fields(kw):
    with pytest.raises(ValueError):
        make_class(**kw)


def test_service_class_derived_quantities():
    cls = make_class(service=DistributionDescriptor.exponential(2.0))
    assert cls.mean_service == 2.0
    assert cls.session_load == pytest.approx(0.1 * 50 / 2.0)
    assert cls.offered_job_rate == pytest.approx(5.0)


def test_cluster_build_and_status():
    c = ClusterState.build([2, 0, 3])
    assert c.allocation == [2, 0, 3]
    assert c.total_servers == 5
    c.check()
    s = c.servers[0]
    assert s.status is ServerStatus.IDLE
    from slaprov.domain import Job
    s.job = Job(0, 0, 0.0, 0)
    assert s.status is ServerStatus.BUSY
    s.target = 2
    assert s.status is ServerStatus.DRAINING
    assert c.allocation == [1, 0, 4]


def test_cluster_check_flags_idle_server_with_waiting_job():
    from slaprov.domain import Job
    c = ClusterState.build([1, 1])
    c.queues[0].append(Job(0, 0, 0.0, 0))
    with pytest.raises(AssertionError):
        c.check()


def test_traffic_estimate_validity_flag():
    assert not TrafficEstimate(1.0, 1.0, arrival_samples=1, service_samples=5).valid
    assert TrafficEstimate(1.0, 1.0, arrival_samples=2, service_samples=2).valid


def test_ledger_books_exactly_one_outcome_per_completion():
    L = RevenueLedger(2, 1200.0, 600.0)
    L.book_acceptance(0, 10.0)
    L.book_acceptance(1, 20.0)
    L.book_completion(0, 700.0, 10.0, 10.0, 10.0, False, 0.2)
    L.book_completion(1, 800.0, 20.0, 10.0, 30.0, True, 2.0)
    assert L.charges == 20.0
    assert L.penalties == 30.0
    assert L.revenue == -10.0
    assert L.completed == [1, 1]
    assert L.sla_met == [1, 0]
    assert L.violated == [0, 1]
    # charges in the acceptance bucket, the penalty in the completion bucket
    assert L.bucket_revenue.tolist() == [20.0, -30.0]
    assert L.bucket_revenue.sum() == L.revenue


def test_ledger_completion_attribution():
    L = RevenueLedger(1, 1200.0, 600.0, attribution="completion")
    L.book_completion(0, 700.0, 10.0, 10.0, 0.0, False, 0.0)
    assert L.bucket_revenue.tolist() == [0.0, 10.0]


def test_ledger_buckets_partition_horizon():
    L = RevenueLedger(1, 7000.0, 600.0)
    e = L.bucket_edges
    assert e[0] == 0 and e[-1] == 7000.0
    assert all(e[1:] > e[:-1])
    assert len(L.bucket_revenue) == 12
    assert L.bucket(6999.0) == 11 and L.bucket(7000.0) == 11


def test_ledger_in_flight_reported_separately():
    L = RevenueLedger(1, 100.0)
    L.book_in_flight(0, 10.0)
    assert L.revenue == 0.0
    assert L.in_flight == [1] and L.in_flight_charges == 10.0


def test_ledger_rejects_unknown_attribution():
    with pytest.raises(ValueError):
        RevenueLedger(1, 100.0, attribution="midpoint")
