import math

import numpy as np
import pytest

from slaprov.domain import ServiceClass
from slaprov.estimation import WindowAccumulator, prior_estimate
from slaprov.workload import DistributionDescriptor


def cls(**kw):
    base = dict(id=1, charge=10, penalty=10, obligation=1.0, jobs_per_session=50, job_rate=2.0, session_rate=0.04)
    base.update(kw)
    return ServiceClass(**base)


def test_prior_is_full_offered_rate():
    e = prior_estimate(cls())
    assert e.lam == pytest.approx(2.0)
    assert (e.b, e.ca2, e.cs2) == (1.0, 1.0, 1.0)
    assert e.session_rate == 0.04


def test_empty_window_keeps_prior():
    acc = WindowAccumulator([cls()])
    assert acc.publish_estimates(5.0)[0].lam == pytest.approx(2.0)


def test_deterministic_spacing_exact_with_full_weight():
    acc = WindowAccumulator([cls()], smoothing=1.0)
    for j in range(11):
        acc.record_job_arrival(0, 0.5 * j)
    est = acc.publish_estimates(5.0)[0]
    assert est.lam == pytest.approx(2.0)
    assert est.ca2 == pytest.approx(0.0, abs=1e-12)
    assert est.arrival_samples == 10


def test_first_arrival_gives_no_sample():
    acc = WindowAccumulator([cls()], smoothing=1.0)
    acc.record_job_arrival(0, 1.0)
    assert acc._gaps[0].count == 0
    acc.record_job_arrival(0, 2.0)
    assert acc._gaps[0].count == 1 and acc._gaps[0].total == 1.0


def test_predecessor_carries_across_windows():
    acc = WindowAccumulator([cls()], smoothing=1.0)
    for t in (0.0, 1.0, 2.0):
        acc.record_job_arrival(0, t)
    acc.publish_estimates(2.0)
    acc.record_job_arrival(0, 3.0)
    assert acc._gaps[0].total == 1.0


def test_service_samples_moments():
    rng = np.random.default_rng(0)
    acc = WindowAccumulator([cls()], smoothing=1.0)
    for v in rng.exponential(1.0, 100_000):
        acc.record_service(0, float(v))
    est = acc.publish_estimates(1.0)[0]
    assert est.b == pytest.approx(1.0, abs=0.02)
    assert est.cs2 == pytest.approx(1.0, abs=0.05)


def test_smoothing_blend():
    acc = WindowAccumulator([cls()], smoothing=0.3)
    acc.record_service(0, 2.0)
    acc.record_service(0, 2.0)
    est = acc.publish_estimates(1.0)[0]
    assert est.b == pytest.approx(0.3 * 2.0 + 0.7 * 1.0)


def test_single_sample_is_carried_until_max_span():
    acc = WindowAccumulator([cls()], smoothing=1.0, max_span=30.0)
    acc.record_job_arrival(0, 0.0)
    acc.record_job_arrival(0, 4.0)
    assert acc.publish_estimates(10.0)[0].lam == pytest.approx(2.0)
    # idle class: after max_span the rate is published anyway and decays
    assert acc.publish_estimates(30.0)[0].lam == pytest.approx(1 / 30.0)


def test_pinned_service_uses_descriptor():
    c = cls(service=DistributionDescriptor.hyperexponential2(0.8, 0.2, 0.2, 4.2))
    acc = WindowAccumulator([c], smoothing=1.0, pin_service=True)
    acc.record_service(0, 9.0)
    acc.record_service(0, 9.0)
    est = acc.publish_estimates(1.0)[0]
    assert est.b == pytest.approx(1.0) and est.cs2 == pytest.approx(6.12)


def test_session_rate_tracks_offered_sessions():
    acc = WindowAccumulator([cls(session_rate=0.0)], session_memory=100.0)
    for k in range(1, 2001):
        acc.record_session_arrival(0, float(k))
        acc.publish_estimates(float(k))
    assert acc.estimates[0].session_rate == pytest.approx(1.0, rel=0.02)


def test_rejects_time_going_backwards():
    acc = WindowAccumulator([cls()])
    acc.record_job_arrival(0, 2.0)
    with pytest.raises(ValueError):
        acc.record_job_arrival(0, 1.0)


@pytest.mark.parametrize("w", [0.0, -0.1, 1.5])
def test_smoothing_range(w):
    with pytest.raises(ValueError):
        WindowAccumulator([cls()], smoothing=w)


def test_degenerate_inputs_never_give_nan():
    acc = WindowAccumulator([cls()], smoothing=1.0)
    for _ in range(5):
        acc.record_job_arrival(0, 1.0)
        acc.record_service(0, 0.0)
    est = acc.publish_estimates(1.0)[0]
    for v in (est.lam, est.b, est.ca2, est.cs2):
        assert math.isfinite(v) and v >= 0


def test_unserved_class_service_estimate_drifts_to_prior():
    acc = WindowAccumulator([cls()], smoothing=0.5, max_span=10.0)
    acc.record_service(0, 5.0)
    acc.record_service(0, 7.0)
    assert acc.publish_estimates(1.0)[0].b == pytest.approx(0.5 * 6.0 + 0.5 * 1.0)
    # no service samples for less than max_span: estimate held
    assert acc.publish_estimates(9.0)[0].b == pytest.approx(3.5)
    # one full span without samples: one blend step toward the prior mean 1
    assert acc.publish_estimates(11.0)[0].b == pytest.approx(0.5 * 3.5 + 0.5 * 1.0)
    for t in range(21, 400, 10):
        est = acc.publish_estimates(float(t))[0]
    assert est.b == pytest.approx(1.0, abs=1e-6)
    assert est.cs2 == pytest.approx(1.0, abs=1e-6)
