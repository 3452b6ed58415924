import math

import numpy as np
import pytest

from slaprov.domain import RevenueLedger
from slaprov.metrics import (
    confidence_interval,
    revenue_rate,
    revenue_samples,
    sla_met_fraction,
    t_quantile,
    wait_histogram,
    wait_pdf,
    within_run_interval,
)


def ledger_with(n, violated, c=10.0, r=10.0, horizon=100.0):
    L = RevenueLedger(1, horizon, horizon / 2)
    for j in range(n):
        L.book_acceptance(0, j)
        L.book_completion(0, j + 1.0, float(j), c, r, j < violated, 0.1 * j)
    return L


def test_revenue_rate_arithmetic():
    assert revenue_rate(ledger_with(10, 2), 100.0) == pytest.approx(0.8)


def test_revenue_rate_empty_and_all_violated():
    assert revenue_rate(RevenueLedger(1, 100.0), 100.0) == 0.0
    assert revenue_rate(ledger_with(5, 5), 100.0) == 0.0
    with pytest.raises(ValueError):
        revenue_rate(ledger_with(1, 0), 0.0)


def test_ci_zero_variance():
    ci = confidence_interval([1, 1, 1, 1])
    assert (ci.mean, ci.half_width, ci.defined) == (1.0, 0.0, True)


def test_ci_two_samples_uses_t_table():
    ci = confidence_interval([0, 2])
    assert ci.mean == 1.0
    assert ci.half_width == pytest.approx(12.706)


def test_ci_undefined_below_two_samples():
    assert not confidence_interval([3.0]).defined
    assert math.isnan(confidence_interval([3.0]).half_width)
    assert not confidence_interval([]).defined


def test_t_quantiles():
    assert t_quantile(1) == 12.706
    assert t_quantile(11) == 2.201
    assert t_quantile(30) == 2.042
    assert t_quantile(200) == pytest.approx(1.96, abs=1e-3)


def test_t_table_against_scipy():
    from scipy import stats
    for df in range(1, 31):
        assert t_quantile(df) == pytest.approx(stats.t.ppf(0.975, df), abs=6e-4)


def test_two_hour_run_gives_twelve_buckets():
    L = RevenueLedger(1, 7200.0, 600.0)
    assert len(L.bucket_rates()) == 12
    assert within_run_interval(L).defined


def test_ci_shrinks_like_inverse_sqrt_n():
    rng = np.random.default_rng(0)
    h = [np.mean([confidence_interval(rng.normal(size=n)).half_width for _ in range(400)]) for n in (25, 100)]
    assert h[0] / h[1] == pytest.approx(2.0, rel=0.1)


def test_sla_fraction_cases():
    assert sla_met_fraction(ledger_with(4, 0), 0) == 1.0
    assert sla_met_fraction(ledger_with(4, 4), 0) == 0.0
    assert sla_met_fraction(ledger_with(4, 1), 0) == 0.75
    assert math.isnan(sla_met_fraction(RevenueLedger(1, 10.0), 0))


def test_bucket_revenue_sums_to_total():
    L = ledger_with(20, 7, horizon=40.0)
    samples = revenue_samples(L)
    assert sum(s.revenue for s in samples) == pytest.approx(L.revenue)
    assert samples[0].start == 0 and samples[-1].end == 40.0
    assert all(a.end == b.start for a, b in zip(samples, samples[1:]))


def test_pdf_mass_equals_completions():
    L = ledger_with(37, 3)
    pdf = wait_pdf(L, 0)
    assert pdf.counts.sum() == 37
    assert pdf.bin_width == 0.05
    assert (pdf.density * pdf.bin_width).sum() == pytest.approx(1.0)


def test_histogram_bins():
    assert wait_histogram([0.0, 0.04, 0.05, 0.12], 0.05).tolist() == [2, 1, 1]
    assert wait_histogram([], 0.05).size == 0
