"""Revenue rates, SLA fractions, waiting-time histograms and Student-t
confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import RevenueLedger

# two-sided 97.5% quantiles of Student's t for 1..30 degrees of freedom
_T975 = (
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
)
_Z975 = 1.959964


@dataclass(frozen=True)
class Interval:
    mean: float
    half_width: float
    defined: bool = True

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


@dataclass(frozen=True)
class RevenueSample:
    start: float
    end: float
    revenue: float
    accepted: int
    rejected: int
    violated: int


@dataclass
class WaitPdf:
    bin_width: float
    counts: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return np.arange(len(self.counts) + 1) * self.bin_width

    @property
    def density(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros(len(self.counts))
        return self.counts / (total * self.bin_width)


def t_quantile(df: int) -> float:
    """0.975 quantile of Student's t (table up to 30 df, normal beyond)."""
    if df < 1:
        raise ValueError("need at least one degree of freedom")
    return _T975[df - 1] if df <= len(_T975) else _Z975


def confidence_interval(samples, level: float = 0.95) -> Interval:
    if not math.isclose(level, 0.95):
        raise ValueError("only 95% intervals are tabulated")
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return Interval(float(x.mean()) if x.size else math.nan, math.nan, False)
    sd = x.std(ddof=1)
    return Interval(float(x.mean()), float(t_quantile(x.size - 1) * sd / math.sqrt(x.size)))


def revenue_rate(ledger: RevenueLedger, span: float | None = None) -> float:
    """Net revenue of completed sessions per second of simulated time."""
    span = ledger.horizon if span is None else span
    if not span > 0:
        raise ValueError("span must be > 0")
    return (ledger.charges - ledger.penalties) / span


def sla_met_fraction(ledger: RevenueLedger, i: int) -> float:
    """Share of completed class-i sessions that met their SLA (NaN if none)."""
    done = ledger.completed[i]
    if done == 0:
        return math.nan
    return (done - ledger.violated[i]) / done


def revenue_samples(ledger: RevenueLedger) -> list[RevenueSample]:
    e = ledger.bucket_edges
    return [
        RevenueSample(float(e[b]), float(e[b + 1]), float(ledger.bucket_revenue[b]),
                      int(ledger.bucket_accepted[b]), int(ledger.bucket_rejected[b]),
                      int(ledger.bucket_violated[b]))
        for b in range(len(ledger.bucket_revenue))
    ]


def within_run_interval(ledger: RevenueLedger) -> Interval:
    """CI of the revenue rate from the run's time buckets."""
    return confidence_interval(ledger.bucket_rates())


def wait_pdf(ledger: RevenueLedger, i: int, bin_width: float | None = None) -> WaitPdf:
    width = ledger.pdf_bin if bin_width is None else bin_width
    return WaitPdf(width, wait_histogram(ledger.session_waits[i], width))


def wait_histogram(waits, width: float) -> np.ndarray:
    """Counts per bin [j*width, (j+1)*width) up to the largest wait."""
    if not width > 0:
        raise ValueError("bin width must be > 0")
    w = np.asarray(waits, dtype=float)
    if w.size == 0:
        return np.zeros(0, dtype=np.int64)
    idx = (w // width).astype(np.int64)
    return np.bincount(idx, minlength=int(idx.max()) + 1)
