"""Observation-window estimates of per-class traffic (lambda, b, ca2, cs2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import ServiceClass, TrafficEstimate


@dataclass
class _Moments:
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, v: float) -> None:
        self.count += 1
        self.total += v
        self.total_sq += v * v

    def mean(self) -> float:
        return self.total / self.count

    def scv(self) -> float:
        mean = self.mean()
        if mean <= 0:
            return 0.0
        var = (self.total_sq - self.count * mean * mean) / (self.count - 1)
        return max(var, 0.0) / (mean * mean)


def prior_estimate(cls: ServiceClass) -> TrafficEstimate:
    """Estimate before any observation: the full offered job rate."""
    return TrafficEstimate(cls.offered_job_rate, cls.mean_service, 1.0, cls.service.scv,
                           session_rate=cls.session_rate)


class WindowAccumulator:
    """Per-class windowed statistics blended by exponential smoothing.

    A window closes at every ``publish_estimates`` call.  A class with fewer
    than two samples keeps its previous estimate and carries its samples
    into the next window, unless its window already spans ``max_span``
    seconds; then the arrival rate is published anyway (possibly zero) so
    that an idle class decays.  Service statistics likewise drift back to
    the class prior after ``max_span`` seconds without two samples, so a
    class that stopped being served cannot keep a stale estimate forever.

    Offered session rates (rejected sessions included) are tracked by a
    continuous-time exponential average with memory ``session_memory``.
    """

    def __init__(self, classes, smoothing: float = 0.3, pin_service: bool = False,
                 max_span: float = 30.0, start: float = 0.0, session_memory: float = 600.0):
        if not 0 < smoothing <= 1:
            raise ValueError("smoothing must be in (0, 1]")
        self.classes = list(classes)
        self.w = smoothing
        self.pin_service = pin_service
        self.max_span = max_span
        m = len(self.classes)
        self.estimates = [prior_estimate(c) for c in self.classes]
        self._gaps = [_Moments() for _ in range(m)]
        self._services = [_Moments() for _ in range(m)]
        self._last_arrival: list[float | None] = [None] * m
        self._arrival_start = [start] * m
        self._service_start = [start] * m
        self.session_memory = session_memory
        self._sessions_seen = [0] * m
        self._session_clock = start

    def record_job_arrival(self, i: int, t: float) -> None:
        last = self._last_arrival[i]
        if last is not None:
            if t < last:
                raise ValueError("arrival times must be nondecreasing per class")
            self._gaps[i].add(t - last)
        self._last_arrival[i] = t

    def record_session_arrival(self, i: int, t: float) -> None:
        self._sessions_seen[i] += 1

    def record_service(self, i: int, duration: float) -> None:
        self._services[i].add(duration)

    def _blend(self, old: float, fresh: float) -> float:
        return self.w * fresh + (1.0 - self.w) * old

    def publish_estimates(self, now: float) -> list[TrafficEstimate]:
        dt = now - self._session_clock
        if dt > 0 or any(self._sessions_seen):
            decay = math.exp(-dt / self.session_memory)
            for i, est in enumerate(self.estimates):
                est.session_rate = est.session_rate * decay + self._sessions_seen[i] / self.session_memory
                self._sessions_seen[i] = 0
            self._session_clock = now
        for i, cls in enumerate(self.classes):
            est = self.estimates[i]
            gaps = self._gaps[i]
            span = now - self._arrival_start[i]
            if gaps.count >= 2 and span > 0:
                est.lam = self._blend(est.lam, gaps.count / span)
                est.ca2 = self._blend(est.ca2, gaps.scv())
                est.arrival_samples = gaps.count
                self._gaps[i] = _Moments()
                self._arrival_start[i] = now
            elif span >= self.max_span:
                est.lam = self._blend(est.lam, gaps.count / span)
                est.arrival_samples = gaps.count
                self._gaps[i] = _Moments()
                self._arrival_start[i] = now
            svc = self._services[i]
            if self.pin_service:
                est.b, est.cs2 = cls.mean_service, cls.service.scv
                est.service_samples = svc.count
                self._services[i] = _Moments()
            elif svc.count >= 2:
                est.b = self._blend(est.b, svc.mean())
                est.cs2 = self._blend(est.cs2, svc.scv())
                est.service_samples = svc.count
                self._services[i] = _Moments()
                self._service_start[i] = now
            elif now - self._service_start[i] >= self.max_span:
                est.b = self._blend(est.b, cls.mean_service)
                est.cs2 = self._blend(est.cs2, cls.service.scv)
                self._service_start[i] = now
        return self.snapshot()

    def snapshot(self) -> list[TrafficEstimate]:
        return [TrafficEstimate(e.lam, e.b, e.ca2, e.cs2, e.arrival_samples, e.service_samples, e.session_rate)
                for e in self.estimates]
