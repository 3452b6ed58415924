"""Seeded generators for session arrivals, job interarrivals and service times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .domain import ServiceClass

# substream purposes; one generator per (class, purpose)
SESSIONS = 0
JOB_GAPS = 1
SERVICE = 2


@dataclass(frozen=True)
class DistributionDescriptor:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        p = self.params
        if self.kind == "exponential":
            if len(p) != 1 or not p[0] > 0:
                raise ValueError("exponential needs one positive mean")
        elif self.kind == "deterministic":
            if len(p) != 1 or not p[0] > 0:
                raise ValueError("deterministic needs one positive value")
        elif self.kind == "hyperexponential2":
            if len(p) != 4:
                raise ValueError("hyperexponential2 needs (p1, mean1, p2, mean2)")
            p1, m1, p2, m2 = p
            if min(p1, p2) < 0 or not math.isclose(p1 + p2, 1.0, abs_tol=1e-9):
                raise ValueError("hyperexponential2 branch probabilities must sum to 1")
            if not (m1 > 0 and m2 > 0):
                raise ValueError("hyperexponential2 means must be positive")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def exponential(cls, mean: float) -> "DistributionDescriptor":
        return cls("exponential", (float(mean),))

    @classmethod
    def deterministic(cls, value: float) -> "DistributionDescriptor":
        return cls("deterministic", (float(value),))

    @classmethod
    def hyperexponential2(cls, p1: float, mean1: float, p2: float, mean2: float) -> "DistributionDescriptor":
        return cls("hyperexponential2", (float(p1), float(mean1), float(p2), float(mean2)))

    @property
    def mean(self) -> float:
        if self.kind == "hyperexponential2":
            p1, m1, p2, m2 = self.params
            return p1 * m1 + p2 * m2
        return self.params[0]

    @property
    def scv(self) -> float:
        if self.kind == "exponential":
            return 1.0
        if self.kind == "deterministic":
            return 0.0
        p1, m1, p2, m2 = self.params
        second = 2.0 * (p1 * m1 * m1 + p2 * m2 * m2)
        return second / self.mean**2 - 1.0

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "exponential":
            return rng.exponential(self.params[0])
        if self.kind == "deterministic":
            return self.params[0]
        p1, m1, _, m2 = self.params
        return rng.exponential(m1 if rng.random() < p1 else m2)

    def to_dict(self) -> dict:
        names = {
            "exponential": ("mean",),
            "deterministic": ("value",),
            "hyperexponential2": ("p1", "mean1", "p2", "mean2"),
        }[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionDescriptor":
        d = dict(d)
        kind = d.pop("kind")
        if kind == "exponential":
            return cls.exponential(d["mean"])
        if kind == "deterministic":
            return cls.deterministic(d["value"])
        if kind == "hyperexponential2":
            return cls.hyperexponential2(d["p1"], d["mean1"], d["p2"], d["mean2"])
        raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class OnOffArrivals:
    """Interrupted Poisson session arrivals.

    Arrivals occur only during ON periods; both period lengths are
    exponential.  The ON-period rate is chosen so the long-run rate equals
    the class session rate.  Defaults are arbitrary: no published burst
    parameters exist.
    """

    mean_on: float = 60.0
    mean_off: float = 240.0

    def peak_rate(self, mean_rate: float) -> float:
        return mean_rate * (self.mean_on + self.mean_off) / self.mean_on


def substream(seed: int, class_index: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (class, purpose) pair."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(class_index, purpose)))


@dataclass
class _OnOffState:
    on: bool
    switch_at: float


@dataclass
class SessionArrivalStream:
    """Superposition of per-class session arrival processes."""

    rates: list[float]
    seed: int
    bursts: list[OnOffArrivals | None] | None = None
    _rngs: list = field(init=False, repr=False)
    _next: np.ndarray = field(init=False, repr=False)
    _onoff: list = field(init=False, repr=False)

    def __post_init__(self):
        m = len(self.rates)
        if self.bursts is None:
            self.bursts = [None] * m
        self._rngs = [substream(self.seed, i, SESSIONS) for i in range(m)]
        self._onoff = [None] * m
        for i, b in enumerate(self.bursts):
            if b is not None and self.rates[i] > 0:
                rng = self._rngs[i]
                on = rng.random() < b.mean_on / (b.mean_on + b.mean_off)
                self._onoff[i] = _OnOffState(on, rng.exponential(b.mean_on if on else b.mean_off))
        self._next = np.array([self._draw_after(i, 0.0) for i in range(m)])

    def _draw_after(self, i: int, t: float) -> float:
        rate = self.rates[i]
        if rate <= 0:
            return math.inf
        rng = self._rngs[i]
        burst = self.bursts[i]
        if burst is None:
            return t + rng.exponential(1.0 / rate)
        st = self._onoff[i]
        peak = burst.peak_rate(rate)
        while True:
            if st.on:
                cand = t + rng.exponential(1.0 / peak)
                if cand < st.switch_at:
                    return cand
                t = st.switch_at
                st.on = False
                st.switch_at = t + rng.exponential(burst.mean_off)
            else:
                t = st.switch_at
                st.on = True
                st.switch_at = t + rng.exponential(burst.mean_on)

    def next_session_arrival(self, now: float) -> tuple[int | None, float]:
        """Pop the earliest pending arrival; ``(None, inf)`` if no class ever
        arrives."""
        i = int(np.argmin(self._next))
        t = float(self._next[i])
        if math.isinf(t):
            return None, math.inf
        self._next[i] = self._draw_after(i, t)
        return i, t


def next_session_arrival(stream: SessionArrivalStream, now: float) -> tuple[int | None, float]:
    return stream.next_session_arrival(now)


def job_interarrival(cls: "ServiceClass", rng: np.random.Generator) -> float:
    """Gap between consecutive jobs of one session (mean 1/job_rate)."""
    if cls.job_spacing == "deterministic":
        return 1.0 / cls.job_rate
    return rng.exponential(1.0 / cls.job_rate)


def job_service_time(cls: "ServiceClass", rng: np.random.Generator) -> float:
    return cls.service.sample(rng)
