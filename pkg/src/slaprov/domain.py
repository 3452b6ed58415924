"""Core value types: service classes, sessions, cluster state, estimates and
the revenue ledger."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .workload import DistributionDescriptor, OnOffArrivals


@dataclass(frozen=True)
class ServiceClass:
    """Static SLA and traffic contract of one service type.

    Indices are zero based internally; ``id`` is the one-based label used in
    reports.
    """

    id: int
    charge: float
    penalty: float
    obligation: float
    jobs_per_session: int
    job_rate: float
    session_rate: float
    service: DistributionDescriptor = field(default_factory=lambda: DistributionDescriptor.exponential(1.0))
    weight: float = 1.0
    job_spacing: str = "exponential"
    bursts: OnOffArrivals | None = None

    def __post_init__(self):
        if self.jobs_per_session < 1:
            raise ValueError("jobs_per_session must be >= 1")
        if not self.job_rate > 0:
            raise ValueError("job_rate must be > 0")
        if not self.obligation > 0:
            raise ValueError("obligation must be > 0")
        if self.charge < 0 or self.penalty < 0:
            raise ValueError("charge and penalty must be >= 0")
        if not self.weight > 0:
            raise ValueError("weight must be > 0")
        if self.session_rate < 0:
            raise ValueError("session_rate must be >= 0")
        if self.job_spacing not in ("exponential", "deterministic"):
            raise ValueError("job_spacing must be 'exponential' or 'deterministic'")

    @property
    def mean_service(self) -> float:
        return self.service.mean

    @property
    def session_load(self) -> float:
        """Offered session load: arrival rate times mean session length."""
        return self.session_rate * self.jobs_per_session / self.job_rate

    @property
    def offered_job_rate(self) -> float:
        return self.session_rate * self.jobs_per_session


@dataclass
class SessionState:
    session_id: int
    class_id: int
    arrival_time: float
    jobs_completed: int = 0
    jobs_arrived: int = 0
    wait_sum: float = 0.0

    @property
    def mean_wait(self) -> float:
        return session_mean_wait(self)

    def record_wait(self, w: float) -> None:
        self.jobs_completed += 1
        self.wait_sum += w


def session_mean_wait(s: SessionState) -> float:
    if s.jobs_completed == 0:
        return 0.0
    return s.wait_sum / s.jobs_completed


def session_sla_violated(s: SessionState, cls: ServiceClass) -> bool:
    if s.jobs_completed != cls.jobs_per_session:
        raise ValueError(
            f"session {s.session_id} incomplete: {s.jobs_completed}/{cls.jobs_per_session} jobs"
        )
    return session_mean_wait(s) > cls.obligation


class ServerStatus(enum.Enum):
    IDLE = "idle"
    BUSY = "busy"
    DRAINING = "draining"


@dataclass
class Job:
    session_id: int
    class_id: int
    arrival_time: float
    seq: int


@dataclass
class Server:
    index: int
    owner: int  # class whose job it runs (or would run when idle)
    target: int  # class it is allocated to
    job: Job | None = None
    busy_since: float = 0.0

    @property
    def status(self) -> ServerStatus:
        if self.job is None:
            return ServerStatus.IDLE
        return ServerStatus.BUSY if self.owner == self.target else ServerStatus.DRAINING


@dataclass
class ClusterState:
    total_servers: int
    m: int
    servers: list[Server] = field(default_factory=list)
    queues: list[deque] = field(default_factory=list)

    @classmethod
    def build(cls, allocation) -> "ClusterState":
        allocation = list(allocation)
        servers = []
        for i, n in enumerate(allocation):
            for _ in range(n):
                servers.append(Server(len(servers), i, i))
        return cls(len(servers), len(allocation), servers, [deque() for _ in allocation])

    @property
    def allocation(self) -> list[int]:
        n = [0] * self.m
        for s in self.servers:
            n[s.target] += 1
        return n

    def check(self) -> None:
        """Raise AssertionError if a structural invariant is broken."""
        assert sum(self.allocation) == self.total_servers
        for s in self.servers:
            if s.job is None:
                assert s.owner == s.target, f"idle server {s.index} not settled"
                assert not self.queues[s.target], f"server {s.index} idle while class {s.target} waits"


@dataclass
class TrafficEstimate:
    lam: float
    b: float
    ca2: float = 1.0
    cs2: float = 1.0
    arrival_samples: int = 0
    service_samples: int = 0
    session_rate: float = 0.0  # offered sessions/s, rejected ones included

    @property
    def valid(self) -> bool:
        return self.arrival_samples >= 2 and self.service_samples >= 2

    @property
    def rho(self) -> float:
        return self.lam * self.b


class RevenueLedger:
    """Charges, penalties, counters and time-bucketed revenue samples.

    Charges count only once a session completes (in-flight sessions at the
    horizon are reported separately).  In the default ``acceptance``
    attribution a charge lands in the bucket of its acceptance instant and
    a penalty in the bucket of its completion instant; ``completion``
    attribution puts both in the completion bucket.
    """

    def __init__(self, m: int, horizon: float, bucket_width: float = 600.0, attribution: str = "acceptance",
                 pdf_bin: float = 0.05):
        if attribution not in ("acceptance", "completion"):
            raise ValueError("attribution must be 'acceptance' or 'completion'")
        self.m = m
        self.horizon = horizon
        self.bucket_width = bucket_width
        self.attribution = attribution
        self.pdf_bin = pdf_bin
        nb = max(1, math.ceil(horizon / bucket_width - 1e-9))
        self.bucket_edges = np.minimum(np.arange(nb + 1) * bucket_width, horizon)
        self.bucket_revenue = np.zeros(nb)
        self.bucket_accepted = np.zeros(nb, dtype=np.int64)
        self.bucket_rejected = np.zeros(nb, dtype=np.int64)
        self.bucket_violated = np.zeros(nb, dtype=np.int64)
        self.charges = 0.0
        self.penalties = 0.0
        self.accepted = [0] * m
        self.rejected = [0] * m
        self.completed = [0] * m
        self.violated = [0] * m
        self.session_waits: list[list[float]] = [[] for _ in range(m)]
        self.in_flight = [0] * m
        self.in_flight_charges = 0.0

    def bucket(self, t: float) -> int:
        return min(int(t // self.bucket_width), len(self.bucket_revenue) - 1)

    @property
    def sla_met(self) -> list[int]:
        return [c - v for c, v in zip(self.completed, self.violated)]

    @property
    def revenue(self) -> float:
        return self.charges - self.penalties

    def book_acceptance(self, i: int, t: float) -> None:
        self.accepted[i] += 1
        self.bucket_accepted[self.bucket(t)] += 1

    def book_rejection(self, i: int, t: float) -> None:
        self.rejected[i] += 1
        self.bucket_rejected[self.bucket(t)] += 1

    def book_completion(self, i: int, t: float, accepted_at: float, charge: float, penalty: float,
                        violated: bool, mean_wait: float) -> None:
        self.completed[i] += 1
        self.charges += charge
        cb = self.bucket(t if self.attribution == "completion" else accepted_at)
        self.bucket_revenue[cb] += charge
        if violated:
            self.violated[i] += 1
            self.penalties += penalty
            self.bucket_revenue[self.bucket(t)] -= penalty
            self.bucket_violated[self.bucket(t)] += 1
        self.session_waits[i].append(mean_wait)

    def book_in_flight(self, i: int, charge: float) -> None:
        self.in_flight[i] += 1
        self.in_flight_charges += charge

    def bucket_rates(self) -> np.ndarray:
        """Revenue per second in each bucket."""
        return self.bucket_revenue / np.diff(self.bucket_edges)

    def summary(self) -> dict:
        return {
            "charges": self.charges,
            "penalties": self.penalties,
            "revenue": self.revenue,
            "accepted": list(self.accepted),
            "rejected": list(self.rejected),
            "completed": list(self.completed),
            "violated": list(self.violated),
            "in_flight": list(self.in_flight),
            "bucket_revenue": self.bucket_revenue.tolist(),
        }
