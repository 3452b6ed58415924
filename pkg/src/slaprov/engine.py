"""Discrete-event simulation of the cluster.

One run is single threaded.  Events live in a heap ordered by (time,
sequence number), so equal-time events are handled in creation order.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import time as _time
from collections import Counter
from dataclasses import dataclass, field

from .domain import ClusterState, Job, RevenueLedger, ServiceClass, SessionState, session_sla_violated
from .estimation import WindowAccumulator
from .policies import AdmissionPolicy, PolicyContext, allocate_offered_loads
from .workload import JOB_GAPS, SERVICE, SessionArrivalStream, job_interarrival, job_service_time, substream

log = logging.getLogger(__name__)

SESSION_ARRIVAL = "SessionArrival"
JOB_ARRIVAL = "JobArrival"
SERVICE_START = "ServiceStart"
SERVICE_COMPLETION = "ServiceCompletion"
WINDOW_BOUNDARY = "WindowBoundary"


@dataclass
class SimConfig:
    classes: list[ServiceClass]
    N: int
    horizon: float = 7200.0
    bucket_width: float = 600.0
    initial_allocation: list[int] | None = None
    smoothing: float = 0.3
    refresh: float = 10.0
    max_span: float = 30.0
    session_memory: float = 600.0
    pin_service: bool = False
    attribution: str = "acceptance"
    pdf_bin: float = 0.05

    def validate(self) -> None:
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.classes:
            raise ValueError("at least one service class is required")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not self.bucket_width > 0:
            raise ValueError("bucket_width must be > 0")
        if not self.refresh > 0:
            raise ValueError("refresh must be > 0")
        if not 0 < self.smoothing <= 1:
            raise ValueError("smoothing must be in (0, 1]")
        if not (self.max_span > 0 and self.session_memory > 0 and self.pdf_bin > 0):
            raise ValueError("max_span, session_memory and pdf_bin must be > 0")
        if self.attribution not in ("acceptance", "completion"):
            raise ValueError("attribution must be 'acceptance' or 'completion'")
        if self.initial_allocation is not None:
            if len(self.initial_allocation) != len(self.classes):
                raise ValueError("initial_allocation needs one entry per class")
            if sum(self.initial_allocation) != self.N or min(self.initial_allocation) < 0:
                raise ValueError("initial_allocation must be nonnegative and sum to N")


@dataclass
class SimResult:
    ledger: RevenueLedger
    events: Counter
    final_allocation: list[int]
    allocation_changes: int
    decisions: int
    wall_seconds: float
    mean_response: list[float]
    service_log: list[tuple[int, float, float]] | None = None
    jobs_enqueued: dict[int, int] = field(default_factory=dict)
    jobs_served: dict[int, int] = field(default_factory=dict)
    session_class: dict[int, int] = field(default_factory=dict)


class JsonlTrace:
    """Line-delimited JSON trace sink."""

    def __init__(self, stream, cell: str | None = None):
        self.stream = stream
        self.cell = cell

    def __call__(self, record: dict) -> None:
        if self.cell is not None:
            record["cell"] = self.cell
        self.stream.write(json.dumps(record, separators=(",", ":")) + "\n")


class Simulation:
    def __init__(self, config: SimConfig, policy: AdmissionPolicy, seed: int, trace=None,
                 check: bool = False, drain: bool = False):
        config.validate()
        self.cfg = config
        self.policy = policy
        self.seed = seed
        self.trace = trace
        self.check = check
        self.drain = drain
        self.classes = config.classes
        m = len(self.classes)
        self.m = m
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.events: Counter = Counter()
        self.ledger = RevenueLedger(m, config.horizon, config.bucket_width, config.attribution, config.pdf_bin)
        self.acc = WindowAccumulator(self.classes, config.smoothing, config.pin_service, config.max_span,
                                     session_memory=config.session_memory)
        self.arrivals = SessionArrivalStream([c.session_rate for c in self.classes], seed,
                                             [c.bursts for c in self.classes])
        self.gap_rng = [substream(seed, i, JOB_GAPS) for i in range(m)]
        self.svc_rng = [substream(seed, i, SERVICE) for i in range(m)]
        alloc = config.initial_allocation
        if alloc is None:
            alloc = allocate_offered_loads(self.acc.snapshot(), self.classes, config.N).target
        self.cluster = ClusterState.build(alloc)
        self.idle = [[s for s in self.cluster.servers if s.target == i] for i in range(m)]
        self.sessions: dict[int, SessionState] = {}
        self.active: list[dict[int, SessionState]] = [{} for _ in range(m)]
        self._next_sid = 0
        self._pending: list[SessionState] = []
        self._service_dur: dict[int, float] = {}
        self.allocation_changes = 0
        self.decisions = 0
        self._resp_sum = [0.0] * m
        self._resp_count = [0] * m
        self.service_log = [] if check else None
        self._started: dict[int, float] = {}
        self.jobs_enqueued: dict[int, int] = {}
        self.jobs_served: dict[int, int] = {}
        self.session_class: dict[int, int] = {}
        self._accepting = True

    # ---------------------------------------------------------------- plumbing

    def _push(self, t: float, kind: str, payload=None) -> None:
        heapq.heappush(self._heap, (t, self._seq, kind, payload))
        self._seq += 1

    def _emit(self, kind: str, cls=None, session=None, server=None, **extra) -> None:
        rec = {"time": self.now, "kind": kind, "class": cls, "session": session, "server": server}
        rec.update(extra)
        self.trace(rec)

    def _context(self) -> PolicyContext:
        est = self.acc.publish_estimates(self.now)
        return PolicyContext(self.now, self.classes, self.cfg.N, est, self.cluster.allocation,
                             [list(a.values()) for a in self.active], self._next_sid)

    # ---------------------------------------------------------------- servers

    def _dispatch(self, i: int) -> None:
        queue = self.cluster.queues[i]
        idle = self.idle[i]
        while queue and idle:
            self._start(idle.pop(), queue.popleft())

    def _start(self, server, job: Job) -> None:
        i = job.class_id
        wait = self.now - job.arrival_time
        server.job = job
        server.busy_since = self.now
        dur = job_service_time(self.classes[i], self.svc_rng[i])
        self._service_dur[server.index] = dur
        self._push(self.now + dur, SERVICE_COMPLETION, server.index)
        self._resp_sum[i] += wait + dur
        self._resp_count[i] += 1
        s = self.sessions[job.session_id]
        s.record_wait(wait)
        if self.trace is not None:
            self._emit(SERVICE_START, i, s.session_id, server.index, wait=wait)
        if s.jobs_completed == self.classes[i].jobs_per_session:
            self._pending.append(s)

    def _owed(self, i: int) -> bool:
        # class i still has jobs of accepted sessions to serve beyond those in service
        k = self.classes[i].jobs_per_session
        return bool(self.cluster.queues[i]) or any(s.jobs_arrived < k for s in self.active[i].values())

    def integrity_floor(self, target) -> list[int]:
        """Give one server to every class that still owes jobs but has none,
        taken from the largest pool that can spare it (lowest index on ties).
        Without this an accepted session could be starved forever."""
        target = list(target)
        owed = [self._owed(i) for i in range(self.m)]
        for i in range(self.m):
            if target[i] or not owed[i]:
                continue
            donors = [j for j in range(self.m) if target[j] >= (2 if owed[j] else 1)]
            if donors:
                j = max(donors, key=lambda j: (target[j], -j))
                target[j] -= 1
                target[i] += 1
        return target

    def _reallocate(self, target=None) -> None:
        self.apply_allocation(self.integrity_floor(self.cluster.allocation if target is None else target))

    def apply_allocation(self, target) -> None:
        target = list(target)
        N = self.cfg.N
        if len(target) != self.m or sum(target) != N or min(target) < 0:
            raise ValueError(f"allocation {target} must have {self.m} nonnegative entries summing to {N}")
        current = self.cluster.allocation
        if current == target:
            return
        self.allocation_changes += 1
        released = []
        for i in range(self.m):
            extra = current[i] - target[i]
            if extra <= 0:
                continue
            mine = [s for s in self.cluster.servers if s.target == i]
            # idle first, then servers already draining away, then busy ones
            mine.sort(key=lambda s: (s.job is not None, s.owner == i, -s.index))
            released.extend(mine[:extra])
        slots = [j for j in range(self.m) for _ in range(max(target[j] - current[j], 0))]
        order = []
        for s in released:
            if s.job is not None and s.owner in slots:
                slots.remove(s.owner)
                order.append((s, s.owner))
        rest = [s for s in released if all(s is not o for o, _ in order)]
        order.extend(zip(rest, slots))
        for s, j in order:
            if s.job is None:
                self.idle[s.target].remove(s)
                s.owner = s.target = j
                self.idle[j].append(s)
            else:
                s.target = j
        if self.trace is not None:
            self._emit("Allocation", allocation=target)
        for j in range(self.m):
            self._dispatch(j)

    # ---------------------------------------------------------------- sessions

    def _job_arrival(self, s: SessionState) -> None:
        i = s.class_id
        cls = self.classes[i]
        s.jobs_arrived += 1
        self.jobs_enqueued[s.session_id] += 1
        self.acc.record_job_arrival(i, self.now)
        self.cluster.queues[i].append(Job(s.session_id, i, self.now, self._seq))
        if self.trace is not None:
            self._emit(JOB_ARRIVAL, i, s.session_id)
        if s.jobs_arrived < cls.jobs_per_session:
            self._push(self.now + job_interarrival(cls, self.gap_rng[i]), JOB_ARRIVAL, s)
        self._dispatch(i)

    def _session_arrival(self, i: int) -> None:
        self.acc.record_session_arrival(i, self.now)
        ctx = self._context()
        decision = self.policy.on_arrival(i, ctx)
        self.decisions += 1
        if self.trace is not None:
            self._emit(SESSION_ARRIVAL, i, decision.session_id, accept=decision.accept,
                       delta_r=decision.delta_r)
        if not decision.accept:
            self.ledger.book_rejection(i, self.now)
            return
        sid = self._next_sid
        self._next_sid += 1
        s = SessionState(sid, i, self.now)
        self.sessions[sid] = s
        self.active[i][sid] = s
        self.jobs_enqueued[sid] = 0
        self.jobs_served[sid] = 0
        self.session_class[sid] = i
        self.ledger.book_acceptance(i, self.now)
        self._reallocate(decision.allocation.target if decision.allocation is not None else None)
        self._job_arrival(s)

    def complete_session(self, s: SessionState) -> None:
        i = s.class_id
        cls = self.classes[i]
        violated = session_sla_violated(s, cls)
        self.ledger.book_completion(i, self.now, s.arrival_time, cls.charge, cls.penalty, violated, s.mean_wait)
        del self.active[i][s.session_id]
        if self.trace is not None:
            self._emit("SessionComplete", i, s.session_id, mean_wait=s.mean_wait, violated=violated)
        if self._accepting:
            alloc = self.policy.on_completion(i, self._context())
            self.decisions += 1
            self._reallocate(alloc.target if alloc is not None else None)

    def _service_completion(self, idx: int) -> None:
        server = self.cluster.servers[idx]
        job = server.job
        dur = self._service_dur.pop(idx)
        self.acc.record_service(job.class_id, dur)
        self.jobs_served[job.session_id] += 1
        if self.service_log is not None:
            self.service_log.append((idx, server.busy_since, self.now))
        if self.trace is not None:
            self._emit(SERVICE_COMPLETION, job.class_id, job.session_id, idx)
        server.job = None
        server.owner = server.target
        self.idle[server.owner].append(server)
        self._dispatch(server.owner)

    # ---------------------------------------------------------------- main loop

    def run(self) -> SimResult:
        t0 = _time.perf_counter()
        horizon = self.cfg.horizon
        i, t = self.arrivals.next_session_arrival(0.0)
        if i is not None:
            self._push(t, SESSION_ARRIVAL, i)
        self._push(self.cfg.refresh, WINDOW_BOUNDARY)
        while self._heap:
            t, _, kind, payload = self._heap[0]
            if t > horizon:
                if not self.drain:
                    break
                self._accepting = False
                if kind in (SESSION_ARRIVAL, WINDOW_BOUNDARY):
                    heapq.heappop(self._heap)
                    continue
            heapq.heappop(self._heap)
            self.now = t
            self.events[kind] += 1
            if kind == JOB_ARRIVAL:
                self._job_arrival(payload)
            elif kind == SERVICE_COMPLETION:
                self._service_completion(payload)
            elif kind == SESSION_ARRIVAL:
                self._session_arrival(payload)
                i, nt = self.arrivals.next_session_arrival(t)
                if i is not None:
                    self._push(nt, SESSION_ARRIVAL, i)
            else:
                self.policy.on_refresh(self._context())
                if self.trace is not None:
                    self._emit(WINDOW_BOUNDARY)
                self._push(t + self.cfg.refresh, WINDOW_BOUNDARY)
            while self._pending:
                self.complete_session(self._pending.pop(0))
            if self.check:
                self.cluster.check()
        for i, live in enumerate(self.active):
            for _ in live:
                self.ledger.book_in_flight(i, self.classes[i].charge)
        return SimResult(
            ledger=self.ledger,
            events=self.events,
            final_allocation=self.cluster.allocation,
            allocation_changes=self.allocation_changes,
            decisions=self.decisions,
            wall_seconds=_time.perf_counter() - t0,
            mean_response=[s / c if c else math.nan for s, c in zip(self._resp_sum, self._resp_count)],
            service_log=self.service_log,
            jobs_enqueued=self.jobs_enqueued,
            jobs_served=self.jobs_served,
            session_class=self.session_class,
        )


def run(config: SimConfig, policy: AdmissionPolicy, seed: int, trace=None, check: bool = False,
        drain: bool = False) -> SimResult:
    """Simulate one run up to the horizon and return its ledger and summary.

    With ``drain`` the run stops admitting at the horizon but finishes every
    accepted session, which is how session integrity is checked.
    """
    return Simulation(config, policy, seed, trace, check, drain).run()
