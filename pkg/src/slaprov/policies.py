"""Server allocation (offered loads) and the admission policies."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import ServiceClass, SessionState, TrafficEstimate
from .queueing import UNBOUNDED, find_threshold, g, g_many

log = logging.getLogger(__name__)


@dataclass
class AllocationDecision:
    target: list[int]
    raw: list[float] = field(default_factory=list)


@dataclass
class AdmissionDecision:
    accept: bool
    session_id: int = -1
    allocation: AllocationDecision | None = None
    delta_r: float | None = None


@dataclass
class PolicyContext:
    """Consistent snapshot handed to a policy by the engine."""

    now: float
    classes: list[ServiceClass]
    N: int
    estimates: list[TrafficEstimate]
    allocation: list[int]
    active: list[list[SessionState]]
    next_session_id: int = 0

    @property
    def active_counts(self) -> list[int]:
        return [len(a) for a in self.active]


# --------------------------------------------------------------------------
# allocation


def allocate_loads(rho, alpha, N: int) -> AllocationDecision:
    """Split N servers roughly in proportion to weighted offered loads.

    Shares are rounded half up.  A deficit is repaired one server at a time
    by giving to the class whose share exceeds its count the most; a surplus
    by taking from the class whose count exceeds its share the most.  Ties
    go to the lowest index.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    weights = [max(float(r), 0.0) * float(a) for r, a in zip(rho, alpha)]
    m = len(weights)
    total = sum(weights)
    if total <= 0:
        raw = [N / m] * m
    else:
        raw = [N * wt / total for wt in weights]
    n = [int(math.floor(s + 0.5 + 1e-9)) for s in raw]
    while sum(n) < N:
        j = max(range(m), key=lambda i: (raw[i] - n[i], -i))
        n[j] += 1
    while sum(n) > N:
        j = max((i for i in range(m) if n[i] > 0), key=lambda i: (n[i] - raw[i], -i))
        n[j] -= 1
    return AllocationDecision(n, raw)


def allocate_offered_loads(estimates, classes, N: int) -> AllocationDecision:
    return allocate_loads([e.lam * e.b for e in estimates], [c.weight for c in classes], N)


def _shifted(estimates, i: int, delta: float) -> list[TrafficEstimate]:
    out = [TrafficEstimate(e.lam, e.b, e.ca2, e.cs2) for e in estimates]
    out[i].lam = max(out[i].lam + delta, 0.0)
    return out


# --------------------------------------------------------------------------
# admission rules


def admit_all() -> AdmissionDecision:
    return AdmissionDecision(True)


def admit_threshold(active: int, M) -> AdmissionDecision:
    """Accept iff fewer than M sessions of the class are active."""
    return AdmissionDecision(active < M)


def current_state_delta(i: int, ctx: PolicyContext) -> tuple[float, AllocationDecision]:
    """Expected revenue change of accepting a class-i session now, together
    with the allocation that acceptance would apply."""
    classes = ctx.classes
    est = ctx.estimates
    cls = classes[i]
    trial = _shifted(est, i, cls.job_rate)
    alloc = allocate_offered_loads(trial, classes, ctx.N)
    n_new = alloc.target
    n_old = ctx.allocation
    ei = est[i]
    delta = cls.charge - cls.penalty * g(
        cls.obligation, trial[i].lam, cls.jobs_per_session, n_new[i], ei.b, ei.ca2, ei.cs2
    )
    for j, cj in enumerate(classes):
        if cj.penalty == 0 or (trial[j].lam == est[j].lam and n_new[j] == n_old[j]):
            continue
        k = cj.jobs_per_session
        live = [s for s in ctx.active[j] if s.jobs_completed < k]
        if not live:
            continue
        done = np.array([s.jobs_completed for s in live])
        waited = np.array([s.wait_sum for s in live])
        remaining = k - done
        q_res = (cj.obligation * k - waited) / remaining
        ej = est[j]
        after = g_many(q_res, remaining, trial[j].lam, n_new[j], ej.b, ej.ca2, ej.cs2)
        before = g_many(q_res, remaining, est[j].lam, n_old[j], ej.b, ej.ca2, ej.cs2)
        delta -= cj.penalty * float((after - before).sum())
    return delta, alloc


def admit_current_state(i: int, ctx: PolicyContext) -> AdmissionDecision:
    delta, alloc = current_state_delta(i, ctx)
    if delta > 0:
        return AdmissionDecision(True, ctx.next_session_id, alloc, delta)
    return AdmissionDecision(False, -1, None, delta)


def long_run_revenue(L, classes, N: int, estimates=None) -> tuple[float, AllocationDecision]:
    """Long-run revenue rate when L_j sessions of each class stay active,
    under the offered-loads allocation of that population."""
    if estimates is None:
        params = [(c.mean_service, 1.0, c.service.scv) for c in classes]
    else:
        params = [(e.b, e.ca2, e.cs2) for e in estimates]
    lam = [L[j] * c.job_rate for j, c in enumerate(classes)]
    alloc = allocate_loads([lam[j] * params[j][0] for j in range(len(classes))],
                           [c.weight for c in classes], N)
    total = 0.0
    for j, c in enumerate(classes):
        if L[j] == 0:
            continue
        b, ca2, cs2 = params[j]
        p = g(c.obligation, lam[j], c.jobs_per_session, alloc.target[j], b, ca2, cs2)
        total += lam[j] / c.jobs_per_session * (c.charge - c.penalty * p)
    return total, alloc


def admit_long_run(i: int, L, classes, N: int, estimates=None) -> AdmissionDecision:
    current, _ = long_run_revenue(L, classes, N, estimates)
    bumped = list(L)
    bumped[i] += 1
    candidate, alloc = long_run_revenue(bumped, classes, N, estimates)
    delta = candidate - current
    if delta > 0:
        return AdmissionDecision(True, -1, alloc, delta)
    return AdmissionDecision(False, -1, None, delta)


# --------------------------------------------------------------------------
# policy objects used by the engine


class AdmissionPolicy:
    """Admission plus allocation behaviour invoked by the engine.

    ``on_arrival`` runs at every session arrival; ``on_completion`` at every
    session completion (the class-i session has already left ``ctx.active``);
    ``on_refresh`` at periodic estimate refreshes.
    """

    name = "base"

    def on_arrival(self, i: int, ctx: PolicyContext) -> AdmissionDecision:
        raise NotImplementedError

    def arrival_allocation(self, i: int, ctx: PolicyContext) -> AllocationDecision:
        shifted = _shifted(ctx.estimates, i, ctx.classes[i].job_rate)
        return allocate_offered_loads(shifted, ctx.classes, ctx.N)

    def on_completion(self, i: int, ctx: PolicyContext) -> AllocationDecision | None:
        shifted = _shifted(ctx.estimates, i, -ctx.classes[i].job_rate)
        return allocate_offered_loads(shifted, ctx.classes, ctx.N)

    def on_refresh(self, ctx: PolicyContext) -> None:
        pass

    def _finish(self, decision: AdmissionDecision, i: int, ctx: PolicyContext) -> AdmissionDecision:
        if decision.accept:
            decision.session_id = ctx.next_session_id
            if decision.allocation is None:
                decision.allocation = self.arrival_allocation(i, ctx)
        return decision


class AdmitAll(AdmissionPolicy):
    name = "admit_all"

    def on_arrival(self, i, ctx):
        return self._finish(admit_all(), i, ctx)


class ThresholdPolicy(AdmissionPolicy):
    """Per-class admission thresholds.

    Each class is handled in isolation, so servers are split by offered
    load (estimated session arrival rate, rejected sessions included, times
    the session length) rather than by admitted traffic; otherwise a class
    that is throttled loses servers and is throttled further.
    """

    name = "threshold"

    def __init__(self, eps: float = 1e-6, m_max: int = 1000, load_model: str = "mixture"):
        self.eps = eps
        self.m_max = m_max
        self.load_model = load_model
        self.thresholds: list = []
        self._basis = None

    def allocation(self, ctx: PolicyContext) -> AllocationDecision:
        rho = [e.session_rate * c.jobs_per_session * e.b for c, e in zip(ctx.classes, ctx.estimates)]
        return allocate_loads(rho, [c.weight for c in ctx.classes], ctx.N)

    def recompute(self, ctx: PolicyContext, allocation=None) -> None:
        allocation = list(ctx.allocation if allocation is None else allocation)
        self.thresholds = [
            find_threshold(c, allocation[j], eps=self.eps, m_max=self.m_max, b=e.b, ca2=e.ca2,
                           cs2=e.cs2, load_model=self.load_model, session_rate=e.session_rate)
            for j, (c, e) in enumerate(zip(ctx.classes, ctx.estimates))
        ]
        self._basis = allocation

    def on_refresh(self, ctx):
        self.recompute(ctx)

    def arrival_allocation(self, i, ctx):
        return self.allocation(ctx)

    def on_arrival(self, i, ctx):
        alloc = self.allocation(ctx)
        if self._basis is None or alloc.target != self._basis:
            self.recompute(ctx, alloc.target)
        decision = admit_threshold(ctx.active_counts[i], self.thresholds[i])
        decision.allocation = alloc
        return self._finish(decision, i, ctx)

    def on_completion(self, i, ctx):
        alloc = self.allocation(ctx)
        if alloc.target != self._basis:
            self.recompute(ctx, alloc.target)
        return alloc


class CurrentStatePolicy(AdmissionPolicy):
    name = "current_state"

    def on_arrival(self, i, ctx):
        return self._finish(admit_current_state(i, ctx), i, ctx)


class LongRunPolicy(AdmissionPolicy):
    name = "long_run"

    def on_arrival(self, i, ctx):
        return self._finish(admit_long_run(i, ctx.active_counts, ctx.classes, ctx.N, ctx.estimates), i, ctx)

    def on_completion(self, i, ctx):
        _, alloc = long_run_revenue(ctx.active_counts, ctx.classes, ctx.N, ctx.estimates)
        return alloc


POLICIES = {
    AdmitAll.name: AdmitAll,
    ThresholdPolicy.name: ThresholdPolicy,
    CurrentStatePolicy.name: CurrentStatePolicy,
    LongRunPolicy.name: LongRunPolicy,
}


def make_policy(name: str, **params) -> AdmissionPolicy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(**params)


__all__ = [
    "UNBOUNDED",
    "AllocationDecision",
    "AdmissionDecision",
    "PolicyContext",
    "allocate_loads",
    "allocate_offered_loads",
    "admit_all",
    "admit_threshold",
    "admit_current_state",
    "current_state_delta",
    "admit_long_run",
    "long_run_revenue",
    "AdmissionPolicy",
    "AdmitAll",
    "ThresholdPolicy",
    "CurrentStatePolicy",
    "LongRunPolicy",
    "make_policy",
]
