"""Analytic queueing toolkit: Erlang formulas, the block-wait tail ``g`` and
the threshold admission revenue model."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .domain import ServiceClass

log = logging.getLogger(__name__)

UNBOUNDED = math.inf
"""Threshold sentinel: admit without limit."""

TABLE_CACHE_ENV = "SLAPROV_TABLE_CACHE"


@dataclass(frozen=True)
class QueueRegime:
    lam: float
    b: float
    n: int
    ca2: float = 1.0
    cs2: float = 1.0

    @property
    def rho(self) -> float:
        return self.lam * self.b

    @property
    def saturated(self) -> bool:
        return self.lam > 0 and (self.n <= 0 or self.rho >= self.n)


def erlang_b(servers: int, load: float) -> float:
    """Blocking probability of an M/G/c/c loss system."""
    if servers < 0:
        raise ValueError("servers must be >= 0")
    if load < 0:
        raise ValueError("load must be >= 0")
    blocking = 1.0
    for j in range(1, servers + 1):
        blocking = load * blocking / (j + load * blocking)
    return blocking


def erlang_c(n: int, a: float) -> float:
    """Probability that an arriving job waits in M/M/n with offered load a.

    Saturated inputs (a >= n) give 1.
    """
    if a <= 0:
        return 0.0
    if n <= 0 or a >= n:
        return 1.0
    blocking = erlang_b(n, a)
    return n * blocking / (n - a * (1.0 - blocking))


def threshold_blocking(M: int, A: float) -> float:
    """Probability a session is rejected when at most M may be active.

    Sessions arrive as a Poisson stream with offered load A (session rate
    times holding time) and are never queued, hence Erlang-B.
    """
    return erlang_b(M, A)


# --------------------------------------------------------------------------
# block-wait tail tables

# x grid (in units of the mean service time): 0, then log-spaced 1e-3..1e3
_X_PER_DECADE = 48
_X_LOG_LO = -3.0
_X_LOG_HI = 3.0
X_GRID = np.concatenate(
    [[0.0], np.logspace(_X_LOG_LO, _X_LOG_HI, int((_X_LOG_HI - _X_LOG_LO) * _X_PER_DECADE) + 1)]
)

UTIL_STEP = 0.02
UTIL_TOP = 0.96
TABLE_K = 50
# tables are exact for block totals k * x up to X_COVER * K mean service times
X_COVER = 4.0


def _truncation(n: int, a: float, K: int) -> tuple[int, int, bool]:
    sigma = a / n
    extra = math.ceil(math.log(1e-9) / math.log(sigma)) if sigma > 0 else 1
    J = n + min(max(extra, 1), 4000) + 2
    C = erlang_c(n, a)
    theta = n - a
    mean_w = C / theta
    sd_w = math.sqrt(max(2.0 * C / theta**2 - mean_w**2, 0.0))
    rate = a + n
    by_moments = rate * K * (mean_w + 10.0 * sd_w)
    cover = rate * K * X_COVER
    cover += 10.0 * math.sqrt(cover)
    # when the moment bound binds, the mass beyond the range is negligible
    return J, int(min(by_moments, cover)) + 64, cover < by_moments


def exact_tail_table(n: int, a: float, K: int = TABLE_K, xs: np.ndarray = X_GRID) -> np.ndarray:
    """P(mean of k consecutive stationary M/M/n waits > x), unit mean service.

    Returns an array of shape (K, len(xs)); row k-1 is the block of length k.
    Computed exactly by the tick recursion in ``slaprov.kernels``.  Entries
    whose block total k * x lies beyond the tick range are replaced by the
    last covered value in their row, an upper bound since the tail is
    nonincreasing in x.
    """
    if not 0 < a < n:
        raise ValueError(f"need 0 < a < n, got a={a}, n={n}")
    J, ncap, clipped = _truncation(n, a, K)
    P = kernels.tick_table(int(n), float(a), int(K), int(J), int(ncap))
    xs = np.asarray(xs, dtype=float)
    tab = kernels.tail_grid(P, float(a + n), xs)
    if not clipped:
        return tab
    mu = (a + n) * np.arange(1, K + 1)[:, None] * xs[None, :]
    uncovered = mu + 10.0 * np.sqrt(mu) + 10.0 > ncap - 1
    if uncovered.any():
        tab = np.fmin.accumulate(np.where(uncovered, np.inf, tab), axis=1)
        tab[np.isinf(tab)] = 1.0
    return tab


class WaitTailTables:
    """Memo of exact tail tables on a utilization grid, with interpolation.

    Tables are keyed by (servers, utilization grid index, K).  Between grid
    points values are interpolated linearly in utilization; above
    ``UTIL_TOP`` they are interpolated towards 1 at saturation.  Along x the
    interpolation is linear in log(x).
    """

    def __init__(self, step: float = UTIL_STEP, top: float = UTIL_TOP, cache_dir=None):
        self.step = step
        self.top_index = int(round(top / step))
        self._tables: dict[tuple[int, int, int], np.ndarray] = {}
        if cache_dir is None:
            cache_dir = os.environ.get(TABLE_CACHE_ENV) or None
        self.cache_dir = Path(cache_dir) if cache_dir else None

    def __len__(self) -> int:
        return len(self._tables)

    def table(self, n: int, index: int, K: int = TABLE_K) -> np.ndarray:
        key = (n, index, K)
        tab = self._tables.get(key)
        if tab is not None:
            return tab
        if index <= 0:
            tab = np.zeros((K, len(X_GRID)))
        else:
            path = None
            if self.cache_dir is not None:
                path = self.cache_dir / f"tail_n{n}_u{index}_s{self.step:g}_K{K}.npy"
                if path.exists():
                    tab = np.load(path)
            if tab is None:
                tab = exact_tail_table(n, n * index * self.step, K)
                if path is not None:
                    self.cache_dir.mkdir(parents=True, exist_ok=True)
                    np.save(path, tab)
        self._tables[key] = tab
        return tab

    def lookup(self, x: np.ndarray, k: np.ndarray, n: int, util: float) -> np.ndarray:
        """Tail values for arrays of thresholds x (>= 0) and block lengths k."""
        K = TABLE_K if k.max(initial=1) <= TABLE_K else int(math.ceil(k.max() / TABLE_K) * TABLE_K)
        pos = util / self.step
        if pos >= self.top_index:
            top = self._row_lookup(self.table(n, self.top_index, K), x, k)
            frac = (util - self.top_index * self.step) / (1.0 - self.top_index * self.step)
            return top + (1.0 - top) * frac
        i = int(pos)
        frac = pos - i
        lo = self._row_lookup(self.table(n, i, K), x, k)
        if frac <= 0.0:
            return lo
        hi = self._row_lookup(self.table(n, i + 1, K), x, k)
        return lo + (hi - lo) * frac

    @staticmethod
    def _row_lookup(tab: np.ndarray, x: np.ndarray, k: np.ndarray) -> np.ndarray:
        rows = k - 1
        out = np.empty(x.shape)
        small = x < X_GRID[1]
        if small.any():
            f = x[small] / X_GRID[1]
            r = rows[small]
            out[small] = tab[r, 0] + (tab[r, 1] - tab[r, 0]) * f
        big = ~small
        if big.any():
            t = (np.log10(x[big]) - _X_LOG_LO) * _X_PER_DECADE
            t = np.minimum(t, len(X_GRID) - 2.0)
            i = np.floor(t).astype(np.intp)
            i = np.minimum(i, len(X_GRID) - 3)
            f = t - i
            r = rows[big]
            out[big] = tab[r, i + 1] + (tab[r, i + 2] - tab[r, i + 1]) * f
        return out


_TABLES = WaitTailTables()


def tail_tables() -> WaitTailTables:
    return _TABLES


def g_many(x, k, lam: float, n: int, b: float = 1.0, ca2: float = 1.0, cs2: float = 1.0) -> np.ndarray:
    """Vectorized ``g`` over arrays of thresholds and block lengths sharing one
    queue regime."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.broadcast_to(np.atleast_1d(np.asarray(k, dtype=np.intp)), x.shape)
    if (k < 1).any():
        raise ValueError("block length k must be >= 1")
    out = np.ones(x.shape)
    if lam <= 0:
        out[:] = 0.0
        out[x < 0] = 1.0
        return out
    a = lam * b
    if n <= 0 or a >= n:
        return out
    scale = b * max(0.5 * (ca2 + cs2), 1e-9)
    ok = x >= 0
    if ok.any():
        out[ok] = _TABLES.lookup(x[ok] / scale, k[ok], int(n), a / n)
    return np.clip(out, 0.0, 1.0)


def g(x: float, lam: float, k: int, n: int, b: float = 1.0, ca2: float = 1.0, cs2: float = 1.0) -> float:
    """Probability that the mean waiting time of k consecutive jobs exceeds x.

    The queue is a stationary FIFO pool of n servers fed at rate lam with
    mean service time b.  Exact for M/M/n; other interarrival/service
    variability (squared coefficients of variation ca2, cs2) rescales the
    waiting-time axis by (ca2 + cs2) / 2.  Negative thresholds give 1,
    saturated regimes give 1, an idle stream gives 0.
    """
    return float(g_many([x], [k], lam, n, b, ca2, cs2)[0])


def g_exact(x: float, lam: float, k: int, n: int, b: float = 1.0, ca2: float = 1.0, cs2: float = 1.0) -> float:
    """Same as :func:`g` but without utilization-grid interpolation."""
    if k < 1:
        raise ValueError("block length k must be >= 1")
    if x < 0:
        return 1.0
    if lam <= 0:
        return 0.0
    a = lam * b
    if n <= 0 or a >= n:
        return 1.0
    scale = b * max(0.5 * (ca2 + cs2), 1e-9)
    tab = exact_tail_table(int(n), a, max(int(k), 1), np.array([0.0, x / scale]))
    return float(tab[k - 1, 1]) if x > 0 else float(tab[k - 1, 0])


# --------------------------------------------------------------------------
# threshold admission


LOAD_MODELS = ("mixture", "mean")


class _ThresholdModel:
    """Incremental evaluation of R(M) for M = 1, 2, ... for one class.

    Active sessions follow the truncated Poisson law of an M/G/M/M loss
    system with offered load A.  ``mean`` feeds g with the mean job rate
    L_bar * gamma.  ``mixture`` averages g over the number of sessions an
    accepted session shares the queue with, each state held at its own job
    rate, since the session population is constant between decisions.
    """

    def __init__(self, cls: ServiceClass, n: int, b, ca2, cs2, load_model: str, session_rate=None):
        if load_model not in LOAD_MODELS:
            raise ValueError(f"load_model must be one of {LOAD_MODELS}")
        self.cls = cls
        self.n = n
        self.b = cls.mean_service if b is None else b
        self.ca2 = ca2
        self.cs2 = cls.service.scv if cs2 is None else cs2
        self.model = load_model
        self.delta = cls.session_rate if session_rate is None else session_rate
        self.A = self.delta * cls.jobs_per_session / cls.job_rate
        self._weights = [1.0]  # A^j / j!, j = 0..
        self._g_states: list[float] = []

    def _state_g(self, j: int) -> float:
        # penalty probability with j + 1 sessions active
        while len(self._g_states) <= j:
            s = len(self._g_states) + 1
            c = self.cls
            self._g_states.append(g(c.obligation, s * c.job_rate, c.jobs_per_session, self.n,
                                    self.b, self.ca2, self.cs2))
        return self._g_states[j]

    def revenue(self, M: int) -> float:
        if M < 1:
            raise ValueError("threshold M must be >= 1")
        c = self.cls
        while len(self._weights) <= M:
            j = len(self._weights)
            self._weights.append(self._weights[-1] * self.A / j)
        total = math.fsum(self._weights[: M + 1])
        blocking = self._weights[M] / total
        accepted = 1.0 - blocking
        if self.model == "mean":
            lam = self.A * accepted * c.job_rate
            p = g(c.obligation, lam, c.jobs_per_session, self.n, self.b, self.ca2, self.cs2)
        else:
            below = total - self._weights[M]
            p = math.fsum(self._weights[j] * self._state_g(j) for j in range(M)) / below
        return self.delta * accepted * (c.charge - c.penalty * p)


def threshold_revenue(
    cls: ServiceClass,
    M: int,
    n: int,
    *,
    b: float | None = None,
    ca2: float = 1.0,
    cs2: float | None = None,
    load_model: str = "mixture",
    session_rate: float | None = None,
) -> float:
    """Revenue rate of one class admitting at most M concurrent sessions.

    R(M) = delta (1 - B(M, A)) (c - r g_hat), with B the Erlang-B blocking
    of the session population; see ``_ThresholdModel`` for g_hat.  The
    session rate defaults to the class contract.
    """
    return _ThresholdModel(cls, n, b, ca2, cs2, load_model, session_rate).revenue(M)


def find_threshold(
    cls: ServiceClass,
    n: int,
    *,
    eps: float = 1e-6,
    m_max: int = 1000,
    b: float | None = None,
    ca2: float = 1.0,
    cs2: float | None = None,
    load_model: str = "mixture",
    session_rate: float | None = None,
):
    """Sequential search for the revenue-maximizing session threshold.

    Evaluates M = 1, 2, ... and stops when revenue drops (returning the
    previous M) or grows by less than ``eps`` (returning the previous M).
    Returns 0 when even one session cannot earn a positive revenue (no
    admission earns exactly 0), and ``UNBOUNDED`` when there is no penalty
    or revenue keeps growing up to ``m_max``.
    """
    if cls.penalty == 0:
        return UNBOUNDED
    model = _ThresholdModel(cls, n, b, ca2, cs2, load_model, session_rate)
    prev = model.revenue(1)
    if prev <= 0:
        return 0
    for M in range(2, m_max + 1):
        cur = model.revenue(M)
        if cur < prev or cur - prev < eps:
            return M - 1
        prev = cur
    return UNBOUNDED
