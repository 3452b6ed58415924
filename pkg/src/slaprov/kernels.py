"""Hot numeric kernels, each with a numba and a pure numpy/scipy version.

The public names (``tick_table``, ``tail_grid``, ``stationary_block_waits``)
dispatch to one implementation at import time, see ``slaprov._accel``.

Tick representation of block waiting times
-------------------------------------------
Consider ``k`` consecutive arrivals (the "tagged block") to a stationary
FIFO M/M/n queue with unit mean service time and arrival rate ``a``.  While
all servers are busy, events (arrivals and departures) occur at rate
``a + n``.  Measuring time only while tagged customers wait and
uniformizing at that rate, a state with ``Z`` tagged waiters holds for a
geometric number of ticks with mean ``Z * rate / exit_rate``.  Each tick is
an independent Exp(a + n) stretch of summed waiting time, so the block's
total wait is exactly Erlang(N, a + n) given the tick count ``N``.
``tick_table`` returns the distribution of ``N`` for every block length
``1..K`` in a single forward pass.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter

from ._accel import USE_NUMBA, njit

__all__ = [
    "tick_table",
    "tail_grid",
    "stationary_block_waits",
    "tick_table_numpy",
    "tail_grid_numpy",
    "stationary_block_waits_numpy",
]


# --------------------------------------------------------------------------
# tick table


@njit(cache=True)
def _geom_conv_inplace(x, p):
    # x <- x convolved with Geometric(p) on {1, 2, ...}; overflow lumps at end
    acc = 0.0
    prev = 0.0
    tot_in = 0.0
    tot_out = 0.0
    q = 1.0 - p
    for i in range(x.shape[0]):
        xi = x[i]
        tot_in += xi
        acc = p * prev + q * acc
        prev = xi
        x[i] = acc
        tot_out += acc
    x[x.shape[0] - 1] += tot_in - tot_out


@njit(cache=True)
def _stationary_mmn(n, a, J):
    w = np.zeros(J + 1)
    w[0] = 1.0
    for j in range(1, J + 1):
        w[j] = w[j - 1] * a / min(j, n)
    return w / w.sum()


@njit(cache=True)
def _tick_table_jit(n, a, K, J, ncap):
    lam = a
    nmu = float(n)
    rate = lam + nmu
    pi = _stationary_mmn(n, a, J)
    out = np.zeros((K, ncap))
    entry = np.zeros((J + 1, ncap))
    # first tagged arrival sees the stationary state and joins it
    for j in range(J + 1):
        entry[min(j + 1, J), 0] += pi[j]
    nxt = np.zeros((J + 1, ncap))
    vec = np.zeros(ncap)
    for T in range(1, K + 1):
        # block of length T: no further tagged arrivals, drain the queue
        vec[:] = 0.0
        for X in range(J, -1, -1):
            Q = X - n
            row = entry[X]
            if Q <= 0:
                for i in range(ncap):
                    out[T - 1, i] += row[i] + vec[i]
                    vec[i] = 0.0
                continue
            for i in range(ncap):
                vec[i] += row[i]
            _geom_conv_inplace(vec, nmu / (rate * min(T, Q)))
        if T == K:
            break
        # evolve until the next tagged arrival
        nxt[:, :] = 0.0
        vec[:] = 0.0
        for X in range(J, -1, -1):
            row = entry[X]
            for i in range(ncap):
                vec[i] += row[i]
            Q = X - n
            if Q >= 1:
                _geom_conv_inplace(vec, 1.0 / min(T, Q))
            pa = lam / (lam + min(X, n))
            up = min(X + 1, J)
            for i in range(ncap):
                v = vec[i]
                nxt[up, i] += v * pa
                vec[i] = v * (1.0 - pa)
        tmp = entry
        entry = nxt
        nxt = tmp
    return out


def _geom_conv_np(x: np.ndarray, p: float) -> np.ndarray:
    y = lfilter([0.0, p], [1.0, -(1.0 - p)], x)
    y[-1] += x.sum() - y.sum()
    return y


def tick_table_numpy(n: int, a: float, K: int, J: int, ncap: int) -> np.ndarray:
    lam = float(a)
    nmu = float(n)
    rate = lam + nmu
    states = np.arange(J + 1)
    w = np.ones(J + 1)
    w[1:] = np.cumprod(a / np.minimum(states[1:], n))
    pi = w / w.sum()
    out = np.zeros((K, ncap))
    entry = np.zeros((J + 1, ncap))
    np.add.at(entry[:, 0], np.minimum(states + 1, J), pi)
    for T in range(1, K + 1):
        vec = np.zeros(ncap)
        for X in range(J, n, -1):
            vec += entry[X]
            vec = _geom_conv_np(vec, nmu / (rate * min(T, X - n)))
        out[T - 1] = vec + entry[: n + 1].sum(axis=0)
        if T == K:
            break
        nxt = np.zeros_like(entry)
        vec = np.zeros(ncap)
        for X in range(J, -1, -1):
            vec = vec + entry[X]
            if X - n >= 1:
                vec = _geom_conv_np(vec, 1.0 / min(T, X - n))
            pa = lam / (lam + min(X, n))
            nxt[min(X + 1, J)] += vec * pa
            vec = vec * (1.0 - pa)
        entry = nxt
    return out


# --------------------------------------------------------------------------
# tail evaluation: P(S_k > k x) = sum_m Pois(m; rate k x) P(N_k > m)


@njit(cache=True)
def _tail_grid_jit(P, rate, xs):
    K, ncap = P.shape
    out = np.zeros((K, xs.shape[0]))
    surv = np.zeros(ncap)
    for k in range(K):
        acc = 0.0
        for m in range(ncap - 1, -1, -1):
            surv[m] = acc  # P(N > m)
            acc += P[k, m]
        for ix in range(xs.shape[0]):
            mu = rate * (k + 1) * xs[ix]
            if mu <= 0.0:
                out[k, ix] = surv[0]
                continue
            spread = 10.0 * math.sqrt(mu) + 10.0
            lo = int(max(0.0, mu - spread))
            hi = int(min(ncap - 1.0, mu + spread))
            if lo > hi:
                continue
            pm = math.exp(lo * math.log(mu) - mu - math.lgamma(lo + 1.0))
            s = 0.0
            for m in range(lo, hi + 1):
                s += pm * surv[m]
                pm *= mu / (m + 1.0)
            out[k, ix] = min(max(s, 0.0), 1.0)
    return out


def tail_grid_numpy(P: np.ndarray, rate: float, xs: np.ndarray) -> np.ndarray:
    from scipy.special import pdtr

    K, ncap = P.shape
    n_idx = np.arange(1, ncap)
    out = np.empty((K, len(xs)))
    for k in range(K):
        mu = rate * (k + 1) * np.asarray(xs)
        # P(Erlang(N, rate) > y) = P(Pois(rate y) <= N - 1)
        cdf = pdtr(n_idx[None, :] - 1, mu[:, None])
        out[k] = cdf @ P[k, 1:]
    return np.clip(out, 0.0, 1.0)


# --------------------------------------------------------------------------
# Monte-Carlo: consecutive waits from a stationary M/M/n (Kiefer-Wolfowitz)


@njit(cache=True)
def _stationary_block_waits_jit(n, lam, b, k, reps, seed, cdf, sigma):
    np.random.seed(seed)
    out = np.empty((reps, k))
    V = np.empty(n)
    for r in range(reps):
        j = np.searchsorted(cdf, np.random.random(), side="right")
        if j >= n:
            e = 0
            while np.random.random() < sigma:
                e += 1
            j = n + e
        busy = min(j, n)
        for s in range(n):
            V[s] = np.random.exponential(b) if s < busy else 0.0
        for _ in range(j - n):
            V[np.argmin(V)] += np.random.exponential(b)
        for t in range(k):
            i = np.argmin(V)
            out[r, t] = V[i]
            V[i] += np.random.exponential(b)
            gap = np.random.exponential(1.0 / lam)
            for s in range(n):
                v = V[s] - gap
                V[s] = v if v > 0.0 else 0.0
    return out


def stationary_block_waits_numpy(n, lam, b, k, reps, seed, cdf, sigma):
    rng = np.random.default_rng(seed)
    rows = np.arange(reps)
    j = np.searchsorted(cdf, rng.random(reps), side="right")
    tail = j >= n
    j[tail] = n + rng.geometric(1.0 - sigma, size=int(tail.sum())) - 1
    V = rng.exponential(b, size=(reps, n))
    V[np.arange(n)[None, :] >= np.minimum(j, n)[:, None]] = 0.0
    queued = np.maximum(j - n, 0)
    for q in range(int(queued.max(initial=0))):
        sel = rows[queued > q]
        idx = np.argmin(V[sel], axis=1)
        V[sel, idx] += rng.exponential(b, size=len(sel))
    out = np.empty((reps, k))
    for t in range(k):
        idx = np.argmin(V, axis=1)
        out[:, t] = V[rows, idx]
        V[rows, idx] += rng.exponential(b, size=reps)
        V = np.maximum(V - rng.exponential(1.0 / lam, size=reps)[:, None], 0.0)
    return out


if USE_NUMBA:
    tick_table = _tick_table_jit
    tail_grid = _tail_grid_jit
    stationary_block_waits = _stationary_block_waits_jit
else:
    tick_table = tick_table_numpy
    tail_grid = tail_grid_numpy
    stationary_block_waits = stationary_block_waits_numpy
