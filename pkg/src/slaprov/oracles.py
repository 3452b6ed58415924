"""Independent reference computations used to validate the analytic code.

Nothing here is used by the simulator itself.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def birth_death_stationary(birth, death) -> np.ndarray:
    """Stationary law of a finite birth-death CTMC by a dense linear solve.

    ``birth[j]`` is the rate j -> j+1 and ``death[j]`` the rate j+1 -> j.
    """
    birth = np.asarray(birth, dtype=float)
    death = np.asarray(death, dtype=float)
    size = len(birth) + 1
    Q = np.zeros((size, size))
    for j in range(size - 1):
        Q[j, j + 1] = birth[j]
        Q[j + 1, j] = death[j]
    Q -= np.diag(Q.sum(axis=1))
    A = np.vstack([Q.T, np.ones(size)])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return pi


def erlang_c_ctmc(n: int, a: float, cap: int = 400) -> float:
    """P(arrival waits) in M/M/n from the truncated CTMC (PASTA)."""
    states = np.arange(cap)
    pi = birth_death_stationary(np.full(cap, a), np.minimum(states + 1, n).astype(float))
    return float(pi[n:].sum())


def loss_blocking_ctmc(M: int, A: float) -> float:
    """Blocking of the M/M/M/M loss system from its CTMC."""
    if M == 0:
        return 1.0
    pi = birth_death_stationary(np.full(M, A), np.arange(1, M + 1, dtype=float))
    return float(pi[-1])


def mmn_stationary_cdf(n: int, a: float) -> tuple[np.ndarray, float]:
    """Cumulative stationary probabilities of M/M/n for states 0..n-1 and the
    geometric ratio of the tail beyond n."""
    w = np.ones(n + 1)
    for j in range(1, n + 1):
        w[j] = w[j - 1] * a / j
    sigma = a / n
    total = w[:n].sum() + w[n] / (1.0 - sigma)
    return np.cumsum(w[:n]) / total, sigma


def simulate_block_waits(lam: float, k: int, n: int, b: float = 1.0, reps: int = 100_000,
                         seed: int = 0) -> np.ndarray:
    """Waits of k consecutive jobs in a stationary M/M/n queue, one row per
    replication.  Each replication starts from an exact stationary draw and
    then follows the workload-vector recursion."""
    cdf, sigma = mmn_stationary_cdf(n, lam * b)
    return kernels.stationary_block_waits(int(n), float(lam), float(b), int(k), int(reps), int(seed),
                                          cdf, float(sigma))


def mc_block_wait_tail(x, lam: float, k: int, n: int, b: float = 1.0, reps: int = 100_000,
                       seed: int = 0):
    """Monte-Carlo estimate of P(mean of k consecutive waits > x)."""
    means = simulate_block_waits(lam, k, n, b, reps, seed).mean(axis=1)
    x = np.asarray(x, dtype=float)
    return (means[None, :] > x.reshape(-1, 1)).mean(axis=1).reshape(x.shape)
