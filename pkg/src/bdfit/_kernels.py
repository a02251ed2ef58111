"""Numba kernels: xoshiro256++ twin of rng.py plus hot event loops.

The generator here is bit-compatible with rng.Xoshiro256PP (cross-checked
in the tests).  Kernels receive pre-derived substream seeds from the
Python side so the documented seed-mixing function stays in one place.

Event loops march cell by cell over a uniform grid: events are applied
exactly inside the current cell, and a draw overshooting the cell boundary
is discarded, which is exact by memorylessness of the exponential clock.
Kernels are compiled with cache=True; the first call in a fresh
environment pays the JIT cost once.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

U64 = np.uint64
_DOUBLE = 1.1102230246251565e-16  # 2**-53


@njit(cache=True, inline="always")
def _splitmix64(x):
    x = x + U64(0x9E3779B97F4A7C15)
    z = (x ^ (x >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True)
def xo_seed(seed):
    s = np.empty(4, dtype=np.uint64)
    x = U64(seed)
    for i in range(4):
        x = _splitmix64(x)
        s[i] = x
    return s


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << U64(k)) | (x >> U64(64 - k))


@njit(cache=True, inline="always")
def xo_next(s):
    out = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return out


@njit(cache=True, inline="always")
def xo_random(s):
    # uniform in [0, 1)
    return (xo_next(s) >> U64(11)) * _DOUBLE


@njit(cache=True, inline="always")
def xo_random_open(s):
    u = (xo_next(s) >> U64(11)) * _DOUBLE
    while u <= 0.0:
        u = (xo_next(s) >> U64(11)) * _DOUBLE
    return u


@njit(cache=True, inline="always")
def xo_exponential(s, rate):
    u = ((xo_next(s) >> U64(11)) + U64(1)) * _DOUBLE  # in (0, 1]
    return -np.log(u) / rate


@njit(cache=True)
def count_phase1(lam, switch_pop, dt, ngrid, skel_seeds):
    """Exact event-driven prefix of the count chain, one replica per seed.

    Marches the grid 0, dt, 2*dt, ... exactly until the first grid time
    whose count is at least switch_pop (the handoff to the branching
    fast-forward) or until the grid end.  Returns

        done       replica reached the grid end inside the exact phase
        x_out      exact count at the handoff grid time (or at the end)
        enter_idx  grid index of the handoff (ngrid when done)
    """
    n = skel_seeds.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    x_out = np.empty(n, dtype=np.int64)
    enter_idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        s = xo_seed(skel_seeds[i])
        k = 1
        gi = 0
        while gi < ngrid and k < switch_pop:
            t = gi * dt
            cell_end = (gi + 1) * dt
            while True:
                rate = lam * k if k == 1 else k * (lam + 1.0)
                t = t + xo_exponential(s, rate)
                if t > cell_end:
                    break
                if k == 1 or xo_random(s) * (k * (lam + 1.0)) < lam * k:
                    k += 1
                else:
                    k -= 1
            gi += 1
        done[i] = gi >= ngrid and k < switch_pop
        x_out[i] = k
        enter_idx[i] = gi
    return done, x_out, enter_idx


@njit(cache=True)
def r0_phase1(lam, switch_pop, dt, ngrid, skel_seeds, fit_seeds):
    """count_phase1 plus champion and birth bookkeeping for r = 0.

    With r = 0 the fittest type ever born is never killed, so the maximal
    fitness and its creation time evolve only at births.  Extra outputs:
    births created so far (founder included), the maximal fitness phi, and
    the creation time tau of the current champion.
    """
    n = skel_seeds.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    x_out = np.empty(n, dtype=np.int64)
    enter_idx = np.empty(n, dtype=np.int64)
    births = np.empty(n, dtype=np.int64)
    phi = np.empty(n)
    tau = np.empty(n)
    for i in range(n):
        s_skel = xo_seed(skel_seeds[i])
        s_fit = xo_seed(fit_seeds[i])
        k = 1
        b = 1
        best = xo_random_open(s_fit)
        best_t = 0.0
        gi = 0
        while gi < ngrid and k < switch_pop:
            t = gi * dt
            cell_end = (gi + 1) * dt
            while True:
                rate = lam * k if k == 1 else k * (lam + 1.0)
                t = t + xo_exponential(s_skel, rate)
                if t > cell_end:
                    break
                if k == 1 or xo_random(s_skel) * (k * (lam + 1.0)) < lam * k:
                    u = xo_random_open(s_fit)
                    b += 1
                    if u > best:
                        best = u
                        best_t = t
                    k += 1
                else:
                    k -= 1
            gi += 1
        done[i] = gi >= ngrid and k < switch_pop
        x_out[i] = k
        enter_idx[i] = gi
        births[i] = b
        phi[i] = best
        tau[i] = best_t
    return done, x_out, enter_idx, births, phi, tau


@njit(cache=True)
def growth_phase1(lam, switch_pop, dt, ngrid, skel_seeds, n_levels):
    """Exact prefix recording grid counts/births and doubling-ladder hits.

    Grid arrays hold exact values for indices 0..enter_idx; hit_times[i, j]
    is the exact first time the count reaches 2**(j+1) (NaN if not reached
    during the exact phase) and hit_births[i, j] the exact number of types
    created by then.
    """
    n = skel_seeds.shape[0]
    done = np.zeros(n, dtype=np.bool_)
    enter_idx = np.empty(n, dtype=np.int64)
    x_grid = np.zeros((n, ngrid + 1), dtype=np.int64)
    b_grid = np.zeros((n, ngrid + 1), dtype=np.float64)
    nmax_grid = np.zeros((n, ngrid + 1), dtype=np.int64)
    hit_times = np.full((n, n_levels), np.nan)
    hit_births = np.zeros((n, n_levels), dtype=np.int64)
    for i in range(n):
        s = xo_seed(skel_seeds[i])
        k = 1
        b = 1
        kmax = 1
        x_grid[i, 0] = 1
        b_grid[i, 0] = 1.0
        nmax_grid[i, 0] = 1
        gi = 0
        while gi < ngrid and k < switch_pop:
            t = gi * dt
            cell_end = (gi + 1) * dt
            while True:
                rate = lam * k if k == 1 else k * (lam + 1.0)
                t = t + xo_exponential(s, rate)
                if t > cell_end:
                    break
                if k == 1 or xo_random(s) * (k * (lam + 1.0)) < lam * k:
                    k += 1
                    b += 1
                    if k > kmax:
                        kmax = k
                        if (kmax & (kmax - 1)) == 0:  # power of two
                            j = -1
                            m = kmax
                            while m > 1:
                                m >>= 1
                                j += 1
                            if j < n_levels:
                                hit_times[i, j] = t
                                hit_births[i, j] = b
                else:
                    k -= 1
            gi += 1
            x_grid[i, gi] = k
            b_grid[i, gi] = b
            nmax_grid[i, gi] = kmax
        done[i] = gi >= ngrid and k < switch_pop
        enter_idx[i] = gi
    return done, enter_idx, x_grid, b_grid, nmax_grid, hit_times, hit_births


@njit(cache=True, parallel=True)
def r1_engine(lam, t_end, skel_seeds, fit_seeds, coin_seeds, rank_seeds, cap0):
    """Honest full-type engine specialized to r = 1 (every death random).

    Tracks the whole fitness multiset in an unsorted array with swap-remove
    deletion; the running maximum is rescanned only when the victim was (or
    displaced) the champion, O(1) amortized per death.  The victim is a
    uniform array index rather than the general engine's uniform sorted
    rank; the two conventions pick a uniformly random type either way.

    Replicas carry independent substreams and write disjoint output slots,
    so the thread count cannot change the result.  Returns (x, phi) at
    t_end per replica.
    """
    n = skel_seeds.shape[0]
    xs = np.empty(n, dtype=np.int64)
    phis = np.empty(n)
    for i in prange(n):
        s_skel = xo_seed(skel_seeds[i])
        s_fit = xo_seed(fit_seeds[i])
        s_coin = xo_seed(coin_seeds[i])
        s_rank = xo_seed(rank_seeds[i])
        cap = cap0
        fit = np.empty(cap)
        fit[0] = xo_random_open(s_fit)
        k = 1
        best = fit[0]
        bi = 0
        t = 0.0
        while True:
            rate = lam * k if k == 1 else k * (lam + 1.0)
            t_next = t + xo_exponential(s_skel, rate)
            if t_next > t_end:
                break
            t = t_next
            if k == 1 or xo_random(s_skel) * (k * (lam + 1.0)) < lam * k:
                u = xo_random_open(s_fit)
                if k >= cap:
                    cap *= 2
                    grown = np.empty(cap)
                    grown[:k] = fit[:k]
                    fit = grown
                fit[k] = u
                if u > best:
                    best = u
                    bi = k
                k += 1
            else:
                xo_random(s_coin)  # Bernoulli(r) coin; always a kill at r = 1
                j = int(xo_random(s_rank) * k)
                if j >= k:
                    j = k - 1
                champion_hit = (j == bi) or (bi == k - 1)
                fit[j] = fit[k - 1]
                k -= 1
                if champion_hit:
                    best = -1.0
                    for q in range(k):
                        if fit[q] > best:
                            best = fit[q]
                            bi = q
        xs[i] = k
        phis[i] = best
    return xs, phis
