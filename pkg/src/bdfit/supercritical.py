"""Fast exact-law samplers for the growth regime lam > 1.

Event-driven simulation is hopeless deep into the supercritical regime:
the expected event count to time t grows like exp((lam-1) t), which is
about 4e13 at lam = 2, t = 30.  The observables the verification targets
need at such depths are reachable anyway, through three structural facts:

1.  While at least two types are alive the count chain has exactly the
    linear birth-death rates, so over a window [s, s+d] that stays away
    from a single type, X(s+d) | X(s) = n is a sum of n iid zero-inflated
    geometrics and can be sampled in O(1) for any n via a binomial plus a
    negative binomial (the classical branching decomposition).  Paths are
    switched to this grid sampler only once X >= switch_pop at a grid
    time; the laws differ only on paths that return to a single type,
    an event of probability at most (1/lam) ** (switch_pop - 1).

2.  For r = 0 the fittest type ever created is never killed, so the
    maximal fitness is the running maximum of the birth uniforms and the
    age is determined by birth times alone.  Conditional on the count
    path, the champion among the m types born after the handoff is a
    uniformly chosen one of those births.  Per-cell birth counts are
    sampled as Poisson with the exact conditional mean (trapezoid of the
    birth intensity lam * X); this drops sub-Poisson corrections of
    relative size O(X**-1/2) <= O(switch_pop**-1/2) at the handoff and
    far smaller where the age law carries mass.  Within a cell the birth
    time uses the exponential-slope profile, an O(((lam-1) dt)**2) shape
    correction.

3.  For r = 1 the set of living fitnesses given X_t = k is k iid
    uniforms (every death removes a uniformly chosen type), so the
    maximal fitness is V ** (1/X_t) with V uniform.  This identity is
    itself verified against the honest full-type engine by the
    conditional-law acceptance target before the sampler leans on it.

The test suite cross-checks every sampler here against honest event-driven
simulation at overlap-feasible horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .engine import EventKind, ModelParams
from .rng import numpy_generator, replica_seed, substream_seed

# total-variation budget for the single-type boundary coupling
_BOUNDARY_TOL = 1e-12


def _check_regime(lam: float, switch_pop: int):
    if lam <= 1.0:
        raise ValueError("the fast path needs lam > 1 (growth regime)")
    leak = (switch_pop // 2 - 1) * math.log(1.0 / lam)
    if math.exp(leak) > _BOUNDARY_TOL:
        raise ValueError(
            f"switch_pop={switch_pop} is too small at lam={lam}: the "
            f"single-type coupling leak exceeds {_BOUNDARY_TOL:g}; raise "
            f"switch_pop")


def _grid(t_end: float, dt: float) -> tuple[int, float]:
    ngrid = max(1, int(round(t_end / dt)))
    return ngrid, t_end / ngrid


def _engine_substream_seeds(master: int, label: str, n: int):
    """Per-replica engine substream seeds, one row per named stream."""
    reps = [substream_seed(master, label, i) for i in range(n)]
    skel = np.array([substream_seed(s, "engine/skeleton") for s in reps],
                    dtype=np.uint64)
    fit = np.array([substream_seed(s, "engine/fitness") for s in reps],
                   dtype=np.uint64)
    coin = np.array([substream_seed(s, "engine/coin") for s in reps],
                    dtype=np.uint64)
    rank = np.array([substream_seed(s, "engine/rank") for s in reps],
                    dtype=np.uint64)
    return skel, fit, coin, rank


def _branching_params(lam: float, dt: float) -> tuple[float, float]:
    """Zero-inflated-geometric parameters of X(dt) per ancestor (death rate 1)."""
    e = math.exp((lam - 1.0) * dt)
    alpha = (e - 1.0) / (lam * e - 1.0)
    return alpha, lam * alpha


def _branch_step(x, alpha, beta, rng):
    """Exact one-window transition of the linear chain for active entries."""
    z = rng.binomial(x, 1.0 - alpha)
    if np.any(z == 0):
        # all lineages of some replica died inside one window: probability
        # <= alpha**switch_pop, far below the coupling budget
        raise RuntimeError("branching window extinguished a replica")
    return z + rng.negative_binomial(z, 1.0 - beta)


# ---------------------------------------------------------------------------
# r = 0: joint age / maximal-fitness sampler
# ---------------------------------------------------------------------------

def sample_age_fitness_r0(params: ModelParams, t: float, n_samples: int,
                          seed: int, *, dt: float = 0.05,
                          switch_pop: int = 256,
                          poisson_births: bool = True):
    """Samples of (age of the fittest, maximal fitness) at time t for r = 0.

    Exact event-driven prefix per replica until the count reaches
    switch_pop, then the grid fast-forward described in the module
    docstring.  Returns (ages, phis) as arrays of length n_samples.
    """
    if params.r != 0.0:
        raise ValueError("this sampler is specific to r = 0")
    _check_regime(params.lam, switch_pop)
    ngrid, dt = _grid(t, dt)
    lam = params.lam
    kappa = lam - 1.0

    skel, fit, _, _ = _engine_substream_seeds(seed, "supercritical/r0", n_samples)
    done, x_out, enter, births1, phi1, tau1 = _kernels.r0_phase1(
        lam, switch_pop, dt, ngrid, skel, fit)

    rng = numpy_generator(seed, "supercritical/r0-phase2")
    x = x_out.astype(np.int64).copy()
    weights = np.zeros((n_samples, ngrid))
    alpha, beta = _branching_params(lam, dt)
    active = ~done
    for gi in range(int(enter[active].min()) if active.any() else ngrid, ngrid):
        sel = active & (enter <= gi)
        if not sel.any():
            continue
        x_next = _branch_step(x[sel], alpha, beta, rng)
        mean_b = lam * dt * 0.5 * (x[sel] + x_next)
        weights[sel, gi] = rng.poisson(mean_b) if poisson_births else mean_b
        x[sel] = x_next

    ages = np.empty(n_samples)
    phis = np.empty(n_samples)
    ages[done] = t - tau1[done]
    phis[done] = phi1[done]

    idx = np.flatnonzero(active)
    if idx.size:
        b2 = weights[idx].sum(axis=1)
        v = rng.random(idx.size)
        # maximal fitness among the post-handoff births
        with np.errstate(divide="ignore"):
            m2 = np.where(b2 > 0, v ** (1.0 / np.maximum(b2, 1.0)), 0.0)
        from_phase1 = phi1[idx] >= m2
        # champion born after the handoff: a uniformly chosen later birth
        cum = np.cumsum(weights[idx], axis=1)
        pick = rng.random(idx.size) * b2
        cell = (cum < pick[:, None]).sum(axis=1)
        cell = np.minimum(cell, ngrid - 1)
        u_off = rng.random(idx.size)
        offset = np.log1p(u_off * (math.exp(kappa * dt) - 1.0)) / kappa
        birth_time = cell * dt + offset
        ages[idx] = np.where(from_phase1, t - tau1[idx], t - birth_time)
        phis[idx] = np.where(from_phase1, phi1[idx], m2)
    return ages, phis


# ---------------------------------------------------------------------------
# r = 1: count process plus the conditional fitness law
# ---------------------------------------------------------------------------

def sample_count(params: ModelParams, t: float, n_samples: int, seed: int, *,
                 dt: float = 0.05, switch_pop: int = 256) -> np.ndarray:
    """Exact-law samples of the count X_t for lam > 1 (any r; counts do not
    depend on the killing rule)."""
    _check_regime(params.lam, switch_pop)
    ngrid, dt = _grid(t, dt)
    lam = params.lam
    skel, _, _, _ = _engine_substream_seeds(seed, "supercritical/count", n_samples)
    done, x_out, enter = _kernels.count_phase1(lam, switch_pop, dt, ngrid, skel)
    rng = numpy_generator(seed, "supercritical/count-phase2")
    x = x_out.astype(np.int64).copy()
    alpha, beta = _branching_params(lam, dt)
    active = ~done
    for gi in range(int(enter[active].min()) if active.any() else ngrid, ngrid):
        sel = active & (enter <= gi)
        if not sel.any():
            continue
        x[sel] = _branch_step(x[sel], alpha, beta, rng)
    return x


def sample_phi_r1(params: ModelParams, t: float, n_samples: int, seed: int, *,
                  dt: float = 0.05, switch_pop: int = 256):
    """Samples of (X_t, maximal fitness) for r = 1 via the conditional law.

    Given X_t = k the living fitnesses are k iid uniforms, so the maximum
    is V ** (1/k).  Use the honest r1 engine at feasible horizons to
    validate that conditional law; this sampler extends it to depths the
    event loop cannot reach.
    """
    if params.r != 1.0:
        raise ValueError("the conditional-law sampler is specific to r = 1")
    x = sample_count(params, t, n_samples, seed)
    rng = numpy_generator(seed, "supercritical/r1-phi")
    phi = rng.random(n_samples) ** (1.0 / x)
    return x, phi


def r1_population_and_max(params: ModelParams, t: float, n_samples: int,
                          seed: int, *, initial_capacity: int = 4096):
    """Honest full-type r = 1 samples of (X_t, maximal fitness).

    Event-driven with complete per-type fitness bookkeeping (the numba
    kernel); cost is proportional to exp((lam-1) t), feasible to t ~ 15
    at lam = 1.5.
    """
    if params.r != 1.0:
        raise ValueError("the specialized engine is r = 1 only")
    if params.lam <= 1.0:
        raise ValueError("use the general engine for lam <= 1")
    skel, fit, coin, rank = _engine_substream_seeds(
        seed, "supercritical/r1-honest", n_samples)
    return _kernels.r1_engine(params.lam, t, skel, fit, coin, rank,
                              initial_capacity)


# ---------------------------------------------------------------------------
# growth paths for the lam > 1 diagnostics
# ---------------------------------------------------------------------------

@dataclass
class GrowthPath:
    """One counting path summarized for the growth diagnostics.

    Exact event-level values during the prefix (count below switch_pop),
    exact-law grid values past the handoff; n_of_t is the running maximum
    (grid-resolution once past the prefix), b_of_t cumulative births with
    per-cell Poisson counts past the prefix.  The doubling ladder carries
    exact hit times and births for levels reached inside the prefix and
    grid-crossing values beyond.
    """

    lam: float
    t_grid: np.ndarray
    x_of_t: np.ndarray
    n_of_t: np.ndarray
    b_of_t: np.ndarray
    hit_levels: np.ndarray
    hit_times: np.ndarray
    hit_births: np.ndarray


def growth_paths(params: ModelParams, t_max: float, n_replicates: int,
                 seed: int, *, dt: float = 0.005, switch_pop: int = 256,
                 max_level_exp: int = 60) -> list[GrowthPath]:
    """Sample counting paths with hit-time ladders for lam > 1."""
    _check_regime(params.lam, switch_pop)
    ngrid, dt = _grid(t_max, dt)
    lam = params.lam
    n_exact_levels = int(math.log2(switch_pop))
    skel, _, _, _ = _engine_substream_seeds(
        seed, "supercritical/growth", n_replicates)
    done, enter, x_grid, b_grid, nmax_grid, hit_t, hit_b = \
        _kernels.growth_phase1(lam, switch_pop, dt, ngrid, skel, n_exact_levels)

    rng = numpy_generator(seed, "supercritical/growth-phase2")
    alpha, beta = _branching_params(lam, dt)
    x_grid = x_grid.astype(np.int64)
    active = ~done
    for gi in range((int(enter[active].min()) if active.any() else ngrid), ngrid):
        sel = active & (enter <= gi)
        if not sel.any():
            continue
        x_next = _branch_step(x_grid[sel, gi], alpha, beta, rng)
        x_grid[sel, gi + 1] = x_next
        b_grid[sel, gi + 1] = b_grid[sel, gi] + rng.poisson(
            lam * dt * 0.5 * (x_grid[sel, gi] + x_next))
        nmax_grid[sel, gi + 1] = np.maximum(nmax_grid[sel, gi], x_next)

    t_grid = np.arange(ngrid + 1) * dt
    paths = []
    for i in range(n_replicates):
        n_of_t = nmax_grid[i]
        levels, times, births = [], [], []
        for j in range(1, max_level_exp):
            level = 2 ** j
            if j - 1 < n_exact_levels and not math.isnan(hit_t[i, j - 1]):
                levels.append(level)
                times.append(hit_t[i, j - 1])
                births.append(float(hit_b[i, j - 1]))
            elif level <= n_of_t[-1]:
                gi = int(np.searchsorted(n_of_t, level, side="left"))
                levels.append(level)
                times.append(t_grid[gi])
                births.append(float(b_grid[i, gi]))
            else:
                break
        paths.append(GrowthPath(
            lam=lam, t_grid=t_grid, x_of_t=x_grid[i], n_of_t=n_of_t,
            b_of_t=b_grid[i], hit_levels=np.array(levels, dtype=np.int64),
            hit_times=np.array(times), hit_births=np.array(births)))
    return paths


def growth_path_from_events(params: ModelParams, events, t_max: float,
                            dt: float = 0.01, max_level_exp: int = 60) -> GrowthPath:
    """Adapter: build a GrowthPath from an engine event log (feasible t only)."""
    ngrid, dt = _grid(t_max, dt)
    t_grid = np.arange(ngrid + 1) * dt
    x_of_t = np.ones(ngrid + 1, dtype=np.int64)
    b_of_t = np.ones(ngrid + 1)
    n_of_t = np.ones(ngrid + 1, dtype=np.int64)
    levels, times, births = [], [], []
    k = 0
    b = 0
    kmax = 0
    gi = 0
    next_level = 2
    for ev in events:
        while gi + 1 <= ngrid and t_grid[gi + 1] < ev.time:
            gi += 1
            x_of_t[gi] = k
            b_of_t[gi] = b
            n_of_t[gi] = kmax
        if ev.kind is EventKind.BIRTH:
            k += 1
            b += 1
            if k > kmax:
                kmax = k
                if kmax == next_level:
                    levels.append(kmax)
                    times.append(ev.time)
                    births.append(float(b))
                    next_level *= 2
        else:
            k -= 1
    x_of_t[gi + 1:] = k
    b_of_t[gi + 1:] = b
    n_of_t[gi + 1:] = kmax
    return GrowthPath(lam=params.lam, t_grid=t_grid, x_of_t=x_of_t,
                      n_of_t=n_of_t, b_of_t=b_of_t,
                      hit_levels=np.array(levels, dtype=np.int64),
                      hit_times=np.array(times), hit_births=np.array(births))
