"""Ordered-set coupling of the r-process against the pure-random-killing one.

For equal-size finite sets A, B in (0, 1), write A <= B componentwise on
the sorted elements ("precedes").  Two elementary moves preserve the
order: inserting one common value into both sets, and deleting any element
of A while deleting the smallest element of B.  Driving two fitness sets
with one shared randomness source (the jump skeleton, one uniform per
birth, one Bernoulli(r) bit and one uniform rank per death) therefore
keeps F1(t) <= Fr(t) for all t, where F1 always deletes the drawn rank
(that is the r = 1 process in law) and Fr deletes its minimum whenever the
coin says the killing is not random.  In particular the maximal fitness
under killing mix r stochastically dominates the one under r = 1.

Rank deletions remove the j-th largest element, the project-wide
convention for shared ranks; a uniform rank from either end picks a
uniform victim.  Every event asserts the order relation; a violation
would falsify the lemma implementation and aborts with a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .engine import ModelParams
from .rng import Xoshiro256PP, substream_seed
from .stats import GoFReport, ks_statistic, ks_threshold, power_cdf


class CouplingViolationError(AssertionError):
    """The componentwise order broke; carries a diagnostic state dump."""

    def __init__(self, message, *, time=None, event=None, f1=None, fr=None):
        super().__init__(message)
        self.time = time
        self.event = event
        self.f1 = None if f1 is None else np.asarray(f1).copy()
        self.fr = None if fr is None else np.asarray(fr).copy()


class InfeasibleRunError(RuntimeError):
    """Projected cost of a coupled run exceeds the configured budget."""

    def __init__(self, message, projection: dict):
        super().__init__(message)
        self.projection = projection


@dataclass(frozen=True)
class RandomRank:
    """Delete the j-th largest element from both sets (a random killing)."""

    j: int


@dataclass(frozen=True)
class MinVsRank:
    """Delete the j-th largest from A but the smallest from B."""

    j: int


def precedes(a, b) -> bool:
    """Componentwise order of two equal-size sorted fitness sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b))


def insert_common(a, b, w: float):
    """Insert the same value into both sets; order is preserved (asserted)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w in a or w in b:
        raise ValueError(f"w={w} already present")
    a2 = np.insert(a, np.searchsorted(a, w), w)
    b2 = np.insert(b, np.searchsorted(b, w), w)
    if not precedes(a2, b2):
        raise CouplingViolationError(
            f"common insertion of {w} broke the order", f1=a2, fr=b2)
    return a2, b2


def delete_coupled(a, b, rule):
    """Coupled deletion under RandomRank(j) or MinVsRank(j); order asserted.

    Requires k >= 2 (the model forbids deaths at a single type) and
    1 <= j <= k counted from the largest element.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    k = a.size
    if k != b.size:
        raise ValueError("size mismatch")
    if k < 2:
        raise ValueError("deletion needs at least two elements")
    if not 1 <= rule.j <= k:
        raise ValueError(f"rank {rule.j} out of range for k={k}")
    idx = k - rule.j  # j-th largest in ascending storage
    a2 = np.delete(a, idx)
    if isinstance(rule, RandomRank):
        b2 = np.delete(b, idx)
    elif isinstance(rule, MinVsRank):
        b2 = np.delete(b, 0)
    else:
        raise TypeError(f"unknown rule {rule!r}")
    if not precedes(a2, b2):
        raise CouplingViolationError(
            f"coupled deletion {rule} broke the order", f1=a2, fr=b2)
    return a2, b2


# ---------------------------------------------------------------------------
# coupled trajectories
# ---------------------------------------------------------------------------

class CoupledResult(NamedTuple):
    max_f1: float                 # maximal fitness of the r = 1 set at t_max
    max_fr: float                 # maximal fitness of the r-set at t_max
    n_events: int
    violations: int               # always 0: a violation raises instead
    trace: list | None            # (t, kind, k, max_f1, max_fr) when traced


def project_cost(params: ModelParams, t_max: float, n_trajectories: int = 1):
    """Rough expected cost of coupled simulation at the given parameters.

    Uses E[X(t)] ~ exp((lam-1) t) growth (stationary ~O(1) for lam < 1)
    and events ~ (lam+1)/(lam-1) * X(t_max) per trajectory.
    """
    lam = params.lam
    if lam > 1.0:
        x_end = math.exp((lam - 1.0) * t_max)
        events = (lam + 1.0) / (lam - 1.0) * x_end
    else:
        x_end = 1.0 / max(1.0 - lam, 0.05)
        events = (lam + 1.0) * max(x_end, 1.0) * t_max
    return {
        "expected_population_at_t_max": x_end,
        "expected_events_per_trajectory": events,
        "expected_events_total": events * n_trajectories,
        "expected_bytes_per_trajectory": 2 * 8 * x_end,
    }


def coupled_simulate(params: ModelParams, t_max: float, seed: int, *,
                     trace: bool = False,
                     max_events: float = 5e7,
                     max_population: float = 2 ** 21) -> CoupledResult:
    """One shared-randomness coupled pair (F1, Fr) run to t_max.

    Both sets start from one common uniform type.  Births insert the same
    uniform into both; a death with coin 1 deletes the drawn rank from
    both, with coin 0 it deletes the rank from F1 and the minimum from Fr.
    The componentwise order is asserted after every event.

    Raises InfeasibleRunError up front when the projected event count or
    set size exceeds the budgets; exact supercritical growth makes deep
    horizons physically unreachable for the coupled pair.
    """
    if not (0.0 < params.r <= 1.0):
        raise ValueError("the coupling is defined for 0 < r <= 1")
    proj = project_cost(params, t_max)
    if proj["expected_events_per_trajectory"] > max_events \
            or proj["expected_population_at_t_max"] > max_population:
        raise InfeasibleRunError(
            f"coupled run at lam={params.lam}, t_max={t_max} projects "
            f"{proj['expected_events_per_trajectory']:.2e} events and a "
            f"population of {proj['expected_population_at_t_max']:.2e}; "
            f"budgets are {max_events:.1e} events, {max_population:.1e} types",
            proj)

    skel = Xoshiro256PP(substream_seed(seed, "engine/skeleton"))
    fit = Xoshiro256PP(substream_seed(seed, "engine/fitness"))
    coin = Xoshiro256PP(substream_seed(seed, "engine/coin"))
    rank = Xoshiro256PP(substream_seed(seed, "engine/rank"))
    lam, r = params.lam, params.r

    w0 = fit.random_open()
    f1 = np.array([w0])
    fr = np.array([w0])
    t = 0.0
    n_events = 0
    log = [] if trace else None

    while True:
        k = f1.size
        rate = lam if k == 1 else k * (lam + 1.0)
        t += skel.exponential(rate)
        if t > t_max:
            break
        if k == 1 or skel.random() * (k * (lam + 1.0)) < lam * k:
            w = fit.random_open()
            f1 = np.insert(f1, np.searchsorted(f1, w), w)
            fr = np.insert(fr, np.searchsorted(fr, w), w)
            kind = "birth"
        else:
            eps = coin.random() < r
            j = rank.randint(k)
            idx = k - j
            f1 = np.delete(f1, idx)
            fr = np.delete(fr, idx if eps else 0)
            kind = "death_rank" if eps else "death_min"
        if not np.all(f1 <= fr):
            raise CouplingViolationError(
                f"order violated at t={t:.6f} after {kind}",
                time=t, event=kind, f1=f1, fr=fr)
        n_events += 1
        if n_events > max_events:
            raise InfeasibleRunError(
                f"coupled run exceeded the event budget {max_events:.1e}", proj)
        if log is not None:
            log.append((t, kind, f1.size, float(f1[-1]), float(fr[-1])))

    return CoupledResult(max_f1=float(f1[-1]), max_fr=float(fr[-1]),
                         n_events=n_events, violations=0, trace=log)


def dominance_gap(max_f1: Sequence[float], max_fr: Sequence[float],
                  n_grid: int = 512) -> float:
    """min over u of (cdf of max F1)(u) - (cdf of max Fr)(u).

    Stochastic dominance of the r-process maximum means the gap should be
    nonnegative up to statistical noise.
    """
    a = np.sort(np.asarray(max_f1))
    b = np.sort(np.asarray(max_fr))
    grid = np.linspace(0.0, 1.0, n_grid)
    ca = np.searchsorted(a, grid, side="right") / a.size
    cb = np.searchsorted(b, grid, side="right") / b.size
    return float((ca - cb).min())


# ---------------------------------------------------------------------------
# conditional fitness law at r = 1
# ---------------------------------------------------------------------------

@dataclass
class ConditionalLawReport:
    """Per-count KS of the maximal fitness against u -> u**k."""

    reports: dict[int, GoFReport]
    skipped: dict[int, int]     # k -> sample count below the bin threshold
    min_bin: int
    level: float

    @property
    def all_pass(self) -> bool:
        return all(rep.passed for rep in self.reports.values())


def conditional_max_law(x_samples, phi_samples, *, min_bin: int = 200,
                        level: float = 0.05,
                        familywise: bool = True) -> ConditionalLawReport:
    """Bin (X_t, phi_t) samples by the count k and KS-test phi against u**k.

    Bins with fewer than min_bin samples are skipped and reported.  With
    familywise=True the level is Bonferroni-split across tested bins so
    "every bin passes" has family error ~level.
    """
    x = np.asarray(x_samples, dtype=np.int64)
    phi = np.asarray(phi_samples, dtype=np.float64)
    if x.shape != phi.shape:
        raise ValueError("x and phi sample arrays must align")
    ks, counts = np.unique(x, return_counts=True)
    tested = [int(k) for k, c in zip(ks, counts) if c >= min_bin]
    skipped = {int(k): int(c) for k, c in zip(ks, counts) if c < min_bin}
    per_level = level / len(tested) if (familywise and tested) else level
    reports = {}
    for k in tested:
        sel = phi[x == k]
        reports[k] = ks_statistic(sel, power_cdf(k), level=per_level,
                                  family=f"phi | X={k} vs u^{k}")
    return ConditionalLawReport(reports=reports, skipped=skipped,
                                min_bin=min_bin, level=level)


# ---------------------------------------------------------------------------
# exhaustive small-set lemma check
# ---------------------------------------------------------------------------

def enumerate_lemma_cases(k_max: int = 4, grid=None) -> int:
    """Exhaustively verify order preservation on a rational grid.

    All pairs A <= B of equal-size subsets of the grid with k <= k_max,
    every valid common insertion and every deletion rule.  Returns the
    number of checked moves; any violation raises CouplingViolationError.
    """
    from itertools import combinations

    if grid is None:
        grid = [round(0.1 * i, 1) for i in range(1, 10)]
    checked = 0
    for k in range(1, k_max + 1):
        subsets = [np.array(c) for c in combinations(grid, k)]
        for a in subsets:
            for b in subsets:
                if not np.all(a <= b):
                    continue
                used = set(a) | set(b)
                for w in grid:
                    if w in used:
                        continue
                    insert_common(a, b, w)
                    checked += 1
                if k >= 2:
                    for j in range(1, k + 1):
                        delete_coupled(a, b, RandomRank(j))
                        delete_coupled(a, b, MinVsRank(j))
                        checked += 2
    return checked
