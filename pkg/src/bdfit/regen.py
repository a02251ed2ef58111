"""Excursion and regeneration structure at returns to a single type.

Between consecutive returns of the count to 1 the trajectory decomposes
into a level-1 sojourn of duration xi (exponential, rate lam), a first
jump to two types bringing a fresh uniform fitness, and a first level-2
sojourn of duration eta (exponential, rate 2*lam + 2).  If that level-2
sojourn ends with the *incumbent* type removed by a *random* killing, the
excursion carries epsilon = 1: the survivor is the newcomer, so at the
return the sole fitness is uniform(0, 1) and its age equals eta, i.e.
exponential with rate 2*(lam + 1).  Those returns are the regeneration
times; the chain restarts from them.  epsilon = 1 excludes the case where
the incumbent merely loses a least-fit comparison, and each excursion is
classified by its first level-2 sojourn only.

epsilon is read off the event log (the engine records which killing rule
fired and who was removed), never re-derived probabilistically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from . import engine
from .engine import EventKind, EventRecord, ModelParams
from .rng import replica_seed, substream_seed
from .stats import EmpiricalDistribution


class ExcursionOutcome(str, Enum):
    UP = "up"
    DOWN_LEAST_FIT = "down_least_fit"
    DOWN_RANDOM_KILLS_INCUMBENT = "down_random_kills_incumbent"
    DOWN_RANDOM_KILLS_NEWCOMER = "down_random_kills_newcomer"


@dataclass(frozen=True)
class ExcursionRecord:
    """One completed (or classified-but-unreturned) excursion from 1."""

    n: int
    return_time_prev: float          # when the excursion started at level 1
    xi: float                        # level-1 sojourn duration
    newcomer_fitness: float          # uniform created on the jump to 2
    incumbent_fitness: float         # fitness of the type holding level 1
    eta: float                       # first level-2 sojourn duration
    outcome: ExcursionOutcome
    epsilon: int                     # 1 iff the incumbent fell to random killing
    return_time: Optional[float]     # next return to 1; None if not seen


@dataclass(frozen=True)
class RegenRecord:
    """A regeneration: return time, survivor fitness and survivor age."""

    n: int
    time: float
    phi: float
    age: float


class ExcursionScan(NamedTuple):
    records: list[ExcursionRecord]
    censored: int


def bernoulli_p(params: ModelParams) -> float:
    """Per-excursion regeneration probability p = r / (2 * (1 + lam))."""
    return params.r / (2.0 * (1.0 + params.lam))


def detect_excursions(event_log: list[EventRecord]) -> ExcursionScan:
    """Parse an event log (from a start at one type) into excursion records.

    An excursion enters the list once its first level-2 sojourn has
    completed; if the log ends before that, it counts as censored instead.
    Excursions that climbed above 2 and had not returned by the end of the
    log keep return_time = None.
    """
    if not event_log or event_log[0].kind is not EventKind.BIRTH \
            or event_log[0].population_after != 1:
        raise ValueError("event log must begin with the founder birth at one type")

    records: list[ExcursionRecord] = []
    censored = 0
    incumbent_id = event_log[0].subject_id
    incumbent_fitness = event_log[0].subject_fitness
    t_prev = event_log[0].time
    n = 1
    # parser states: "at_one" (waiting for the up-jump), "first_two"
    # (inside the first level-2 sojourn), "above" (waiting for the return)
    phase = "at_one"
    pending: Optional[dict] = None
    survivors: dict[int, float] = {incumbent_id: incumbent_fitness}

    for ev in event_log[1:]:
        if ev.kind is EventKind.BIRTH:
            survivors[ev.subject_id] = ev.subject_fitness
        else:
            survivors.pop(ev.subject_id)

        if phase == "at_one":
            if ev.kind is not EventKind.BIRTH:
                raise ValueError("death recorded while only one type was alive")
            pending = {
                "n": n,
                "return_time_prev": t_prev,
                "xi": ev.time - t_prev,
                "newcomer_id": ev.subject_id,
                "newcomer_fitness": ev.subject_fitness,
                "incumbent_id": incumbent_id,
                "incumbent_fitness": incumbent_fitness,
                "rise_time": ev.time,
            }
            phase = "first_two"
        elif phase == "first_two":
            eta = ev.time - pending["rise_time"]
            if ev.kind is EventKind.BIRTH:
                outcome, eps, return_time = ExcursionOutcome.UP, 0, None
                phase = "above"
            else:
                if ev.kind is EventKind.DEATH_RANDOM:
                    if ev.subject_id == pending["incumbent_id"]:
                        outcome, eps = ExcursionOutcome.DOWN_RANDOM_KILLS_INCUMBENT, 1
                    else:
                        outcome, eps = ExcursionOutcome.DOWN_RANDOM_KILLS_NEWCOMER, 0
                else:
                    outcome, eps = ExcursionOutcome.DOWN_LEAST_FIT, 0
                return_time = ev.time
            records.append(ExcursionRecord(
                n=pending["n"], return_time_prev=pending["return_time_prev"],
                xi=pending["xi"], newcomer_fitness=pending["newcomer_fitness"],
                incumbent_fitness=pending["incumbent_fitness"], eta=eta,
                outcome=outcome, epsilon=eps, return_time=return_time))
            pending = None
            if return_time is not None:
                if len(survivors) != 1:
                    raise AssertionError("return to one type left several survivors")
                (incumbent_id, incumbent_fitness), = survivors.items()
                t_prev = return_time
                n += 1
                phase = "at_one"
        else:  # above level 2, waiting for the return
            if ev.population_after == 1:
                if len(survivors) != 1:
                    raise AssertionError("return to one type left several survivors")
                records[-1] = _with_return(records[-1], ev.time)
                (incumbent_id, incumbent_fitness), = survivors.items()
                t_prev = ev.time
                n += 1
                phase = "at_one"

    if phase == "first_two":
        censored += 1
    return ExcursionScan(records, censored)


def _with_return(rec: ExcursionRecord, t: float) -> ExcursionRecord:
    return ExcursionRecord(n=rec.n, return_time_prev=rec.return_time_prev,
                           xi=rec.xi, newcomer_fitness=rec.newcomer_fitness,
                           incumbent_fitness=rec.incumbent_fitness, eta=rec.eta,
                           outcome=rec.outcome, epsilon=rec.epsilon,
                           return_time=t)


def detect_regenerations(excursions: list[ExcursionRecord],
                         event_log: Optional[list[EventRecord]] = None
                         ) -> list[RegenRecord]:
    """Pick out the epsilon = 1 excursions: the n-th regeneration happens at
    the return ending the n-th such excursion; the survivor is the newcomer
    (fitness uniform) whose age is that excursion's eta.

    If the event log is supplied, the population count at each reported
    regeneration is cross-checked against it.
    """
    out: list[RegenRecord] = []
    for rec in excursions:
        if rec.epsilon != 1:
            continue
        if rec.return_time is None:
            raise AssertionError("epsilon = 1 excursion must end at a return")
        out.append(RegenRecord(n=len(out) + 1, time=rec.return_time,
                               phi=rec.newcomer_fitness, age=rec.eta))
    if event_log is not None and out:
        times = {ev.time: ev.population_after for ev in event_log}
        for reg in out:
            if times.get(reg.time) != 1:
                raise AssertionError(
                    f"regeneration at t={reg.time} does not sit at a return to 1")
    return out


# ---------------------------------------------------------------------------
# first-regeneration sampling
# ---------------------------------------------------------------------------

class R1Estimate(NamedTuple):
    samples: Optional[EmpiricalDistribution]   # uncensored R_1 values
    censored: int
    mu_hat: float
    n_replicas: int
    t_censor: float


def default_t_censor(params: ModelParams) -> float:
    """Default censoring horizon 50 / (1 - lam); the exponential tail of R_1
    makes the censored fraction negligible at this depth."""
    if params.lam >= 1.0:
        raise ValueError("no default censoring horizon for lam >= 1")
    return 50.0 / (1.0 - params.lam)


def first_regeneration(params: ModelParams, seed: int, t_censor: float,
                       *, initial_age: float = 0.0, grid=None,
                       profile_v=(), profile_x=()):
    """Run one replica until its first regeneration or t_censor.

    Returns (r1 or None, paths).  When a grid is given, paths has one row
    per fitness threshold in profile_v followed by one per age threshold in
    profile_x; entry [j, k] is 1.0 when {observable at grid[k] <= threshold
    and R_1 > grid[k]} and 0.0 otherwise (the renewal forcing integrands).
    """
    if grid is not None and len(grid) and grid[-1] > t_censor:
        raise ValueError("the indicator grid must not extend past t_censor")
    rng = engine.EngineRng(seed)
    state, founding = engine.initial_state(params, rng, initial_age=initial_age)
    incumbent_id = founding.subject_id
    newcomer_id = -1
    phase = "at_one"
    nv = len(profile_v)
    paths = None if grid is None else np.zeros((nv + len(profile_x), len(grid)))
    gi = 0
    r1 = None

    while True:
        t_next = state.time + rng.skeleton.exponential(
            engine.total_rate(state, params))
        if grid is not None:
            # right-continuous: a grid time equal to the pending event time
            # is evaluated next round, after the event has been applied
            while gi < len(grid) and grid[gi] < t_next:
                champ = state.max_type()
                for j, v in enumerate(profile_v):
                    paths[j, gi] = 1.0 if champ.fitness <= v else 0.0
                age = grid[gi] - champ.birth_time
                for j, x in enumerate(profile_x):
                    paths[nv + j, gi] = 1.0 if age <= x else 0.0
                gi += 1
        if t_next > t_censor:
            break
        ev = engine._apply_event(state, t_next, params, rng)

        if phase == "at_one":
            newcomer_id = ev.subject_id
            phase = "first_two"
        elif phase == "first_two":
            if ev.kind is EventKind.BIRTH:
                phase = "above"
            elif ev.kind is EventKind.DEATH_RANDOM and ev.subject_id == incumbent_id:
                r1 = ev.time
                break
            else:
                if ev.subject_id == incumbent_id:
                    incumbent_id = newcomer_id
                phase = "at_one"
        else:
            if ev.population_after == 1:
                incumbent_id = state.types[0].id
                phase = "at_one"

    if paths is not None and r1 is not None:
        # at and beyond R_1 the joint event {obs <= thr, R_1 > s} is impossible
        paths[:, gi:] = 0.0
    return r1, paths


def estimate_R1(params: ModelParams, n_replicas: int,
                t_censor: float | None = None, seed: int = 0) -> R1Estimate:
    """Sample R_1 over independent replicas started from a fresh uniform type.

    Replicas that do not regenerate by t_censor are censored; the censored
    count is always reported, and a warning fires when the censored fraction
    exceeds 1e-3.  mu_hat is the mean over uncensored replicas.
    """
    if t_censor is None:
        t_censor = default_t_censor(params)
    if t_censor <= 0.0:
        raise ValueError("t_censor must be positive")
    values = []
    censored = 0
    for i in range(n_replicas):
        r1, _ = first_regeneration(
            params, substream_seed(seed, "regen/estimate_R1", i), t_censor)
        if r1 is None:
            censored += 1
        else:
            values.append(r1)
    if censored > 1e-3 * n_replicas:
        warnings.warn(
            f"censored fraction {censored / n_replicas:.2%} exceeds 1e-3 at "
            f"t_censor={t_censor:g}; consider a deeper horizon", stacklevel=2)
    if not values:
        return R1Estimate(None, censored, math.nan, n_replicas, t_censor)
    dist = EmpiricalDistribution(values)
    return R1Estimate(dist, censored, dist.mean(), n_replicas, t_censor)


class RegenHarvest(NamedTuple):
    excursions: list[ExcursionRecord]      # pooled, replica order
    regenerations: list[RegenRecord]       # indices local to their replica
    regen_replicas: list[int]              # replica id per regeneration
    censored: int


def collect_regenerations(params: ModelParams, *, n_target: int, seed: int,
                          horizon_per_replica: float = 1000.0,
                          max_replicas: int = 100_000) -> RegenHarvest:
    """Gather at least n_target regenerations from replicated trajectories."""
    all_exc: list[ExcursionRecord] = []
    all_reg: list[RegenRecord] = []
    reg_reps: list[int] = []
    censored = 0
    i = 0
    while len(all_reg) < n_target:
        if i >= max_replicas:
            raise RuntimeError("replica budget exhausted before n_target")
        _, events = engine.simulate(
            params, horizon_per_replica, [], replica_seed(seed, i))
        scan = detect_excursions(events)
        censored += scan.censored
        regs = detect_regenerations(scan.records, events)
        all_exc.extend(scan.records)
        all_reg.extend(regs)
        reg_reps.extend([i] * len(regs))
        i += 1
    return RegenHarvest(all_exc, all_reg, reg_reps, censored)
