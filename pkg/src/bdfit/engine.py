"""Exact event-driven simulation of the fitness birth-death process.

The population is a set of "types".  Each living type gives birth to a new
type at rate ``lam`` and dies at rate 1, except that deaths are suppressed
while only one type is alive, so the count process X(t) jumps

    n -> n + 1  at rate  n * lam   (n >= 1)
    n -> n - 1  at rate  n         (n >= 2).

A fresh type receives an independent uniform(0, 1) fitness.  When a death
fires, with probability ``r`` the victim is chosen uniformly at random
(a "random killing"), otherwise the least fit living type is removed.

Simulation is exact: an exponential holding time at the total jump rate,
then a categorical choice of event.  There is no time discretization
anywhere, so sampled laws are exact continuous-time chain laws.

Randomness is split over four named substreams of the replica seed:

    engine/skeleton   holding times and the birth-vs-death choice
    engine/fitness    uniforms attached to new types
    engine/coin       the Bernoulli(r) random-killing coin, one per death
    engine/rank       the victim rank for random killings

Only the skeleton stream feeds back into the count process, so two runs
with the same seed but different ``r`` traverse the same X(t) path.  The
death coin has its own stream and its outcome is recorded on the event,
which is what lets the regeneration detector classify killings without
re-deriving them.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

from .rng import Xoshiro256PP, substream_seed


class EventKind(str, Enum):
    BIRTH = "birth"
    DEATH_RANDOM = "death_random"
    DEATH_LEAST_FIT = "death_least_fit"


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: birth/mutation rate lam > 0 and killing mix r in [0, 1]."""

    lam: float
    r: float

    def __post_init__(self):
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be a positive real, got {self.lam}")
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"r must lie in [0, 1], got {self.r}")


@dataclass(frozen=True)
class TypeRecord:
    """One living type: creation ordinal, uniform fitness, creation time."""

    id: int
    fitness: float
    birth_time: float

    def sort_key(self):
        # fitness ties are a null event; ids break them deterministically
        return (self.fitness, self.id)


@dataclass
class PopulationState:
    """Current time plus the living types ordered by (fitness, id)."""

    time: float
    types: list[TypeRecord]
    next_id: int = field(default=1)

    @property
    def count(self) -> int:
        return len(self.types)

    def max_type(self) -> TypeRecord:
        return self.types[-1]

    def min_type(self) -> TypeRecord:
        return self.types[0]


@dataclass(frozen=True)
class EventRecord:
    """One transition.  subject is the created (birth) or removed (death) type."""

    time: float
    kind: EventKind
    subject_id: int
    subject_fitness: float
    population_after: int


@dataclass(frozen=True)
class Observation:
    """State snapshot: count, maximal fitness, age of the fittest, births so far."""

    time: float
    x: int
    phi: float
    age: float
    births_so_far: int


class SimulationResult(NamedTuple):
    observations: list[Observation]
    events: list[EventRecord]


class EngineRng:
    """The four named engine substreams of one replica seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self.skeleton = Xoshiro256PP(substream_seed(seed, "engine/skeleton"))
        self.fitness = Xoshiro256PP(substream_seed(seed, "engine/fitness"))
        self.coin = Xoshiro256PP(substream_seed(seed, "engine/coin"))
        self.rank = Xoshiro256PP(substream_seed(seed, "engine/rank"))


def total_rate(state: PopulationState, params: ModelParams) -> float:
    """Total jump rate: n*lam when n == 1 (deaths forbidden), n*(lam+1) otherwise."""
    n = state.count
    if n < 1:
        raise ValueError("population must never be empty")
    if n == 1:
        return params.lam
    return n * (params.lam + 1.0)


def age_of_fittest(state: PopulationState) -> float:
    """Age of the maximal-fitness type: current time minus its birth time."""
    return state.time - state.max_type().birth_time


def initial_state(params: ModelParams, rng: EngineRng,
                  initial_fitness: Optional[float] = None,
                  initial_age: float = 0.0) -> tuple[PopulationState, EventRecord]:
    """Single founding type at time 0; fitness uniform unless pinned.

    initial_age > 0 backdates the founder (the stationary age start used by
    the renewal estimates); the founder still counts as birth number one and
    is logged at time 0.
    """
    if initial_age < 0.0:
        raise ValueError("initial_age must be nonnegative")
    phi0 = rng.fitness.random_open() if initial_fitness is None else initial_fitness
    if not (0.0 < phi0 < 1.0):
        raise ValueError("initial fitness must lie in (0, 1)")
    founder = TypeRecord(id=0, fitness=phi0, birth_time=-initial_age)
    state = PopulationState(time=0.0, types=[founder], next_id=1)
    event = EventRecord(0.0, EventKind.BIRTH, 0, phi0, 1)
    return state, event


def _apply_event(state: PopulationState, t: float, params: ModelParams,
                 rng: EngineRng) -> EventRecord:
    """Resolve and apply the transition firing at time t; state.time becomes t."""
    n = state.count
    state.time = t
    # birth wins with probability n*lam / total rate; certain at n == 1
    if n == 1 or rng.skeleton.random() * (n * (params.lam + 1.0)) < params.lam * n:
        u = rng.fitness.random_open()
        rec = TypeRecord(id=state.next_id, fitness=u, birth_time=t)
        state.next_id += 1
        bisect.insort(state.types, rec, key=TypeRecord.sort_key)
        return EventRecord(t, EventKind.BIRTH, rec.id, u, n + 1)
    # death: the Bernoulli(r) coin picks the killing rule
    if rng.coin.random() < params.r:
        j = rng.rank.randint(n)  # uniform rank, remove the j-th smallest
        victim = state.types.pop(j - 1)
        kind = EventKind.DEATH_RANDOM
    else:
        victim = state.types.pop(0)
        kind = EventKind.DEATH_LEAST_FIT
    return EventRecord(t, kind, victim.id, victim.fitness, n - 1)


def step(state: PopulationState, params: ModelParams,
         rng: EngineRng) -> tuple[PopulationState, EventRecord]:
    """One exact transition on a copy of the state; returns (state', event)."""
    new_state = PopulationState(
        time=state.time, types=list(state.types), next_id=state.next_id)
    t = new_state.time + rng.skeleton.exponential(total_rate(new_state, params))
    event = _apply_event(new_state, t, params, rng)
    return new_state, event


def _observe(state: PopulationState, t: float, births: int) -> Observation:
    champ = state.max_type()
    return Observation(time=t, x=state.count, phi=champ.fitness,
                       age=t - champ.birth_time, births_so_far=births)


def simulate(params: ModelParams, t_max: float,
             observation_times: Sequence[float], seed: int, *,
             log_events: bool = True,
             initial_fitness: Optional[float] = None,
             initial_age: float = 0.0,
             max_events: Optional[int] = None) -> SimulationResult:
    """Run one exact trajectory on [0, t_max].

    Observations are right-continuous: the snapshot at time s reflects every
    event with time <= s.  The event log is complete and strictly
    time-ordered, beginning with the founder birth at time 0.  Identical
    (params, seed, observation_times) give bit-identical output.

    Raises ValueError for t_max <= 0 or unsorted/out-of-range observation
    times, and RuntimeError past max_events (guard against supercritical
    runs that cannot finish; see the supercritical module for those).
    """
    if not (t_max > 0.0 and math.isfinite(t_max)):
        raise ValueError(f"t_max must be a positive real, got {t_max}")
    obs_times = [float(s) for s in observation_times]
    for a, b in zip(obs_times, obs_times[1:]):
        if b < a:
            raise ValueError("observation_times must be sorted")
    if obs_times and (obs_times[0] < 0.0 or obs_times[-1] > t_max):
        raise ValueError("observation_times must lie within [0, t_max]")

    rng = EngineRng(seed)
    state, founding = initial_state(params, rng, initial_fitness, initial_age)
    events: list[EventRecord] = [founding] if log_events else []
    observations: list[Observation] = []
    births = 1
    oi = 0
    n_events = 0

    while True:
        t_next = state.time + rng.skeleton.exponential(total_rate(state, params))
        if t_next > t_max:
            while oi < len(obs_times):
                observations.append(_observe(state, obs_times[oi], births))
                oi += 1
            break
        # snapshots strictly before the event see the pre-event state;
        # a snapshot at exactly t_next is emitted next round, post-event
        while oi < len(obs_times) and obs_times[oi] < t_next:
            observations.append(_observe(state, obs_times[oi], births))
            oi += 1
        event = _apply_event(state, t_next, params, rng)
        if event.kind is EventKind.BIRTH:
            births += 1
        if log_events:
            events.append(event)
        n_events += 1
        if max_events is not None and n_events > max_events:
            raise RuntimeError(
                f"event budget exceeded ({max_events}) at t={state.time:.3f} "
                f"with population {state.count}; this parameter regime needs "
                f"the supercritical fast path")
    return SimulationResult(observations, events)
