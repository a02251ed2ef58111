import math

import numpy as np
import pytest

from bdfit import regen, stats
from bdfit.engine import EventKind, EventRecord, ModelParams, simulate
from bdfit.regen import ExcursionOutcome


def ev(t, kind, subject_id, fitness, pop_after):
    return EventRecord(t, kind, subject_id, fitness, pop_after)


FOUNDER = ev(0.0, EventKind.BIRTH, 0, 0.6, 1)


def test_bernoulli_p():
    assert regen.bernoulli_p(ModelParams(1.0, 0.0)) == 0.0
    assert regen.bernoulli_p(ModelParams(1.0, 1.0)) == 0.25
    assert regen.bernoulli_p(ModelParams(0.5, 0.5)) == pytest.approx(1 / 6)


def test_detect_up_excursion_partial():
    # rose 1 -> 2 -> 3 and the log ends: the first level-2 sojourn is
    # classified (outcome up) even though the return was never seen
    log = [FOUNDER,
           ev(1.5, EventKind.BIRTH, 1, 0.3, 2),
           ev(2.1, EventKind.BIRTH, 2, 0.8, 3)]
    scan = regen.detect_excursions(log)
    assert scan.censored == 0
    (rec,) = scan.records
    assert rec.outcome is ExcursionOutcome.UP
    assert rec.xi == pytest.approx(1.5)
    assert rec.eta == pytest.approx(0.6)
    assert rec.newcomer_fitness == 0.3
    assert rec.incumbent_fitness == 0.6
    assert rec.epsilon == 0
    assert rec.return_time is None


def test_detect_least_fit_kills_incumbent_is_not_epsilon():
    # incumbent (0.2) < newcomer (0.9): least-fit death removes the
    # incumbent, which does NOT count as a regeneration event
    log = [ev(0.0, EventKind.BIRTH, 0, 0.2, 1),
           ev(1.0, EventKind.BIRTH, 1, 0.9, 2),
           ev(1.4, EventKind.DEATH_LEAST_FIT, 0, 0.2, 1)]
    scan = regen.detect_excursions(log)
    (rec,) = scan.records
    assert rec.outcome is ExcursionOutcome.DOWN_LEAST_FIT
    assert rec.epsilon == 0
    assert rec.return_time == pytest.approx(1.4)
    assert regen.detect_regenerations(scan.records) == []


def test_detect_random_kill_classification():
    log = [FOUNDER,
           ev(1.0, EventKind.BIRTH, 1, 0.3, 2),
           ev(1.7, EventKind.DEATH_RANDOM, 0, 0.6, 1),   # incumbent killed
           ev(2.5, EventKind.BIRTH, 2, 0.5, 2),
           ev(3.0, EventKind.DEATH_RANDOM, 2, 0.5, 1)]   # newcomer killed
    scan = regen.detect_excursions(log)
    first, second = scan.records
    assert first.outcome is ExcursionOutcome.DOWN_RANDOM_KILLS_INCUMBENT
    assert first.epsilon == 1
    assert second.outcome is ExcursionOutcome.DOWN_RANDOM_KILLS_NEWCOMER
    assert second.epsilon == 0
    # the incumbent of excursion 2 is the survivor of excursion 1
    assert second.incumbent_fitness == 0.3


def test_figure_one_scenario_r1_at_second_return():
    # epsilon = (0, 1): the first regeneration is the second return time
    log = [FOUNDER,
           ev(2.0, EventKind.BIRTH, 1, 0.3, 2),
           ev(3.0, EventKind.BIRTH, 2, 0.8, 3),          # up: eps_1 = 0
           ev(4.5, EventKind.DEATH_LEAST_FIT, 1, 0.3, 2),
           ev(6.5, EventKind.DEATH_LEAST_FIT, 0, 0.6, 1),  # T_1
           ev(7.5, EventKind.BIRTH, 3, 0.4, 2),
           ev(9.0, EventKind.DEATH_RANDOM, 2, 0.8, 1)]   # eps_2 = 1, T_2
    scan = regen.detect_excursions(log)
    assert [r.epsilon for r in scan.records] == [0, 1]
    regs = regen.detect_regenerations(scan.records, log)
    (r1,) = regs
    assert r1.time == pytest.approx(9.0)       # R_1 = T_2
    assert r1.phi == 0.4                       # the newcomer u_2
    assert r1.age == pytest.approx(1.5)        # eta_2


def test_truncated_level_two_sojourn_censored():
    log = [FOUNDER, ev(1.0, EventKind.BIRTH, 1, 0.3, 2)]
    scan = regen.detect_excursions(log)
    assert scan.records == []
    assert scan.censored == 1


def test_detect_excursions_rejects_bad_log():
    with pytest.raises(ValueError):
        regen.detect_excursions([])
    with pytest.raises(ValueError):
        regen.detect_excursions([ev(0.0, EventKind.DEATH_RANDOM, 0, 0.5, 1)])


def test_excursion_laws_statistical():
    params = ModelParams(0.5, 0.5)
    _, events = simulate(params, 4000.0, [], seed=404)
    scan = regen.detect_excursions(events)
    xi = np.array([r.xi for r in scan.records])
    eta = np.array([r.eta for r in scan.records])
    eps = np.array([r.epsilon for r in scan.records], dtype=float)
    assert xi.size > 800
    # xi ~ exponential(lam), eta ~ exponential(2 lam + 2)
    assert stats.ks_statistic(xi, stats.exponential_cdf(0.5)).passed
    assert stats.ks_statistic(eta, stats.exponential_cdf(3.0)).passed
    p = regen.bernoulli_p(params)
    assert abs(eps.mean() - p) <= 3 * math.sqrt(p * (1 - p) / eps.size)


def test_regeneration_restart_independence():
    # gaps between consecutive regenerations are iid: lag-1 correlation ~ 0
    harvest = regen.collect_regenerations(ModelParams(0.5, 0.5),
                                          n_target=2000, seed=505)
    gaps = []
    regs = harvest.regenerations
    reps = harvest.regen_replicas
    times = {}
    for rep, g in zip(reps, regs):
        times.setdefault(rep, []).append(g.time)
    for ts in times.values():
        ts = np.diff([0.0] + ts)
        gaps.extend(zip(ts, ts[1:]))
    a = np.array([g[0] for g in gaps])
    b = np.array([g[1] for g in gaps])
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 3.0 / math.sqrt(a.size)


def test_population_is_one_at_regenerations():
    params = ModelParams(0.6, 0.4)
    _, events = simulate(params, 3000.0, [], seed=42)
    scan = regen.detect_excursions(events)
    regs = regen.detect_regenerations(scan.records, events)  # asserts inside
    assert regs, "expected at least one regeneration"
    for g in regs:
        assert g.age > 0 and 0 < g.phi < 1


def test_estimate_R1_r_zero_all_censored():
    est = regen.estimate_R1(ModelParams(0.5, 0.0), 50, t_censor=30.0, seed=1)
    assert est.censored == 50
    assert est.samples is None
    assert math.isnan(est.mu_hat)


def test_estimate_R1_warns_on_heavy_censoring():
    with pytest.warns(UserWarning, match="censored fraction"):
        regen.estimate_R1(ModelParams(0.5, 0.5), 100, t_censor=3.0, seed=2)


def test_estimate_R1_batch_stability():
    params = ModelParams(0.5, 0.5)
    a = regen.estimate_R1(params, 2000, t_censor=400.0, seed=7)
    b = regen.estimate_R1(params, 2000, t_censor=400.0, seed=7 + 10 ** 9)
    se = math.hypot(a.samples.se_of_mean(), b.samples.se_of_mean())
    assert abs(a.mu_hat - b.mu_hat) < 4 * se


def test_first_regeneration_indicator_identities():
    params = ModelParams(0.5, 0.5)
    grid = np.arange(0.0, 60.0, 0.5)
    r1, paths = regen.first_regeneration(params, 11, t_censor=60.0, grid=grid,
                                         profile_v=(1.0 - 1e-12, 1e-12))
    wide, narrow = paths
    if r1 is not None:
        # fitness <= 1 always: indicator is exactly {R_1 > t}
        assert np.array_equal(wide, (grid < r1).astype(float))
    else:
        assert np.all(wide == 1.0)
    assert np.all(narrow == 0.0)
