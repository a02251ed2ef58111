import math

import numpy as np
import pytest

from bdfit import renewal, stats
from bdfit.engine import ModelParams, simulate
from bdfit.renewal import GridFunction, RenewalProblem, solve_renewal, limit_value
from bdfit.rng import substream_seed


def grid(dt, values):
    return GridFunction(dt, np.asarray(values, dtype=float))


def test_grid_function_validation():
    g = grid(0.5, [0.0, 1.0, 2.0])
    assert g.horizon == 1.0
    assert np.allclose(g.times(), [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        grid(-0.5, [0.0, 1.0])
    with pytest.raises(ValueError):
        grid(0.5, [0.0])
    with pytest.raises(ValueError):
        grid(0.5, [0.0, math.inf])


def test_renewal_problem_validation():
    F = grid(1.0, [0.0, 0.5, 1.0])
    h = grid(1.0, [1.0, 0.5, 0.2])
    RenewalProblem(F, h, 2.0)
    with pytest.raises(ValueError):
        RenewalProblem(grid(1.0, [0.1, 0.5, 1.0]), h, 2.0)  # F(0) != 0
    with pytest.raises(ValueError):
        RenewalProblem(grid(1.0, [0.0, 0.6, 0.5]), h, 2.0)  # decreasing
    with pytest.raises(ValueError):
        RenewalProblem(F, grid(1.0, [1.0, 1.5, 0.2]), 2.0)  # h > 1
    with pytest.raises(ValueError):
        RenewalProblem(F, h, 0.0)


def test_solve_renewal_zero_forcing():
    F = grid(1.0, [0.0, 0.5, 0.8, 0.9])
    H = solve_renewal(RenewalProblem(F, grid(1.0, np.zeros(4)), 1.0))
    assert np.all(H.values == 0.0)


def test_solve_renewal_mass_beyond_horizon():
    # all of F's mass lies past the grid: the convolution term vanishes
    F = grid(1.0, np.zeros(6))
    h = grid(1.0, [1.0, 0.8, 0.6, 0.4, 0.3, 0.2])
    H = solve_renewal(RenewalProblem(F, h, 50.0))
    assert np.array_equal(H.values, h.values)


def test_solve_renewal_point_mass_telescopes():
    K = 10
    F = grid(1.0, np.concatenate([[0.0], np.ones(K - 1)]))
    h = grid(1.0, np.ones(K))
    H = solve_renewal(RenewalProblem(F, h, 1.0))
    assert np.allclose(H.values, np.arange(1, K + 1))


def test_solve_renewal_divergence_guard():
    K = 10
    F = grid(1.0, np.concatenate([[0.0], np.ones(K - 1)]))
    h = grid(1.0, np.ones(K))
    with pytest.raises(renewal.RenewalDivergenceError):
        solve_renewal(RenewalProblem(F, h, 1.0), divergence_bound=5.0)


def test_solver_first_order_convergence():
    # exponential interarrivals: U has density theta, so the solution of
    # H = h + F*H with h = exp(-2t) is exp(-2t) + (theta/2)(1 - exp(-2t))
    theta = 1.0
    horizon = 8.0
    errors = []
    for dt in (0.2, 0.1, 0.05):
        t = np.arange(0.0, horizon + dt / 2, dt)
        F = grid(dt, 1.0 - np.exp(-theta * t))
        h = grid(dt, np.exp(-2.0 * t))
        H = solve_renewal(RenewalProblem(F, h, 1.0 / theta))
        exact = np.exp(-2.0 * t) + 0.5 * (1.0 - np.exp(-2.0 * t))
        errors.append(np.abs(H.values - exact).max())
    # halving dt should roughly halve the error
    assert errors[0] > errors[1] > errors[2]
    assert errors[0] / errors[2] > 2.5


def test_key_renewal_consistency():
    theta = 1.0
    dt = 0.02
    t = np.arange(0.0, 12.0 + dt / 2, dt)
    F = grid(dt, 1.0 - np.exp(-theta * t))
    h = grid(dt, np.exp(-2.0 * t))
    H = solve_renewal(RenewalProblem(F, h, 1.0 / theta))
    lim = limit_value(h, 1.0 / theta)
    assert lim == pytest.approx(0.5, abs=1e-3)
    assert H.values[-1] == pytest.approx(lim, abs=0.02)


def test_limit_value_basics():
    assert limit_value(grid(0.1, np.zeros(50)), 2.0) == 0.0
    t = np.arange(0.0, 40.0, 0.01)
    assert limit_value(grid(0.01, np.exp(-t)), 2.0) == pytest.approx(0.5, abs=1e-4)
    with pytest.raises(ValueError):
        limit_value(grid(0.1, np.zeros(50)), 0.0)


def test_limit_value_truncation_warning():
    with pytest.warns(UserWarning, match="truncated"):
        limit_value(grid(0.1, np.full(30, 0.5)), 1.0)


def test_estimate_h_regime_checks():
    with pytest.raises(ValueError, match="age limit law"):
        renewal.estimate_h(ModelParams(1.5, 0.5), 0.5, "age", 0.1, 10.0, 50, 1)
    with pytest.raises(ValueError):
        renewal.estimate_h(ModelParams(0.5, 0.0), 0.5, "fitness", 0.1, 10.0, 50, 1)
    with pytest.raises(ValueError):
        renewal.estimate_h(ModelParams(0.5, 0.5), 0.5, "nope", 0.1, 10.0, 50, 1)


def test_estimate_h_threshold_one_is_r1_survival():
    params = ModelParams(0.5, 0.5)
    h = renewal.estimate_h(params, 1.0 - 1e-12, "fitness", 0.5, 40.0, 400, 21)
    assert h.values[0] == 1.0                # R_1 > 0 and phi <= 1 surely
    assert np.all(np.diff(h.values) <= 1e-12)  # pure survival, nonincreasing
    assert h.values[-1] < 0.2


def test_estimate_h_tiny_threshold_vanishes():
    h = renewal.estimate_h(ModelParams(0.5, 0.5), 1e-12, "fitness",
                           0.5, 20.0, 200, 22)
    assert np.all(h.values == 0.0)


def test_estimate_h_initial_point_matches_uniform_start():
    params = ModelParams(0.5, 0.5)
    h = renewal.estimate_h(params, 0.5, "fitness", 0.5, 30.0, 2000, 23)
    assert abs(h.values[0] - 0.5) <= 3 * math.sqrt(0.25 / 2000)


def test_estimate_h_monotone_in_threshold():
    params = ModelParams(0.5, 0.5)
    fit, _ = renewal._estimate_h_profiles(params, [0.3, 0.6, 0.9], [],
                                          0.5, 30.0, 500, 24)
    a, b, c = (e.grid.values for e in fit)
    assert np.all(a <= b) and np.all(b <= c)


def test_solved_H_monotone_in_threshold():
    params = ModelParams(0.5, 0.5)
    rep = renewal.limit_report(params, "fitness", [0.3, 0.7], seed=25,
                               n_replicas_h=800, n_replicas_r1=800, dt=0.2)
    lo, hi = rep.entries
    assert np.all(lo.H.values <= hi.H.values + 1e-12)
    assert lo.limit < hi.limit


def test_age_limit_independent_of_initial_age():
    # same long-run age law from a fixed initial age and from the
    # stationary exponential start
    params = ModelParams(0.5, 0.5)
    t = 100.0
    n = 2500
    fixed, expo = [], []
    for i in range(n):
        obs, _ = simulate(params, t, [t], substream_seed(31, "fixed", i),
                          log_events=False, initial_age=5.0)
        fixed.append(obs[0].age)
        obs, _ = simulate(params, t, [t], substream_seed(32, "expo", i),
                          log_events=False)
        expo.append(obs[0].age)
    assert stats.ks_two_sample(fixed, expo).passed


def test_empirical_F_includes_censored_in_denominator():
    params = ModelParams(0.5, 0.5)
    r1 = regen_estimate(params)
    F = renewal.empirical_F(r1, 1.0, 50.0)
    assert F.values[0] == 0.0
    assert np.all(np.diff(F.values) >= 0.0)
    assert F.values[-1] <= 1.0


def regen_estimate(params):
    from bdfit import regen
    return regen.estimate_R1(params, 500, t_censor=200.0, seed=33)
