import numpy as np
import pytest

from bdfit import coupling as cp
from bdfit import stats
from bdfit.engine import ModelParams, simulate
from bdfit.rng import numpy_generator, substream_seed


def random_ordered_pair(rng, k):
    """A random (A, B) with A preceding B: componentwise min/max of two draws."""
    x = np.sort(rng.random(k))
    y = np.sort(rng.random(k))
    return np.minimum(x, y), np.maximum(x, y)


def test_precedes_examples():
    assert cp.precedes([0.2, 0.5], [0.2, 0.5])
    assert cp.precedes([0.2, 0.5], [0.3, 0.7])
    assert not cp.precedes([0.2, 0.8], [0.3, 0.7])
    with pytest.raises(ValueError):
        cp.precedes([0.1], [0.1, 0.2])


def test_insert_common_examples():
    a2, b2 = cp.insert_common([0.2, 0.5], [0.3, 0.7], 0.4)
    assert list(a2) == [0.2, 0.4, 0.5]
    assert list(b2) == [0.3, 0.4, 0.7]
    a2, b2 = cp.insert_common([0.2, 0.5], [0.2, 0.5], 0.9)
    assert list(a2) == list(b2)
    with pytest.raises(ValueError):
        cp.insert_common([0.2, 0.5], [0.3, 0.7], 0.5)


def test_delete_coupled_examples():
    a2, b2 = cp.delete_coupled([0.2, 0.5], [0.3, 0.7], cp.MinVsRank(1))
    assert list(a2) == [0.2] and list(b2) == [0.7]
    a2, b2 = cp.delete_coupled([0.2, 0.5], [0.2, 0.5], cp.RandomRank(2))
    assert list(a2) == list(b2) == [0.5]
    with pytest.raises(ValueError):
        cp.delete_coupled([0.5], [0.6], cp.RandomRank(1))
    with pytest.raises(ValueError):
        cp.delete_coupled([0.2, 0.5], [0.3, 0.7], cp.RandomRank(3))


def test_order_preserved_randomized():
    rng = numpy_generator(77, "lemma")
    for _ in range(4000):
        k = int(rng.integers(1, 40))
        a, b = random_ordered_pair(rng, k)
        w = float(rng.random())
        if w not in a and w not in b:
            cp.insert_common(a, b, w)  # asserts internally
        if k >= 2:
            j = int(rng.integers(1, k + 1))
            cp.delete_coupled(a, b, cp.RandomRank(j))
            cp.delete_coupled(a, b, cp.MinVsRank(j))


def test_exhaustive_enumeration_small_sets():
    moves = cp.enumerate_lemma_cases(3)
    assert moves > 10000  # nothing raised: zero violations


def test_coupled_simulate_r1_degenerate():
    # with every death a random killing the two rule sets coincide
    res = cp.coupled_simulate(ModelParams(0.8, 1.0), 40.0, seed=5, trace=True)
    assert res.max_f1 == res.max_fr
    for (_, _, _, m1, mr) in res.trace:
        assert m1 == mr


def test_coupled_simulate_dominance_every_event():
    for seed in range(20):
        res = cp.coupled_simulate(ModelParams(1.2, 0.5), 10.0, seed=seed,
                                  trace=True)
        assert res.violations == 0
        for (_, _, _, m1, mr) in res.trace:
            assert mr >= m1


def test_coupled_simulate_invalid_r():
    with pytest.raises(ValueError):
        cp.coupled_simulate(ModelParams(1.0, 0.0), 5.0, seed=1)


def test_coupled_simulate_infeasible_guard():
    with pytest.raises(cp.InfeasibleRunError) as exc:
        cp.coupled_simulate(ModelParams(2.0, 0.5), 20.0, seed=1)
    assert exc.value.projection["expected_events_per_trajectory"] > 1e9


def test_coupled_marginal_matches_r1_engine():
    # the law of max F1 equals the maximal fitness of the r = 1 process
    params = ModelParams(1.2, 0.4)
    t = 6.0
    coupled = [cp.coupled_simulate(params, t, substream_seed(80, "c", i)).max_f1
               for i in range(1200)]
    honest = [simulate(ModelParams(1.2, 1.0), t, [t],
                       substream_seed(90, "h", i),
                       log_events=False).observations[0].phi
              for i in range(1200)]
    assert stats.ks_two_sample(coupled, honest).passed


def test_coupled_dominance_cdf_gap():
    params = ModelParams(2.0, 0.5)
    res = [cp.coupled_simulate(params, 5.0, substream_seed(10, "d", i))
           for i in range(300)]
    gap = cp.dominance_gap([x.max_f1 for x in res], [x.max_fr for x in res])
    # pathwise max_fr >= max_f1 forces a nonnegative gap
    assert gap >= 0.0


def test_conditional_max_law_detects_right_and_wrong_laws():
    rng = numpy_generator(11, "cond")
    x = np.repeat([1, 2, 5], 400)
    phi_good = np.concatenate([
        rng.random(400),
        rng.random((400, 2)).max(axis=1),
        rng.random((400, 5)).max(axis=1)])
    rep = cp.conditional_max_law(x, phi_good, min_bin=200)
    assert set(rep.reports) == {1, 2, 5}
    assert rep.all_pass

    phi_bad = rng.random(1200)  # plain uniform cannot match u^5
    rep_bad = cp.conditional_max_law(x, phi_bad, min_bin=200)
    assert not rep_bad.reports[5].passed


def test_conditional_max_law_skips_sparse_bins():
    rng = numpy_generator(12, "sparse")
    x = np.array([1] * 500 + [7] * 30)
    phi = np.concatenate([rng.random(500), rng.random((30, 7)).max(axis=1)])
    rep = cp.conditional_max_law(x, phi, min_bin=200)
    assert 7 in rep.skipped and rep.skipped[7] == 30
    assert list(rep.reports) == [1]
