import numpy as np
import pytest


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the numba kernels once so timed tests exclude JIT cost."""
    from bdfit import supercritical
    from bdfit.engine import ModelParams

    p = ModelParams(2.0, 0.0)
    supercritical.sample_age_fitness_r0(p, 2.0, 4, seed=1)
    supercritical.sample_count(p, 2.0, 4, seed=1)
    supercritical.growth_paths(p, 2.0, 2, seed=1, dt=0.05)
    supercritical.r1_population_and_max(ModelParams(2.0, 1.0), 1.0, 4, seed=1)
    return True


def ks_two_sided(samples, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = cdf(x)
    return float(max((np.arange(1, n + 1) / n - f).max(),
                     (f - np.arange(0, n) / n).max()))
