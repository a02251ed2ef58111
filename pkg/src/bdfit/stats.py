"""Statistical machinery and closed-form oracles.

Goodness-of-fit conventions are fixed project-wide: two-sided
Kolmogorov-Smirnov with the asymptotic 5% threshold 1.358/sqrt(n), and
Pearson chi-square against the 5% quantile with tail bins pooled to an
expected count of at least 5.  Both calibrations are themselves under test
(the null-calibration acceptance check).

Closed forms: the log-series stationary law of the population size for
lam < 1, and the survival probability of the linear birth-death chain
absorbed at zero (the "amended" chain used for the exponential-tail
argument), each paired with an independent Monte Carlo or recurrence
oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2

from .rng import Xoshiro256PP, replica_seed, substream_seed

KS_CONSTANT_5PCT = 1.358  # project convention for the 5% asymptotic threshold


# ---------------------------------------------------------------------------
# empirical distributions and GoF reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoFReport:
    """One goodness-of-fit verdict; passed iff statistic <= threshold."""

    statistic: float
    threshold: float
    n: int
    passed: bool
    family: str

    def __str__(self):
        tag = "pass" if self.passed else "FAIL"
        return (f"[{tag}] {self.family}: stat={self.statistic:.5f} "
                f"thr={self.threshold:.5f} n={self.n}")


class EmpiricalDistribution:
    """A sorted sample set with attached goodness-of-fit machinery."""

    def __init__(self, samples):
        arr = np.sort(np.asarray(samples, dtype=np.float64))
        if arr.size < 1:
            raise ValueError("need at least one sample")
        self.samples = arr
        self.n = arr.size

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.n

    def quantile(self, q):
        return np.quantile(self.samples, q)

    def mean(self) -> float:
        return float(self.samples.mean())

    def se_of_mean(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(self.n))

    def ks_against(self, reference_cdf, *, threshold=None, level=0.05,
                   family="") -> GoFReport:
        return ks_statistic(self.samples, reference_cdf,
                            threshold=threshold, level=level, family=family)


def ks_threshold(n: int, level: float = 0.05) -> float:
    """Asymptotic KS acceptance threshold; the 5% level pins 1.358/sqrt(n)."""
    if level == 0.05:
        return KS_CONSTANT_5PCT / math.sqrt(n)
    return math.sqrt(-0.5 * math.log(level / 2.0)) / math.sqrt(n)


def ks_statistic(samples, reference_cdf: Callable, *, threshold=None,
                 level: float = 0.05, family: str = "") -> GoFReport:
    """Two-sided KS statistic D_n = sup |F_n - F| against a reference cdf.

    Requires n >= 50; the project uses asymptotic thresholds only.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < 50:
        raise ValueError(f"KS test needs at least 50 samples, got {n}")
    f = np.asarray(reference_cdf(x), dtype=np.float64)
    up = np.arange(1, n + 1) / n - f
    dn = f - np.arange(0, n) / n
    d = float(max(up.max(), dn.max()))
    thr = ks_threshold(n, level) if threshold is None else float(threshold)
    return GoFReport(statistic=d, threshold=thr, n=n, passed=d <= thr,
                     family=family or getattr(reference_cdf, "__name__", "cdf"))


def ks_two_sample(a, b, *, level: float = 0.05, family: str = "") -> GoFReport:
    """Two-sample KS with threshold c(level) * sqrt((m+n)/(m*n))."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    grid = np.concatenate([a, b])
    grid.sort(kind="mergesort")
    d = float(np.abs(np.searchsorted(a, grid, side="right") / a.size
                     - np.searchsorted(b, grid, side="right") / b.size).max())
    c = KS_CONSTANT_5PCT if level == 0.05 else math.sqrt(-0.5 * math.log(level / 2.0))
    thr = c * math.sqrt((a.size + b.size) / (a.size * b.size))
    return GoFReport(statistic=d, threshold=thr, n=a.size + b.size,
                     passed=d <= thr, family=family or "two-sample")


def chi_square_gof(counts, pmf: Callable[[np.ndarray], np.ndarray], *,
                   level: float = 0.05, min_expected: float = 5.0,
                   family: str = "") -> GoFReport:
    """Pearson chi-square of state counts against a pmf on {1, 2, ...}.

    ``counts[i]`` is the observed count of state i+1.  Tail bins are pooled
    until each retained bin has expected count >= min_expected; the pooled
    tail absorbs all remaining pmf mass.
    """
    obs = np.asarray(counts, dtype=np.float64)
    total = obs.sum()
    if total <= 0:
        raise ValueError("empty count vector")
    states = np.arange(1, obs.size + 1)
    p = np.asarray(pmf(states), dtype=np.float64)
    # pool the tail: find the last state whose expected count clears the bar
    cut = obs.size
    while cut > 1 and total * p[cut - 1] < min_expected:
        cut -= 1
    if cut < 2:
        raise ValueError("degenerate binning: fewer than two usable bins")
    o = np.concatenate([obs[:cut - 1], [obs[cut - 1:].sum()]])
    e = np.concatenate([total * p[:cut - 1], [total * (1.0 - p[:cut - 1].sum())]])
    if np.any(e < min_expected):
        raise ValueError("degenerate binning: an interior bin is underfilled")
    stat = float(((o - e) ** 2 / e).sum())
    df = o.size - 1
    thr = float(_chi2.ppf(1.0 - level, df))
    return GoFReport(statistic=stat, threshold=thr, n=int(total),
                     passed=stat <= thr, family=family or f"chi-square(df={df})")


# ---------------------------------------------------------------------------
# named reference laws (addressable from the CLI)
# ---------------------------------------------------------------------------

def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def exponential_cdf(rate: float) -> Callable:
    def cdf(x):
        return 1.0 - np.exp(-rate * np.maximum(x, 0.0))
    cdf.__name__ = f"exponential(rate={rate:g})"
    return cdf


def power_cdf(k: int) -> Callable:
    """cdf u -> u**k on (0, 1): the maximum of k independent uniforms."""
    def cdf(x):
        return np.clip(x, 0.0, 1.0) ** k
    cdf.__name__ = f"power(k={k})"
    return cdf


def reference_cdf(name: str) -> Callable:
    """Resolve 'uniform', 'exponential:<rate>' or 'power:<k>' to a cdf."""
    if name == "uniform":
        return uniform_cdf
    kind, _, arg = name.partition(":")
    if kind == "exponential":
        return exponential_cdf(float(arg))
    if kind == "power":
        return power_cdf(int(arg))
    raise ValueError(f"unknown reference law {name!r}")


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

def logseries_pmf(lam: float, n) -> np.ndarray | float:
    """Stationary law of the population size for lam < 1:
    pi(n) = lam**n / (n * (-log(1 - lam))), n >= 1."""
    if not 0.0 < lam < 1.0:
        raise ValueError("log-series law requires 0 < lam < 1")
    n_arr = np.asarray(n)
    if np.any(n_arr < 1):
        raise ValueError("log-series support is n >= 1")
    out = lam ** n_arr.astype(np.float64) / (n_arr * (-math.log1p(-lam)))
    return out if out.ndim else float(out)


def logseries_mean(lam: float) -> float:
    """Mean lam / ((1 - lam) * (-log(1 - lam)))."""
    if not 0.0 < lam < 1.0:
        raise ValueError("log-series law requires 0 < lam < 1")
    return lam / ((1.0 - lam) * (-math.log1p(-lam)))


def sample_logseries(lam: float, size: int, rng: np.random.Generator,
                     tail_tol: float = 1e-13) -> np.ndarray:
    """Inverse-cdf sampler over the truncated support (tail mass < tail_tol)."""
    pmf = []
    n = 1
    acc = 0.0
    while acc < 1.0 - tail_tol:
        p = logseries_pmf(lam, n)
        pmf.append(p)
        acc += p
        n += 1
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size)) + 1


def linear_bd_survival(lam: float, t: float) -> float:
    """P(X(t) != 0 | X(0) = 1) for the linear chain with death allowed at 1
    and 0 absorbing: exp(-(1-lam)t) (1-lam) / (1 - lam exp(-(1-lam)t))."""
    if not 0.0 < lam < 1.0:
        raise ValueError("survival formula implemented for 0 < lam < 1 only")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    e = math.exp(-(1.0 - lam) * t)
    return e * (1.0 - lam) / (1.0 - lam * e)


def simulate_absorbing_bd(lam: float, t: float, n_replicas: int,
                          seed: int) -> float:
    """Monte Carlo survival fraction of the amended chain (trap at 0).

    Independent oracle for linear_bd_survival: per-individual birth rate lam
    and death rate 1 down to zero, no boundary protection at one.
    """
    alive = 0
    for i in range(n_replicas):
        rng = Xoshiro256PP(substream_seed(seed, "stats/absorbing", i))
        k = 1
        clock = 0.0
        while k > 0:
            clock += rng.exponential(k * (lam + 1.0))
            if clock > t:
                break
            if rng.random() * (lam + 1.0) < lam:
                k += 1
            else:
                k -= 1
        if k > 0:
            alive += 1
    return alive / n_replicas


# ---------------------------------------------------------------------------
# growth diagnostics for the lam > 1 regime
# ---------------------------------------------------------------------------

@dataclass
class GrowthDiagnostics:
    """Per-trajectory growth summaries for lam > 1, r = 0.

    levels/hit_times: first times the count reaches the ladder levels;
    zeta(n) = hit_time(n) - log(n)/(lam-1) should settle to a finite value;
    scaled = N(t) exp(-(lam-1)t) should flatten to a positive plateau;
    s_ratio = births-by-hit-time / level should stabilize.
    """

    lam: float
    levels: np.ndarray
    hit_times: np.ndarray
    zeta: np.ndarray
    t_grid: np.ndarray
    n_of_t: np.ndarray
    scaled: np.ndarray
    s_ratio: np.ndarray

    def plateau_rel_spread(self) -> float:
        """(max - min) / median of the scaled sequence over the final half."""
        half = self.scaled[self.t_grid >= self.t_grid[-1] / 2.0]
        med = float(np.median(half))
        if med <= 0.0:
            return math.inf
        return float((half.max() - half.min()) / med)

    def zeta_gaps(self) -> np.ndarray:
        """|zeta(2n) - zeta(n)| along the doubling ladder."""
        gaps = []
        lv = list(self.levels)
        for i, n in enumerate(lv):
            if 2 * n in lv:
                j = lv.index(2 * n)
                gaps.append(abs(self.zeta[j] - self.zeta[i]))
        return np.asarray(gaps)


def growth_diagnostics(path) -> GrowthDiagnostics:
    """Compute the growth diagnostics from a counting path.

    ``path`` is any object with attributes lam, t_grid, n_of_t (running
    maximum of the count), b_of_t (cumulative births) and the doubling
    ladder arrays hit_levels / hit_times / hit_births.  The supercritical
    module produces these, exactly during the event-driven prefix and at
    grid resolution beyond; an adapter from engine event logs exists for
    modest horizons.  Rejects lam <= 1.
    """
    lam = path.lam
    if lam <= 1.0:
        raise ValueError("growth diagnostics are defined for lam > 1 only")
    t_grid = np.asarray(path.t_grid, dtype=np.float64)
    n_of_t = np.asarray(path.n_of_t, dtype=np.float64)
    levels_arr = np.asarray(path.hit_levels, dtype=np.int64)
    hit = np.asarray(path.hit_times, dtype=np.float64)
    births_at_hit = np.asarray(path.hit_births, dtype=np.float64)

    zeta = hit - np.log(levels_arr) / (lam - 1.0)
    scaled = n_of_t * np.exp(-(lam - 1.0) * t_grid)
    s_ratio = births_at_hit / levels_arr
    return GrowthDiagnostics(lam=lam, levels=levels_arr, hit_times=hit,
                             zeta=zeta, t_grid=t_grid, n_of_t=n_of_t,
                             scaled=scaled, s_ratio=s_ratio)


def stationary_counts(params, *, n_samples: int, seed: int,
                      burn_in: float = 50.0, spacing: float = 5.0) -> np.ndarray:
    """Thinned time samples of the count for the stationary-law test.

    One long exact trajectory, observations every ``spacing`` time units
    after ``burn_in``; burn-in and thinning tame autocorrelation and are
    overridable.  Returns counts indexed by state (counts[i] = #{X == i+1}).
    """
    from . import engine  # local import to avoid a cycle

    times = burn_in + spacing * np.arange(n_samples)
    t_max = float(times[-1] + spacing)
    obs, _ = engine.simulate(params, t_max, times, seed, log_events=False)
    xs = np.asarray([o.x for o in obs], dtype=np.int64)
    return np.bincount(xs)[1:]
