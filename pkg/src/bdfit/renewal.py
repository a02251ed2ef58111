"""Renewal-equation route to the limit laws of fitness and age (lam < 1, r > 0).

With F the distribution of the first regeneration time and
h(t) = P(observable_t <= threshold, R_1 > t) the pre-regeneration forcing
term, the tail probability H(t) = P(observable_t <= threshold) solves

    H = h + F * H

and the key renewal theorem sends H(t) to (1/mu) * integral(h) with
mu = E[R_1].  Both F and h are estimated by Monte Carlo (no closed forms
exist); their statistical error dominates the O(dt) discretization error
of the forward convolution recursion, which keeps H(0) = h(0) exact by
using left-endpoint increments of F.  The limit integral uses the
trapezoid rule.

The fitness mode needs only the uniform initial fitness; the age mode
additionally starts the founder age at an exponential with rate
2*(lam + 1), the stationary age seen at regenerations, which is what makes
the renewal identity hold from time zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import regen
from .engine import ModelParams
from .rng import numpy_generator, substream_seed
from .stats import EmpiricalDistribution


class RenewalDivergenceError(RuntimeError):
    """The solved H blew past the configured bound (invalid F, mass at 0)."""


@dataclass
class GridFunction:
    """Values of a function on the uniform grid 0, dt, 2*dt, ..."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be a positive real")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("a grid function needs at least two points")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def horizon(self) -> float:
        return self.dt * (self.values.size - 1)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)


@dataclass
class RenewalProblem:
    """F (cdf of R_1), h (subprobability forcing term) and mu = E[R_1]."""

    F: GridFunction
    h: GridFunction
    mu: float

    def __post_init__(self):
        if self.F.dt != self.h.dt or self.F.values.size != self.h.values.size:
            raise ValueError("F and h must share one grid")
        f = self.F.values
        if f[0] != 0.0 or np.any(np.diff(f) < 0.0) or f[-1] > 1.0 + 1e-12:
            raise ValueError("F must be a cdf with F(0) = 0")
        if np.any(self.h.values < 0.0) or np.any(self.h.values > 1.0):
            raise ValueError("h must take values in [0, 1]")
        if not (self.mu > 0.0):
            raise ValueError("mu must be positive")


def solve_renewal(problem: RenewalProblem, *,
                  divergence_bound: float = 1e9) -> GridFunction:
    """Forward solution of H = h + F * H on the grid.

    H(t_k) = h(t_k) + sum_{j<=k} H(t_k - t_j) dF(t_j) with left-endpoint
    increments dF(t_j) = F(t_j) - F(t_{j-1}); first order in dt.
    """
    h = problem.h.values
    dF = np.diff(problem.F.values)
    K = h.size
    H = np.empty(K)
    H[0] = h[0]
    for k in range(1, K):
        H[k] = h[k] + float(np.dot(H[k - 1::-1], dF[:k]))
        if H[k] > divergence_bound:
            raise RenewalDivergenceError(
                f"H({k * problem.h.dt:g}) exceeded {divergence_bound:g}; "
                f"F likely carries mass at 0")
    return GridFunction(problem.h.dt, H)


def limit_value(h: GridFunction, mu: float) -> float:
    """Key-renewal limit (1/mu) * integral of h, by the trapezoid rule.

    Warns when h has not decayed at the horizon (truncation bias).
    """
    if not (mu > 0.0):
        raise ValueError("mu must be positive")
    if h.values[-1] > 1e-3:
        warnings.warn(
            f"h({h.horizon:g}) = {h.values[-1]:.4g} > 1e-3: the limit "
            f"integral is truncated; extend the horizon", stacklevel=2)
    return float(np.trapezoid(h.values, dx=h.dt)) / mu


def _check_regime(params: ModelParams, mode: str):
    if mode not in ("fitness", "age"):
        raise ValueError(f"mode must be 'fitness' or 'age', got {mode!r}")
    if mode == "age" and params.lam >= 1.0:
        raise ValueError("the age limit law requires lam < 1 "
                         "(finite mean regeneration time)")
    if params.lam >= 1.0 or params.r <= 0.0:
        raise ValueError("renewal estimation requires lam < 1 and r > 0")


class HEstimate(NamedTuple):
    grid: GridFunction
    integrals: np.ndarray      # per-replica trapezoid of the indicator path


def _estimate_h_profiles(params: ModelParams, v_list: Sequence[float],
                         x_list: Sequence[float], dt: float, horizon: float,
                         n_replicas: int, seed: int):
    """Joint Monte Carlo of h_v (fitness) and g_x (age) on one replica set.

    The founder fitness is uniform and the founder age exponential with
    rate 2*(lam + 1); the fitness indicators do not depend on the age
    start, so sharing replicas is sound.  Returns (fitness estimates,
    age estimates) as lists of HEstimate aligned with v_list / x_list.
    """
    ngrid = int(round(horizon / dt)) + 1
    grid = dt * np.arange(ngrid)
    init_rng = numpy_generator(seed, "renewal/init-age")
    sums = np.zeros((len(v_list) + len(x_list), ngrid))
    zs = np.zeros((len(v_list) + len(x_list), n_replicas))
    age_rate = 2.0 * (params.lam + 1.0)
    for i in range(n_replicas):
        a0 = init_rng.exponential(1.0 / age_rate)
        _, paths = regen.first_regeneration(
            params, substream_seed(seed, "renewal/h", i), t_censor=horizon,
            initial_age=a0, grid=grid, profile_v=v_list, profile_x=x_list)
        sums += paths
        zs[:, i] = np.trapezoid(paths, dx=dt, axis=1)
    out_fit = [HEstimate(GridFunction(dt, sums[j] / n_replicas), zs[j])
               for j in range(len(v_list))]
    out_age = [HEstimate(GridFunction(dt, sums[len(v_list) + j] / n_replicas),
                         zs[len(v_list) + j])
               for j in range(len(x_list))]
    return out_fit, out_age


def estimate_h(params: ModelParams, threshold: float, mode: str,
               dt: float, horizon: float, n_replicas: int,
               seed: int) -> GridFunction:
    """Monte Carlo estimate of t -> P(observable_t <= threshold, R_1 > t).

    mode 'fitness' tracks the maximal fitness, mode 'age' the age of the
    fittest type (founder age started at its stationary exponential).
    """
    _check_regime(params, mode)
    v_list = [threshold] if mode == "fitness" else []
    x_list = [threshold] if mode == "age" else []
    fit, age = _estimate_h_profiles(params, v_list, x_list, dt, horizon,
                                    n_replicas, seed)
    return (fit or age)[0].grid


def empirical_F(r1: regen.R1Estimate, dt: float, horizon: float) -> GridFunction:
    """Empirical cdf of R_1 on the grid; censored replicas stay in the
    denominator (they carry no mass inside the horizon)."""
    ngrid = int(round(horizon / dt)) + 1
    grid = dt * np.arange(ngrid)
    if r1.samples is None:
        values = np.zeros(ngrid)
    else:
        values = r1.samples.cdf(grid) * (r1.samples.n / r1.n_replicas)
    values[0] = 0.0  # P(R_1 = 0) = 0; guards the convolution
    return GridFunction(dt, values)


@dataclass
class LimitEntry:
    threshold: float
    limit: float
    se: float
    h_at_horizon: float
    H_at_horizon: float
    h: GridFunction
    H: GridFunction


@dataclass
class RenewalReport:
    """Renewal-route limits for a set of thresholds, one mode."""

    mode: str
    mu_hat: float
    se_mu: float
    censored_fraction: float
    dt: float
    horizon: float
    F: GridFunction | None = None
    entries: list[LimitEntry] = field(default_factory=list)


def limit_report(params: ModelParams, mode: str, thresholds: Sequence[float],
                 seed: int, *, n_replicas_h: int = 20000,
                 n_replicas_r1: int = 20000, dt: float = 0.1,
                 horizon: float | None = None,
                 t_censor: float = 400.0) -> RenewalReport:
    """Full renewal pipeline: estimate F and mu, estimate h per threshold,
    solve the renewal equation and evaluate the key-renewal limit."""
    _check_regime(params, mode)
    r1 = regen.estimate_R1(params, n_replicas_r1, t_censor,
                           substream_seed(seed, "renewal/R1"))
    if r1.samples is None:
        raise RuntimeError("no uncensored regenerations; cannot build F")
    if horizon is None:
        horizon = dt * math.ceil(10.0 * r1.mu_hat / dt)
    F = empirical_F(r1, dt, horizon)
    v_list = list(thresholds) if mode == "fitness" else []
    x_list = list(thresholds) if mode == "age" else []
    fit, age = _estimate_h_profiles(params, v_list, x_list, dt, horizon,
                                    n_replicas_h, substream_seed(seed, "renewal/h-set"))
    estimates = fit or age
    se_mu = r1.samples.se_of_mean()
    report = RenewalReport(mode=mode, mu_hat=r1.mu_hat, se_mu=se_mu,
                           censored_fraction=r1.censored / r1.n_replicas,
                           dt=dt, horizon=horizon, F=F)
    for thr, est in zip(thresholds, estimates):
        numer = float(est.integrals.mean())
        se_numer = float(est.integrals.std(ddof=1) / math.sqrt(est.integrals.size))
        limit = numer / r1.mu_hat
        # independent replica batches for h and R_1: variances add
        se = math.sqrt((se_numer / r1.mu_hat) ** 2
                       + (numer * se_mu / r1.mu_hat ** 2) ** 2)
        H = solve_renewal(RenewalProblem(F, est.grid, r1.mu_hat))
        report.entries.append(LimitEntry(
            threshold=thr, limit=limit, se=se,
            h_at_horizon=float(est.grid.values[-1]),
            H_at_horizon=float(H.values[-1]), h=est.grid, H=H))
    return report
