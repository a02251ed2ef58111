"""Command line front end.

Subcommands: simulate, regen, renewal, couple, verify, explore-conjecture.
Configuration precedence is flags > --config JSON file > built-in
defaults, and the effective configuration is echoed into every JSON
summary (schema_version 1).  Exit codes: 0 success / checks passed,
1 statistical or invariant failure, 2 usage error.

Replica fan-out uses per-replica substreams of the master seed, so results
are bit-identical for any worker count; observation snapshots are
right-continuous (an event at exactly the observation time is included).
Report paths render matplotlib figures next to the delimited output unless
--no-figures is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import coupling, figures, regen, renewal, stats, verify
from .engine import ModelParams, simulate
from .rng import numpy_generator, substream_seed

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    lam: float = 0.5
    r: float = 0.0
    t_max: float = 100.0
    obs_dt: float = 5.0
    n_replicas: int = 100
    master_seed: int = 1
    workers: int = 1
    output: str = "bdfit_out"
    format: str = "csv"
    grid_dt: float = 0.1
    horizon: float | None = None
    figures: bool = True

    def __post_init__(self):
        if self.n_replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        ModelParams(self.lam, self.r)  # validates lam, r

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.lam, self.r)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if "lambda" in data:  # accept the flag spelling
        data["lam"] = data.pop("lambda")
    return data


def _resolve(args, extra_fields=()) -> RunConfig:
    """flags > config file > defaults."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    cfg = {}
    fields = ["lam", "r", "t_max", "obs_dt", "n_replicas", "master_seed",
              "workers", "output", "format", "grid_dt", "horizon", "figures",
              *extra_fields]
    for name in fields:
        if name in file_cfg:
            cfg[name] = file_cfg[name]
        flag_val = getattr(args, name, None)
        if flag_val is not None:
            cfg[name] = flag_val
    known = {k: v for k, v in cfg.items() if k in RunConfig.__dataclass_fields__}
    run = RunConfig(**known)
    run_extra = {k: cfg[k] for k in extra_fields if k in cfg}
    return run, run_extra


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_table(path_base: Path, fmt: str, header: list[str], rows: list):
    """Delimited output: CSV by default, a JSON record list on request."""
    if fmt == "json":
        path = path_base.with_suffix(".json")
        with open(path, "w") as fh:
            json.dump([dict(zip(header, row)) for row in rows], fh,
                      sort_keys=True, indent=1)
    else:
        path = path_base.with_suffix(".csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v
                                 for v in row])
    return path


def _write_summary(outdir: Path, name: str, command: str, cfg: RunConfig,
                   payload: dict, extra_cfg: dict | None = None) -> Path:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": {**asdict(cfg), **(extra_cfg or {})},
        **payload,
    }
    path = outdir / name
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, default=float)
    return path


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _replica_block(task):
    """Worker task: run a block of replicas, return observation rows."""
    lam, r, t_max, obs_times, master_seed, replicas = task
    params = ModelParams(lam, r)
    rows = []
    for i in replicas:
        obs, _ = simulate(params, t_max, obs_times,
                          substream_seed(master_seed, "replica", i),
                          log_events=False)
        rows.extend((i, o.time, o.x, o.phi, o.age, o.births_so_far)
                    for o in obs)
    return rows


def cmd_simulate(args) -> int:
    cfg, _ = _resolve(args)
    if cfg.t_max <= 0:
        raise ValueError(f"t_max must be positive, got {cfg.t_max}")
    obs_times = [round(k * cfg.obs_dt, 12) for k in
                 range(int(math.floor(cfg.t_max / cfg.obs_dt)) + 1)]
    blocks = np.array_split(np.arange(cfg.n_replicas), cfg.workers * 4)
    tasks = [(cfg.lam, cfg.r, cfg.t_max, obs_times, cfg.master_seed,
              [int(i) for i in block]) for block in blocks if block.size]
    if cfg.workers == 1:
        results = [_replica_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_replica_block, tasks))
    rows = [row for block in results for row in block]
    rows.sort(key=lambda row: (row[0], row[1]))

    outdir = _outdir(cfg)
    table = _write_table(outdir / "observations", cfg.format,
                         ["replica", "t", "X", "phi", "age", "births"], rows)

    summary = {}
    arr = np.asarray([[row[1], row[2], row[3], row[4]] for row in rows])
    for t in obs_times:
        sel = arr[arr[:, 0] == t]
        summary[t] = {
            key: {"mean": float(np.mean(sel[:, j])),
                  "q10": float(np.quantile(sel[:, j], 0.1)),
                  "q50": float(np.quantile(sel[:, j], 0.5)),
                  "q90": float(np.quantile(sel[:, j], 0.9))}
            for j, key in ((1, "x"), (2, "phi"), (3, "age"))
        }
    summary_path = _write_summary(
        outdir, "simulate_summary.json", "simulate", cfg,
        {"observations_file": table.name,
         "summary": {repr(t): v for t, v in summary.items()}})
    if cfg.figures:
        figures.observation_summary(obs_times, summary,
                                    outdir / "simulate_summary.png")
    print(f"simulate: {cfg.n_replicas} replicas to t={cfg.t_max} "
          f"-> {table} and {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# regen
# ---------------------------------------------------------------------------

def cmd_regen(args) -> int:
    cfg, extra = _resolve(args, ("excursions_csv", "n_target"))
    n_target = int(extra.get("n_target") or 1000)
    harvest = regen.collect_regenerations(
        cfg.params, n_target=n_target, seed=cfg.master_seed,
        horizon_per_replica=cfg.t_max)
    regs = harvest.regenerations
    outdir = _outdir(cfg)
    table = _write_table(outdir / "regenerations", cfg.format,
                         ["replica", "n", "R_n", "phi", "age"],
                         [(rep, g.n, g.time, g.phi, g.age)
                          for rep, g in zip(harvest.regen_replicas, regs)])
    if extra.get("excursions_csv"):
        _write_table(outdir / "excursions", cfg.format,
                     ["n", "xi", "eta", "outcome", "epsilon"],
                     [(i + 1, e.xi, e.eta, e.outcome.value, e.epsilon)
                      for i, e in enumerate(harvest.excursions)])
    eps = np.array([e.epsilon for e in harvest.excursions], dtype=float)
    payload = {
        "n_regenerations": len(regs),
        "n_excursions": len(harvest.excursions),
        "censored_excursions": harvest.censored,
        "epsilon_mean": float(eps.mean()) if eps.size else None,
        "bernoulli_p": regen.bernoulli_p(cfg.params),
    }
    summary_path = _write_summary(outdir, "regen_summary.json", "regen", cfg,
                                  payload, {"n_target": n_target})
    if cfg.figures and regs:
        figures.cdf_comparison([g.phi for g in regs], stats.uniform_cdf,
                               "uniform(0,1)", "survivor fitness at regenerations",
                               outdir / "regen_fitness_cdf.png")
        rate = 2.0 * (cfg.lam + 1.0)
        figures.cdf_comparison([g.age for g in regs],
                               stats.exponential_cdf(rate),
                               f"exponential({rate:g})",
                               "survivor age at regenerations",
                               outdir / "regen_age_cdf.png")
    print(f"regen: {len(regs)} regenerations from {len(harvest.excursions)} "
          f"excursions -> {table} and {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# renewal
# ---------------------------------------------------------------------------

def cmd_renewal(args) -> int:
    cfg, extra = _resolve(args, ("mode", "thresholds", "t_censor"))
    mode = extra.get("mode") or "fitness"
    thresholds = extra.get("thresholds") or ("0.25,0.5,0.75" if mode == "fitness"
                                             else "0.2,0.5,1.0")
    if isinstance(thresholds, str):
        thresholds = [float(s) for s in thresholds.split(",") if s]
    t_censor = float(extra.get("t_censor") or 400.0)
    report = renewal.limit_report(
        cfg.params, mode, thresholds, cfg.master_seed,
        n_replicas_h=cfg.n_replicas, n_replicas_r1=cfg.n_replicas,
        dt=cfg.grid_dt, horizon=cfg.horizon, t_censor=t_censor)

    outdir = _outdir(cfg)
    _write_table(outdir / "F", cfg.format, ["t", "value"],
                 list(zip(report.F.times().tolist(), report.F.values.tolist())))
    curves = {}
    entries_payload = []
    for e in report.entries:
        tag = f"{mode[0]}_{e.threshold:g}".replace(".", "p")
        _write_table(outdir / f"h_{tag}", cfg.format, ["t", "value"],
                     list(zip(e.h.times().tolist(), e.h.values.tolist())))
        _write_table(outdir / f"H_{tag}", cfg.format, ["t", "value"],
                     list(zip(e.H.times().tolist(), e.H.values.tolist())))
        curves[f"h thr={e.threshold:g}"] = e.h
        curves[f"H thr={e.threshold:g}"] = e.H
    for e in report.entries:
        entries_payload.append({
            "v_or_x": e.threshold,
            "limit": e.limit,
            "se": e.se,
            "H_at_horizon": e.H_at_horizon,
            "mu_hat": report.mu_hat,
            "censored_fraction": report.censored_fraction,
        })
    summary_path = _write_summary(
        outdir, "renewal_report.json", "renewal", cfg,
        {"mode": mode, "entries": entries_payload},
        {"mode": mode, "thresholds": thresholds, "t_censor": t_censor})
    if cfg.figures:
        figures.grid_functions(curves, f"renewal forcing terms and solutions "
                               f"({mode})", outdir / "renewal_curves.png")
    print(f"renewal: mode={mode} limits="
          f"{[round(e['limit'], 4) for e in entries_payload]} -> {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# couple
# ---------------------------------------------------------------------------

def cmd_couple(args) -> int:
    cfg, extra = _resolve(args, ("trace",))
    outdir = _outdir(cfg)
    max_f1 = []
    max_fr = []
    trace_rows = []
    for i in range(cfg.n_replicas):
        res = coupling.coupled_simulate(
            cfg.params, cfg.t_max, substream_seed(cfg.master_seed, "couple", i),
            trace=bool(extra.get("trace")))
        max_f1.append(res.max_f1)
        max_fr.append(res.max_fr)
        if res.trace:
            trace_rows.extend((i, t, kind, k, m1, mr)
                              for (t, kind, k, m1, mr) in res.trace)
    gap = coupling.dominance_gap(max_f1, max_fr)
    if trace_rows:
        _write_table(outdir / "couple_trace", cfg.format,
                     ["replica", "t", "kind", "k", "max_f1", "max_fr"],
                     trace_rows)
    summary_path = _write_summary(
        outdir, "couple_summary.json", "couple", cfg,
        {"violations": 0, "dominance_gap_min": gap,
         "replicas": cfg.n_replicas, "t_max": cfg.t_max})
    if cfg.figures:
        figures.dominance(max_f1, max_fr, outdir / "couple_dominance.png")
    print(f"couple: {cfg.n_replicas} coupled pairs, zero violations, "
          f"min cdf gap {gap:.4f} -> {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg, extra = _resolve(args, ("target", "t_max"))
    target = extra.get("target")
    if not target:
        raise ValueError("verify needs --target "
                         f"(one of {', '.join(verify.TARGETS)})")
    kwargs = {}
    if args.replicas_given:
        key = {"thm1a": "n_replicas", "thm2b": "n_replicas",
               "thm3": "n_replicas", "thm4": "n_replicas",
               "regen": "n_regenerations", "r1law": "n_samples",
               "stationary": "n_samples", "coupling": "n_trajectories"}[target]
        kwargs[key] = cfg.n_replicas
    if extra.get("t_max") is not None and target in ("thm2b", "thm1a", "r1law"):
        kwargs["t"] = float(extra["t_max"])
    if extra.get("t_max") is not None and target == "coupling":
        kwargs["t_max"] = float(extra["t_max"])
    report = verify.run_target(target, cfg.params,
                               seed=cfg.master_seed if args.seed_given else None,
                               **kwargs)

    outdir = _outdir(cfg)
    samples = report.pop("samples", None)
    summary_path = _write_summary(outdir, f"verify_{target}.json", "verify",
                                  cfg, {"report": report}, {"target": target})
    if cfg.figures:
        _verify_figures(target, report, samples, cfg, outdir)
    status = "PASS" if report["passed"] else "FAIL"
    for c in report["checks"]:
        print(f"  [{'pass' if c['passed'] else 'FAIL'}] {c['name']}")
    print(f"verify {target}: {status} -> {summary_path}")
    return 0 if report["passed"] else 1


def _verify_figures(target, report, samples, cfg, outdir: Path):
    if target == "thm1a" and samples:
        figures.cdf_comparison(samples, stats.uniform_cdf, "uniform(0,1)",
                               "age fraction a_t / t",
                               outdir / "verify_thm1a_cdf.png")
    elif target == "thm2b" and samples:
        rate = report["lam"] - 1.0
        figures.cdf_comparison(samples, stats.exponential_cdf(rate),
                               f"exponential({rate:g})", "age at depth t",
                               outdir / "verify_thm2b_cdf.png")
    elif target == "regen":
        figures.cdf_comparison(report["phi_samples"], stats.uniform_cdf,
                               "uniform(0,1)", "survivor fitness at R",
                               outdir / "verify_regen_fitness.png")
        rate = 2.0 * (report["lam"] + 1.0)
        figures.cdf_comparison(report["age_samples"],
                               stats.exponential_cdf(rate),
                               f"exponential({rate:g})", "survivor age at R",
                               outdir / "verify_regen_age.png")
    elif target == "thm3":
        for mode in ("fitness", "age"):
            entries = [c for c in report["checks"]
                       if c["name"].startswith(f"{mode}_limit_vs_direct")]
            if entries:
                figures.limit_cross_validation(
                    [float(c["name"].rsplit("_", 1)[1]) for c in entries],
                    [c["renewal_limit"] for c in entries],
                    [c["renewal_se"] for c in entries],
                    [c["direct"] for c in entries],
                    [c["direct_se"] for c in entries],
                    mode, outdir / f"verify_thm3_{mode}.png")
    elif target == "thm4":
        figures.trend(report["t_grid"], report["probabilities"], report["u"],
                      "maximal fitness tail over time",
                      outdir / "verify_thm4_trend.png")
    elif target == "stationary":
        counts = np.asarray(report["counts"])
        figures.stationary_bars(
            counts, stats.logseries_pmf(report["lam"],
                                        np.arange(1, counts.size + 1)),
            outdir / "verify_stationary.png")
    elif target == "coupling" and report.get("feasible"):
        figures.dominance(report["max_f1"], report["max_fr"],
                          outdir / "verify_coupling_dominance.png")


# ---------------------------------------------------------------------------
# explore-conjecture
# ---------------------------------------------------------------------------

def cmd_explore(args) -> int:
    cfg, extra = _resolve(args, ("t_grid",))
    if cfg.lam <= 1.0 or cfg.r <= 0.0:
        raise ValueError("the open-question experiment is about lam > 1 "
                         "with r > 0")
    t_grid = extra.get("t_grid") or "2,4,8"
    if isinstance(t_grid, str):
        t_grid = [float(s) for s in t_grid.split(",") if s]
    outdir = _outdir(cfg)
    rows = []
    quantiles = {0.1: [], 0.5: [], 0.9: []}
    for t in t_grid:
        ages = []
        for i in range(cfg.n_replicas):
            obs, _ = simulate(cfg.params, t, [t],
                              substream_seed(cfg.master_seed, f"explore/{t}", i),
                              log_events=False, max_events=3_000_000)
            ages.append(obs[0].age)
            rows.append((i, t, obs[0].age, obs[0].phi, obs[0].x))
        for q in quantiles:
            quantiles[q].append(float(np.quantile(ages, q)))
    table = _write_table(outdir / "conjecture_ages", cfg.format,
                         ["replica", "t", "age", "phi", "X"], rows)
    summary_path = _write_summary(
        outdir, "conjecture_summary.json", "explore-conjecture", cfg,
        {"t_grid": t_grid,
         "age_quantiles": {str(q): v for q, v in quantiles.items()},
         "note": "exploratory only: no acceptance criterion is attached to "
                 "the open question whether the age stays tight here"})
    if cfg.figures:
        figures.age_quantiles(t_grid, quantiles,
                              outdir / "conjecture_age_quantiles.png")
    print(f"explore-conjecture: ages at t={t_grid} -> {table} and {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdfit",
        description="Exact simulation and statistical verification of the "
                    "fitness birth-death virus evolution model.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="per-type birth/mutation rate (> 0)")
        p.add_argument("--r", type=float, default=None,
                       help="probability a death is a random killing [0, 1]")
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--obs-dt", dest="obs_dt", type=float, default=None)
        p.add_argument("--replicas", dest="n_replicas", type=int, default=None)
        p.add_argument("--seed", dest="master_seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--grid-dt", dest="grid_dt", type=float, default=None)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--output", type=str, default=None)
        p.add_argument("--format", type=str, default=None,
                       choices=("csv", "json"))
        p.add_argument("--config", type=str, default=None,
                       help="JSON file with defaults; flags override it")
        p.add_argument("--no-figures", dest="figures", action="store_false",
                       default=None, help="skip figure rendering")

    p = sub.add_parser("simulate", help="replicated trajectories with "
                       "observation snapshots")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("regen", help="excursion and regeneration detection")
    common(p)
    p.add_argument("--n-target", dest="n_target", type=int, default=None,
                   help="collect at least this many regenerations")
    p.add_argument("--excursions-csv", dest="excursions_csv",
                   action="store_true", default=None,
                   help="also write the per-excursion debug table")
    p.set_defaults(fn=cmd_regen)

    p = sub.add_parser("renewal", help="renewal-equation limit pipeline")
    common(p)
    p.add_argument("--mode", choices=("fitness", "age"), default=None)
    p.add_argument("--thresholds", type=str, default=None,
                   help="comma-separated thresholds")
    p.add_argument("--t-censor", dest="t_censor", type=float, default=None)
    p.set_defaults(fn=cmd_renewal)

    p = sub.add_parser("couple", help="shared-randomness coupled pairs")
    common(p)
    p.add_argument("--trace", action="store_true", default=None,
                   help="write the per-event trace table")
    p.set_defaults(fn=cmd_couple)

    p = sub.add_parser("verify", help="run a verification target")
    common(p)
    p.add_argument("--target", choices=verify.TARGETS, default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("explore-conjecture",
                       help="exploratory age tracking for lam > 1, r > 0")
    common(p)
    p.add_argument("--t-grid", dest="t_grid", type=str, default=None)
    p.set_defaults(fn=cmd_explore)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.replicas_given = args.n_replicas is not None
    args.seed_given = args.master_seed is not None
    try:
        return args.fn(args)
    except (ValueError, verify.TargetParameterError,
            coupling.InfeasibleRunError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
