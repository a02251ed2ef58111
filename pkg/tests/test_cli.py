import json
from pathlib import Path

import pytest

from bdfit.cli import main


def run(*argv):
    return main(list(argv))


def test_simulate_writes_tables_and_figures(tmp_path):
    out = tmp_path / "out"
    code = run("simulate", "--lambda", "0.5", "--r", "0", "--t-max", "20",
               "--obs-dt", "5", "--replicas", "10", "--seed", "3",
               "--output", str(out))
    assert code == 0
    assert (out / "observations.csv").exists()
    assert (out / "simulate_summary.json").exists()
    assert (out / "simulate_summary.png").exists()
    header = (out / "observations.csv").read_text().splitlines()[0]
    assert header == "replica,t,X,phi,age,births"
    doc = json.loads((out / "simulate_summary.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["config"]["lam"] == 0.5
    assert doc["config"]["master_seed"] == 3


def test_simulate_byte_identical_reruns_and_workers(tmp_path):
    outs = []
    for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        assert run("simulate", "--lambda", "0.6", "--r", "0.4", "--t-max", "25",
                   "--obs-dt", "5", "--replicas", "16", "--seed", "11",
                   "--workers", workers, "--output", str(out),
                   "--no-figures") == 0
        outs.append((out / "observations.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_rejects_bad_t_max(tmp_path):
    assert run("simulate", "--lambda", "0.5", "--r", "0", "--t-max", "0",
               "--output", str(tmp_path / "x")) == 2


def test_simulate_json_format(tmp_path):
    out = tmp_path / "j"
    assert run("simulate", "--lambda", "0.5", "--r", "0", "--t-max", "10",
               "--obs-dt", "5", "--replicas", "4", "--seed", "1",
               "--format", "json", "--output", str(out), "--no-figures") == 0
    rows = json.loads((out / "observations.json").read_text())
    assert rows[0].keys() == {"replica", "t", "X", "phi", "age", "births"}


def test_config_file_precedence(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"lambda": 0.5, "r": 0.2, "t_max": 10.0,
                                   "n_replicas": 5, "master_seed": 9}))
    out = tmp_path / "out"
    # flag overrides the file value for r
    assert run("simulate", "--config", str(cfgfile), "--r", "0.7",
               "--obs-dt", "5", "--output", str(out), "--no-figures") == 0
    doc = json.loads((out / "simulate_summary.json").read_text())
    assert doc["config"]["r"] == 0.7
    assert doc["config"]["lam"] == 0.5
    assert doc["config"]["n_replicas"] == 5


def test_regen_command(tmp_path):
    out = tmp_path / "rg"
    assert run("regen", "--lambda", "0.5", "--r", "0.5", "--t-max", "400",
               "--n-target", "60", "--seed", "21", "--output", str(out),
               "--excursions-csv", "--no-figures") == 0
    assert (out / "regenerations.csv").read_text().splitlines()[0] \
        == "replica,n,R_n,phi,age"
    assert (out / "excursions.csv").read_text().splitlines()[0] \
        == "n,xi,eta,outcome,epsilon"
    doc = json.loads((out / "regen_summary.json").read_text())
    assert doc["n_regenerations"] >= 60
    assert doc["bernoulli_p"] == pytest.approx(1 / 6)


def test_renewal_command(tmp_path):
    out = tmp_path / "rn"
    assert run("renewal", "--lambda", "0.5", "--r", "0.5", "--replicas", "400",
               "--grid-dt", "0.2", "--seed", "31", "--mode", "fitness",
               "--thresholds", "0.5", "--output", str(out)) == 0
    doc = json.loads((out / "renewal_report.json").read_text())
    entry = doc["entries"][0]
    assert set(entry) == {"v_or_x", "limit", "se", "H_at_horizon", "mu_hat",
                          "censored_fraction"}
    assert (out / "F.csv").exists()
    assert (out / "h_f_0p5.csv").exists()
    assert (out / "H_f_0p5.csv").exists()
    assert (out / "renewal_curves.png").exists()
    assert (out / "F.csv").read_text().splitlines()[0] == "t,value"


def test_couple_command_and_trace(tmp_path):
    out = tmp_path / "cp"
    assert run("couple", "--lambda", "1.2", "--r", "0.5", "--t-max", "6",
               "--replicas", "20", "--seed", "41", "--output", str(out),
               "--trace", "--no-figures") == 0
    doc = json.loads((out / "couple_summary.json").read_text())
    assert doc["violations"] == 0
    assert doc["replicas"] == 20 and doc["t_max"] == 6.0
    assert "dominance_gap_min" in doc
    assert (out / "couple_trace.csv").exists()


def test_couple_infeasible_is_usage_error(tmp_path):
    assert run("couple", "--lambda", "2.0", "--r", "0.5", "--t-max", "20",
               "--replicas", "5", "--output", str(tmp_path / "x")) == 2


def test_verify_target_param_guard(tmp_path):
    # thm1a requires r = 0
    assert run("verify", "--target", "thm1a", "--lambda", "0.5", "--r", "0.5",
               "--output", str(tmp_path / "x")) == 2


def test_verify_stationary_passes(tmp_path):
    out = tmp_path / "vs"
    code = run("verify", "--target", "stationary", "--lambda", "0.5",
               "--r", "0", "--replicas", "3000", "--seed", "51",
               "--output", str(out))
    assert code == 0
    doc = json.loads((out / "verify_stationary.json").read_text())
    assert doc["report"]["passed"] is True
    names = {c["name"] for c in doc["report"]["checks"]}
    assert names == {"chi_square_log_series", "log_series_detailed_balance"}
    assert (out / "verify_stationary.png").exists()


def test_verify_coupling_infeasible_defaults_fail(tmp_path):
    out = tmp_path / "vc"
    code = run("verify", "--target", "coupling", "--lambda", "2.0",
               "--r", "0.5", "--output", str(out), "--no-figures")
    assert code == 1
    doc = json.loads((out / "verify_coupling.json").read_text())
    assert doc["report"]["passed"] is False
    reasons = [c.get("reason") for c in doc["report"]["checks"]
               if not c["passed"]]
    assert "infeasible at the requested scale" in reasons


def test_explore_conjecture(tmp_path):
    out = tmp_path / "ex"
    assert run("explore-conjecture", "--lambda", "1.5", "--r", "0.5",
               "--t-grid", "2,4", "--replicas", "30", "--seed", "61",
               "--output", str(out)) == 0
    doc = json.loads((out / "conjecture_summary.json").read_text())
    assert doc["t_grid"] == [2.0, 4.0]
    assert (out / "conjecture_ages.csv").exists()
    assert (out / "conjecture_age_quantiles.png").exists()
    assert run("explore-conjecture", "--lambda", "0.5", "--r", "0.5",
               "--output", str(out)) == 2
