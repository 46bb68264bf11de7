import csv
import json
import math

import numpy as np
import pytest

from lzkit import analysis, cli
from lzkit.analysis import FitModel
from lzkit.model import SSH_PARAMS, dump_params


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sweep_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep") / "sweep.csv"
    assert run("sweep", "--out", out) == 0
    return out


def test_sweep_default_grid(sweep_csv, capsys):
    rows = read_csv(sweep_csv)
    assert len(rows) == 61
    assert list(rows[0]) == analysis.SWEEP_HEADER
    assert float(rows[-1]["s33"]) == pytest.approx(1.0, abs=0.05)
    side = json.loads(cli.sidecar_path(sweep_csv).read_text())
    assert side["params"] == dump_params(SSH_PARAMS)
    assert side["grid"]["n_points"] == 61 and side["solver"]["t_window"] == "AUTO"


def test_fit_round_trip_bitwise(sweep_csv, ssh_sweep, tmp_path, capsys):
    out = tmp_path / "fit.json"
    assert run("fit", "--model", "s33-two-exp", "--data", sweep_csv, "--target", "s33", "--out", out) == 0
    assert "0.219, 0.827" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc == analysis.fit(FitModel.S33_TWO_EXP, ssh_sweep).to_dict()


def test_fit_s32(sweep_csv, capsys):
    assert run("fit", "--model", "s32-three-param", "--data", sweep_csv, "--target", "abs_s32") == 0
    assert "0.108, 0.373, 1.29" in capsys.readouterr().out


def test_fit_input_errors(sweep_csv, tmp_path):
    small = tmp_path / "small.csv"
    small.write_text("\n".join(sweep_csv.read_text().splitlines()[:4]) + "\n")
    assert run("fit", "--model", "s33-four-param", "--data", small) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("beta,s33\n1,2\n")
    assert run("fit", "--model", "s33-two-exp", "--data", bad) == 2
    assert run("fit", "--model", "s33-two-exp", "--data", tmp_path / "missing.csv") == 2
    assert run("fit", "--data", sweep_csv) == 2


def test_fit_nonconvergence_exit(sweep_csv, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("forced")

    monkeypatch.setattr(analysis, "least_squares", broken)
    assert run("fit", "--model", "s33-two-exp", "--data", sweep_csv) == 4


def test_fit_refuses_degenerate(tmp_path, capsys):
    out = tmp_path / "deg.csv"
    assert run("sweep", "--preset", "degenerate", "--beta-min", 0.01, "--beta-max", 1, "--n-points", 5,
               "--out", out) == 0
    assert run("fit", "--model", "s33-two-exp", "--data", out) == 2
    assert "degeneracy" in capsys.readouterr().err
    assert run("fit", "--model", "s32-three-param", "--data", out) == 0


def test_verify(tmp_path, capsys):
    out = tmp_path / "verify.json"
    assert run("verify", "--beta", 1, "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["max_residual"] < 1e-3 and report["converged"]
    assert set(report["residuals"]) >= {"bipartite", "hc1", "hc4", "u_phase6", "max"}
    assert run("verify", "--beta", 1000) == 0
    assert run("verify", "--beta", 1, "--t-window", 0.1, "--max-doublings", 0) == 3
    assert run("verify", "--beta", 1, "--tol", 1e-15) == 1


def test_series(tmp_path):
    out = tmp_path / "series.csv"
    assert run("series", "--betas", "0.1,100", "--out", out) == 0
    rows = read_csv(out)
    assert list(rows[0]) == cli.SERIES_HEADER
    r = rows[1]
    assert abs(float(r["s33_series"]) - float(r["s33_numeric"])) < 1e-4
    # beta = 0.1 sits outside the series' range; the deviation is large but only recorded
    assert math.isfinite(float(rows[0]["s33_numeric"]))


def test_series_decoupled_middle(tmp_path):
    out = tmp_path / "series.csv"
    assert run("series", "--betas", "0.5,5", "--g13", 0, "--out", out) == 0
    assert all(float(r["abs_s32_series"]) == 0.0 for r in read_csv(out))


def test_ssh_command(tmp_path):
    out = tmp_path / "ssh.csv"
    assert run("ssh", "--sites", 5, "--beta-min", 0.01, "--beta-max", 10, "--n-points", 4, "--out", out) == 0
    rows = read_csv(out)
    assert list(rows[0])[:7] == ["beta", "re_s11", "im_s11", "re_s15", "im_s15", "p_stay", "p_transfer"]
    assert float(rows[0]["p_transfer"]) > 0.95
    assert float(rows[-1]["p_stay"]) > 0.9
    pt = [float(r["p_transfer"]) for r in rows]
    assert pt[0] > pt[-1]


def test_ssh_matches_sweep_data(tmp_path):
    ssh_out, sweep_out = tmp_path / "ssh.csv", tmp_path / "sweep.csv"
    assert run("ssh", "--beta-min", 0.05, "--beta-max", 0.1, "--n-points", 2, "--out", ssh_out) == 0
    assert run("sweep", "--beta-min", 0.05, "--beta-max", 0.1, "--n-points", 2, "--out", sweep_out) == 0
    p = float(read_csv(ssh_out)[0]["p_transfer"])
    s33 = analysis.read_sweep_csv(sweep_out)[0].s33
    assert p == pytest.approx(s33**2, abs=4e-2)


def test_ssh_unsupported_sites(tmp_path, capsys):
    assert run("ssh", "--sites", 7, "--out", tmp_path / "x.csv") == 2
    assert "not supported" in capsys.readouterr().err


def test_config_and_overrides(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "params": {"b1": 1.0, "b2": 2.0, "g12": 0.3, "g13": 0.5, "g14": 0.4, "beta": 1.0},
        "solver": {"rel_tol": 1e-9, "t_window": "AUTO"},
        "grid": {"beta_min": 0.5, "beta_max": 2.0, "n_points": 3},
        "output_path": str(tmp_path / "from_config.csv"),
    }))
    assert run("sweep", "--config", cfg, "--g13", 0.6, "--n-points", 2) == 0
    side = json.loads(cli.sidecar_path(tmp_path / "from_config.csv").read_text())
    assert side["params"]["g13"] == 0.6 and side["params"]["g12"] == 0.3
    assert side["solver"]["rel_tol"] == 1e-9
    assert side["grid"]["n_points"] == 2
    assert len(read_csv(tmp_path / "from_config.csv")) == 2


def test_bad_inputs(tmp_path):
    assert run("sweep", "--config", tmp_path / "nope.json", "--out", tmp_path / "o.csv") == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"params": {"b1": 2.0, "b2": 1.0, "g12": 0, "g13": 0, "g14": 0}}))
    assert run("verify", "--config", bad) == 2
    assert run("sweep") == 2
    assert run("sweep", "--out", tmp_path / "missing_dir" / "o.csv", "--n-points", 2) == 2
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2


def test_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("sweep", "--beta-min", 0.3, "--beta-max", 3, "--n-points", 3, "--out", out) == 0
    assert a.read_text() == b.read_text()
