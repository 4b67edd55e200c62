import csv
import json
import os

import numpy as np
import pytest

from genphys import cli
from genphys.density_flow import DeltaMixture, fields
from genphys.pde_catalog import PdeSpec

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
EXP = os.path.join(ROOT, "experiments")


def _cfg(tmp_path, body):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(body))
    return str(path)


SMALL_SAMPLE = {
    "seed": 3,
    "pde": {"kind": "diffusion", "dim": 1},
    "data": {"points": [[-1.0], [1.0]], "weights": [0.5, 0.5]},
    "sample": {"T": 20.0, "t_min": 0.01, "steps": 40, "particles": 2000},
}


def test_classify_diffusion(capsys, tmp_path):
    assert cli.main(["classify", "--pde", "diffusion", "--out", str(tmp_path)]) == 0
    assert "SGenerative" in capsys.readouterr().out
    assert (tmp_path / "branches.csv").exists()


def test_classify_helmholtz_flags(capsys, tmp_path):
    assert cli.main(["classify", "--pde", "helmholtz", "--k0", "2", "--out", str(tmp_path)]) == 0
    assert "ConditionallySGenerative" in capsys.readouterr().out


def test_sample_symmetric_and_deterministic(tmp_path):
    cfg = _cfg(tmp_path, SMALL_SAMPLE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sample", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["sample", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["positive_fraction"] == pytest.approx(0.5, abs=0.05)
    c = tmp_path / "c"
    assert cli.main(["sample", "--config", cfg, "--seed", "4", "--out", str(c)]) == 0
    assert (a / "samples.csv").read_bytes() != (c / "samples.csv").read_bytes()


def test_field_csv_matches_library(tmp_path):
    body = {
        "pde": {"kind": "poisson", "dim": 1},
        "data": {"points": [[-1.0], [1.0]], "weights": [0.3, 0.7]},
        "field": {"x": [-2.0, 2.0, 9], "t": [0.5, 1.5, 3], "png": False},
    }
    assert cli.main(["field", "--config", _cfg(tmp_path, body), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "field.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 27
    pde = PdeSpec("poisson", 1)
    data = DeltaMixture([-1.0, 1.0], [0.3, 0.7])
    for row in rows[::5]:
        fb = fields(pde, data, np.array([[float(row["x1"])]]), float(row["t"]))
        assert float(row["p"]) == fb.p[0]
        assert float(row["v1"]) == fb.v[0, 0]
        assert float(row["phi"]) == fb.phi[0]


def test_field_ideal_wave_zero_outside_cone(tmp_path):
    body = {
        "pde": {"kind": "ideal_wave", "dim": 1},
        "data": {"points": [[0.0]]},
        "field": {"x": [-3.0, 3.0, 13], "t": [0.25, 1.75, 4], "png": True},
    }
    assert cli.main(["field", "--config", _cfg(tmp_path, body), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "field.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if abs(float(row["x1"])) > float(row["t"]) + 1e-9:
                assert float(row["phi"]) == 0.0
    assert (tmp_path / "field.png").stat().st_size > 0


def test_overlap_and_residual_configs(tmp_path):
    for name, cmd, out in (("overlap_diffusion.json", "overlap", "overlap.csv"),
                           ("screened_poisson_branching.json", "residual", "residual.csv")):
        d = tmp_path / cmd
        assert cli.main([cmd, "--config", os.path.join(EXP, name), "--out", str(d)]) == 0
        assert (d / out).read_text().count("\n") >= 2


def test_residual_reports_r_ablation(tmp_path):
    cli.main(["residual", "--config", os.path.join(EXP, "screened_poisson_branching.json"),
              "--out", str(tmp_path)])
    with open(tmp_path / "residual.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        assert float(row["residual"]) < 1e-6 < float(row["residual_without_R"])


@pytest.mark.parametrize("body, key", [
    ({"pde": {"kind": "diffusion", "bogus": 1}, "data": {"points": [[0.0]]}}, "pde.bogus"),
    ({"pde": {"kind": "diffusion"}, "data": {"points": [[0.0]]}, "extra": 1}, "extra"),
    ({"pde": {"kind": "diffusion"}, "data": {"points": [[0.0]]}, "sample": {"T": 1, "nope": 2}}, "sample.nope"),
])
def test_bad_config_names_key(tmp_path, capsys, body, key):
    assert cli.main(["sample", "--config", _cfg(tmp_path, body), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: config:") and key in err


def test_missing_config(capsys):
    assert cli.main(["sample"]) == 2
    assert "--config" in capsys.readouterr().err


def test_render_dimension_error(tmp_path, capsys):
    body = {"pde": {"kind": "diffusion", "dim": 3}, "data": {"points": [[0.0, 0.0, 0.0]]},
            "field": {"x": [-1, 1, 3], "y": [-1, 1, 3], "t": 1.0}}
    assert cli.main(["field", "--config", _cfg(tmp_path, body), "--out", str(tmp_path)]) == 2
    assert "render" in capsys.readouterr().err


@pytest.mark.parametrize("name", sorted(os.listdir(EXP)))
def test_experiment_configs_validate(name):
    cli.check_config(cli.load_config(os.path.join(EXP, name)))
