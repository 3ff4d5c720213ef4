import json
import os

import pytest

from beammix.cli import main
from beammix.config import write_config
from beammix.data import load_dataset


@pytest.fixture(scope="module")
def cfg_file(tiny_cfg, tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.txt"
    write_config(tiny_cfg, path)
    return str(path)


def test_generate_writes_loadable_dumps(cfg_file, tmp_path):
    out = str(tmp_path / "gen")
    assert main(["generate", "--config", cfg_file, "--out", out]) == 0
    for fam in ("family_A", "family_B"):
        train = load_dataset(os.path.join(out, f"{fam}_train.chnl"))
        test = load_dataset(os.path.join(out, f"{fam}_test.chnl"))
        assert train.n == 48 and test.n == 16
        assert train.scene_id == fam


def test_train_eval_theory_report_pipeline(cfg_file, tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["train", "--config", cfg_file, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "checkpoint.bnet"))
    data = json.loads(open(os.path.join(out, "results.json")).read())
    assert data["kind"] == "mixed"

    assert main(["eval", "--config", cfg_file, "--out", out]) == 0
    data = json.loads(open(os.path.join(out, "results.json")).read())
    assert data["kind"] == "eval"
    assert os.path.exists(os.path.join(out, "rates_vs_snr.csv"))

    assert main(["theory", "--config", cfg_file, "--out", out]) == 0
    data = json.loads(open(os.path.join(out, "results.json")).read())
    assert data["kind"] == "theory"
    assert len(data["sweep"]) == 3
    assert os.path.exists(os.path.join(out, "hessian_mixed.hess"))

    assert main(["report", "--out", out]) == 0
    printed = capsys.readouterr().out
    assert "argmin C" in printed


def test_sweep_subcommand(cfg_file, tmp_path):
    out = str(tmp_path / "sweep")
    assert main(["sweep", "--config", cfg_file, "--out", out]) == 0
    lines = open(os.path.join(out, "sweep.csv")).read().strip().splitlines()
    assert lines[0] == "q,rate,loss,extra_loss,C_direct,C_rational,log_C"
    assert len(lines) == 4


def test_seed_flag_overrides_config(cfg_file, tmp_path):
    out1 = str(tmp_path / "s1")
    out2 = str(tmp_path / "s2")
    assert main(["train", "--config", cfg_file, "--out", out1, "--seed", "31"]) == 0
    assert main(["train", "--config", cfg_file, "--out", out2, "--seed", "32"]) == 0
    r1 = json.loads(open(os.path.join(out1, "results.json")).read())
    r2 = json.loads(open(os.path.join(out2, "results.json")).read())
    assert r1["seed"] == 31 and r2["seed"] == 32
    assert r1["rates"] != r2["rates"]


def test_show_config_prints_defaults(capsys):
    assert main(["report", "--show-config", "--out", "unused"]) == 0
    text = capsys.readouterr().out
    assert "scene.family_A.azimuth_center_rad" in text
    assert "train.epochs = 2000" in text


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("definitely not valid\n")
    out = str(tmp_path / "never")
    assert main(["train", "--config", str(bad), "--out", out]) == 2
    assert not os.path.exists(out)
    assert "error:" in capsys.readouterr().err


def test_missing_checkpoint_reports_error(cfg_file, tmp_path, capsys):
    out = str(tmp_path / "empty")
    os.makedirs(out)
    assert main(["eval", "--config", cfg_file, "--out", out]) == 2
