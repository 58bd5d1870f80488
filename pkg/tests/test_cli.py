import json
import subprocess
import sys

import numpy as np
import pytest

from choicebo import cli
from choicebo.domain import ConfigError, NumericError

FAST_FIT = {
    "vi_steps": 120,
    "vi_mc_samples": 2,
    "ess_burnin": 60,
    "ess_samples": 120,
    "ess_thin": 1,
}


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_generate_data_roundtrip(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", {"n_options": 30, "n_queries": 6})
    out = tmp_path / "run"
    rc = cli.main(["generate-data", "--config", cfg, "--seed", "1", "--out", str(out)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_queries"] == 6
    assert (out / "dataset.json").exists()
    assert (out / "figures" / "objectives.png").exists()

    # the emitted config reproduces the dataset bit for bit
    out2 = tmp_path / "rerun"
    rc = cli.main(["generate-data", "--config", str(out / "config.json"), "--out", str(out2)])
    assert rc == 0
    assert (out2 / "dataset.json").read_bytes() == (out / "dataset.json").read_bytes()


def test_defaults_need_no_config_file(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["generate-data", "--seed", "0", "--out", str(out)])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["n_options"] == 200


def test_seed_and_out_are_mandatory(tmp_path, capsys):
    assert cli.main(["generate-data", "--out", str(tmp_path / "x")]) == 2
    assert "seed" in capsys.readouterr().err
    assert cli.main(["generate-data", "--seed", "0"]) == 2
    assert "--out" in capsys.readouterr().err


def test_config_error_exit_codes(tmp_path, capsys):
    bad = write_config(tmp_path / "bad.json", {"generator": "mystery"})
    rc = cli.main(["generate-data", "--config", bad, "--seed", "0", "--out", str(tmp_path / "a")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err
    unknown = write_config(tmp_path / "unk.json", {"bogus": 1})
    rc = cli.main(["generate-data", "--config", unknown, "--seed", "0",
                   "--out", str(tmp_path / "b")])
    assert rc == 2


def test_io_error_exit_codes(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", {"n_options": 30, "n_queries": 6})
    out = tmp_path / "run"
    assert cli.main(["generate-data", "--config", cfg, "--seed", "1", "--out", str(out)]) == 0
    rc = cli.main(["generate-data", "--config", cfg, "--seed", "1", "--out", str(out)])
    assert rc == 4
    assert "io error" in capsys.readouterr().err
    rc = cli.main(["generate-data", "--config", cfg, "--seed", "1", "--out", str(out), "--force"])
    assert rc == 0

    missing = write_config(
        tmp_path / "fe.json",
        {"train_files": [str(tmp_path / "nope.json")], "test_file": str(tmp_path / "nope2.json")},
    )
    rc = cli.main(["fit-eval", "--config", missing, "--seed", "0", "--out", str(tmp_path / "fe")])
    assert rc == 4


def test_exception_to_exit_code_mapping(tmp_path, monkeypatch, capsys):
    def raising(exc):
        def runner(*args, **kwargs):
            raise exc

        return runner

    cases = [
        (ConfigError("boom"), 2),
        (ValueError("boom"), 2),
        (NumericError("boom"), 3),
        (np.linalg.LinAlgError("boom"), 3),
        (FileNotFoundError("boom"), 4),
    ]
    for exc, expected in cases:
        monkeypatch.setitem(cli._RUNNERS, "bo-run", raising(exc))
        rc = cli.main(["bo-run", "--seed", "0", "--out", str(tmp_path / "x")])
        assert rc == expected, exc
    capsys.readouterr()


def test_paper_scale_flag_reaches_runner(tmp_path, monkeypatch):
    seen = {}

    def runner(config, out, seed, force, paper_scale):
        seen.update(seed=seed, force=force, paper_scale=paper_scale)
        return {}

    monkeypatch.setitem(cli._RUNNERS, "bo-run", runner)
    cli.main(["bo-run", "--seed", "7", "--out", str(tmp_path / "x"), "--paper-scale", "--force"])
    assert seen == {"seed": 7, "force": True, "paper_scale": True}


def test_seed_and_scale_come_from_emitted_config(tmp_path, monkeypatch):
    seen = {}

    def runner(config, out, seed, force, paper_scale):
        seen.update(seed=seed, paper_scale=paper_scale)
        return {}

    cfg = write_config(
        tmp_path / "cfg.json",
        {"command": "bo-run", "seed": 9, "paper_scale": True, "parameters": {"budget": 1}},
    )
    monkeypatch.setitem(cli._RUNNERS, "bo-run", runner)
    assert cli.main(["bo-run", "--config", cfg, "--out", str(tmp_path / "x")]) == 0
    assert seen == {"seed": 9, "paper_scale": True}
    # explicit flags override the file
    assert cli.main(["bo-run", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "y")]) == 0
    assert seen["seed"] == 1


def test_bo_run_through_cli(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        {"budget": 1, "reps": 1, "fit": FAST_FIT, "acq": {"n_sobol": 32, "refine_steps": 2}},
    )
    out = tmp_path / "run"
    rc = cli.main(["bo-run", "--config", cfg, "--seed", "0", "--out", str(out)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["final_median"]) == {"choice_gp", "sobol"}
    assert (out / "choice_gp.csv").exists() and (out / "sobol.csv").exists()


def test_select_dim_through_cli(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "generator": "toy-1d", "n_options": 25, "n_queries": 8, "test_queries": 10,
            "ne_max": 2, "reps": 1, "fit": FAST_FIT,
        },
    )
    out = tmp_path / "run"
    rc = cli.main(["select-dim", "--config", cfg, "--seed", "0", "--out", str(out)])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["modal_dimension"] in (1, 2)
    assert (out / "dimension_table.csv").exists()


def test_serve_rejects_bad_bind(capsys):
    assert cli.main(["serve", "--bind", "nonsense"]) == 2
    assert "HOST:PORT" in capsys.readouterr().err


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["frobnicate"])
    assert excinfo.value.code == 2


def test_module_invocation(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "choicebo", "generate-data", "--seed", "2",
         "--out", str(tmp_path / "run")],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "run" / "dataset.json").exists()
    payload = json.loads(result.stdout)
    assert payload["generator"] == "toy"
