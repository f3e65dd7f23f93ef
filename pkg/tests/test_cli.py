import shutil
import subprocess

import pytest
import yaml

from cvarsearch.benchmarks import l0_min_cvar_oracle
from cvarsearch.cli import main

RUN_KEYS = dict(
    benchmark="l0",
    dim=2,
    algorithm="gass_cvar",
    alpha_star=0.8,
    effective_size=4,
    n_candidates=6,
    max_iterations=3,
    replications=2,
    master_seed=5,
    mean_init_lo=-2.0,
    mean_init_hi=2.0,
    var_init=4.0,
    var_box_hi=100.0,
    final_eval_budget=40,
    grad_norm_stop=0.0,
)


def write_config(tmp_path, **overrides):
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump({**RUN_KEYS, **overrides}, sort_keys=False))
    return path


def test_benchmark_point(capsys):
    assert main(["benchmark", "l0", "1", "1"]) == 0
    out = capsys.readouterr().out
    assert "deterministic_loss=2.0" in out
    assert "noise_scale=1.0" in out


def test_benchmark_with_oracle(capsys):
    assert main(["benchmark", "l0", "0", "0", "--alpha", "0.9"]) == 0
    assert "cvar_oracle=" in capsys.readouterr().out


def test_benchmark_oracle_only_for_l0(capsys):
    assert main(["benchmark", "levy", "0", "0", "--alpha", "0.9"]) == 2
    assert "error:" in capsys.readouterr().err


def test_benchmark_dimension_error(capsys):
    assert main(["benchmark", "powell", "1", "2", "3"]) == 2
    assert "dim" in capsys.readouterr().err


def test_benchmark_unknown_id_rejected_by_parser():
    with pytest.raises(SystemExit) as err:
        main(["benchmark", "sphere", "0"])
    assert err.value.code == 2


def test_oracle(capsys):
    assert main(["oracle", "l0", "--alpha", "0.95", "--dim", "2"]) == 0
    out = capsys.readouterr().out
    want = l0_min_cvar_oracle(2, 0.95)[1]
    assert f"value={want!r}" in out


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_run_writes_outputs(tmp_path, capsys):
    config = write_config(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out_dir)]) == 0
    stdout = capsys.readouterr().out
    assert "reference_value=" in stdout
    assert stdout.count("rep=") == RUN_KEYS["replications"]
    for name in ("iterations.csv", "curve.csv", "alpha.csv", "summary.json"):
        assert (out_dir / name).exists()


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_run_replication_override(tmp_path, capsys):
    config = write_config(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out_dir), "--replications", "1"]) == 0
    assert capsys.readouterr().out.count("rep=") == 1


def test_run_bad_config(tmp_path, capsys):
    config = write_config(tmp_path, alpha_star=2.0)
    assert main(["run", str(config)]) == 2
    assert "alpha_star" in capsys.readouterr().err


def test_run_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_unknown_key(tmp_path, capsys):
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump({**RUN_KEYS, "spices": 11}))
    assert main(["run", str(path)]) == 2
    assert "'spices'" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_reference_command(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["reference", str(config), "--out", str(tmp_path / "cache")]) == 0
    out = capsys.readouterr().out
    want = l0_min_cvar_oracle(RUN_KEYS["dim"], RUN_KEYS["alpha_star"])[1]
    assert f"reference_value={want!r}" in out


@pytest.mark.skipif(shutil.which("cvarsearch") is None,
                    reason="console script not on PATH")
def test_console_script_entry():
    proc = subprocess.run(
        ["cvarsearch", "benchmark", "l0", "0.5"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "deterministic_loss=0.25" in proc.stdout
