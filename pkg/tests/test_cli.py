from pathlib import Path

import pandas as pd
import pytest

from src import cli
from src.errors import ConfigError
from src.models.run_config import load_run_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

FREE = """
MODEL__D=2
MODEL__PHI=[0.0, 0.0]
INITIAL__KIND=diagonal
INITIAL__WEIGHTS=[0.7, 0.3]
EXPERIMENT__SWEEPS=["theorem1"]
EXPERIMENT__EPSILONS=[0.3, 0.1, 0.03]
EXPERIMENT__TIMES=[0.0, 0.5]
EXPERIMENT__MAX_ORDER=1
EXPERIMENT__T_END=0.1
EXPERIMENT__DT=0.01
EXPERIMENT__RECORD_EVERY=5
"""


def _write(tmp_path: Path, text: str, name: str = "run.env") -> Path:
    path = tmp_path / name
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return path


def _main(command: str, config: Path, out: Path, *extra: str) -> int:
    return cli.main([command, "--config", str(config), "--out", str(out), *extra])


def test_env_and_json_configs_share_fingerprint():
    env = load_run_config(CONFIGS / "default.env")
    doc = load_run_config(CONFIGS / "default.json")

    assert env.fingerprint() == doc.fingerprint()
    assert env.model.phi == [1.0, 0.25]
    assert env.experiment.epsilons == [0.3, 0.1, 0.03, 0.01]


def test_fingerprint_ignores_output_dir(tmp_path):
    first = load_run_config(_write(tmp_path, FREE + "OUTPUT_DIR=a", "a.env"))
    second = load_run_config(_write(tmp_path, FREE + "OUTPUT_DIR=b", "b.env"))

    assert first.fingerprint() == second.fingerprint()


def test_missing_config_file_raises(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.env")


def test_missing_config_file_exits_with_config_code(tmp_path):
    assert _main("verify", tmp_path / "absent.env", tmp_path / "out") == cli.EXIT_CONFIG


def test_unknown_key_is_rejected(tmp_path):
    config = _write(tmp_path, FREE + "EXPERIMENT__EPSILON_LIST=[0.1]")

    assert _main("sweep", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_non_hermitian_initial_matrix_is_rejected(tmp_path):
    config = _write(tmp_path, """
MODEL__D=2
MODEL__PHI=[1.0, 0.25]
INITIAL__KIND=matrix
INITIAL__ENTRIES=[[0.5, 0.0], [0.3, 0.0], [0.0, 0.0], [0.5, 0.0]]
""")

    assert _main("verify", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_unnormalized_pure_state_is_rejected(tmp_path):
    config = _write(tmp_path, """
MODEL__D=2
MODEL__PHI=[1.0, 0.0]
INITIAL__KIND=pure
INITIAL__VECTOR=[[1.0, 0.0], [1.0, 0.0]]
""")

    assert _main("evolve", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_sweep_without_epsilons_is_rejected(tmp_path):
    config = _write(tmp_path, """
MODEL__D=2
MODEL__PHI=[1.0, 0.25]
EXPERIMENT__TIMES=[0.1]
""")

    assert _main("sweep", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_decreasing_epsilons_are_required(tmp_path):
    config = _write(tmp_path, FREE.replace("[0.3, 0.1, 0.03]", "[0.1, 0.3]"))

    assert _main("sweep", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_model_beyond_row_cap_exits_with_config_code(tmp_path):
    config = _write(tmp_path, """
MODEL__D=6
MODEL__PHI=[1.0, 0.25, 0.0, 0.0]
INITIAL__KIND=random
""")

    assert _main("verify", config, tmp_path / "out") == cli.EXIT_CONFIG


def test_required_particles_follow_sweep_kinds(tmp_path):
    cfg = load_run_config(_write(tmp_path, FREE.replace('["theorem1"]', '["theorem1", "theorem2"]')
                                 + "EXPERIMENT__FUNCTIONAL_ORDER=2\n"))

    assert cli.required_particles("verify", cfg) == cli.VERIFY_PARTICLES
    assert cli.required_particles("evolve", cfg) == 2
    assert cli.required_particles("sweep", cfg) == 4
    cli.check_config_capacity("sweep", cfg)


def test_free_sweep_reports_exact_distances(tmp_path):
    out = tmp_path / "out"

    code = _main("sweep", _write(tmp_path, FREE), out)

    assert code == cli.EXIT_OK
    records = pd.read_csv(out / "records.csv")
    assert list(records.columns) == ["epsilon", "t", "metric", "value", "tail_floor", "order", "config_hash"]
    assert len(records) == 6
    summary = (out / "summary.txt").read_text()
    assert "exact" in summary
    assert summary.strip().endswith("overall: pass")


def test_free_evolve_writes_trajectory(tmp_path):
    out = tmp_path / "out"

    code = _main("evolve", _write(tmp_path, FREE), out)

    assert code == cli.EXIT_OK
    trajectory = pd.read_csv(out / "trajectory.csv")
    assert len(trajectory) == 3
    assert (trajectory["free_distance"] <= 1e-6).all()
    assert "hartree_norm" not in trajectory.columns


def test_threads_setting_overrides_flag(monkeypatch):
    monkeypatch.setenv("QKINETIC_THREADS", "3")

    assert cli.resolve_threads(1) == 3


def test_threads_flag_used_without_setting(monkeypatch):
    monkeypatch.delenv("QKINETIC_THREADS", raising=False)

    assert cli.resolve_threads(4) == 4
    assert cli.resolve_threads(None) == 1


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["plot", "--config", "x.env"])
