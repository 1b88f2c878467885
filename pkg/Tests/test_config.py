"""
Tests for configuration loading and environment overrides.
"""
import pytest

from powerdown.config import ConfigError, load_config


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for key in ("POWERDOWN_SEED", "POWERDOWN_U", "POWERDOWN_WORKERS"):
        monkeypatch.delenv(key, raising=False)
    return tmp_path


def test_defaults(workdir):
    config = load_config()
    assert config.SEED == 20240601
    assert config.U == "1/2"
    assert config.IDLE_MODE == "cumulative"
    assert config.MAX_GRID_STEPS == 600
    assert not hasattr(config, "ENV_PREFIX")


def test_local_config_file(workdir):
    (workdir / "config.py").write_text('U = "1/4"\nVERIFY_COUNT = 10\nlowercase = 1\n')
    config = load_config()
    assert config.U == "1/4"
    assert config.VERIFY_COUNT == 10
    assert not hasattr(config, "lowercase")


def test_explicit_config_file(workdir):
    path = workdir / "lab.py"
    path.write_text("WORKERS = 4\n")
    assert load_config(str(path)).WORKERS == 4
    with pytest.raises(ConfigError):
        load_config(str(workdir / "missing.py"))
    broken = workdir / "broken.py"
    broken.write_text("WORKERS = \n")
    with pytest.raises(ConfigError):
        load_config(str(broken))


def test_environment_overrides(workdir, monkeypatch):
    (workdir / "config.py").write_text("SEED = 5\n")
    monkeypatch.setenv("POWERDOWN_SEED", "42")
    monkeypatch.setenv("POWERDOWN_U", "1/3")
    monkeypatch.setenv("POWERDOWN_UNKNOWN", "x")
    config = load_config()
    assert config.SEED == 42
    assert config.U == "1/3"
    assert not hasattr(config, "UNKNOWN")


def test_bad_environment_value_is_ignored(workdir, monkeypatch):
    monkeypatch.setenv("POWERDOWN_WORKERS", "many")
    assert load_config().WORKERS == 1
