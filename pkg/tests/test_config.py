"""Tests for bdf3.config — defaults, YAML and env layering, fail-fast validation."""

from pathlib import Path

import pytest

from bdf3 import config
from bdf3.config import Settings


# ── fixture ──────────────────────────────────────────────────────────────────


@pytest.fixture(autouse=True)
def fresh(monkeypatch: pytest.MonkeyPatch) -> None:
    """Drop the cached settings and any BDF3_* variables from the environment."""
    monkeypatch.setattr(config, "_settings", None)
    for env in (*config._ENV_KEYS.values(), "BDF3_CONFIG"):
        monkeypatch.delenv(env, raising=False)


def _yaml(tmp_path: Path, text: str, monkeypatch: pytest.MonkeyPatch) -> None:
    path = tmp_path / "bdf3.yaml"
    path.write_text(text, encoding="utf-8")
    monkeypatch.setenv("BDF3_CONFIG", str(path))


# ════════════════════════════════════════════════════════════════════════════════
# loading
# ════════════════════════════════════════════════════════════════════════════════


class TestLoad:
    def test_defaults(self):
        assert config.load() == Settings()

    def test_cached(self, monkeypatch: pytest.MonkeyPatch):
        first = config.load()
        monkeypatch.setenv("BDF3_GRID", "64")
        assert config.load() is first

    def test_env_override(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("BDF3_GRID", "64")
        monkeypatch.setenv("BDF3_EPSILON", "0.05")
        monkeypatch.setenv("BDF3_LOG_LEVEL", "info")
        settings = config.load()
        assert (settings.grid, settings.epsilon, settings.log_level) == (64, 0.05, "INFO")

    def test_yaml(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        _yaml(tmp_path, "horizon: 2.0\nseed: 11\n", monkeypatch)
        settings = config.load()
        assert (settings.horizon, settings.seed, settings.grid) == (2.0, 11, 32)

    def test_env_beats_yaml(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        _yaml(tmp_path, "seed: 11\n", monkeypatch)
        monkeypatch.setenv("BDF3_SEED", "3")
        assert config.load().seed == 3

    def test_empty_yaml(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        _yaml(tmp_path, "", monkeypatch)
        assert config.load() == Settings()


class TestGet:
    def test_before_load(self):
        with pytest.raises(RuntimeError):
            config.get()

    def test_after_load(self):
        settings = config.load()
        assert config.get() is settings


# ════════════════════════════════════════════════════════════════════════════════
# validation
# ════════════════════════════════════════════════════════════════════════════════


class TestValidation:
    def test_defaults_are_valid(self):
        assert config.validate(Settings()) == []

    @pytest.mark.parametrize(
        "field, value",
        [("horizon", 0.0), ("epsilon", -1.0), ("grid", 4), ("grid", 48), ("seed", -1), ("log_level", "LOUD")],
    )
    def test_each_problem_reported(self, field, value):
        errors = config.validate(Settings(**{field: value}))
        assert len(errors) == 1
        assert errors[0].startswith(f"{field}=")

    def test_bad_grid_exits(self, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture):
        monkeypatch.setenv("BDF3_GRID", "48")
        with pytest.raises(SystemExit) as exc:
            config.load()
        assert exc.value.code == 2
        assert "grid=48 must be a power of two" in capsys.readouterr().err

    def test_non_numeric_value(self, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture):
        monkeypatch.setenv("BDF3_HORIZON", "soon")
        with pytest.raises(SystemExit):
            config.load()
        assert "horizon='soon' is not a valid value" in capsys.readouterr().err

    def test_fractional_seed(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        _yaml(tmp_path, "seed: 1.5\n", monkeypatch)
        with pytest.raises(SystemExit):
            config.load()

    def test_unknown_key(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture):
        _yaml(tmp_path, "grid: 16\nvault_dir: /tmp\n", monkeypatch)
        with pytest.raises(SystemExit):
            config.load()
        assert "unknown keys: vault_dir" in capsys.readouterr().err

    def test_yaml_must_be_a_mapping(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture):
        _yaml(tmp_path, "- 1\n- 2\n", monkeypatch)
        with pytest.raises(SystemExit):
            config.load()
        assert "must hold a mapping" in capsys.readouterr().err

    def test_missing_yaml(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("BDF3_CONFIG", str(tmp_path / "absent.yaml"))
        with pytest.raises(SystemExit):
            config.load()

    def test_failed_load_caches_nothing(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("BDF3_GRID", "3")
        with pytest.raises(SystemExit):
            config.load()
        assert config._settings is None
