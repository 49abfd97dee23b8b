import logging

import pytest

from stratexp.config import DEFAULT_CONFIG_PATH, Settings, configure_logging, load_config
from stratexp.errors import ConfigError


def test_repository_config_matches_defaults():
    assert DEFAULT_CONFIG_PATH.is_file()
    settings = load_config()
    assert settings.report.decimals == 4
    assert settings.simulation.seed == 42
    assert settings.simulation.replications == 100000
    assert settings.simulation.enumeration_budget == 10_000_000
    assert settings.allocation.min_per_stratum == 1
    assert settings.logging.file is None


def test_file_values_override_defaults(tmp_path):
    path = tmp_path / "custom.yml"
    path.write_text("simulation:\n  seed: 7\n  workers: 3\nreport:\n  full_precision: true\n")
    settings = load_config(path)
    assert settings.simulation.seed == 7
    assert settings.simulation.workers == 3
    assert settings.simulation.replications == Settings().simulation.replications
    assert settings.report.full_precision is True


def test_unknown_keys_are_ignored(tmp_path):
    path = tmp_path / "extra.yml"
    path.write_text("simulation:\n  colour: blue\nplotting:\n  dpi: 300\n")
    assert load_config(path) == Settings()


@pytest.mark.parametrize("text", [
    "simulation:\n  seed: forty-two\n",
    "simulation:\n  seed: 1.5\n",
    "report:\n  full_precision: 1\n",
    "simulation: [1, 2]\n",
    "simulation:\n  workers: 0\n",
    "- just\n- a list\n",
])
def test_bad_values_raise(tmp_path, text):
    path = tmp_path / "bad.yml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_explicit_file_raises(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yml")


def test_configure_logging_with_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    settings = load_config().logging
    settings = type(settings)(level="INFO", format=settings.format, file=str(log_file))
    configure_logging(settings, "debug")
    logging.getLogger("stratexp.test").debug("hello")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert log_file.is_file()
    assert "hello" in log_file.read_text()
    configure_logging(Settings().logging, "WARNING")


def test_unknown_log_level_raises():
    with pytest.raises(ConfigError):
        configure_logging(Settings().logging, "chatty")


def test_undecodable_config_raises(tmp_path):
    path = tmp_path / "latin1.yml"
    path.write_bytes(b"simulation:\n  seed: 7 # caf\xe9\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_byte_order_mark_config(tmp_path):
    path = tmp_path / "bom.yml"
    path.write_bytes(b"\xef\xbb\xbfsimulation:\n  seed: 7\n")
    assert load_config(path).simulation.seed == 7
