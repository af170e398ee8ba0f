"""
Unit tests for runtime settings and logging setup
"""
import logging
import os

import pytest

from infoloss.core.settings import LOG_FORMAT, Settings, configure_logging


class TestSettingsDefaults:

    def test_defaults_without_environment(self, monkeypatch):
        for name in list(os.environ):
            if name.startswith("INFOLOSS_"):
                monkeypatch.delenv(name)
        s = Settings()
        assert s.log_level == "INFO"
        assert s.workers == 1
        assert s.abs_tol == 1e-4
        assert s.rel_tol == 1e-8
        assert s.max_depth == 200
        assert s.mass_eps == 1e-9
        assert s.singularity_pad == 1e-10
        assert s.validation_grid == 1024
        assert s.mc_chunk == 65536

    def test_conftest_log_level_is_debug(self):
        assert Settings().log_level == "DEBUG"


class TestSettingsFromEnvironment:

    def test_values_are_read(self, monkeypatch):
        monkeypatch.setenv("INFOLOSS_WORKERS", "4")
        monkeypatch.setenv("INFOLOSS_ABS_TOL", "1e-6")
        monkeypatch.setenv("INFOLOSS_MAX_DEPTH", "50")
        monkeypatch.setenv("INFOLOSS_LOG_LEVEL", "warning")
        s = Settings()
        assert s.workers == 4
        assert s.abs_tol == 1e-6
        assert s.max_depth == 50
        assert s.log_level == "WARNING"

    def test_reload_picks_up_changes(self, monkeypatch):
        s = Settings()
        monkeypatch.setenv("INFOLOSS_MASS_EPS", "1e-7")
        assert s.reload() is s
        assert s.mass_eps == 1e-7

    @pytest.mark.parametrize("name,raw,attr,expected", [
        ("INFOLOSS_ABS_TOL", "tight", "abs_tol", 1e-4),
        ("INFOLOSS_WORKERS", "many", "workers", 1),
        ("INFOLOSS_REL_TOL", "", "rel_tol", 1e-8),
    ])
    def test_bad_values_fall_back_to_defaults(self, monkeypatch, name, raw, attr, expected):
        monkeypatch.setenv(name, raw)
        assert getattr(Settings(), attr) == expected

    def test_floors(self, monkeypatch):
        monkeypatch.setenv("INFOLOSS_WORKERS", "0")
        monkeypatch.setenv("INFOLOSS_MC_CHUNK", "10")
        s = Settings()
        assert s.workers == 1
        assert s.mc_chunk == 1024

    def test_log_config(self, caplog):
        Settings().log_config()
        assert "infoloss configuration:" in caplog.text
        assert "abs_tol=" in caplog.text
        assert "Log level:" in caplog.text


class TestConfigureLogging:

    def test_sets_root_level_and_format(self):
        root = logging.getLogger()
        saved_level, saved_handlers = root.level, list(root.handlers)
        try:
            configure_logging("warning")
            assert root.level == logging.WARNING
            assert any(
                h.formatter is not None and h.formatter._fmt == LOG_FORMAT for h in root.handlers
            )
        finally:
            root.handlers[:] = saved_handlers
            root.setLevel(saved_level)

    def test_unknown_level_means_info(self):
        root = logging.getLogger()
        saved_level, saved_handlers = root.level, list(root.handlers)
        try:
            configure_logging("chatty")
            assert root.level == logging.INFO
        finally:
            root.handlers[:] = saved_handlers
            root.setLevel(saved_level)
