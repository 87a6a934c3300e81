"""Tests for environment-driven settings."""

import pytest

from src.core import config


def test_defaults_are_valid():
    """Test that the shipped defaults pass validation."""
    config.validate_config()


def test_invalid_tolerance_is_reported(monkeypatch):
    """Test that a non-positive tolerance is named in the error."""
    monkeypatch.setattr(config, "CLUSTER_TOL", -1.0)
    with pytest.raises(ValueError, match="LEPSPEC_CLUSTER_TOL"):
        config.validate_config()


def test_unparseable_values_become_invalid(monkeypatch):
    """Test that garbage in the environment does not silently fall back."""
    monkeypatch.setenv("LEPSPEC_REAL_TOL", "not-a-number")
    monkeypatch.setenv("LEPSPEC_DEFAULT_CUTOFF", "six")
    assert not config._float_env("LEPSPEC_REAL_TOL", 1e-9) > 0
    assert config._int_env("LEPSPEC_DEFAULT_CUTOFF", 6) < 1


def test_unknown_log_level(monkeypatch):
    monkeypatch.setattr(config, "LOG_LEVEL", "CHATTY")
    with pytest.raises(ValueError, match="LEPSPEC_LOG_LEVEL"):
        config.validate_config()


def test_tolerance_snapshot_lists_every_tolerance():
    settings = config.tolerance_settings()
    assert settings["cluster_tol"] == config.CLUSTER_TOL
    assert settings["fock_memory_budget_mb"] == config.FOCK_MEMORY_BUDGET_MB
    assert set(settings) >= {"hermitian_rtol", "psd_rtol", "real_tol", "expm_cond_limit", "wick_max_order"}
