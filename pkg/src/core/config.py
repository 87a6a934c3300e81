"""
Configuration management for lepspec.

Centralizes environment variable handling and the numerical tolerances
shared by every analysis module.
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _float_env(name: str, default: float) -> float:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        return float("nan")


def _int_env(name: str, default: int) -> int:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        return -1


# Logging
LOG_LEVEL = os.environ.get("LEPSPEC_LOG_LEVEL", "WARNING").strip().upper()

# Model validation tolerances (relative)
HERMITIAN_RTOL = _float_env("LEPSPEC_HERMITIAN_RTOL", 1e-12)
PSD_RTOL = _float_env("LEPSPEC_PSD_RTOL", 1e-10)

# Eigenstructure detection
CLUSTER_TOL = _float_env("LEPSPEC_CLUSTER_TOL", 1e-8)
RANK_SAFETY = _float_env("LEPSPEC_RANK_SAFETY", 1e3)
REAL_TOL = _float_env("LEPSPEC_REAL_TOL", 1e-9)

# Propagation and higher-order coherence
EXPM_COND_LIMIT = _float_env("LEPSPEC_EXPM_COND_LIMIT", 1e8)
WICK_MAX_ORDER = _int_env("LEPSPEC_WICK_MAX_ORDER", 8)

# Fock-space oracle
FOCK_MEMORY_BUDGET_MB = _float_env("LEPSPEC_FOCK_MEMORY_MB", 700.0)
DEFAULT_CUTOFF = _int_env("LEPSPEC_DEFAULT_CUTOFF", 8)
CUTOFF_LEAKAGE_WARN = 1e-6

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def tolerance_settings() -> dict:
    """Snapshot of the active tolerances, recorded in every run manifest."""
    return {
        "hermitian_rtol": HERMITIAN_RTOL,
        "psd_rtol": PSD_RTOL,
        "cluster_tol": CLUSTER_TOL,
        "rank_safety": RANK_SAFETY,
        "real_tol": REAL_TOL,
        "expm_cond_limit": EXPM_COND_LIMIT,
        "wick_max_order": WICK_MAX_ORDER,
        "fock_memory_budget_mb": FOCK_MEMORY_BUDGET_MB,
    }


# Validate environment overrides
def validate_config():
    """Validate that every configured setting is usable."""
    invalid = []
    if LOG_LEVEL not in _LOG_LEVELS:
        invalid.append("LEPSPEC_LOG_LEVEL")
    for name, value in (
        ("LEPSPEC_HERMITIAN_RTOL", HERMITIAN_RTOL),
        ("LEPSPEC_PSD_RTOL", PSD_RTOL),
        ("LEPSPEC_CLUSTER_TOL", CLUSTER_TOL),
        ("LEPSPEC_RANK_SAFETY", RANK_SAFETY),
        ("LEPSPEC_REAL_TOL", REAL_TOL),
        ("LEPSPEC_EXPM_COND_LIMIT", EXPM_COND_LIMIT),
        ("LEPSPEC_FOCK_MEMORY_MB", FOCK_MEMORY_BUDGET_MB),
    ):
        if not value > 0:
            invalid.append(name)
    if WICK_MAX_ORDER < 1:
        invalid.append("LEPSPEC_WICK_MAX_ORDER")
    if DEFAULT_CUTOFF < 1:
        invalid.append("LEPSPEC_DEFAULT_CUTOFF")

    if invalid:
        raise ValueError(f"Invalid environment settings: {', '.join(invalid)}")
