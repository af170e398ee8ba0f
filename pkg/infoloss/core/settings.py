"""
Runtime Settings

Loads numerical defaults and runtime options from environment variables and
provides a unified interface for the rest of the package.
"""

import os
import logging

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric {name}={raw!r}, using {default}")
        return default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


class Settings:
    """
    Central runtime configuration.

    Values come from INFOLOSS_* environment variables; call reload() after
    changing the environment (the CLI does so after loading a .env file).
    """

    def __init__(self):
        """Initialize settings from the environment."""
        self.reload()

    def reload(self) -> "Settings":
        self.log_level = os.getenv("INFOLOSS_LOG_LEVEL", "INFO").upper()

        # Parallelism
        self.workers = max(1, _env_int("INFOLOSS_WORKERS", 1))

        # Quadrature defaults
        self.abs_tol = _env_float("INFOLOSS_ABS_TOL", 1e-4)
        self.rel_tol = _env_float("INFOLOSS_REL_TOL", 1e-8)
        self.max_depth = _env_int("INFOLOSS_MAX_DEPTH", 200)
        self.mass_eps = _env_float("INFOLOSS_MASS_EPS", 1e-9)
        self.singularity_pad = _env_float("INFOLOSS_SINGULARITY_PAD", 1e-10)

        # Validation and sampling
        self.validation_grid = _env_int("INFOLOSS_VALIDATION_GRID", 1024)
        self.mc_chunk = max(1024, _env_int("INFOLOSS_MC_CHUNK", 65536))
        return self

    def log_config(self):
        """Log the effective configuration."""
        logger.info("=" * 60)
        logger.info("infoloss configuration:")
        logger.info(f"  Log level: {self.log_level}")
        logger.info(f"  Workers: {self.workers}")
        logger.info(f"  Quadrature: abs_tol={self.abs_tol} bits, rel_tol={self.rel_tol}, "
                    f"max_depth={self.max_depth}")
        logger.info(f"  Truncation mass: {self.mass_eps}, singularity pad: {self.singularity_pad}")
        logger.info(f"  MC chunk size: {self.mc_chunk}")
        logger.info("=" * 60)


def configure_logging(level: str = "INFO"):
    """Configure root logging; reports go to stdout, logs to stderr."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        force=True
    )


# Global settings instance
settings = Settings()
