import os
import logging

logger = logging.getLogger(__name__)


class Settings:
    """Runtime settings read from the environment"""

    def __init__(self):
        self.threads = int(os.getenv("GAUSSDIST_THREADS", "1"))
        self.log_level = os.getenv("GAUSSDIST_LOG_LEVEL", "INFO").upper()
        self.max_modes = int(os.getenv("GAUSSDIST_MAX_MODES", "16"))
        self.multistart_count = int(os.getenv("GAUSSDIST_MULTISTART", "32"))
        self.polar_points = int(os.getenv("GAUSSDIST_POLAR_POINTS", "2048"))
        self.gradient_tolerance = float(os.getenv("GAUSSDIST_GRADIENT_TOL", "1e-8"))
        self.fock_tail_tolerance = float(os.getenv("GAUSSDIST_FOCK_TAIL_TOL", "1e-12"))

    @property
    def n_jobs(self) -> int:
        """Worker count handed to joblib; never below one."""
        if self.threads < 1:
            logger.warning(
                f"GAUSSDIST_THREADS={self.threads} is not positive, running serially"
            )
            return 1
        return self.threads

    @property
    def logging_level(self) -> int:
        return getattr(logging, self.log_level, logging.INFO)


# Global settings instance
settings = Settings()
