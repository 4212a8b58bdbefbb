import logging
import os

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        raise RuntimeError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise RuntimeError(f"{name} must be >= {minimum}, got {value}")
    return value


DEFAULT_SEED = _int_env("PARABOLIC_SEED", 20240611, 0)
if DEFAULT_SEED >= 2**64:
    raise RuntimeError("PARABOLIC_SEED must fit in 64 bits")

DEFAULT_JOBS = _int_env("PARABOLIC_JOBS", 1, 1)

LOG_LEVEL = os.getenv("PARABOLIC_LOG_LEVEL", "WARNING").upper()
if not isinstance(logging.getLevelName(LOG_LEVEL), int):
    raise RuntimeError(f"PARABOLIC_LOG_LEVEL {LOG_LEVEL!r} is not a logging level")

Report_Dir = os.getenv("PARABOLIC_REPORT_DIR") or os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "reports"
)
if not os.path.exists(Report_Dir):
    os.makedirs(Report_Dir)
