"""
Utility functions for the federated learning workbench.
"""

import hashlib
import logging
import os
import random
import sys
from typing import Any, Optional, Union

from constants import (
    DEFAULT_FIXED_POINT_EXPONENT,
    DEFAULT_GROUP_BITS,
    DEFAULT_KEY_BITS,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OUT_DIR,
)

logger = logging.getLogger(__name__)

SeedLike = Union[int, str, random.Random, None]


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("%s=%r is not an integer, using default %d", name, raw, default)
        return default


def get_key_bits() -> int:
    """Get the Paillier key size from FEDBENCH_KEY_BITS.

    Returns:
        int: Key size in bits, 2048 when unset
    """
    return _env_int("FEDBENCH_KEY_BITS", DEFAULT_KEY_BITS)


def get_fixed_point_exponent() -> int:
    """Get the fixed-point exponent from FEDBENCH_FIXED_POINT_EXPONENT."""
    return _env_int("FEDBENCH_FIXED_POINT_EXPONENT", DEFAULT_FIXED_POINT_EXPONENT)


def get_group_bits() -> int:
    """Get the PSI group size from FEDBENCH_GROUP_BITS."""
    return _env_int("FEDBENCH_GROUP_BITS", DEFAULT_GROUP_BITS)


def get_out_dir() -> str:
    return os.getenv("FEDBENCH_OUT_DIR") or DEFAULT_OUT_DIR


def configure_logging(level: Optional[str] = None) -> None:
    """Send workbench diagnostics to stderr.

    stdout stays reserved for command output and the MCP stdio channel.

    Args:
        level: Log level name; FEDBENCH_LOG_LEVEL or INFO when omitted
    """
    level_name = (level or os.getenv("FEDBENCH_LOG_LEVEL") or DEFAULT_LOG_LEVEL).upper()
    root = logging.getLogger()
    if not any(getattr(h, "_fedbench", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
        handler._fedbench = True
        root.addHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))


def derive_seed(seed: Any, *labels: Any) -> int:
    """Derive an independent 64-bit seed for a labelled sub-stream.

    The same (seed, labels) always gives the same value, independent of
    PYTHONHASHSEED.
    """
    material = "/".join(str(part) for part in (seed, *labels)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def make_rng(seed: SeedLike) -> random.Random:
    """Turn a seed, a label string or an existing generator into a generator.

    None gives an OS-entropy generator.
    """
    if isinstance(seed, random.Random):
        return seed
    if seed is None:
        return random.SystemRandom()
    return random.Random(derive_seed(seed))

