"""
Resource endpoints for the workbench MCP server.
"""

import sys
from typing import Any, Dict

from constants import MASK_SCHEMES
from utils import get_fixed_point_exponent, get_group_bits, get_key_bits, get_out_dir


def get_status() -> Dict[str, Any]:
    """Report the active defaults.

    Returns:
        Dict containing the configured defaults
    """
    print("Accessing workbench status resource", file=sys.stderr)
    lines = [
        f"Paillier key size: {get_key_bits()} bits",
        f"Fixed-point exponent: {get_fixed_point_exponent()}",
        f"Alignment group size: {get_group_bits()} bits",
        f"Output directory: {get_out_dir()}",
        f"Horizontal masking schemes: {', '.join(MASK_SCHEMES)}",
    ]
    return {"result": "\n".join(lines)}
