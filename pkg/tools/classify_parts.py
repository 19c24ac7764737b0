"""
Tool for naming the federation type of a set of CSV parts.
"""

import os
import sys
from typing import Any, Dict, List

# Import from parent directory
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from datasets import classify_partition, read_csv
from errors import FedBenchError


async def classify_parts(paths: List[str]) -> Dict[str, Any]:
    """Classify CSV parts as horizontal, vertical, transfer or mixed.

    Args:
        paths: Two or more CSV files with an id column

    Returns:
        Dict containing the federation type or error
    """
    try:
        parts = [read_csv(path) for path in paths]
        kind = classify_partition(parts)
    except FedBenchError as e:
        return e.to_dict()
    except OSError as e:
        return {"error": f"Cannot read parts: {e}"}
    return {"result": kind}
