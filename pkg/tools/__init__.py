"""
Tool functions for the workbench MCP server.
"""

from .generate_dataset import generate_dataset
from .classify_parts import classify_parts
from .run_experiment import run_experiment_tool
from .resources import get_status

__all__ = [
    'generate_dataset',
    'classify_parts',
    'run_experiment_tool',
    'get_status',
]
