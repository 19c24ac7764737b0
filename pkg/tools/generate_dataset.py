"""
Tool for generating synthetic vertical datasets.
"""

import os
import sys
from typing import Any, Dict, List, Optional

# Import from parent directory
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from datasets import SyntheticSpec, generate, write_csv
from errors import FedBenchError
from utils import get_out_dir


async def generate_dataset(
    n_samples: int = 500,
    n_features_a: int = 3,
    n_features_b: int = 2,
    noise_sigma: float = 0.1,
    seed: int = 0,
    true_weights: Optional[List[float]] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """Generate a synthetic vertical regression dataset and write it as CSV.

    Args:
        n_samples: Number of samples shared by both parties
        n_features_a: Features held by party A
        n_features_b: Features held by party B (which also holds the labels)
        noise_sigma: Standard deviation of the label noise
        seed: Generator seed
        true_weights: Optional weights, A's features first
        out_dir: Output directory (default FEDBENCH_OUT_DIR)

    Returns:
        Dict containing the written paths or error
    """
    print(f"Generating dataset n={n_samples} seed={seed}", file=sys.stderr)
    try:
        spec = SyntheticSpec(n_samples=n_samples, n_features_a=n_features_a, n_features_b=n_features_b,
                             noise_sigma=noise_sigma, seed=seed, true_weights=true_weights)
        part_a, part_b = generate(spec)
        out = out_dir or get_out_dir()
        os.makedirs(out, exist_ok=True)
        path_a, path_b = os.path.join(out, "a.csv"), os.path.join(out, "b.csv")
        write_csv(part_a, path_a)
        write_csv(part_b, path_b)
    except FedBenchError as e:
        return e.to_dict()
    except ValueError as e:
        return {"error": f"Invalid dataset parameters: {e}"}

    return {"result": f"Party A: {path_a} ({part_a.n_samples} rows, {part_a.n_features} features)\n"
                      f"Party B: {path_b} ({part_b.n_samples} rows, {part_b.n_features} features plus labels)\n"
                      f"True weights: {', '.join(f'{w:g}' for w in spec.weights())}"}
