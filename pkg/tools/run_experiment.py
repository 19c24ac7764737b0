"""
Tool for running a configured experiment.
"""

import os
import sys
from typing import Any, Dict, Optional

# Import from parent directory
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from errors import FedBenchError
from experiment import apply_overrides, load_config, output_dir, run_experiment


async def run_experiment_tool(
    config_path: str,
    seed: Optional[int] = None,
    mode: Optional[str] = None,
    scheme: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """Run a federated experiment and compare it with the pooled-data oracle.

    Args:
        config_path: Experiment config file
        seed: Optional seed override
        mode: Optional mode override ("vfl" or "hfl")
        scheme: Optional horizontal masking scheme override
        out_dir: Where to write report.txt and transcript.txt

    Returns:
        Dict containing the formatted report or error
    """
    print(f"Running experiment {config_path}", file=sys.stderr)
    try:
        config = apply_overrides(load_config(config_path), seed=seed, mode=mode, scheme=scheme)
        report, transcript = run_experiment(config)
        out = output_dir(config, out_dir)
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.render_kv())
        transcript.dump(os.path.join(out, "transcript.txt"))
    except FedBenchError as e:
        return e.to_dict()
    return {"result": report.render_text()}
