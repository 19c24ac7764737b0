"""Tests for the MCP tool functions."""

import asyncio

from tools import classify_parts, generate_dataset, get_status, run_experiment_tool

HFL_CONFIG = """
[experiment]
mode = hfl

[data]
n_samples = 60
n_features_a = 1
n_features_b = 1

[hyperparams]
max_iters = 3
fixed_point_exponent = -16

[hfl]
clients = 2
"""


def test_generate_then_classify(tmp_path):
    generated = asyncio.run(generate_dataset(n_samples=20, n_features_a=2, n_features_b=1, out_dir=str(tmp_path)))
    assert "Party A" in generated["result"]
    classified = asyncio.run(classify_parts([str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]))
    assert classified == {"result": "vertical"}


def test_generate_rejects_bad_weights(tmp_path):
    result = asyncio.run(generate_dataset(n_features_a=1, n_features_b=1, true_weights=[1.0], out_dir=str(tmp_path)))
    assert "error" in result


def test_classify_needs_two_parts(tmp_path):
    asyncio.run(generate_dataset(n_samples=5, out_dir=str(tmp_path)))
    assert "error" in asyncio.run(classify_parts([str(tmp_path / "a.csv")]))


def test_run_experiment(tmp_path):
    config = tmp_path / "hfl.cfg"
    config.write_text(HFL_CONFIG)
    result = asyncio.run(run_experiment_tool(str(config), seed=4, out_dir=str(tmp_path / "out")))
    assert "V_FED" in result["result"]
    assert (tmp_path / "out" / "report.txt").exists()


def test_run_experiment_reports_config_errors(tmp_path):
    result = asyncio.run(run_experiment_tool(str(tmp_path / "missing.cfg")))
    assert result["error"].startswith("harness:")


def test_status_lists_schemes():
    assert "pairwise" in get_status()["result"]
