"""Tests for the fedbench command line."""

import os

import pytest

from cli import main
from constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_SAFETY_REFUSAL
from datasets import write_csv
from experiment import parse_report
from transport import Transcript

SMALL_HFL = """
[experiment]
mode = hfl
seed = 2

[data]
n_samples = 80
n_features_a = 2
n_features_b = 1

[hyperparams]
learning_rate = 0.1
max_iters = 5
fixed_point_exponent = -16

[hfl]
clients = 2
"""

TINY_VFL = """
[experiment]
mode = vfl
key_bits = 256
group_bits = 64

[data]
n_samples = 2
n_features_a = 3
n_features_b = 1
"""


@pytest.fixture
def write_config(tmp_path):
    def write(text: str, name: str = "experiment.cfg") -> str:
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


class TestRun:
    def test_writes_report_and_transcript(self, tmp_path, write_config, capsys):
        out = tmp_path / "runs"
        code = main(["run", "--config", write_config(SMALL_HFL), "--out", str(out)])
        assert code == EXIT_OK
        report = parse_report((out / "report.txt").read_text())
        assert report.mode == "hfl" and report.rounds == 5
        assert len(Transcript.load(str(out / "transcript.txt"))) > 0
        assert "V_FED" in capsys.readouterr().out

    def test_scheme_flag_overrides_config(self, tmp_path, write_config):
        out = tmp_path / "runs"
        assert main(["run", "--config", write_config(SMALL_HFL), "--scheme", "pairwise", "--out", str(out)]) == EXIT_OK
        assert parse_report((out / "report.txt").read_text()).scheme == "pairwise"

    def test_safety_refusal(self, tmp_path, write_config):
        code = main(["run", "--config", write_config(TINY_VFL), "--out", str(tmp_path)])
        assert code == EXIT_SAFETY_REFUSAL
        assert not os.path.exists(tmp_path / "report.txt")

    def test_config_error(self, tmp_path, write_config):
        code = main(["run", "--config", write_config("[models]\nx = 1\n"), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG_ERROR

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG_ERROR


class TestDataVerbs:
    def test_generate(self, tmp_path, write_config):
        assert main(["generate", "--config", write_config(SMALL_HFL), "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "a.csv").exists() and (tmp_path / "b.csv").exists()

    def test_partition_then_classify(self, tmp_path, write_config, pooled_data, capsys):
        pooled = tmp_path / "pooled.csv"
        write_csv(pooled_data, str(pooled))
        parts_dir = tmp_path / "parts"
        config = write_config(SMALL_HFL)
        assert main(["partition", "--config", config, "--input", str(pooled), "--parts", "3",
                     "--out", str(parts_dir)]) == EXIT_OK
        capsys.readouterr()
        paths = sorted(str(p) for p in parts_dir.glob("client-*.csv"))
        assert len(paths) == 3
        assert main(["classify", *paths]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "horizontal"

    def test_vertical_partition(self, tmp_path, pooled_data, capsys):
        pooled = tmp_path / "pooled.csv"
        write_csv(pooled_data, str(pooled))
        out = tmp_path / "vertical"
        assert main(["partition", "--mode", "vfl", "--input", str(pooled), "--split", "0,1",
                     "--out", str(out)]) == EXIT_OK
        capsys.readouterr()
        assert main(["classify", str(out / "a.csv"), str(out / "b.csv")]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "vertical"

    def test_vertical_partition_needs_split(self, tmp_path, pooled_data):
        pooled = tmp_path / "pooled.csv"
        write_csv(pooled_data, str(pooled))
        assert main(["partition", "--mode", "vfl", "--input", str(pooled), "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR

    def test_partition_missing_input(self, tmp_path):
        code = main(["partition", "--input", str(tmp_path / "absent.csv"), "--parts", "2", "--out", str(tmp_path)])
        assert code == EXIT_CONFIG_ERROR

    def test_classify_malformed_csv(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,x0,label\nu1,1.5,2.0\nu2,abc,3.0\n")
        assert main(["classify", str(bad), str(bad)]) == EXIT_CONFIG_ERROR

    def test_generate_with_mismatched_weights(self, tmp_path, write_config):
        config = write_config(SMALL_HFL.replace("n_features_b = 1", "n_features_b = 1\ntrue_weights = 1.0, 2.0"))
        assert main(["generate", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR


def test_report_verb(tmp_path, write_config, capsys):
    out = tmp_path / "runs"
    main(["run", "--config", write_config(SMALL_HFL), "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out / "report.txt")]) == EXIT_OK
    assert "delta loss" in capsys.readouterr().out
