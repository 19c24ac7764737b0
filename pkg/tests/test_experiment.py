"""Tests for experiment configs, end-to-end runs and reports."""

import pytest

from datasets import partition_horizontal
from errors import ConfigError
from experiment import (
    ExperimentConfig,
    ExperimentReport,
    _check_taxonomy,
    apply_overrides,
    load_config,
    parse_config,
    parse_report,
    run_experiment,
    synthetic_spec,
)

VFL_CONFIG = """
[experiment]
mode = vfl
seed = 3
key_bits = 256
group_bits = 64

[data]
n_samples = 60
n_features_a = 2
n_features_b = 1
true_weights = 2, -1, 3
noise_sigma = 0
n_only_a = 5
n_only_b = 4

[hyperparams]
learning_rate = 0.5
reg_lambda = 0
max_iters = 30
loss_tolerance = 1e-12
fixed_point_exponent = -12
"""

HFL_CONFIG = """
[experiment]
mode = hfl
seed = 1

[data]
n_samples = 100
n_features_a = 2
n_features_b = 2
noise_sigma = 0.1

[hyperparams]
learning_rate = 0.1
reg_lambda = 0.01
max_iters = 20
fixed_point_exponent = -16

[hfl]
clients = 1
scheme = none
"""


class TestParseConfig:
    def test_sections(self):
        config = parse_config(VFL_CONFIG)
        assert config.experiment.mode == "vfl"
        assert config.data.true_weights == [2.0, -1.0, 3.0]
        assert config.hyperparams.fixed_point_exponent == -12

    def test_defaults(self):
        config = parse_config("")
        assert config.experiment.mode == "vfl"
        assert config.hfl.clients == 10

    def test_scheme_alias(self):
        assert parse_config("[hfl]\nscheme = he\n").hfl.scheme == "homomorphic"

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[models]\nsize = 3\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="max_iters"):
            parse_config("[hyperparams]\nmax_iters = 0\n")

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError):
            parse_config("[hfl]\nscheme = rot13\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.cfg"))

    def test_weight_count_mismatch(self):
        config = parse_config("[data]\nn_features_a = 2\nn_features_b = 1\ntrue_weights = 1, 2\n")
        with pytest.raises(ConfigError, match="true_weights"):
            synthetic_spec(config)

    def test_overrides(self):
        config = apply_overrides(parse_config(VFL_CONFIG), seed=9, mode="hfl", scheme="dp")
        assert (config.experiment.seed, config.experiment.mode, config.hfl.scheme) == (9, "hfl", "gaussian-noise")


class TestReport:
    def test_delta_is_absolute_gap(self):
        report = ExperimentReport.build(
            1.5, 2.0, mode="hfl", scheme="none", metric_name="MSE", r2_fed=0.9, r2_sum=0.95,
            rounds=3, final_loss=0.1, bytes_on_wire=10, bytes_a_b=0, wall_time=0.5, seed=0,
        )
        assert report.delta_loss == 0.5

    def test_key_value_text_reads_back(self):
        report = ExperimentReport.build(
            0.1, 0.30000000000000004, mode="vfl", scheme="homomorphic", metric_name="MSE", r2_fed=0.5,
            r2_sum=0.25, rounds=7, final_loss=1e-9, bytes_on_wire=1234, bytes_a_b=99, wall_time=1.25, seed=4,
        )
        assert parse_report(report.render_kv()) == report

    def test_incomplete_report(self):
        with pytest.raises(ConfigError, match="missing"):
            parse_report("mode=vfl\n")


class TestRunExperiment:
    def test_vertical_run_is_lossless(self):
        report, transcript = run_experiment(parse_config(VFL_CONFIG))
        assert report.mode == "vfl"
        assert report.delta_loss < 1e-6
        assert report.delta_loss == abs(report.v_fed - report.v_sum)
        assert report.bytes_a_b > 0
        assert report.bytes_on_wire == transcript.total_bytes
        kinds = {e.kind for e in transcript.envelopes}
        assert {"psi-blinded-batch", "vfl-masked-grad", "vfl-predict-share"} <= kinds

    def test_single_client_matches_pooled(self):
        report, _ = run_experiment(parse_config(HFL_CONFIG))
        assert report.mode == "hfl" and report.bytes_a_b == 0
        assert report.delta_loss < 1e-12

    def test_pairwise_federation(self):
        config = apply_overrides(parse_config(HFL_CONFIG.replace("clients = 1", "clients = 4")), scheme="pairwise")
        report, _ = run_experiment(config)
        assert report.scheme == "pairwise"
        assert report.delta_loss < 1e-9

    def test_same_seed_same_transcript(self):
        config = parse_config(HFL_CONFIG.replace("clients = 1", "clients = 3"))
        first = run_experiment(config)[1]
        second = run_experiment(config)[1]
        assert first.to_bytes() == second.to_bytes()


def test_taxonomy_mismatch(pooled_data):
    with pytest.raises(ConfigError, match="horizontal"):
        _check_taxonomy(partition_horizontal(pooled_data, 2), "vertical")


def test_default_config_is_vertical():
    assert ExperimentConfig().experiment.mode == "vfl"


@pytest.mark.slow
def test_acceptance_vertical_config():
    report, _ = run_experiment(load_config("experiments/vfl_acceptance.cfg"))
    assert report.delta_loss < 1e-4
    assert report.r2_fed > 0.9


def test_fedavg_stays_close_to_pooled_model():
    config = parse_config(HFL_CONFIG.replace("clients = 1", "clients = 10\nmode = fedavg\nepochs = 5")
                          .replace("n_samples = 100", "n_samples = 500")
                          .replace("max_iters = 20", "max_iters = 100"))
    report, _ = run_experiment(config)
    assert report.delta_loss < 0.05
