"""
Experiment configuration, execution and reporting.

A config is an INI file with [experiment], [data], [hyperparams] and [hfl]
sections. run_experiment builds the partitions, runs the federation through
the transport, trains the pooled-data oracle with the same hyperparameters
and reports the held-out gap between the two.
"""

import configparser
import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator

import hfl_agg
import vfl_linreg
from alignment import align, apply_alignment, group_prime
from constants import SCHEME_ALIASES
from datasets import (
    DatasetPartition,
    SyntheticSpec,
    classify_partition,
    combine_horizontal,
    combine_vertical,
    generate,
    holdout_split,
    partition_horizontal,
    read_csv,
)
from errors import ConfigError
from oracles import centralized_oracle, mse, r2
from transport import Transcript
from utils import get_fixed_point_exponent, get_out_dir

logger = logging.getLogger(__name__)

MODULE = "harness"


class ExperimentSection(BaseModel):
    mode: Literal["vfl", "hfl"] = "vfl"
    seed: int = 0
    key_bits: Optional[int] = Field(default=None, ge=64)
    group_bits: Optional[int] = Field(default=None, ge=16)
    out_dir: Optional[str] = None


class DataSection(BaseModel):
    source: Literal["synthetic", "csv"] = "synthetic"
    n_samples: int = Field(default=500, ge=0)
    n_features_a: int = Field(default=3, ge=1)
    n_features_b: int = Field(default=2, ge=1)
    true_weights: Optional[List[float]] = None
    noise_sigma: float = Field(default=0.1, ge=0.0)
    n_only_a: int = Field(default=0, ge=0)
    n_only_b: int = Field(default=0, ge=0)
    csv_a: Optional[str] = None
    csv_b: Optional[str] = None
    csv: Optional[str] = None

    @field_validator("true_weights", mode="before")
    @classmethod
    def _split_weights(cls, value):
        if isinstance(value, str):
            return [float(v) for v in value.replace(",", " ").split()] or None
        return value


class HyperparamSection(BaseModel):
    learning_rate: float = Field(default=0.05, ge=0.0)
    reg_lambda: float = Field(default=0.1, ge=0.0)
    max_iters: int = Field(default=200, ge=1)
    loss_tolerance: float = Field(default=1e-9, gt=0.0)
    fixed_point_exponent: int = Field(default_factory=get_fixed_point_exponent)
    divergence_ratio: Optional[float] = Field(default=None, gt=0.0)
    normalize_learning_rate: bool = True


class HflSection(BaseModel):
    clients: int = Field(default=10, ge=1)
    scheme: str = "none"
    partition: Literal["iid", "label-skew"] = "iid"
    mode: Literal["gradient", "fedavg"] = "gradient"
    epochs: int = Field(default=1, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    noise_sigma: float = Field(default=0.0, ge=0.0)

    @field_validator("scheme")
    @classmethod
    def _known_scheme(cls, value: str) -> str:
        scheme = SCHEME_ALIASES.get(str(value).strip().lower())
        if scheme is None:
            raise ValueError(f"unknown mask scheme {value!r}")
        return scheme


class ExperimentConfig(BaseModel):
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    data: DataSection = Field(default_factory=DataSection)
    hyperparams: HyperparamSection = Field(default_factory=HyperparamSection)
    hfl: HflSection = Field(default_factory=HflSection)


SECTIONS = ("experiment", "data", "hyperparams", "hfl")


def _problems(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())


def _validated(model, section: str, **fields):
    """Build a pydantic model from config values, reporting bad values as ConfigError."""
    try:
        return model(**fields)
    except ValidationError as exc:
        raise ConfigError(MODULE, f"[{section}] {_problems(exc)}") from exc


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(MODULE, f"{source}: {exc}") from exc
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(MODULE, f"{source}: unknown section(s) {', '.join(unknown)}")
    raw = {s: {k: v for k, v in parser.items(s) if v != ""} for s in parser.sections()}
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(MODULE, f"{source}: {_problems(exc)}") from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(MODULE, f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, mode: Optional[str] = None,
                    scheme: Optional[str] = None) -> ExperimentConfig:
    """Command-line flags win over the file."""
    data = config.model_dump()
    if seed is not None:
        data["experiment"]["seed"] = seed
    if mode is not None:
        data["experiment"]["mode"] = mode
    if scheme is not None:
        data["hfl"]["scheme"] = scheme
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(MODULE, str(exc)) from exc


@dataclass
class ExperimentReport:
    mode: str
    scheme: str
    v_fed: float
    v_sum: float
    delta_loss: float
    metric_name: str
    r2_fed: float
    r2_sum: float
    rounds: int
    final_loss: float
    bytes_on_wire: int
    bytes_a_b: int
    wall_time: float
    seed: int

    @classmethod
    def build(cls, v_fed: float, v_sum: float, **fields) -> "ExperimentReport":
        return cls(v_fed=v_fed, v_sum=v_sum, delta_loss=abs(v_fed - v_sum), **fields)

    def to_dict(self) -> Dict[str, object]:
        return dataclasses.asdict(self)

    def render_kv(self) -> str:
        return "".join(f"{key}={float(value)!r}\n" if isinstance(value, float) else f"{key}={value}\n"
                       for key, value in self.to_dict().items())

    def render_text(self) -> str:
        lines = [
            f"Experiment ({self.mode}, scheme {self.scheme}, seed {self.seed})",
            f"  V_FED ({self.metric_name}):   {self.v_fed:.10g}",
            f"  V_SUM ({self.metric_name}):   {self.v_sum:.10g}",
            f"  delta loss:       {self.delta_loss:.3e}",
            f"  R2 fed / pooled:  {self.r2_fed:.6f} / {self.r2_sum:.6f}",
            f"  rounds:           {self.rounds} (final training loss {self.final_loss:.10g})",
            f"  bytes on wire:    {self.bytes_on_wire:,} (A<->B {self.bytes_a_b:,})",
            f"  wall time:        {self.wall_time:.2f}s",
        ]
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> ExperimentReport:
    """Read back a key=value report."""
    values: Dict[str, str] = {}
    for line in text.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    types = {f.name: f.type for f in dataclasses.fields(ExperimentReport)}
    missing = [name for name in types if name not in values]
    if missing:
        raise ConfigError(MODULE, f"report is missing {', '.join(missing)}")
    try:
        kwargs = {}
        for name, kind in types.items():
            kwargs[name] = kind(values[name])
    except (KeyError, ValueError) as exc:
        raise ConfigError(MODULE, f"malformed report value: {exc}") from exc
    return ExperimentReport(**kwargs)


def synthetic_spec(config: ExperimentConfig) -> SyntheticSpec:
    data = config.data
    return _validated(
        SyntheticSpec,
        "data",
        n_samples=data.n_samples,
        n_features_a=data.n_features_a,
        n_features_b=data.n_features_b,
        true_weights=data.true_weights,
        noise_sigma=data.noise_sigma,
        seed=config.experiment.seed,
        n_only_a=data.n_only_a,
        n_only_b=data.n_only_b,
    )


def load_vertical_parts(config: ExperimentConfig) -> Tuple[DatasetPartition, DatasetPartition]:
    if config.data.source == "csv":
        if not config.data.csv_a or not config.data.csv_b:
            raise ConfigError(MODULE, "vertical csv experiments need data.csv_a and data.csv_b")
        return read_csv(config.data.csv_a), read_csv(config.data.csv_b)
    return generate(synthetic_spec(config))


def load_pooled(config: ExperimentConfig) -> DatasetPartition:
    if config.data.source == "csv":
        if not config.data.csv:
            raise ConfigError(MODULE, "horizontal csv experiments need data.csv")
        return read_csv(config.data.csv)
    part_a, part_b = generate(synthetic_spec(config))
    common = [i for i in part_a.ids if i in part_b.row_of]
    return combine_vertical(part_a.take([part_a.row_of[i] for i in common]),
                            part_b.take([part_b.row_of[i] for i in common]))


def _check_taxonomy(parts, expected: str) -> None:
    kind = classify_partition(parts)
    if kind != expected:
        raise ConfigError(MODULE, f"{expected} experiment built {kind} partitions")


def _run_vfl(config: ExperimentConfig) -> Tuple[ExperimentReport, Transcript]:
    seed = config.experiment.seed
    hp_cfg = config.hyperparams
    part_a, part_b = load_vertical_parts(config)
    prime = group_prime(config.experiment.group_bits)
    alignment, psi_transcript = align(part_a.ids, part_b.ids, seed=seed, prime=prime)
    part_a, part_b = apply_alignment(part_a, part_b, alignment)
    _check_taxonomy([part_a, part_b], "vertical")

    train_rows, test_rows = holdout_split(part_a.n_samples, seed)
    a_train, b_train = part_a.take(train_rows), part_b.take(train_rows)
    learning_rate = hp_cfg.learning_rate
    if hp_cfg.normalize_learning_rate and a_train.n_samples:
        learning_rate /= a_train.n_samples
    hp = _validated(
        vfl_linreg.Hyperparams,
        "hyperparams",
        learning_rate=learning_rate,
        reg_lambda=hp_cfg.reg_lambda,
        max_iters=hp_cfg.max_iters,
        loss_tolerance=hp_cfg.loss_tolerance,
        fixed_point_exponent=hp_cfg.fixed_point_exponent,
        divergence_ratio=hp_cfg.divergence_ratio,
    )
    trained = vfl_linreg.train(a_train, b_train, hp, seed=seed, key_bits=config.experiment.key_bits)

    test_ids = [part_a.ids[r] for r in test_rows]
    scoring_a = dataclasses.replace(trained.party_a, data_a=part_a)
    scoring_b = dataclasses.replace(trained.party_b, data_b=part_b)
    predictions, predict_transcript = vfl_linreg.run_prediction(test_ids, scoring_a, scoring_b, seed)
    y_test = part_b.labels[test_rows]

    pooled_train = combine_vertical(a_train, b_train)
    pooled_test = combine_vertical(part_a.take(test_rows), part_b.take(test_rows))
    oracle = centralized_oracle(
        pooled_train.features, pooled_train.labels, pooled_test.features, pooled_test.labels,
        learning_rate, hp.reg_lambda, hp.max_iters, hp.loss_tolerance,
        convention="vfl", rounds=len(trained.loss_history),
    )

    transcript = Transcript(seed=seed)
    for part in (psi_transcript, trained.transcript, predict_transcript):
        transcript.extend(part)
    links = transcript.bytes_by_link()
    report = ExperimentReport.build(
        mse(y_test, predictions), oracle.v_sum,
        mode="vfl", scheme="homomorphic", metric_name="MSE",
        r2_fed=r2(y_test, predictions), r2_sum=oracle.r2,
        rounds=len(trained.loss_history), final_loss=trained.loss_history[-1],
        bytes_on_wire=transcript.total_bytes,
        bytes_a_b=links.get(("A", "B"), 0) + links.get(("B", "A"), 0),
        wall_time=0.0, seed=seed,
    )
    return report, transcript


def _run_hfl(config: ExperimentConfig) -> Tuple[ExperimentReport, Transcript]:
    seed = config.experiment.seed
    hp_cfg, hfl_cfg = config.hyperparams, config.hfl
    pooled = load_pooled(config)
    train_rows, test_rows = holdout_split(pooled.n_samples, seed)
    train_data, test_data = pooled.take(train_rows), pooled.take(test_rows)
    parts = partition_horizontal(train_data, hfl_cfg.clients, hfl_cfg.partition, seed)
    if len(parts) >= 2:
        _check_taxonomy(parts, "horizontal")

    cfg = _validated(
        hfl_agg.HflConfig,
        "hfl",
        scheme=hfl_cfg.scheme,
        mode=hfl_cfg.mode,
        learning_rate=hp_cfg.learning_rate,
        reg_lambda=hp_cfg.reg_lambda,
        max_rounds=hp_cfg.max_iters,
        loss_tolerance=hp_cfg.loss_tolerance,
        epochs=hfl_cfg.epochs,
        batch_size=hfl_cfg.batch_size,
        noise_sigma=hfl_cfg.noise_sigma,
        fixed_point_exponent=hp_cfg.fixed_point_exponent,
    )
    result = hfl_agg.train(parts, cfg, seed=seed, key_bits=config.experiment.key_bits)
    predictions = test_data.features @ result.global_model

    pooled_train = combine_horizontal(parts)
    oracle = centralized_oracle(
        pooled_train.features, pooled_train.labels, test_data.features, test_data.labels,
        cfg.learning_rate, cfg.reg_lambda, cfg.max_rounds, cfg.loss_tolerance,
        convention="hfl", rounds=len(result.metrics),
    )
    report = ExperimentReport.build(
        mse(test_data.labels, predictions), oracle.v_sum,
        mode="hfl", scheme=cfg.scheme, metric_name="MSE",
        r2_fed=r2(test_data.labels, predictions), r2_sum=oracle.r2,
        rounds=len(result.metrics), final_loss=result.loss_history[-1],
        bytes_on_wire=result.transcript.total_bytes, bytes_a_b=0,
        wall_time=0.0, seed=seed,
    )
    return report, result.transcript


def run_experiment(config: ExperimentConfig) -> Tuple[ExperimentReport, Transcript]:
    """Run one configured experiment.

    Returns:
        Tuple of (report, transcript of every message sent)
    """
    started = time.perf_counter()
    logger.info("running %s experiment (seed %d)", config.experiment.mode, config.experiment.seed)
    if config.experiment.mode == "vfl":
        report, transcript = _run_vfl(config)
    else:
        report, transcript = _run_hfl(config)
    report.wall_time = time.perf_counter() - started
    logger.info("delta loss %.3e over %d rounds, %d bytes", report.delta_loss, report.rounds, report.bytes_on_wire)
    return report, transcript


def output_dir(config: ExperimentConfig, override: Optional[str] = None) -> str:
    return override or config.experiment.out_dir or get_out_dir()

