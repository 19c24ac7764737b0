"""
Datasets for the workbench: party partitions, synthetic generation,
horizontal/vertical splitting and the partition taxonomy check.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from constants import HOLDOUT_FRACTION
from errors import InvalidDatasetError, InvalidParameterError

logger = logging.getLogger(__name__)

MODULE = "harness"


@dataclass
class DatasetPartition:
    """One party's (sample ids, feature matrix, optional labels)."""

    ids: List[str]
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.ids = [str(i) for i in self.ids]
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            features = features.reshape(len(self.ids), -1) if self.ids else np.zeros((0, len(self.feature_names)))
        if features.shape[0] != len(self.ids):
            raise InvalidDatasetError(MODULE, f"{features.shape[0]} feature rows for {len(self.ids)} ids")
        self.features = features
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.features.shape[1])]
        self.feature_names = list(self.feature_names)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
            if len(self.labels) != len(self.ids):
                raise InvalidDatasetError(MODULE, f"{len(self.labels)} labels for {len(self.ids)} rows")
        if len(self.feature_names) != self.features.shape[1]:
            raise InvalidDatasetError(
                MODULE, f"{len(self.feature_names)} feature names for {self.features.shape[1]} columns"
            )
        if any(not i for i in self.ids):
            raise InvalidDatasetError(MODULE, "sample ids must be non-empty")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidDatasetError(MODULE, "sample ids must be unique within a party")

    @property
    def n_samples(self) -> int:
        return len(self.ids)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @cached_property
    def row_of(self) -> Dict[str, int]:
        return {sample_id: row for row, sample_id in enumerate(self.ids)}

    def take(self, rows: Sequence[int]) -> "DatasetPartition":
        rows = list(rows)
        return DatasetPartition(
            ids=[self.ids[r] for r in rows],
            features=self.features[rows] if rows else np.zeros((0, self.n_features)),
            labels=None if self.labels is None else self.labels[rows],
            feature_names=self.feature_names,
        )


class SyntheticSpec(BaseModel):
    """Parameters of a synthetic vertical regression task."""

    n_samples: int = Field(ge=0)
    n_features_a: int = Field(ge=1)
    n_features_b: int = Field(ge=1)
    true_weights: Optional[List[float]] = None
    noise_sigma: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    n_only_a: int = Field(default=0, ge=0)
    n_only_b: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_weights(self):
        if self.true_weights is not None and len(self.true_weights) != self.n_features_a + self.n_features_b:
            raise ValueError("true_weights length must equal n_features_a + n_features_b")
        return self

    def weights(self) -> np.ndarray:
        if self.true_weights is not None:
            return np.asarray(self.true_weights, dtype=float)
        rng = np.random.default_rng([self.seed, 1])
        return np.round(rng.uniform(-3.0, 3.0, self.n_features_a + self.n_features_b), 3)


def _standardize(matrix: np.ndarray) -> np.ndarray:
    if matrix.shape[0] < 2:
        return matrix
    std = matrix.std(axis=0)
    std[std == 0] = 1.0
    return (matrix - matrix.mean(axis=0)) / std


def generate(spec: SyntheticSpec) -> Tuple[DatasetPartition, DatasetPartition]:
    """Generate party A (features only) and party B (features and labels).

    The first n_samples ids are common to both parties; n_only_a and
    n_only_b extra rows exist on one side only.

    Returns:
        Tuple of (part A, part B)
    """
    n_a, n_b = spec.n_features_a, spec.n_features_b
    total = spec.n_samples + spec.n_only_a + spec.n_only_b
    rng = np.random.default_rng([spec.seed, 0])
    x = _standardize(rng.standard_normal((total, n_a + n_b)))
    y = x @ spec.weights() + spec.noise_sigma * rng.standard_normal(total)

    common = [f"id-{i:06d}" for i in range(spec.n_samples)]
    only_a = [f"a-only-{i:06d}" for i in range(spec.n_only_a)]
    only_b = [f"b-only-{i:06d}" for i in range(spec.n_only_b)]
    rows_a = list(range(spec.n_samples + spec.n_only_a))
    rows_b = list(range(spec.n_samples)) + list(range(spec.n_samples + spec.n_only_a, total))

    part_a = DatasetPartition(
        ids=common + only_a,
        features=x[rows_a][:, :n_a],
        feature_names=[f"a{j}" for j in range(n_a)],
    )
    part_b = DatasetPartition(
        ids=common + only_b,
        features=x[rows_b][:, n_a:],
        labels=y[rows_b],
        feature_names=[f"b{j}" for j in range(n_b)],
    )
    logger.debug("generated %d common rows, %d A-only, %d B-only", spec.n_samples, spec.n_only_a, spec.n_only_b)
    return part_a, part_b


def combine_vertical(part_a: DatasetPartition, part_b: DatasetPartition) -> DatasetPartition:
    """Pool two aligned vertical parts into one labelled dataset (A columns first)."""
    if part_a.ids != part_b.ids:
        raise InvalidDatasetError(MODULE, "vertical parts must be aligned to the same id order before pooling")
    labels = part_b.labels if part_b.has_labels else part_a.labels
    return DatasetPartition(
        ids=part_a.ids,
        features=np.hstack([part_a.features, part_b.features]),
        labels=labels,
        feature_names=part_a.feature_names + part_b.feature_names,
    )


def combine_horizontal(parts: Sequence[DatasetPartition]) -> DatasetPartition:
    if not parts:
        raise InvalidDatasetError(MODULE, "nothing to pool")
    with_labels = all(p.has_labels for p in parts)
    return DatasetPartition(
        ids=[i for p in parts for i in p.ids],
        features=np.vstack([p.features for p in parts]),
        labels=np.concatenate([p.labels for p in parts]) if with_labels else None,
        feature_names=parts[0].feature_names,
    )


def partition_horizontal(data: DatasetPartition, k: int, scheme: str = "iid", seed: int = 0) -> List[DatasetPartition]:
    """Split rows into k parts sharing one feature schema.

    Args:
        data: Dataset to split
        k: Number of parts
        scheme: "iid" (shuffled equal chunks) or "label-skew" (chunks of the label-sorted rows)
        seed: Shuffle seed for the iid scheme
    """
    if k < 1:
        raise InvalidParameterError(MODULE, f"k must be >= 1, got {k}")
    if k > data.n_samples:
        raise InvalidDatasetError(MODULE, f"cannot split {data.n_samples} rows into {k} non-empty parts")
    if k == 1:
        return [data.take(range(data.n_samples))]
    if scheme == "iid":
        order = np.random.default_rng(seed).permutation(data.n_samples)
    elif scheme == "label-skew":
        if not data.has_labels:
            raise InvalidDatasetError(MODULE, "label-skew split needs labels")
        order = np.argsort(data.labels, kind="stable")
    else:
        raise InvalidParameterError(MODULE, f"unknown horizontal scheme {scheme!r}")
    return [data.take(chunk.tolist()) for chunk in np.array_split(order, k)]


def partition_vertical(data: DatasetPartition, feature_split: Sequence[int]) -> Tuple[DatasetPartition, DatasetPartition]:
    """Split columns: the indexed features go to A (no labels), the rest to B with labels."""
    split = sorted(set(int(j) for j in feature_split))
    if any(j < 0 or j >= data.n_features for j in split):
        raise InvalidDatasetError(MODULE, f"feature split {split} out of range for {data.n_features} features")
    rest = [j for j in range(data.n_features) if j not in split]
    if not split or not rest:
        raise InvalidDatasetError(MODULE, "vertical split must leave features on both sides")
    part_a = DatasetPartition(
        ids=data.ids,
        features=data.features[:, split],
        feature_names=[data.feature_names[j] for j in split],
    )
    part_b = DatasetPartition(
        ids=data.ids,
        features=data.features[:, rest],
        labels=data.labels,
        feature_names=[data.feature_names[j] for j in rest],
    )
    return part_a, part_b


def classify_partition(parts: Sequence[DatasetPartition]) -> str:
    """Name the federation type of a set of parts.

    Returns:
        "horizontal" (shared schema, disjoint ids), "vertical" (shared ids,
        disjoint schema), "transfer" (both disjoint) or "mixed"
    """
    if len(parts) < 2:
        raise InvalidParameterError(MODULE, "classification needs at least two parts")
    pairs = [(a, b) for i, a in enumerate(parts) for b in parts[i + 1:]]
    same_schema = all(a.feature_names == b.feature_names for a, b in pairs)
    disjoint_schema = all(not set(a.feature_names) & set(b.feature_names) for a, b in pairs)
    same_ids = all(set(a.ids) == set(b.ids) for a, b in pairs)
    disjoint_ids = all(not set(a.ids) & set(b.ids) for a, b in pairs)

    if same_schema and disjoint_ids:
        return "horizontal"
    if disjoint_schema and same_ids:
        return "vertical"
    if disjoint_schema and disjoint_ids:
        return "transfer"
    return "mixed"


def holdout_split(n_samples: int, seed: int, fraction: float = HOLDOUT_FRACTION) -> Tuple[List[int], List[int]]:
    """Row indices (train, test) with `fraction` of the rows held out."""
    order = np.random.default_rng([seed, 2]).permutation(n_samples)
    n_test = int(round(n_samples * fraction))
    return sorted(order[n_test:].tolist()), sorted(order[:n_test].tolist())


def write_csv(part: DatasetPartition, path: str) -> None:
    frame = pd.DataFrame(part.features, columns=part.feature_names)
    frame.insert(0, "id", part.ids)
    if part.has_labels:
        frame["label"] = part.labels
    frame.to_csv(path, index=False, float_format="%.17g")


def read_csv(path: str) -> DatasetPartition:
    """Load a partition written by write_csv.

    Raises:
        InvalidDatasetError: The file is unreadable, not CSV, lacks the id
            column or holds non-numeric features or labels
    """
    try:
        frame = pd.read_csv(path, dtype={"id": str})
    except (OSError, ValueError) as exc:
        raise InvalidDatasetError(MODULE, f"cannot read {path}: {exc}") from exc
    if frame.columns.empty or frame.columns[0] != "id":
        raise InvalidDatasetError(MODULE, f"{path}: first column must be 'id'")
    ids = frame.pop("id").tolist()
    try:
        labels = frame.pop("label").to_numpy(dtype=float) if "label" in frame.columns else None
        features = frame.to_numpy(dtype=float)
    except ValueError as exc:
        raise InvalidDatasetError(MODULE, f"{path}: non-numeric value ({exc})") from exc
    return DatasetPartition(
        ids=ids,
        features=features,
        labels=labels,
        feature_names=list(frame.columns),
    )
