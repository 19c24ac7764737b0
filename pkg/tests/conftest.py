"""Shared fixtures: small deterministic keys, a small safe-prime group and toy partitions."""

import numpy as np
import pytest

from alignment import safe_prime
from datasets import DatasetPartition, SyntheticSpec, generate
from he_core import keygen
from vfl_linreg import Hyperparams

TEST_KEY_BITS = 512
TEST_EXPONENT = -16


@pytest.fixture(scope="session")
def keypair():
    return keygen(TEST_KEY_BITS, rng_seed=11)


@pytest.fixture(scope="session")
def other_keypair():
    return keygen(TEST_KEY_BITS, rng_seed=12)


@pytest.fixture(scope="session")
def public_key(keypair):
    return keypair[0]


@pytest.fixture(scope="session")
def private_key(keypair):
    return keypair[1]


@pytest.fixture(scope="session")
def prime():
    return safe_prime(64)


@pytest.fixture
def hp():
    return Hyperparams(learning_rate=0.01, reg_lambda=0.0, max_iters=10, loss_tolerance=1e-9,
                       fixed_point_exponent=TEST_EXPONENT)


@pytest.fixture
def toy_a():
    """Running example: x^A = [[1], [2]]."""
    return DatasetPartition(ids=["p", "q"], features=[[1.0], [2.0]], feature_names=["a0"])


@pytest.fixture
def toy_b():
    """Running example: x^B = [[3], [4]], y = [10, 14]."""
    return DatasetPartition(ids=["p", "q"], features=[[3.0], [4.0]], labels=[10.0, 14.0], feature_names=["b0"])


@pytest.fixture(scope="session")
def linear_parts():
    """Noiseless y = X w on 40 aligned rows, two features at A and one at B."""
    spec = SyntheticSpec(n_samples=40, n_features_a=2, n_features_b=1, true_weights=[2.0, -1.0, 3.0],
                         noise_sigma=0.0, seed=5)
    return generate(spec)


@pytest.fixture(scope="session")
def pooled_data():
    spec = SyntheticSpec(n_samples=200, n_features_a=2, n_features_b=2, noise_sigma=0.1, seed=9)
    part_a, part_b = generate(spec)
    return DatasetPartition(
        ids=part_a.ids,
        features=np.hstack([part_a.features, part_b.features]),
        labels=part_b.labels,
        feature_names=part_a.feature_names + part_b.feature_names,
    )
