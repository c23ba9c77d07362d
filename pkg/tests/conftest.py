import numpy as np
import pytest

from anemiabench.ingest import dataset_from_levels
from anemiabench.schema import DatasetSchema, FeatureSpec


@pytest.fixture
def toy_schema():
    return DatasetSchema(
        features=(
            FeatureSpec(
                name="age_band",
                kind="ordinal",
                levels=("young", "mid", "old"),
                reference_level="young",
            ),
            FeatureSpec(
                name="fever",
                kind="binary",
                levels=("no", "yes"),
                reference_level="no",
            ),
            FeatureSpec(
                name="region",
                kind="one_hot",
                levels=("north", "south", "east"),
                reference_level="north",
            ),
        ),
        label_name="outcome",
    )


@pytest.fixture
def toy_dataset(toy_schema):
    columns = {
        "age_band": ["young", "mid", "old", "mid", "young", "old"],
        "fever": ["no", "yes", "yes", "no", "yes", "no"],
        "region": ["north", "south", "east", "south", "north", "east"],
    }
    labels = [0, 1, 1, 0, 1, 0]
    return dataset_from_levels(toy_schema, columns, labels)


def random_encoded_data(rng, n=120, d=6):
    """Mixed ordinal/indicator-style matrix and a correlated label."""
    cols = [rng.integers(0, 4, n).astype(float) for _ in range(d // 2)]
    cols += [rng.integers(0, 2, n).astype(float) for _ in range(d - d // 2)]
    X = np.column_stack(cols)
    w = rng.normal(0, 1.0, d)
    eta = (X - X.mean(axis=0)) @ w
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    if y.min() == y.max():  # ensure both classes
        y[: n // 3] = 1 - y[: n // 3]
    return X, y
