import json
from pathlib import Path

import numpy as np
from pytest import mark, raises

from nsotree import checkpoint
from nsotree.checkpoint import Checkpoint
from nsotree.errors import SchemaError
from nsotree.network import init, risk_scores
from nsotree.survival import Standardization


def make_checkpoint() -> Checkpoint:
    params = init(3, 4, hidden_dim=2, seed=11)
    # values whose shortest decimal form is long
    params = params.from_vector(params.to_vector() / 3.0)
    return Checkpoint(
        params=params,
        feature_names=("age", "grade=a", "grade=b"),
        standardization=Standardization(
            mean=np.array([50.1, 0.3, 0.7]), std=np.array([9.9, 0.1 / 3, 0.2])
        ),
        train_path="data/train.csv",
        config={"depth": 4, "lam": 1e-4},
    )


def test_round_trip_is_exact(tmp_path: Path) -> None:
    original = make_checkpoint()
    path = tmp_path / "checkpoint.json"
    checkpoint.save(original, path)
    loaded = checkpoint.load(path)

    np.testing.assert_array_equal(loaded.params.to_vector(), original.params.to_vector())
    assert loaded.params.depth == 4
    assert loaded.params.hidden_dim == 2
    assert loaded.activation == "relu"
    assert loaded.feature_names == original.feature_names
    assert loaded.standardization is not None
    np.testing.assert_array_equal(loaded.standardization.std, [9.9, 0.1 / 3, 0.2])
    assert loaded.train_path == "data/train.csv"
    assert loaded.config == {"depth": 4, "lam": 1e-4}

    x = np.random.default_rng(0).normal(size=(20, 3))
    np.testing.assert_array_equal(
        risk_scores(loaded.params, x), risk_scores(original.params, x)
    )


def test_dumps_is_deterministic() -> None:
    assert checkpoint.dumps(make_checkpoint()) == checkpoint.dumps(make_checkpoint())


def test_without_standardization() -> None:
    original = Checkpoint(params=init(2, 1))
    loaded = checkpoint.loads(checkpoint.dumps(original))

    assert loaded.standardization is None
    assert loaded.train_path is None


@mark.parametrize(
    "patch",
    [
        {"format": "something-else"},
        {"version": 2},
        {"activation": "tanh"},
        {"depth": 7},
        {"hidden_dim": "two"},
    ],
)
def test_rejects_bad_fields(patch: dict) -> None:
    data = json.loads(checkpoint.dumps(make_checkpoint()))
    data.update(patch)

    with raises(SchemaError):
        checkpoint.loads(json.dumps(data))


def test_rejects_missing_fields() -> None:
    data = json.loads(checkpoint.dumps(make_checkpoint()))
    del data["head_weights"]

    with raises(SchemaError):
        checkpoint.loads(json.dumps(data))


def test_malformed_json_reports_line() -> None:
    text = checkpoint.dumps(make_checkpoint()).replace('"depth": 4,', '"depth": 4,,', 1)

    with raises(SchemaError) as e:
        checkpoint.loads(text)
    assert e.value.line is not None and e.value.line > 1
