"""
Versioned JSON checkpoints.

Floats are written with `repr`, the shortest decimal that parses back to the
same double, so parameters round-trip bit for bit.
"""

import dataclasses
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from nsotree.errors import SchemaError
from nsotree.network import NSOTreeParams
from nsotree.survival import Standardization
from nsotree.typing import ActivationMode

FORMAT = "nsotree-checkpoint"
VERSION = 1


@dataclasses.dataclass(frozen=True, eq=False)
class Checkpoint:
    params: NSOTreeParams

    activation: ActivationMode = "relu"
    """
    Activation used when scoring with these parameters.
    """

    feature_names: Tuple[str, ...] = ()
    """
    Covariates the model consumes, in order.
    """

    standardization: Optional[Standardization] = None
    """
    Statistics raw covariates must be standardized with before scoring.
    """

    train_path: Optional[str] = None
    """
    Training data the Breslow baseline is refitted from at evaluation.
    """

    config: Dict[str, Any] = dataclasses.field(default_factory=dict)
    """
    Resolved training configuration, for the record.
    """


def to_dict(checkpoint: Checkpoint) -> Dict[str, Any]:
    params = checkpoint.params
    stats = checkpoint.standardization
    return {
        "format": FORMAT,
        "version": VERSION,
        "input_dim": params.input_dim,
        "depth": params.depth,
        "hidden_dim": params.hidden_dim,
        "activation": checkpoint.activation,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "head_weights": params.head_weights.tolist(),
        "head_bias": params.head_bias,
        "feature_names": list(checkpoint.feature_names),
        "standardization": None
        if stats is None
        else {"mean": stats.mean.tolist(), "std": stats.std.tolist()},
        "train_path": checkpoint.train_path,
        "config": checkpoint.config,
    }


def from_dict(data: Dict[str, Any]) -> Checkpoint:
    if data.get("format") != FORMAT:
        raise SchemaError("Not an nsotree checkpoint")
    if data.get("version") != VERSION:
        raise SchemaError(f"Unsupported checkpoint version {data.get('version')!r}")

    try:
        d, dh = int(data["input_dim"]), int(data["hidden_dim"])
        weights = tuple(np.array(w, dtype=np.float64).reshape(dh, -1) for w in data["weights"])
        params = NSOTreeParams(
            weights=weights,
            biases=tuple(np.array(b, dtype=np.float64) for b in data["biases"]),
            head_weights=np.array(data["head_weights"], dtype=np.float64),
            head_bias=float(data["head_bias"]),
            input_dim=d,
            hidden_dim=dh,
        )
        if params.depth != int(data["depth"]):
            raise SchemaError("Checkpoint depth does not match its layers")

        stats = data.get("standardization")
        standardization = (
            None
            if stats is None
            else Standardization(
                mean=np.array(stats["mean"], dtype=np.float64),
                std=np.array(stats["std"], dtype=np.float64),
            )
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f"Malformed checkpoint: {e}") from e

    activation = data.get("activation", "relu")
    if activation not in ("relu", "softplus"):
        raise SchemaError(f"Unknown activation {activation!r}")

    return Checkpoint(
        params=params,
        activation=activation,
        feature_names=tuple(data.get("feature_names", ())),
        standardization=standardization,
        train_path=data.get("train_path"),
        config=dict(data.get("config", {})),
    )


def dumps(checkpoint: Checkpoint) -> str:
    return json.dumps(to_dict(checkpoint), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> Checkpoint:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Checkpoint is not valid JSON: {e}", line=e.lineno) from e

    return from_dict(data)


def save(checkpoint: Checkpoint, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(checkpoint), encoding="utf-8")


def load(path: Union[str, Path]) -> Checkpoint:
    return loads(Path(path).read_text(encoding="utf-8"))
