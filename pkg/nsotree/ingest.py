import configparser
import dataclasses
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from nsotree.errors import NoEventsError, SchemaError
from nsotree.survival import Standardization, SurvivalDataset
from nsotree.typing import ColumnRole

logger = logging.getLogger(__name__)

ROLES = ("numeric", "categorical", "duration", "event", "ignore")
DURATION_COLUMN = "time"
EVENT_COLUMN = "event"


@dataclasses.dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: ColumnRole

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise SchemaError(f"Column {self.name!r} has unknown role {self.role!r}")


def validate_schema(schema: Sequence[ColumnSpec]) -> None:
    roles = [c.role for c in schema]
    if roles.count("duration") != 1 or roles.count("event") != 1:
        raise SchemaError("A schema needs exactly one duration and one event column")

    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("Column names in a schema must be unique")


def load_schema(path: Union[str, Path]) -> List[ColumnSpec]:
    """
    Read a schema from an INI file with a `[columns]` section mapping each
    column name to its role:

    .. code-block:: ini

        [columns]
        age = numeric
        grade = categorical
        duration = duration
        death = event
    """

    parser = configparser.ConfigParser()
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    if not parser.read(path, encoding="utf-8"):
        raise SchemaError(f"Cannot read schema file {path}")
    if not parser.has_section("columns"):
        raise SchemaError(f"{path} has no [columns] section")

    schema = [ColumnSpec(name, role.strip()) for name, role in parser.items("columns")]  # type: ignore[arg-type]
    validate_schema(schema)
    return schema


def default_schema(columns: Sequence[str]) -> List[ColumnSpec]:
    """
    Schema of the files `save_csv` writes: `time` and `event` plus numeric
    covariates.
    """

    schema: List[ColumnSpec] = []
    for name in columns:
        if name == DURATION_COLUMN:
            schema.append(ColumnSpec(name, "duration"))
        elif name == EVENT_COLUMN:
            schema.append(ColumnSpec(name, "event"))
        else:
            schema.append(ColumnSpec(name, "numeric"))

    validate_schema(schema)
    return schema


def _parse_reals(values: pd.Series, column: str) -> np.ndarray:
    bad = pd.to_numeric(values, errors="coerce").isna()
    if bad.any():
        row = int(values.index[bad.to_numpy()][0])
        raise SchemaError(
            f"Column {column!r} has non-numeric value {values[row]!r}", line=row + 2
        )

    # float() parses decimals exactly, unlike the fast CSV float path
    return np.array([float(v) for v in values], dtype=np.float64)


def load_csv(
    path: Union[str, Path], schema: Optional[Sequence[ColumnSpec]] = None
) -> SurvivalDataset:
    """
    Read a comma-separated file with a header row into a dataset.

    Numeric columns become covariates as they are, categorical columns are
    one-hot expanded with categories in order of first appearance, and rows
    with any missing value are dropped.

    :param path: UTF-8 CSV file.
    :param schema: Role of every column. Defaults to `default_schema` of the
        header.
    """

    try:
        frame = pd.read_csv(path, dtype=str, encoding="utf-8", skip_blank_lines=False)
    except pd.errors.ParserError as e:
        raise SchemaError(f"Malformed CSV file {path}: {e}") from e

    header = [str(c) for c in frame.columns]
    if schema is None:
        schema = default_schema(header)
    validate_schema(schema)

    names = [c.name for c in schema]
    unknown = [c for c in header if c not in names]
    missing = [n for n in names if n not in header]
    if unknown:
        raise SchemaError(f"Columns not in the schema: {', '.join(unknown)}")
    if missing:
        raise SchemaError(f"Schema columns missing from the file: {', '.join(missing)}")

    used = [c.name for c in schema if c.role != "ignore"]
    complete = frame[used].notna().all(axis=1)
    dropped = int((~complete).sum())
    if dropped:
        logger.warning("Dropped %d of %d rows with missing values", dropped, len(frame))
    frame = frame[complete]

    features: List[np.ndarray] = []
    feature_names: List[str] = []
    categories: Dict[str, Tuple[str, ...]] = {}
    time = np.zeros(0)
    event = np.zeros(0, dtype=bool)

    for spec in schema:
        values = frame[spec.name]
        if spec.role == "numeric":
            features.append(_parse_reals(values, spec.name))
            feature_names.append(spec.name)
        elif spec.role == "categorical":
            levels = tuple(str(v) for v in pd.unique(values))
            categories[spec.name] = levels
            for level in levels:
                features.append((values == level).to_numpy(dtype=np.float64))
                feature_names.append(f"{spec.name}={level}")
        elif spec.role == "duration":
            time = _parse_reals(values, spec.name)
            if np.any(time < 0):
                row = int(values.index[np.argmax(time < 0)])
                raise SchemaError("Negative duration", line=row + 2)
        elif spec.role == "event":
            event_values = _parse_reals(values, spec.name)
            nonbinary = ~np.isin(event_values, (0.0, 1.0))
            if nonbinary.any():
                row = int(values.index[np.argmax(nonbinary)])
                raise SchemaError(
                    f"Event value {values[row]!r} is not 0 or 1", line=row + 2
                )
            event = event_values == 1.0

    if not features:
        raise SchemaError("The schema selects no covariates")
    if len(frame) == 0:
        raise SchemaError(f"{path} has no complete rows")

    return SurvivalDataset(
        x=np.column_stack(features),
        time=time,
        event=event,
        feature_names=tuple(feature_names),
        categories=categories,
    )


def save_csv(dataset: SurvivalDataset, path: Union[str, Path]) -> None:
    """
    Write a dataset in the layout `default_schema` reads, decimals with 17
    significant digits.
    """

    frame = pd.DataFrame(dataset.x, columns=list(dataset.feature_names))
    frame[DURATION_COLUMN] = dataset.time
    frame[EVENT_COLUMN] = dataset.event.astype(np.int64)
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8", lineterminator="\n")


def standardize(
    train: SurvivalDataset, others: Sequence[SurvivalDataset] = ()
) -> List[SurvivalDataset]:
    """
    Standardize every dataset with the training set's per-feature mean and
    standard deviation. Constant training columns are dropped everywhere.

    Returns the training set followed by `others`, all transformed.
    """

    if len(train) == 0:
        raise ValueError("The training set is empty")
    for dataset in (train, *others):
        if dataset.standardization is not None:
            raise ValueError("The dataset is already standardized")
        if dataset.feature_names != train.feature_names:
            raise ValueError("All datasets must share the training set's features")

    mean = train.x.mean(axis=0)
    std = train.x.std(axis=0)

    keep = std > 0
    if not keep.any():
        raise ValueError("Every feature is constant on the training set")
    if not keep.all():
        dropped = [n for n, k in zip(train.feature_names, keep) if not k]
        logger.warning("Dropping constant features: %s", ", ".join(dropped))

    stats = Standardization(mean=mean[keep], std=std[keep])
    names = tuple(n for n, k in zip(train.feature_names, keep) if k)
    return [apply_standardization(dataset, stats, names) for dataset in (train, *others)]


def apply_standardization(
    dataset: SurvivalDataset, stats: Standardization, feature_names: Sequence[str]
) -> SurvivalDataset:
    """
    Select `feature_names` from a raw dataset and standardize them with
    previously fitted statistics.
    """

    if dataset.standardization is not None:
        raise ValueError("The dataset is already standardized")

    index = {name: i for i, name in enumerate(dataset.feature_names)}
    missing = [n for n in feature_names if n not in index]
    if missing:
        raise SchemaError(f"Features missing from the dataset: {', '.join(missing)}")

    columns = [index[n] for n in feature_names]
    return dataclasses.replace(
        dataset,
        x=(dataset.x[:, columns] - stats.mean) / stats.std,
        feature_names=tuple(feature_names),
        standardization=stats,
    )


def align_features(dataset: SurvivalDataset, feature_names: Sequence[str]) -> SurvivalDataset:
    """
    Reorder raw covariates to `feature_names`, the features a model was
    trained on. One-hot levels this file never shows become zero columns;
    columns the model does not use are dropped.
    """

    if dataset.standardization is not None:
        raise ValueError("Align features before standardizing")
    if not feature_names:
        raise SchemaError("No features to align to")

    index = {name: i for i, name in enumerate(dataset.feature_names)}
    columns = []
    for name in feature_names:
        if name in index:
            columns.append(dataset.x[:, index[name]])
        elif name.partition("=")[0] in dataset.categories:
            columns.append(np.zeros(len(dataset)))
        else:
            raise SchemaError(f"Feature {name!r} is missing from the dataset")

    unused = [n for n in dataset.feature_names if n not in set(feature_names)]
    if unused:
        logger.info("Ignoring features the model does not use: %s", ", ".join(unused))

    return dataclasses.replace(
        dataset, x=np.column_stack(columns), feature_names=tuple(feature_names)
    )


def split(
    dataset: SurvivalDataset, fractions: Sequence[float], seed: int = 0
) -> List[SurvivalDataset]:
    """
    Shuffle and partition a dataset. Every part must keep at least one event.
    """

    fractions = [float(f) for f in fractions]
    if not fractions or any(f <= 0 for f in fractions):
        raise ValueError("Fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("Fractions must sum to 1")

    if len(fractions) == 1:
        parts = [dataset]
    else:
        n = len(dataset)
        order = np.random.default_rng(seed).permutation(n)
        bounds = np.round(np.cumsum([0.0, *fractions]) * n).astype(np.int64)
        bounds[-1] = n
        parts = [dataset.subset(order[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]

    for i, part in enumerate(parts):
        if part.n_events == 0:
            raise NoEventsError(f"Part {i} of the split has no events")

    return parts
