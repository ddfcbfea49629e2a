import dataclasses
import logging
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from nsotree.errors import NoEventsError
from nsotree.typing import CensoringMode

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class Standardization:
    mean: np.ndarray
    """
    Per-feature means of the data the statistics were fitted on.
    """

    std: np.ndarray
    """
    Per-feature standard deviations, all strictly positive.
    """

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape:
            raise ValueError("Standardization mean and std must have the same shape")
        if np.any(self.std <= 0):
            raise ValueError("Standardization std entries must be positive")


@dataclasses.dataclass(frozen=True, eq=False)
class SurvivalDataset:
    x: np.ndarray
    """
    Covariates, shape (N, d).
    """

    time: np.ndarray
    """
    Recorded times, shape (N,), all nonnegative.
    """

    event: np.ndarray
    """
    Event indicators, shape (N,). `False` marks a censored record.
    """

    feature_names: Tuple[str, ...] = ()
    """
    Covariate names. Defaults to x0, x1, ...
    """

    standardization: Optional[Standardization] = None
    """
    Statistics the stored covariates were standardized with, if any.
    """

    categories: Dict[str, Tuple[str, ...]] = dataclasses.field(default_factory=dict)
    """
    One-hot levels per categorical source column, in first-appearance order.
    """

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        time = np.asarray(self.time, dtype=np.float64).reshape(-1)
        event = np.asarray(self.event).reshape(-1).astype(bool)

        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError("Covariates must be a matrix with at least one column")
        if not (x.shape[0] == time.shape[0] == event.shape[0]):
            raise ValueError("Covariates, times and events must have equal lengths")
        if np.any(time < 0) or not np.all(np.isfinite(time)):
            raise ValueError("Times must be finite and nonnegative")

        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ValueError("There must be one feature name per covariate")

        if self.standardization is not None and self.standardization.mean.shape != (
            x.shape[1],
        ):
            raise ValueError("Standardization does not match the covariate dimension")

        object.__setattr__(self, "x", x)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_records(
        cls, records: Sequence[Tuple[Sequence[float], float, bool]]
    ) -> "SurvivalDataset":
        if not records:
            raise ValueError("At least one record is required")

        x = np.array([r[0] for r in records], dtype=np.float64)
        time = np.array([r[1] for r in records], dtype=np.float64)
        event = np.array([r[2] for r in records], dtype=bool)
        return cls(x=x, time=time, event=event)

    def __len__(self) -> int:
        return int(self.time.shape[0])

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def subset(self, indices: np.ndarray) -> "SurvivalDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return dataclasses.replace(
            self,
            x=self.x[indices],
            time=self.time[indices],
            event=self.event[indices],
        )

    def require_events(self) -> None:
        if self.n_events == 0:
            raise NoEventsError("The dataset has no observed events")


@dataclasses.dataclass(frozen=True, eq=False)
class StepFunction:
    """
    Right-continuous piecewise-constant function of time.

    The value on [knots[i], knots[i + 1]) is values[i]; before the first knot it
    is `initial`, and past the last knot the last value is held.
    """

    knots: np.ndarray
    values: np.ndarray
    initial: float

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)

        if knots.shape != values.shape:
            raise ValueError("Knots and values must have equal lengths")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ValueError("Knots must be strictly increasing")

        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial", float(self.initial))

    def __call__(self, t: Union[np.ndarray, float]) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        return self._lookup(idx)

    def left_limit(self, t: Union[np.ndarray, float]) -> np.ndarray:
        """
        Value just before t, i.e. the value at the last knot strictly below t.
        """

        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.knots, t, side="left") - 1
        return self._lookup(idx)

    def _lookup(self, idx: np.ndarray) -> np.ndarray:
        padded = np.concatenate(([self.initial], self.values))
        return padded[idx + 1]


def risk_set(dataset: SurvivalDataset, t: float) -> np.ndarray:
    """
    Indices of the records still at risk at time t (recorded time >= t).
    """

    if t < 0:
        raise ValueError("Time must be nonnegative")

    return np.flatnonzero(dataset.time >= t)


def _counting_table(
    time: np.ndarray, observed: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Distinct times at which something is observed, with the number observed
    there and the number at risk (recorded time >= that time).
    """

    uniq, counts = np.unique(time[observed], return_counts=True)
    at_risk = time.shape[0] - np.searchsorted(np.sort(time), uniq, side="left")
    return uniq, counts.astype(np.float64), at_risk.astype(np.float64)


def kaplan_meier(
    dataset: SurvivalDataset, censoring_mode: CensoringMode = "events"
) -> StepFunction:
    """
    Product-limit estimate S(t) = prod_{t_i <= t} (1 - d_i / n_i).

    :param dataset: Records to estimate from.
    :param censoring_mode: `"events"` estimates the survival distribution,
        `"censorings"` the censoring distribution used for IPCW weights. In
        both modes a record is at risk at its own recorded time.
    """

    if len(dataset) == 0:
        raise ValueError("Kaplan-Meier needs a nonempty dataset")

    if censoring_mode == "events":
        observed = dataset.event
    elif censoring_mode == "censorings":
        observed = ~dataset.event
    else:
        raise ValueError("Unexpected censoring mode")

    knots, d, n = _counting_table(dataset.time, observed)
    values = np.cumprod(1.0 - d / n)
    return StepFunction(knots=knots, values=values, initial=1.0)


def breslow_baseline(dataset: SurvivalDataset, scores: np.ndarray) -> StepFunction:
    """
    Breslow estimate of the cumulative baseline hazard,
    H_0(t) = sum_{event times t_i <= t} d_i / sum_{k in R(t_i)} exp(score_k).

    Tied event times share one risk set.
    """

    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.shape[0] != len(dataset):
        raise ValueError("Scores must be aligned with the dataset")
    if not np.all(np.isfinite(scores)):
        raise ValueError("Scores must be finite")

    dataset.require_events()

    knots, d = np.unique(dataset.time[dataset.event], return_counts=True)

    order = np.argsort(dataset.time, kind="stable")
    sorted_time = dataset.time[order]
    # sum of exp(score) over records with time >= sorted_time[i]
    tail = np.cumsum(np.exp(scores[order])[::-1])[::-1]
    denom = tail[np.searchsorted(sorted_time, knots, side="left")]

    return StepFunction(knots=knots, values=np.cumsum(d / denom), initial=0.0)


def survival_curve(baseline: StepFunction, score: float) -> StepFunction:
    """
    S(t | x) = exp(-H_0(t) exp(score)) for a cumulative baseline hazard H_0.
    """

    def survival(hazard: np.ndarray) -> np.ndarray:
        # in log space: exp(score) alone overflows to inf and 0 * inf is nan
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            return np.where(hazard > 0, np.exp(-np.exp(np.log(hazard) + score)), 1.0)

    return StepFunction(
        knots=baseline.knots,
        values=survival(np.asarray(baseline.values, dtype=np.float64)),
        initial=float(survival(np.asarray(baseline.initial, dtype=np.float64))),
    )


def log_rank_test(
    times_a: np.ndarray,
    events_a: np.ndarray,
    times_b: np.ndarray,
    events_b: np.ndarray,
) -> Tuple[float, float]:
    """
    Two-sample log-rank test.

    Returns the chi-square statistic with one degree of freedom and its
    p-value.
    """

    times_a = np.asarray(times_a, dtype=np.float64).reshape(-1)
    times_b = np.asarray(times_b, dtype=np.float64).reshape(-1)
    events_a = np.asarray(events_a).reshape(-1).astype(bool)
    events_b = np.asarray(events_b).reshape(-1).astype(bool)

    if times_a.size == 0 or times_b.size == 0:
        raise ValueError("Both groups must be nonempty")
    if times_a.shape != events_a.shape or times_b.shape != events_b.shape:
        raise ValueError("Times and events must have equal lengths")

    time = np.concatenate((times_a, times_b))
    event = np.concatenate((events_a, events_b))

    if not event.any():
        raise NoEventsError("The pooled sample has no observed events")

    uniq, d, n = _counting_table(time, event)
    # group A at risk at each pooled event time
    n_a = times_a.size - np.searchsorted(np.sort(times_a), uniq, side="left")
    a_events = np.sort(times_a[events_a])
    d_a = (
        np.searchsorted(a_events, uniq, side="right")
        - np.searchsorted(a_events, uniq, side="left")
    ).astype(np.float64)

    frac = n_a / n
    expected = d * frac
    with np.errstate(invalid="ignore", divide="ignore"):
        variance = np.where(n > 1, d * frac * (1.0 - frac) * (n - d) / (n - 1.0), 0.0)

    total_var = float(variance.sum())
    if total_var <= 0.0:
        logger.warning("Log-rank variance is zero; reporting statistic 0")
        return 0.0, 1.0

    statistic = float((d_a.sum() - expected.sum()) ** 2 / total_var)
    p_value = float(stats.chi2.sf(statistic, df=1))
    return statistic, min(max(p_value, 0.0), 1.0)
