import dataclasses
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from nsotree.survival import StepFunction, SurvivalDataset, kaplan_meier, survival_curve

logger = logging.getLogger(__name__)

_PAIR_BLOCK = 1024


@dataclasses.dataclass(frozen=True, eq=False)
class MetricResult:
    point: float
    """
    Metric on the full evaluation set.
    """

    interval: Optional[Tuple[float, float]] = None
    """
    (2.5%, 97.5%) bootstrap percentiles, when resampled.
    """

    resamples: Optional[np.ndarray] = None
    """
    Metric value per bootstrap resample.
    """

    def __post_init__(self) -> None:
        if self.interval is not None and self.interval[0] > self.interval[1]:
            raise ValueError("Interval lower bound exceeds the upper bound")

    @property
    def lower(self) -> Optional[float]:
        return None if self.interval is None else self.interval[0]

    @property
    def upper(self) -> Optional[float]:
        return None if self.interval is None else self.interval[1]


def concordance_index(scores: np.ndarray, times: np.ndarray, events: np.ndarray) -> float:
    """
    Harrell's C. A pair (i, j) is comparable when T_i < T_j and subject i had
    the event; it is concordant when score_i > score_j. Tied scores count one
    half.
    """

    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    events = np.asarray(events).reshape(-1).astype(bool)
    if not (scores.shape == times.shape == events.shape):
        raise ValueError("Scores, times and events must have equal lengths")

    anchors = np.flatnonzero(events)
    concordant = 0.0
    comparable = 0

    for start in range(0, anchors.size, _PAIR_BLOCK):
        block = anchors[start : start + _PAIR_BLOCK]
        later = times[None, :] > times[block, None]
        higher = scores[block, None] > scores[None, :]
        tied = scores[block, None] == scores[None, :]

        comparable += int(later.sum())
        concordant += float((later & higher).sum()) + 0.5 * float((later & tied).sum())

    if comparable == 0:
        raise ValueError("There are no comparable pairs")

    return concordant / comparable


def predict_survival(baseline: StepFunction, scores: np.ndarray) -> List[StepFunction]:
    return [survival_curve(baseline, float(s)) for s in np.asarray(scores).reshape(-1)]


def _brier_from_probabilities(
    probs: np.ndarray, dataset: SurvivalDataset, t: float, censoring: StepFunction
) -> float:
    dead = (dataset.time <= t) & dataset.event
    alive = dataset.time > t

    weights = np.zeros(len(dataset))
    weights[dead] = censoring.left_limit(dataset.time[dead])
    weights[alive] = censoring(t)

    usable = ~((dead | alive) & (weights <= 0))
    if not usable.all():
        logger.warning(
            "Censoring survival is zero for %d subjects at t=%g; dropping them",
            int((~usable).sum()),
            t,
        )

    contrib = np.zeros(len(dataset))
    ok_dead = dead & usable
    ok_alive = alive & usable
    contrib[ok_dead] = probs[ok_dead] ** 2 / weights[ok_dead]
    contrib[ok_alive] = (1.0 - probs[ok_alive]) ** 2 / weights[ok_alive]

    if not usable.any():
        raise ValueError("No subject has a usable censoring weight")

    return float(contrib[usable].sum() / usable.sum())


def _curve_matrix(curves: Sequence[StepFunction], grid: np.ndarray) -> np.ndarray:
    return np.vstack([np.atleast_1d(c(grid)) for c in curves])


def brier_score(
    curves: Sequence[StepFunction], dataset: SurvivalDataset, t: float
) -> float:
    """
    Inverse-probability-of-censoring weighted Brier score at time t.

    Subjects with an event by t contribute S(t|x)^2 / G(T-), subjects still at
    risk after t contribute (1 - S(t|x))^2 / G(t), subjects censored by t
    contribute nothing. G is the Kaplan-Meier estimate of the censoring
    distribution on `dataset`.

    :param curves: Predicted survival curve per subject, aligned with `dataset`.
    """

    if t < 0:
        raise ValueError("Time must be nonnegative")
    if len(curves) != len(dataset):
        raise ValueError("There must be one survival curve per subject")

    censoring = kaplan_meier(dataset, censoring_mode="censorings")
    probs = _curve_matrix(curves, np.array([t]))[:, 0]
    return _brier_from_probabilities(probs, dataset, t, censoring)


def brier_curve(
    curves: Sequence[StepFunction], dataset: SurvivalDataset, grid: np.ndarray
) -> np.ndarray:
    """
    Brier score at every time of `grid`.
    """

    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if len(curves) != len(dataset):
        raise ValueError("There must be one survival curve per subject")
    if np.any(grid < 0):
        raise ValueError("Times must be nonnegative")

    censoring = kaplan_meier(dataset, censoring_mode="censorings")
    probs = _curve_matrix(curves, grid)
    return np.array(
        [
            _brier_from_probabilities(probs[:, i], dataset, float(t), censoring)
            for i, t in enumerate(grid)
        ]
    )


def integrated_brier(
    curves: Sequence[StepFunction], dataset: SurvivalDataset, grid: np.ndarray
) -> float:
    """
    Trapezoidal integral of the Brier score over `grid`, divided by the span
    of the grid.
    """

    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("The grid needs at least two strictly increasing times")

    scores = brier_curve(curves, dataset, grid)
    return float(trapezoid(scores, grid) / (grid[-1] - grid[0]))


def default_time_grid(dataset: SurvivalDataset, points: int = 100) -> np.ndarray:
    """
    Equally spaced times between the 5th and 95th percentiles of the recorded
    times.
    """

    low, high = np.percentile(dataset.time, [5.0, 95.0])
    if high <= low:
        raise ValueError("Recorded times are too concentrated for a time grid")

    return np.linspace(low, high, points)


def pearson_correlation(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)

    if predicted.shape != truth.shape or predicted.size < 2:
        raise ValueError("Pearson correlation needs two equal-length vectors of length >= 2")
    if np.std(predicted) == 0 or np.std(truth) == 0:
        raise ValueError("Pearson correlation is undefined for zero variance")

    r = float(np.corrcoef(predicted, truth)[0, 1])
    return min(max(r, -1.0), 1.0)


def bootstrap_ci(
    evaluate: Callable[[SurvivalDataset], float],
    dataset: SurvivalDataset,
    resamples: int = 1000,
    seed: int = 0,
    max_redraws: Optional[int] = None,
) -> MetricResult:
    """
    Percentile bootstrap of a metric over the evaluation set, with the model
    held fixed.

    .. code-block:: python

        result = bootstrap_ci(
            lambda data: concordance_index(risk_scores(params, data.x), data.time, data.event),
            test,
            resamples=1000,
        )
        print(result.point, result.interval)

    :param evaluate: Metric of a dataset. A resample on which it raises
        `ValueError` is redrawn.
    :param dataset: Evaluation set resampled with replacement.
    :param resamples: Number of successful resamples B.
    :param seed: Seed of the resampling generator.
    :param max_redraws: Give up after this many failed resamples, 10 B by default.
    """

    if resamples < 2:
        raise ValueError("At least two resamples are required")

    point = evaluate(dataset)
    rng = np.random.default_rng(seed)
    limit = 10 * resamples if max_redraws is None else max_redraws

    values: List[float] = []
    redraws = 0
    n = len(dataset)
    while len(values) < resamples:
        indices = rng.integers(0, n, size=n)
        try:
            values.append(float(evaluate(dataset.subset(indices))))
        except ValueError:
            redraws += 1
            if redraws > limit:
                raise
    if redraws:
        logger.warning("Redrew %d bootstrap resamples on which the metric failed", redraws)

    sample = np.array(values)
    lower, upper = np.percentile(sample, [2.5, 97.5])
    return MetricResult(point=float(point), interval=(float(lower), float(upper)), resamples=sample)
