import dataclasses
from typing import Literal, Tuple

import numpy as np

from nsotree.errors import NoEventsError

Reduction = Literal["sum", "mean"]
"""
sum:  sum over event anchors, as the partial likelihood is written
mean: sum divided by the number of event anchors
"""


@dataclasses.dataclass(frozen=True, eq=False)
class CoxBatch:
    scores: np.ndarray
    """
    Risk scores g(x) of the batch members.
    """

    times: np.ndarray
    """
    Recorded times, aligned with `scores`.
    """

    events: np.ndarray
    """
    Event indicators, aligned with `scores`.
    """

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        events = np.asarray(self.events).reshape(-1).astype(bool)

        if not (scores.shape == times.shape == events.shape):
            raise ValueError("Scores, times and events must have equal lengths")

        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)

    @property
    def n_events(self) -> int:
        return int(self.events.sum())


def _partial_likelihood(
    scores: np.ndarray, times: np.ndarray, events: np.ndarray, reduction: Reduction
) -> Tuple[float, np.ndarray]:
    n_events = int(events.sum())
    if n_events == 0:
        raise NoEventsError("The Cox partial likelihood needs at least one event")
    if not np.all(np.isfinite(scores)):
        raise ValueError("Scores must be finite")

    order = np.argsort(times, kind="stable")
    s = scores[order]
    t = times[order]
    e = events[order]

    # log sum_{k: t_k >= t_i} exp(s_k); ties share the risk set of their first member
    tail = np.logaddexp.accumulate(s[::-1])[::-1]
    first = np.searchsorted(t, t, side="left")
    log_risk = tail[first]

    loss = float(np.sum(log_risk[e] - s[e]))

    # sum over anchors n with t_n <= t_k of exp(-log_risk_n), in log space
    anchor = np.where(e, -log_risk, -np.inf)
    with np.errstate(invalid="ignore"):
        head = np.logaddexp.accumulate(anchor)
    last = np.searchsorted(t, t, side="right") - 1
    grad_sorted = np.exp(s + head[last]) - e

    grad = np.empty_like(grad_sorted)
    grad[order] = grad_sorted

    if reduction == "mean":
        return loss / n_events, grad / n_events
    elif reduction == "sum":
        return loss, grad
    else:
        raise ValueError("Unexpected reduction")


def cox_nll_full(
    scores: np.ndarray,
    times: np.ndarray,
    events: np.ndarray,
    reduction: Reduction = "sum",
) -> Tuple[float, np.ndarray]:
    """
    Negative Cox log partial likelihood over the whole sample,
    -sum_{n: E_n = 1} (g_n - log sum_{k in R(T_n)} exp(g_k)),
    and its gradient with respect to the scores.

    Risk sets include tied times (Breslow).
    """

    batch = CoxBatch(scores=scores, times=times, events=events)
    return _partial_likelihood(batch.scores, batch.times, batch.events, reduction)


def cox_nll_batch(batch: CoxBatch, reduction: Reduction = "sum") -> Tuple[float, np.ndarray]:
    """
    In-batch form, sum_{n: E_n = 1} log sum_{k in batch, T_k >= T_n} exp(g_k - g_n).

    The risk sets are restricted to the batch, so on a batch holding the
    whole sample this equals `cox_nll_full`.
    """

    return _partial_likelihood(batch.scores, batch.times, batch.events, reduction)
