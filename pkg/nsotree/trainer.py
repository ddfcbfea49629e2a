import dataclasses
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from nsotree.errors import NoEventsError, TrainingError
from nsotree.ingest import standardize
from nsotree.loss import CoxBatch, cox_nll_batch
from nsotree.metrics import concordance_index
from nsotree.network import (
    NSOTreeParams,
    backward,
    forward_batch,
    init,
    init_linear,
    prox_step,
    risk_scores,
    sparsity,
)
from nsotree.optim import make_optimizer
from nsotree.survival import Standardization, SurvivalDataset
from nsotree.typing import ActivationMode, ModelKind, OptimizerKind
from nsotree.utils import derive_seeds

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    model: ModelKind = "nsotree"
    """
    `nsotree` trains the oblique-tree network, `linear` the head alone.
    """

    depth: int = 30
    """
    Number of split layers L. Ignored by the linear model.
    """

    hidden_dim: int = 1
    """
    Units per layer d_h.
    """

    learning_rate: float = 0.1
    batch_size: int = 1024

    lam: float = 1e-4
    """
    Soft-threshold applied to the split weights after every step.
    """

    max_epochs: int = 500
    patience: int = 10
    """
    Epochs without a better validation C-index before training stops.
    """

    seed: int = 0
    activation: ActivationMode = "softplus"
    """
    Activation during training.
    """

    eval_activation: ActivationMode = "relu"
    """
    Activation when scoring the validation set and in the returned model.
    """

    optimizer: OptimizerKind = "sgd"

    def __post_init__(self) -> None:
        if self.model not in ("nsotree", "linear"):
            raise ValueError("Unexpected model kind")
        if self.model == "nsotree" and self.depth < 1:
            raise ValueError("Depth must be positive")
        if self.hidden_dim < 1:
            raise ValueError("Hidden width must be positive")
        if self.learning_rate <= 0:
            raise ValueError("Learning rate must be positive")
        if self.batch_size < 2:
            raise ValueError("Batch size must be at least 2")
        if self.lam < 0:
            raise ValueError("Lambda must be nonnegative")
        if self.max_epochs < 0:
            raise ValueError("The epoch budget must be nonnegative")
        if self.patience < 1:
            raise ValueError("Patience must be positive")


@dataclasses.dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    """
    Mean of the per-batch losses, each normalized by its event count.
    """

    valid_cindex: float
    sparsity: float


@dataclasses.dataclass(frozen=True, eq=False)
class TrainReport:
    config: TrainConfig
    history: List[EpochRecord]

    best_epoch: int
    """
    Epoch whose parameters were kept, 0 when no epoch ran.
    """

    best_cindex: float
    """
    Validation C-index of the kept parameters.
    """

    params: NSOTreeParams
    """
    Parameters from the best epoch.
    """

    seconds: float
    """
    Wall-clock training time.
    """

    @property
    def sparsity(self) -> float:
        return sparsity(self.params)


def predict_risk(
    params: NSOTreeParams, x: np.ndarray, mode: ActivationMode = "relu"
) -> np.ndarray:
    """
    Risk scores g(x) of the rows of `x`, ReLU inference unless asked otherwise.
    """

    return risk_scores(params, x, mode)


def evaluate_cindex(
    params: NSOTreeParams, dataset: SurvivalDataset, mode: ActivationMode = "relu"
) -> float:
    return concordance_index(predict_risk(params, dataset.x, mode), dataset.time, dataset.event)


def _initial_params(config: TrainConfig, input_dim: int, seed: int) -> NSOTreeParams:
    if config.model == "linear":
        return init_linear(input_dim, seed)
    return init(input_dim, config.depth, config.hidden_dim, seed)


def train(train: SurvivalDataset, valid: SurvivalDataset, config: TrainConfig) -> TrainReport:
    """
    Mini-batch training of the Cox partial likelihood with a proximal step.

    Every step runs forward, the in-batch Cox loss, backward, the optimizer
    update and soft-thresholding of the split weights. Parameters from the
    epoch with the best validation C-index are kept, and training stops after
    `config.patience` epochs without improvement.

    .. code-block:: python

        from nsotree import SimConfig, TrainConfig, simulate, train

        data = simulate(SimConfig(risk="gaussian"))
        config = TrainConfig(depth=30, batch_size=256, patience=30)
        report = train(data.train, data.valid, config)
        print(report.best_cindex, report.sparsity)

    :param train: Training records, at least one event.
    :param valid: Early-stopping records.
    :param config: Model and optimization settings.
    """

    train.require_events()
    if len(valid) == 0:
        raise ValueError("The validation set is empty")
    valid.require_events()
    if train.dim != valid.dim:
        raise ValueError("Training and validation covariates differ in dimension")

    started = time.perf_counter()
    init_seed, shuffle_seed = derive_seeds(config.seed, 2)
    params = _initial_params(config, train.dim, init_seed)
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(shuffle_seed)

    logger.info(
        "Training %s (depth %d, width %d) on %d records: loss is the in-batch "
        "negative log partial likelihood divided by the batch's event count",
        config.model,
        params.depth,
        params.hidden_dim,
        len(train),
    )

    best_params = params
    best_epoch = 0
    best_cindex = -np.inf
    history: List[EpochRecord] = []
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        losses = []

        for batch, start in enumerate(range(0, len(train), config.batch_size)):
            idx = order[start : start + config.batch_size]
            if not train.event[idx].any():
                logger.warning("Skipping epoch %d batch %d: no events", epoch, batch)
                continue

            x = train.x[idx]
            trace = forward_batch(params, x, config.activation)
            if not np.all(np.isfinite(trace.scores)):
                raise TrainingError("non-finite risk scores", epoch, batch)

            loss, grad = cox_nll_batch(
                CoxBatch(trace.scores, train.time[idx], train.event[idx]), reduction="mean"
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError("non-finite loss", epoch, batch)

            grads = backward(params, x, grad, config.activation, trace=trace)
            try:
                params = prox_step(optimizer.step(params, grads), config.lam)
            except ValueError as e:
                raise TrainingError(str(e), epoch, batch) from e

            losses.append(loss)

        cindex = evaluate_cindex(params, valid, config.eval_activation)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else float("nan"),
            valid_cindex=cindex,
            sparsity=sparsity(params),
        )
        history.append(record)
        logger.info(
            "epoch %d: loss %.6f, valid C-index %.4f, sparsity %.4f",
            epoch,
            record.train_loss,
            record.valid_cindex,
            record.sparsity,
        )

        if cindex > best_cindex:
            best_cindex, best_epoch, best_params = cindex, epoch, params
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info(
                    "Stopping after epoch %d; best epoch %d (C-index %.4f)",
                    epoch,
                    best_epoch,
                    best_cindex,
                )
                break

    if best_epoch == 0:
        best_cindex = evaluate_cindex(params, valid, config.eval_activation)

    return TrainReport(
        config=config,
        history=history,
        best_epoch=best_epoch,
        best_cindex=float(best_cindex),
        params=best_params,
        seconds=time.perf_counter() - started,
    )


def report_to_csv(report: TrainReport) -> str:
    """
    Per-epoch rows: epoch, train_loss, valid_cindex, sparsity, best.
    """

    frame = pd.DataFrame(
        [dataclasses.asdict(r) for r in report.history],
        columns=["epoch", "train_loss", "valid_cindex", "sparsity"],
    )
    frame["best"] = (frame["epoch"] == report.best_epoch).astype(np.int64)
    return str(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


@dataclasses.dataclass(frozen=True)
class SearchSpace:
    """
    Ranges random search samples from. A range with equal ends fixes the
    field. Learning rate and lambda are sampled log-uniformly, the integer
    fields uniformly.
    """

    depth: Tuple[int, int] = (1, 40)
    hidden_dim: Tuple[int, int] = (1, 1)
    learning_rate: Tuple[float, float] = (1e-3, 0.3)
    batch_size: Tuple[int, int] = (256, 1024)
    lam: Tuple[float, float] = (1e-6, 1e-2)

    def __post_init__(self) -> None:
        for name in ("depth", "hidden_dim", "learning_rate", "batch_size", "lam"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"The search range for {name} is empty")

        for name in ("learning_rate", "lam"):
            low, high = getattr(self, name)
            if low < high and low <= 0:
                raise ValueError(f"The log-uniform range for {name} must be positive")

    def sample(self, rng: np.random.Generator, base: TrainConfig) -> TrainConfig:
        def integer(bounds: Tuple[int, int]) -> int:
            return int(rng.integers(bounds[0], bounds[1] + 1))

        def log_uniform(bounds: Tuple[float, float]) -> float:
            if bounds[0] == bounds[1]:
                return float(bounds[0])
            return float(np.exp(rng.uniform(np.log(bounds[0]), np.log(bounds[1]))))

        return dataclasses.replace(
            base,
            depth=integer(self.depth),
            hidden_dim=integer(self.hidden_dim),
            learning_rate=log_uniform(self.learning_rate),
            batch_size=integer(self.batch_size),
            lam=log_uniform(self.lam),
        )


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    config: TrainConfig
    valid_cindex: float
    best_epoch: int


@dataclasses.dataclass(frozen=True)
class SearchResult:
    best_config: TrainConfig
    trials: List[TrialRecord]

    @property
    def best_cindex(self) -> float:
        return max(t.valid_cindex for t in self.trials)


def random_search(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    space: SearchSpace,
    n_trials: int,
    seed: int = 0,
    base: Optional[TrainConfig] = None,
) -> SearchResult:
    """
    Train `n_trials` configurations drawn from `space` and keep the one with
    the best validation C-index. Fields the space does not cover come from
    `base`.
    """

    if n_trials < 1:
        raise ValueError("At least one trial is required")

    base = base or TrainConfig()
    rng = np.random.default_rng(seed)

    trials: List[TrialRecord] = []
    for i in range(n_trials):
        config = space.sample(rng, base)
        report = train(train_set, valid, config)
        trials.append(TrialRecord(config, report.best_cindex, report.best_epoch))
        logger.info("Trial %d/%d: valid C-index %.4f", i + 1, n_trials, report.best_cindex)

    best = max(trials, key=lambda t: t.valid_cindex)
    return SearchResult(best_config=best.config, trials=trials)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    depth: int
    lam: float
    sparsity: float
    valid_cindex: float
    test_cindex: float


def sweep_row(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    test: SurvivalDataset,
    config: TrainConfig,
) -> SweepRow:
    report = train(train_set, valid, config)
    return SweepRow(
        depth=report.params.depth,
        lam=config.lam,
        sparsity=report.sparsity,
        valid_cindex=report.best_cindex,
        test_cindex=evaluate_cindex(report.params, test, config.eval_activation),
    )


def depth_sweep(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    test: SurvivalDataset,
    depths: Sequence[int],
    config: TrainConfig,
) -> List[SweepRow]:
    """
    One training run per depth, all sharing `config` and its seed.
    """

    if not depths:
        raise ValueError("At least one depth is required")

    return [
        sweep_row(train_set, valid, test, dataclasses.replace(config, depth=d)) for d in depths
    ]


def lambda_sweep(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    test: SurvivalDataset,
    lambdas: Sequence[float],
    config: TrainConfig,
) -> List[SweepRow]:
    """
    One training run per soft-threshold strength, all sharing `config` and
    its seed.
    """

    if not lambdas:
        raise ValueError("At least one lambda is required")

    return [
        sweep_row(train_set, valid, test, dataclasses.replace(config, lam=lam))
        for lam in lambdas
    ]


@dataclasses.dataclass(frozen=True, eq=False)
class CrossValidationResult:
    fold_cindex: List[float]
    """
    Validation C-index per fold.
    """

    standardizations: List[Standardization]
    """
    Statistics each fold's training part was standardized with.
    """

    reports: List[TrainReport]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_cindex))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_cindex, ddof=1))


def fold_assignment(n: int, k: int, seed: int = 0) -> np.ndarray:
    folds = np.empty(n, dtype=np.int64)
    order = np.random.default_rng(seed).permutation(n)
    for fold, members in enumerate(np.array_split(order, k)):
        folds[members] = fold
    return folds


def cross_validation_folds(
    dataset: SurvivalDataset,
    k: int,
    seed: int = 0,
    fold_ids: Optional[Sequence[int]] = None,
) -> List[Tuple[SurvivalDataset, SurvivalDataset]]:
    """
    (training part, validation fold) pairs, both standardized with the
    training part's statistics.
    """

    if k < 2:
        raise ValueError("At least two folds are required")

    folds = fold_assignment(len(dataset), k, seed) if fold_ids is None else np.asarray(fold_ids)
    if folds.shape != (len(dataset),) or set(np.unique(folds)) != set(range(k)):
        raise ValueError(f"Fold ids must label every record with 0..{k - 1}")

    pairs = []
    for fold in range(k):
        held_out = dataset.subset(np.flatnonzero(folds == fold))
        rest = dataset.subset(np.flatnonzero(folds != fold))
        if held_out.n_events == 0 or rest.n_events == 0:
            raise NoEventsError(f"Fold {fold} has no events on one side")

        fitted, validation = standardize(rest, [held_out])
        pairs.append((fitted, validation))

    return pairs


def cross_validate(
    dataset: SurvivalDataset,
    k: int,
    config: TrainConfig,
    fold_ids: Optional[Sequence[int]] = None,
) -> CrossValidationResult:
    """
    k-fold cross-validation. Standardization is fitted on each training part
    alone; each fold serves as its run's validation set.

    :param fold_ids: Explicit fold label per record. Drawn from `config.seed`
        when omitted.
    """

    pairs = cross_validation_folds(dataset, k, config.seed, fold_ids)
    reports = [train(fitted, validation, config) for fitted, validation in pairs]
    return cross_validation_result(pairs, reports)


def cross_validation_result(
    pairs: Sequence[Tuple[SurvivalDataset, SurvivalDataset]], reports: List[TrainReport]
) -> CrossValidationResult:
    result = CrossValidationResult(
        fold_cindex=[r.best_cindex for r in reports],
        standardizations=[
            fitted.standardization
            for fitted, _ in pairs
            if fitted.standardization is not None
        ],
        reports=reports,
    )
    logger.info("Cross-validated C-index %.4f +- %.4f", result.mean, result.std)
    return result
