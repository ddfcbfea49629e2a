import asyncio
import dataclasses
import functools
from concurrent.futures import Executor
from typing import Any, Callable, List, Optional, Sequence, TypeVar

from nsotree.survival import SurvivalDataset
from nsotree.trainer import (
    CrossValidationResult,
    SweepRow,
    TrainConfig,
    TrainReport,
    cross_validation_folds,
    cross_validation_result,
    sweep_row,
)
from nsotree.trainer import train as train_sync

T = TypeVar("T")


async def _run(executor: Optional[Executor], fn: Callable[..., T], *args: Any) -> T:
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(executor, functools.partial(fn, *args))


async def train(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    config: TrainConfig,
    executor: Optional[Executor] = None,
) -> TrainReport:
    """
    Runs a training run in `executor` (the loop's default when omitted)
    without blocking the event loop.
    """

    return await _run(executor, train_sync, train_set, valid, config)


async def depth_sweep(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    test: SurvivalDataset,
    depths: Sequence[int],
    config: TrainConfig,
    executor: Optional[Executor] = None,
) -> List[SweepRow]:
    """
    Concurrent variant of `nsotree.trainer.depth_sweep`. Rows come back in
    the order of `depths`.

    .. code-block:: python

        import asyncio
        from concurrent.futures import ProcessPoolExecutor

        from nsotree.asyncio import depth_sweep

        with ProcessPoolExecutor() as pool:
            rows = asyncio.run(
                depth_sweep(train, valid, test, range(1, 41, 2), config, executor=pool)
            )
    """

    if not depths:
        raise ValueError("At least one depth is required")

    return list(
        await asyncio.gather(
            *(
                _run(executor, sweep_row, train_set, valid, test, dataclasses.replace(config, depth=d))
                for d in depths
            )
        )
    )


async def lambda_sweep(
    train_set: SurvivalDataset,
    valid: SurvivalDataset,
    test: SurvivalDataset,
    lambdas: Sequence[float],
    config: TrainConfig,
    executor: Optional[Executor] = None,
) -> List[SweepRow]:
    """
    Concurrent variant of `nsotree.trainer.lambda_sweep`.
    """

    if not lambdas:
        raise ValueError("At least one lambda is required")

    return list(
        await asyncio.gather(
            *(
                _run(executor, sweep_row, train_set, valid, test, dataclasses.replace(config, lam=lam))
                for lam in lambdas
            )
        )
    )


async def cross_validate(
    dataset: SurvivalDataset,
    k: int,
    config: TrainConfig,
    fold_ids: Optional[Sequence[int]] = None,
    executor: Optional[Executor] = None,
) -> CrossValidationResult:
    """
    Concurrent variant of `nsotree.trainer.cross_validate`; folds train in
    parallel.
    """

    pairs = cross_validation_folds(dataset, k, config.seed, fold_ids)
    reports = await asyncio.gather(
        *(_run(executor, train_sync, fitted, validation, config) for fitted, validation in pairs)
    )
    return cross_validation_result(pairs, list(reports))
