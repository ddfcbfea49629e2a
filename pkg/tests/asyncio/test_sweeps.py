from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pytest import fixture, mark, raises

from nsotree import asyncio as async_trainer
from nsotree import trainer
from nsotree.simulate import Simulation
from nsotree.trainer import TrainConfig


@fixture
def config() -> TrainConfig:
    return TrainConfig(depth=2, batch_size=64, max_epochs=2, seed=4)


@mark.asyncio()
async def test_train_matches_sync(small_linear: Simulation, config: TrainConfig) -> None:
    report = await async_trainer.train(small_linear.train, small_linear.valid, config)
    expected = trainer.train(small_linear.train, small_linear.valid, config)

    np.testing.assert_array_equal(report.params.to_vector(), expected.params.to_vector())
    assert report.best_epoch == expected.best_epoch


@mark.asyncio()
async def test_depth_sweep_matches_sync(small_gaussian: Simulation, config: TrainConfig) -> None:
    data = small_gaussian
    with ThreadPoolExecutor(max_workers=2) as pool:
        rows = await async_trainer.depth_sweep(
            data.train, data.valid, data.test, [3, 1], config, executor=pool
        )

    assert rows == trainer.depth_sweep(data.train, data.valid, data.test, [3, 1], config)
    assert [r.depth for r in rows] == [3, 1]


@mark.asyncio()
async def test_lambda_sweep_matches_sync(small_gaussian: Simulation, config: TrainConfig) -> None:
    data = small_gaussian
    rows = await async_trainer.lambda_sweep(data.train, data.valid, data.test, [1e-2, 0.0], config)

    assert rows == trainer.lambda_sweep(data.train, data.valid, data.test, [1e-2, 0.0], config)
    assert rows[1].sparsity == 0.0


@mark.asyncio()
async def test_cross_validate_matches_sync(small_linear: Simulation, config: TrainConfig) -> None:
    result = await async_trainer.cross_validate(small_linear.train, 3, config)
    expected = trainer.cross_validate(small_linear.train, 3, config)

    assert result.fold_cindex == expected.fold_cindex
    assert result.mean == expected.mean


@mark.asyncio()
async def test_empty_grids(small_linear: Simulation, config: TrainConfig) -> None:
    data = small_linear

    with raises(ValueError):
        await async_trainer.depth_sweep(data.train, data.valid, data.test, [], config)
    with raises(ValueError):
        await async_trainer.lambda_sweep(data.train, data.valid, data.test, [], config)
