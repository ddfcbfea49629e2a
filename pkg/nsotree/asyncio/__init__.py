from nsotree.asyncio.trainer import cross_validate, depth_sweep, lambda_sweep, train
from nsotree.trainer import CrossValidationResult, SweepRow, TrainConfig, TrainReport

__all__ = [
    "train",
    "depth_sweep",
    "lambda_sweep",
    "cross_validate",
    "TrainConfig",
    "TrainReport",
    "SweepRow",
    "CrossValidationResult",
]
