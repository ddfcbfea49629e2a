__version__ = "0.3.0"

from nsotree.checkpoint import Checkpoint
from nsotree.errors import NoEventsError, NSOTreeError, SchemaError, TrainingError
from nsotree.ingest import ColumnSpec, load_csv, load_schema, save_csv, split, standardize
from nsotree.loss import CoxBatch, cox_nll_batch, cox_nll_full
from nsotree.metrics import (
    MetricResult,
    bootstrap_ci,
    brier_curve,
    brier_score,
    concordance_index,
    integrated_brier,
    pearson_correlation,
)
from nsotree.network import NSOTreeParams, backward, forward, init, prox_step, sparsity
from nsotree.simulate import SimConfig, Simulation, simulate
from nsotree.survival import (
    StepFunction,
    SurvivalDataset,
    breslow_baseline,
    kaplan_meier,
    log_rank_test,
    risk_set,
    survival_curve,
)
from nsotree.trainer import (
    SearchSpace,
    TrainConfig,
    TrainReport,
    cross_validate,
    depth_sweep,
    lambda_sweep,
    predict_risk,
    random_search,
    train,
)
from nsotree.tree import ObliqueTree, annotate_splits, export_tree, extract_tree, parse_tree, route

__all__ = [
    "SurvivalDataset",
    "StepFunction",
    "risk_set",
    "kaplan_meier",
    "breslow_baseline",
    "survival_curve",
    "log_rank_test",
    "NSOTreeParams",
    "init",
    "forward",
    "backward",
    "prox_step",
    "sparsity",
    "Checkpoint",
    "CoxBatch",
    "cox_nll_full",
    "cox_nll_batch",
    "TrainConfig",
    "TrainReport",
    "train",
    "predict_risk",
    "SearchSpace",
    "random_search",
    "depth_sweep",
    "lambda_sweep",
    "cross_validate",
    "ObliqueTree",
    "extract_tree",
    "route",
    "annotate_splits",
    "export_tree",
    "parse_tree",
    "MetricResult",
    "concordance_index",
    "brier_score",
    "brier_curve",
    "integrated_brier",
    "pearson_correlation",
    "bootstrap_ci",
    "SimConfig",
    "Simulation",
    "simulate",
    "ColumnSpec",
    "load_csv",
    "load_schema",
    "save_csv",
    "standardize",
    "split",
    "NSOTreeError",
    "NoEventsError",
    "SchemaError",
    "TrainingError",
]
