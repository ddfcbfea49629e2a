"""
Synthetic survival data from an exponential Cox model.

Covariates are uniform on [-1, 1)^d and the risk depends on the first two of
them only. Event times are exponential with rate lambda_0 exp(h(x)); censoring
times are exponential with a rate calibrated so that the expected fraction of
censored records matches the target.
"""

import dataclasses
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, Union

import numpy as np
from scipy.optimize import brentq

from nsotree.errors import SchemaError
from nsotree.ingest import save_csv
from nsotree.survival import SurvivalDataset
from nsotree.typing import RiskKind

logger = logging.getLogger(__name__)

SIDECAR_FORMAT = "nsotree-simulation"
SIDECAR_VERSION = 1


@dataclasses.dataclass(frozen=True)
class SimConfig:
    risk: RiskKind = "linear"
    """
    Shape of the true log-risk function.
    """

    n_train: int = 4000
    n_valid: int = 1000
    n_test: int = 1000

    dim: int = 10
    """
    Covariate dimension d. Only x_0 and x_1 carry signal.
    """

    lambda_max: float = 5.0
    """
    Peak hazard ratio of the Gaussian risk.
    """

    scale: float = 0.5
    """
    Width r of the Gaussian risk.
    """

    baseline_rate: float = 1.0
    """
    Constant baseline hazard lambda_0.
    """

    censor_fraction: float = 0.5
    """
    Target expected fraction of censored records.
    """

    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_train, self.n_valid, self.n_test) < 1:
            raise ValueError("Split sizes must be positive")
        if self.dim < 2:
            raise ValueError("At least two covariates are required")
        if self.lambda_max <= 1:
            raise ValueError("lambda_max must exceed 1")
        if self.scale <= 0:
            raise ValueError("The Gaussian scale must be positive")
        if self.baseline_rate <= 0:
            raise ValueError("The baseline rate must be positive")
        if not 0 <= self.censor_fraction < 1:
            raise ValueError("The censoring fraction must lie in [0, 1)")
        if self.risk not in ("linear", "gaussian"):
            raise ValueError("Unexpected risk kind")

    @property
    def n_total(self) -> int:
        return self.n_train + self.n_valid + self.n_test


@dataclasses.dataclass(frozen=True, eq=False)
class Simulation:
    config: SimConfig
    train: SurvivalDataset
    valid: SurvivalDataset
    test: SurvivalDataset

    censoring_rate: float
    """
    Calibrated rate of the exponential censoring times, 0 when uncensored.
    """

    true_risks: Dict[str, np.ndarray]
    """
    h(x) per split, aligned with the split's records.
    """

    def __iter__(self) -> Iterator[SurvivalDataset]:
        return iter((self.train, self.valid, self.test))


def true_risk(x: np.ndarray, config: SimConfig) -> np.ndarray:
    """
    True log-risk h(x) of one covariate vector or of each row of a matrix.
    """

    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ValueError("At least two covariates are required")

    x0, x1 = x[..., 0], x[..., 1]
    if config.risk == "linear":
        return x0 + 2.0 * x1
    elif config.risk == "gaussian":
        return np.log(config.lambda_max) * np.exp(
            -(x0**2 + x1**2) / (2.0 * config.scale**2)
        )
    else:
        raise ValueError("Unexpected risk kind")


def calibrate_censoring_rate(event_rates: np.ndarray, censor_fraction: float) -> float:
    """
    Rate c of exponential censoring with mean_i c / (c + rate_i) equal to the
    target, the expected censored fraction when event i is exponential with
    rate_i.
    """

    if censor_fraction == 0:
        return 0.0

    def excess(log_c: float) -> float:
        c = np.exp(log_c)
        return float(np.mean(c / (c + event_rates)) - censor_fraction)

    low, high = np.log(event_rates.min()) - 30.0, np.log(event_rates.max()) + 30.0
    return float(np.exp(brentq(excess, low, high, xtol=1e-14, rtol=1e-12)))


def simulate(config: SimConfig) -> Simulation:
    rng = np.random.default_rng(config.seed)

    x = rng.uniform(-1.0, 1.0, size=(config.n_total, config.dim))
    risk = true_risk(x, config)
    rates = config.baseline_rate * np.exp(risk)

    death = -np.log(1.0 - rng.random(config.n_total)) / rates

    censoring_rate = calibrate_censoring_rate(rates, config.censor_fraction)
    if censoring_rate > 0:
        censor = -np.log(1.0 - rng.random(config.n_total)) / censoring_rate
    else:
        censor = np.full(config.n_total, np.inf)

    event = death <= censor
    time = np.minimum(death, censor)

    logger.info(
        "Simulated %d %s-risk records: exponential censoring at rate %.6g, "
        "target censored fraction %.3f, achieved %.3f",
        config.n_total,
        config.risk,
        censoring_rate,
        config.censor_fraction,
        1.0 - event.mean(),
    )

    bounds = np.cumsum([0, config.n_train, config.n_valid, config.n_test])
    splits = {}
    risks = {}
    for name, lo, hi in zip(("train", "valid", "test"), bounds[:-1], bounds[1:]):
        splits[name] = SurvivalDataset(x=x[lo:hi], time=time[lo:hi], event=event[lo:hi])
        risks[name] = risk[lo:hi]

    return Simulation(
        config=config,
        train=splits["train"],
        valid=splits["valid"],
        test=splits["test"],
        censoring_rate=censoring_rate,
        true_risks=risks,
    )


def sidecar(simulation: Simulation) -> Dict[str, Any]:
    return {
        "format": SIDECAR_FORMAT,
        "version": SIDECAR_VERSION,
        "config": dataclasses.asdict(simulation.config),
        "censoring": {
            "mechanism": "exponential",
            "rate": simulation.censoring_rate,
        },
        "true_risk": {name: risk.tolist() for name, risk in simulation.true_risks.items()},
    }


def write_simulation(simulation: Simulation, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write train.csv, valid.csv, test.csv and the truth.json sidecar.
    """

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    paths: Dict[str, Path] = {}
    for name, dataset in zip(("train", "valid", "test"), simulation):
        paths[name] = out / f"{name}.csv"
        save_csv(dataset, paths[name])

    paths["truth"] = out / "truth.json"
    with open(paths["truth"], "w", encoding="utf-8") as f:
        json.dump(sidecar(simulation), f, indent=2, sort_keys=True)
        f.write("\n")

    return paths


def _read_sidecar(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)

    if not isinstance(data, dict) or data.get("format") != SIDECAR_FORMAT:
        raise SchemaError(f"{path} is not a simulation sidecar")
    return data


def load_true_risk(path: Union[str, Path], split: str = "test") -> np.ndarray:
    data = _read_sidecar(path)
    if split not in data["true_risk"]:
        raise SchemaError(f"The sidecar has no split named {split!r}")

    return np.asarray(data["true_risk"][split], dtype=np.float64)


def load_sim_config(path: Union[str, Path]) -> SimConfig:
    """
    The configuration a sidecar's data was simulated with, so that the true
    risk can be evaluated away from the simulated records.
    """

    data = _read_sidecar(path)
    try:
        return SimConfig(**data["config"])
    except (KeyError, TypeError) as e:
        raise SchemaError(f"{path} has no usable simulation config") from e
