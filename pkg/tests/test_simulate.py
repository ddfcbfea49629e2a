import json
from pathlib import Path

import numpy as np
from pytest import approx, mark, raises
from scipy.stats import kendalltau

from nsotree.errors import SchemaError
from nsotree.ingest import load_csv
from nsotree.simulate import (
    SimConfig,
    calibrate_censoring_rate,
    load_sim_config,
    load_true_risk,
    simulate,
    true_risk,
    write_simulation,
)


def test_true_risk_linear() -> None:
    config = SimConfig(risk="linear")
    x = np.ones(10)

    assert true_risk(x, config) == approx(3.0)
    assert true_risk(np.zeros((4, 10)), config) == approx(np.zeros(4))


def test_true_risk_gaussian() -> None:
    config = SimConfig(risk="gaussian")

    assert true_risk(np.zeros(10), config) == approx(np.log(5.0))
    x = np.zeros(10)
    x[0] = 0.5
    assert true_risk(x, config) == approx(np.log(5.0) * np.exp(-0.5))


def test_true_risk_ignores_noise_covariates() -> None:
    config = SimConfig(risk="gaussian")
    x = np.random.default_rng(0).uniform(-1, 1, size=(5, 10))
    noisy = x.copy()
    noisy[:, 2:] = 0.3

    np.testing.assert_array_equal(true_risk(x, config), true_risk(noisy, config))


def test_uncensored_simulation() -> None:
    sim = simulate(SimConfig(n_train=50, n_valid=20, n_test=20, censor_fraction=0.0))

    assert sim.censoring_rate == 0.0
    for dataset in sim:
        assert dataset.event.all()


def test_simulation_is_deterministic() -> None:
    config = SimConfig(risk="gaussian", n_train=100, n_valid=30, n_test=30, seed=3)
    a, b = simulate(config), simulate(config)

    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.x, y.x)
        np.testing.assert_array_equal(x.time, y.time)
        np.testing.assert_array_equal(x.event, y.event)


def test_simulation_shapes() -> None:
    sim = simulate(SimConfig(n_train=40, n_valid=10, n_test=12, dim=4))

    assert [len(d) for d in sim] == [40, 10, 12]
    assert sim.train.dim == 4
    assert sim.true_risks["test"].shape == (12,)


@mark.parametrize("risk", ["linear", "gaussian"])
def test_censored_fraction_is_calibrated(risk: str) -> None:
    sim = simulate(SimConfig(risk=risk))  # type: ignore[arg-type]

    censored = 1.0 - np.mean(np.concatenate([d.event for d in sim]))
    assert censored == approx(0.5, abs=0.03)


def test_covariate_moments() -> None:
    sim = simulate(SimConfig(seed=1))
    x = np.vstack([d.x for d in sim])

    assert np.all((x >= -1) & (x < 1))
    np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=0.05)
    np.testing.assert_allclose(x.var(axis=0), 1.0 / 3.0, atol=0.05)


def test_higher_risk_dies_sooner() -> None:
    sim = simulate(SimConfig(censor_fraction=0.0))

    tau = kendalltau(-sim.true_risks["train"], sim.train.time)[0]
    assert tau > 0.2


def test_calibrated_rate_hits_target() -> None:
    rates = np.exp(np.random.default_rng(0).normal(size=200))
    c = calibrate_censoring_rate(rates, 0.3)

    assert np.mean(c / (c + rates)) == approx(0.3, abs=1e-9)
    assert calibrate_censoring_rate(rates, 0.0) == 0.0


@mark.parametrize(
    "kwargs",
    [
        {"n_train": 0},
        {"dim": 1},
        {"lambda_max": 1.0},
        {"scale": 0.0},
        {"baseline_rate": -1.0},
        {"censor_fraction": 1.0},
        {"risk": "cubic"},
    ],
)
def test_invalid_config(kwargs: dict) -> None:
    with raises(ValueError):
        SimConfig(**kwargs)


def test_write_simulation(tmp_path: Path) -> None:
    sim = simulate(SimConfig(risk="gaussian", n_train=30, n_valid=10, n_test=10, dim=3))
    paths = write_simulation(sim, tmp_path)

    assert sorted(paths) == ["test", "train", "truth", "valid"]
    train = load_csv(paths["train"])
    np.testing.assert_array_equal(train.x, sim.train.x)
    np.testing.assert_array_equal(train.time, sim.train.time)
    np.testing.assert_array_equal(train.event, sim.train.event)

    truth = json.loads(paths["truth"].read_text(encoding="utf-8"))
    assert truth["config"]["risk"] == "gaussian"
    assert truth["censoring"]["mechanism"] == "exponential"
    np.testing.assert_array_equal(load_true_risk(paths["truth"]), sim.true_risks["test"])
    np.testing.assert_array_equal(
        load_true_risk(paths["truth"], "valid"), sim.true_risks["valid"]
    )


def test_rewrites_are_byte_identical(tmp_path: Path) -> None:
    config = SimConfig(n_train=20, n_valid=10, n_test=10, seed=5)
    first = write_simulation(simulate(config), tmp_path / "a")
    second = write_simulation(simulate(config), tmp_path / "b")

    for name in first:
        assert first[name].read_bytes() == second[name].read_bytes()


def test_load_true_risk_errors(tmp_path: Path) -> None:
    bogus = tmp_path / "bogus.json"
    bogus.write_text('{"format": "other"}', encoding="utf-8")
    with raises(SchemaError):
        load_true_risk(bogus)

    paths = write_simulation(simulate(SimConfig(n_train=10, n_valid=5, n_test=5)), tmp_path)
    with raises(SchemaError):
        load_true_risk(paths["truth"], "holdout")


def test_load_sim_config(tmp_path: Path) -> None:
    config = SimConfig(risk="gaussian", n_train=12, n_valid=6, n_test=6, scale=0.4, seed=9)
    paths = write_simulation(simulate(config), tmp_path)
    loaded = load_sim_config(paths["truth"])

    assert loaded == config
    grid = np.random.default_rng(0).uniform(-1, 1, size=(5, 10))
    np.testing.assert_array_equal(true_risk(grid, loaded), true_risk(grid, config))


def test_load_sim_config_errors(tmp_path: Path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text('{"format": "nsotree-simulation", "config": {"colour": 1}}', encoding="utf-8")
    with raises(SchemaError):
        load_sim_config(broken)

    listing = tmp_path / "listing.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with raises(SchemaError):
        load_sim_config(listing)
