from pytest import fixture

from nsotree.simulate import SimConfig, Simulation, simulate


@fixture(scope="session")
def small_linear() -> Simulation:
    return simulate(SimConfig(risk="linear", n_train=400, n_valid=150, n_test=150, seed=7))


@fixture(scope="session")
def small_gaussian() -> Simulation:
    return simulate(SimConfig(risk="gaussian", n_train=400, n_valid=150, n_test=150, seed=7))


@fixture(scope="session")
def linear_benchmark() -> Simulation:
    return simulate(SimConfig(risk="linear", seed=0))


@fixture(scope="session")
def gaussian_benchmark() -> Simulation:
    return simulate(SimConfig(risk="gaussian", seed=0))
