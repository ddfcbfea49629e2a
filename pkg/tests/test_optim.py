import numpy as np
from pytest import approx, raises

from nsotree.network import init
from nsotree.optim import SGD, Adam, make_optimizer


def test_sgd_step() -> None:
    params = init(3, 2, seed=0)
    grads = init(3, 2, seed=1)

    out = SGD(0.1).step(params, grads)

    np.testing.assert_allclose(out.to_vector(), params.to_vector() - 0.1 * grads.to_vector())


def test_adam_first_step_moves_by_the_learning_rate() -> None:
    params = init(3, 2, seed=0)
    grads = params.from_vector(np.linspace(-1, 1, params.size) + 0.01)

    out = Adam(0.05).step(params, grads)

    np.testing.assert_allclose(
        params.to_vector() - out.to_vector(), 0.05 * np.sign(grads.to_vector()), rtol=1e-5
    )


def test_adam_keeps_state_between_steps() -> None:
    params = init(3, 1, seed=0)
    grads = params.from_vector(np.ones(params.size))
    adam = Adam(0.1)

    first = adam.step(params, grads)
    second = adam.step(first, grads)

    step = first.to_vector() - second.to_vector()
    assert step[0] == approx(0.1, rel=1e-5)


def test_make_optimizer() -> None:
    assert isinstance(make_optimizer("sgd", 0.1), SGD)
    assert isinstance(make_optimizer("adam", 0.1), Adam)
    with raises(ValueError):
        make_optimizer("rmsprop", 0.1)  # type: ignore[arg-type]


def test_invalid_hyperparameters() -> None:
    with raises(ValueError):
        SGD(0.0)
    with raises(ValueError):
        Adam(-1.0)
    with raises(ValueError):
        Adam(0.1, beta1=1.0)
