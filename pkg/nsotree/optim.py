import abc
from typing import Optional

import numpy as np

from nsotree.network import NSOTreeParams
from nsotree.typing import OptimizerKind


class Optimizer(abc.ABC):
    @abc.abstractmethod
    def step(self, params: NSOTreeParams, grads: NSOTreeParams) -> NSOTreeParams:
        pass


class SGD(Optimizer):
    """
    Plain gradient descent, theta <- theta - lr * grad.
    """

    def __init__(self, learning_rate: float) -> None:
        """
        :param learning_rate: Step size
        """

        if learning_rate <= 0:
            raise ValueError("Learning rate must be positive")

        self._learning_rate = learning_rate

    def step(self, params: NSOTreeParams, grads: NSOTreeParams) -> NSOTreeParams:
        return params.from_vector(
            params.to_vector() - self._learning_rate * grads.to_vector()
        )


class Adam(Optimizer):
    """
    Adam with bias-corrected first and second moment estimates.

    The moments are state of the optimizer, so one instance serves one
    training run.
    """

    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        """
        :param learning_rate: Step size
        :param beta1: Decay of the first moment estimate
        :param beta2: Decay of the second moment estimate
        :param eps: Added to the root of the second moment
        """

        if learning_rate <= 0:
            raise ValueError("Learning rate must be positive")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("Moment decays must lie in [0, 1)")

        self._learning_rate = learning_rate
        self._beta1 = beta1
        self._beta2 = beta2
        self._eps = eps

        self._m: Optional[np.ndarray] = None
        self._v: Optional[np.ndarray] = None
        self._t = 0

    def step(self, params: NSOTreeParams, grads: NSOTreeParams) -> NSOTreeParams:
        g = grads.to_vector()
        if self._m is None or self._v is None:
            self._m = np.zeros_like(g)
            self._v = np.zeros_like(g)

        self._t += 1
        self._m = self._beta1 * self._m + (1 - self._beta1) * g
        self._v = self._beta2 * self._v + (1 - self._beta2) * g * g

        m_hat = self._m / (1 - self._beta1**self._t)
        v_hat = self._v / (1 - self._beta2**self._t)
        update = self._learning_rate * m_hat / (np.sqrt(v_hat) + self._eps)
        return params.from_vector(params.to_vector() - update)


def make_optimizer(kind: OptimizerKind, learning_rate: float) -> Optimizer:
    if kind == "sgd":
        return SGD(learning_rate)
    elif kind == "adam":
        return Adam(learning_rate)
    else:
        raise ValueError("Unexpected optimizer")
