from typing import Callable

import numpy as np

from nsotree.network import NSOTreeParams
from nsotree.survival import SurvivalDataset


def random_dataset(
    rng: np.random.Generator, n: int, dim: int = 3, censored: float = 0.3
) -> SurvivalDataset:
    """
    Continuous times, so no ties, and at least one event.
    """

    event = rng.random(n) >= censored
    event[0] = True
    return SurvivalDataset(
        x=rng.normal(size=(n, dim)),
        time=rng.exponential(size=n),
        event=event,
    )


def central_differences(
    f: Callable[[np.ndarray], float], vector: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    grad = np.empty_like(vector)
    for i in range(vector.size):
        up, down = vector.copy(), vector.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (f(up) - f(down)) / (2 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(a) + np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / scale


def linear_risk_params() -> NSOTreeParams:
    """
    Two layers of two units realizing x_0 + 2 x_1 on the plane in ReLU mode.

    Layer 1 holds +-(x_0 + 2 x_1 + 1), layer 2 +-(x_0 + 2 x_1 - 1), and the
    head averages the two differences relu(u) - relu(-u) = u.
    """

    return NSOTreeParams(
        weights=(
            np.array([[1.0, 2.0], [-1.0, -2.0]]),
            np.array([[1.0, 2.0, 0.0, 0.0], [-1.0, -2.0, 0.0, 0.0]]),
        ),
        biases=(np.array([1.0, -1.0]), np.array([-1.0, 1.0])),
        head_weights=np.array([0.0, 0.0, 0.5, -0.5, 0.5, -0.5]),
        head_bias=0.0,
        input_dim=2,
        hidden_dim=2,
    )
