import hashlib
from pathlib import Path
from typing import List, Union

import numpy as np

from nsotree.typing import ActivationMode

SOFTPLUS_SWITCH = 30.0


def softplus(z: np.ndarray) -> np.ndarray:
    """
    log(1 + exp(z)), switching to z + log1p(exp(-z)) above 30 so that large
    inputs never overflow.
    """

    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)

    high = z > SOFTPLUS_SWITCH
    out[high] = z[high] + np.log1p(np.exp(-z[high]))
    out[~high] = np.log1p(np.exp(z[~high]))
    return out


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)

    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def activate(z: np.ndarray, mode: ActivationMode) -> np.ndarray:
    if mode == "relu":
        return relu(z)
    elif mode == "softplus":
        return softplus(z)
    else:
        raise ValueError("Unexpected activation mode")


def activation_derivative(z: np.ndarray, mode: ActivationMode) -> np.ndarray:
    if mode == "relu":
        return (z >= 0).astype(np.float64)
    elif mode == "softplus":
        return sigmoid(z)
    else:
        raise ValueError("Unexpected activation mode")


def soft_threshold(w: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - lam, 0.0)


def derive_seeds(seed: int, count: int) -> List[int]:
    """
    Independent child seeds for runs that must not share a random stream.
    """

    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)

    return digest.hexdigest()


def format_float(value: float) -> str:
    return format(value, ".17g")
