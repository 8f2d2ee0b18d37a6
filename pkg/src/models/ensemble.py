# Standard library imports
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

# Third-party imports
import numpy as np

Tensor = np.ndarray


class CombineMode(str, Enum):
    SIMPLE = "simple"
    WEIGHTED = "weighted"


@dataclass
class EnsembleCombiner:
    """
    Averages the flattened outputs of the binary and Hadamard branches.

    Attributes:
        mode (CombineMode): SIMPLE uses a fixed 0.5; WEIGHTED uses `weight`.
        weight (Tensor): W_combined as a one-element array, shared with the model's
            parameter dict so optimizer updates land here.
        trainable (bool): Whether W_combined receives gradients.
    """

    mode: CombineMode
    weight: Tensor
    trainable: bool = True

    @property
    def value(self) -> float:
        return 0.5 if self.mode == CombineMode.SIMPLE else float(self.weight[0])

    def clamp(self) -> None:
        np.clip(self.weight, 0.0, 1.0, out=self.weight)


def truncated_normal(
    rng: np.random.Generator, mean: float, std: float, low: float = 0.0, high: float = 1.0
) -> float:
    """
    One draw from N(mean, std) restricted to [low, high], by rejection.
    """
    while True:
        sample = rng.normal(mean, std)
        if low <= sample <= high:
            return float(sample)


def make_combiner(
    mode: CombineMode,
    rng: np.random.Generator,
    mean: float = 0.5,
    std: float = 0.25,
    trainable: bool = True,
    dtype=np.float32,
) -> EnsembleCombiner:
    mode = CombineMode(mode)
    if mode == CombineMode.SIMPLE:
        return EnsembleCombiner(mode, np.array([0.5], dtype=dtype), trainable=False)
    weight = np.array([truncated_normal(rng, mean, std)], dtype=dtype)
    return EnsembleCombiner(mode, weight, trainable)


def _check_lengths(yy_b: Tensor, yy_h: Tensor) -> None:
    if yy_b.shape != yy_h.shape:
        raise ValueError(
            f"branch outputs differ: binary {yy_b.shape} vs hadamard {yy_h.shape}; "
            "the Hadamard branch's first convolution must bring its feature maps "
            "back to the raw branch's size before they can be averaged"
        )


def combine(yy_b: Tensor, yy_h: Tensor, combiner: EnsembleCombiner) -> Tensor:
    """
    YY_combined = W * YY_binary + (1 - W) * YY_hadamard.

    In SIMPLE mode this is the elementwise mean of both branches.
    """
    _check_lengths(yy_b, yy_h)
    if combiner.mode == CombineMode.SIMPLE:
        return (yy_b + yy_h) * yy_b.dtype.type(0.5)
    w = combiner.weight[0]
    return w * yy_b + (1 - w) * yy_h


def combine_backward(
    dout: Tensor, yy_b: Tensor, yy_h: Tensor, combiner: EnsembleCombiner
) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Gradients of `combine` with respect to both branch outputs and W_combined.

    Returns:
        d_binary, d_hadamard and d_weight (a one-element array; zero in SIMPLE mode).
    """
    w = combiner.weight.dtype.type(combiner.value)
    d_weight = np.zeros_like(combiner.weight)
    if combiner.mode == CombineMode.WEIGHTED:
        d_weight[0] = np.sum(dout * (yy_b - yy_h))
    return dout * w, dout * (1 - w), d_weight
