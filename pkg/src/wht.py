# Standard library imports
import math
from dataclasses import dataclass
from typing import Optional

# Third-party imports
import numpy as np

# Local application imports
from src.instrumentation.tally import OpTally


@dataclass(frozen=True)
class TransformPlan:
    """
    Sizes of a 1-D Hadamard-ordered Walsh-Hadamard transform.

    Attributes:
        input_length (int): Length of the signal before padding.
        padded_length (int): Smallest power of two >= input_length.
        m (int): log2(padded_length).
        apply_scaling (bool): Whether the orthonormal (1/sqrt(2))**m factor is applied.
    """

    input_length: int
    padded_length: int
    m: int
    apply_scaling: bool = True

    @property
    def scale(self) -> float:
        return (1.0 / math.sqrt(2.0)) ** self.m if self.apply_scaling else 1.0


def plan_transform(length: int, apply_scaling: bool = True) -> TransformPlan:
    """
    Compute the padded size of a transform over `length` samples.

    Raises:
        ValueError: If `length` is not positive.
    """
    if length <= 0:
        raise ValueError("empty array")
    m = (length - 1).bit_length()
    return TransformPlan(length, 1 << m, m, apply_scaling)


def is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _pad_axis(x: np.ndarray, axis: int) -> np.ndarray:
    plan = plan_transform(x.shape[axis])
    extra = plan.padded_length - plan.input_length
    if extra == 0:
        return x
    widths = [(0, 0)] * x.ndim
    widths[axis] = (0, extra)
    return np.pad(x, widths)


def pad_to_pow2(x: np.ndarray) -> np.ndarray:
    """
    Append zeros to a 1-D array up to the next power of two.

    Args:
        x (np.ndarray): Non-empty 1-D array.

    Returns:
        np.ndarray: The padded array; `x` itself when its length is already a power of two.

    Raises:
        ValueError: If `x` is empty or not 1-D.
    """
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("empty array")
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {x.shape}")
    return _pad_axis(x, 0)


def _butterfly(x: np.ndarray, axis: int, tally: Optional[OpTally] = None) -> np.ndarray:
    # In-place butterfly, vectorised over every other axis. Additions and subtractions only.
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    lead = x.shape[:-1]
    h = 1
    while h < n:
        pairs = x.reshape(*lead, n // (2 * h), 2, h)
        a = pairs[..., 0, :]
        b = pairs[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2).reshape(*lead, n)
        h *= 2
    if tally is not None:
        vectors = int(np.prod(lead, dtype=np.int64))
        tally.adds_subs += vectors * n * (n.bit_length() - 1)
    return np.moveaxis(x, -1, axis)


def _apply_scale(x: np.ndarray, m: int, tally: Optional[OpTally]) -> np.ndarray:
    # One multiply per element for the whole (1/sqrt(2))**m factor.
    if tally is not None:
        tally.multiplies += x.size
    return x * ((1.0 / math.sqrt(2.0)) ** m)


def fwht1d(
    x: np.ndarray, apply_scaling: bool = True, tally: Optional[OpTally] = None
) -> np.ndarray:
    """
    Hadamard-ordered fast Walsh-Hadamard transform of a 1-D array.

    The butterfly core uses only additions and subtractions; when `apply_scaling`
    is set the orthonormal factor is applied afterwards as one multiply per element.

    Args:
        x (np.ndarray): 1-D array whose length is a power of two.
        apply_scaling (bool): Apply (1/sqrt(2))**m so the transform is orthonormal.
        tally (OpTally, optional): Receives the operation counts.

    Returns:
        np.ndarray: The transform, in double precision.

    Raises:
        ValueError: If `x` is empty or its length is not a power of two.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty array")
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {x.shape}")
    if not is_pow2(x.shape[0]):
        raise ValueError("length must be power of two")
    out = _butterfly(x, 0, tally)
    if apply_scaling:
        out = _apply_scale(out, x.shape[0].bit_length() - 1, tally)
    return out


def fwht2d(
    img: np.ndarray,
    apply_scaling: bool = True,
    tally: Optional[OpTally] = None,
    rows_first: bool = True,
) -> np.ndarray:
    """
    2-D Hadamard transform by separable row and column passes.

    Each axis is zero-padded at its high-index end to the next power of two first,
    so a 28x28 image becomes a 32x32 transform.

    Args:
        img (np.ndarray): Non-empty 2-D array.
        apply_scaling (bool): Apply the orthonormal factor of both axes.
        tally (OpTally, optional): Receives the operation counts.
        rows_first (bool): Transform rows before columns (the result is the same
            either way up to rounding).

    Returns:
        np.ndarray: The padded transform, in double precision.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty array")
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {img.shape}")
    return fwht_images(img, apply_scaling, tally, rows_first)


def fwht_images(
    images: np.ndarray,
    apply_scaling: bool = True,
    tally: Optional[OpTally] = None,
    rows_first: bool = True,
) -> np.ndarray:
    """
    Apply the 2-D transform to the last two axes of a stack of images.

    Every leading index (batch, channel) is transformed independently.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.size == 0:
        raise ValueError("empty array")
    padded = _pad_axis(_pad_axis(images, -1), -2)
    axes = (-1, -2) if rows_first else (-2, -1)
    out = padded
    for axis in axes:
        out = _butterfly(out, axis, tally)
    if apply_scaling:
        m = (padded.shape[-1].bit_length() - 1) + (padded.shape[-2].bit_length() - 1)
        out = _apply_scale(out, m, tally)
    return out


def hadamard_matrix(n: int) -> np.ndarray:
    """
    Unscaled Hadamard-ordered matrix of size n, built by Sylvester recursion.
    """
    if not is_pow2(n):
        raise ValueError("length must be power of two")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h
