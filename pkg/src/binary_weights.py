# Standard library imports
from dataclasses import dataclass
from typing import Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.nn.layers import (
    ConvCache,
    DenseConvFilter,
    Padding,
    Tensor,
    check_conv_shapes,
    as_batch,
    conv2d_backward,
    conv_output_hw,
    im2col,
    resolve_pads,
)


@dataclass(frozen=True)
class BinaryFilter:
    """
    A filter bank approximated as W ~ alpha * B.

    Attributes:
        real_weights (Tensor): Real-valued W, (out_channels, c, h, w). Kept for updates.
        binary_weights (Tensor): sign(W) with sign(0) = +1; entries are exactly +1 or -1.
        alpha (Tensor): Mean absolute weight of each output filter, shape (out_channels,).
    """

    real_weights: Tensor
    binary_weights: Tensor
    alpha: Tensor

    @property
    def n(self) -> int:
        """Elements per filter, c * h * w."""
        return int(np.prod(self.real_weights.shape[1:]))

    def effective(self) -> Tensor:
        """The real-valued filter alpha * B the binary convolution stands for."""
        return self.alpha[:, None, None, None] * self.binary_weights


def binarize(weights: Tensor) -> BinaryFilter:
    """
    Split a filter bank into its signs and per-filter scaling factors.

    Args:
        weights (Tensor): Non-empty, finite filters shaped (out_channels, c, h, w).

    Returns:
        BinaryFilter: B = sign(W) and alpha = mean(|W|) per output filter.

    Raises:
        ValueError: On empty, non 4-D or non-finite weights.
    """
    weights = np.asarray(weights)
    if weights.size == 0:
        raise ValueError("empty array")
    if weights.ndim != 4:
        raise ValueError(f"expected filters shaped (out, c, h, w), got {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise ValueError("non-finite weight")
    signs = np.where(weights >= 0, 1, -1).astype(weights.dtype)
    alpha = np.abs(weights).reshape(weights.shape[0], -1).mean(axis=1)
    return BinaryFilter(weights, signs, alpha)


def signed_accumulate(cols: Tensor, signs2d: Tensor, multiplication_free: bool = True) -> Tensor:
    """
    Sum every row of `cols` with the +/- signs of each filter (the I (+) B operation).

    With `multiplication_free` the sums are formed from selected columns with
    additions and subtractions only; otherwise a matrix product against the
    +/-1 matrix computes the same sums through BLAS.

    Args:
        cols (Tensor): Unfolded receptive fields, (positions, n).
        signs2d (Tensor): Flattened binary filters, (out_channels, n).

    Returns:
        Tensor: Signed sums, (positions, out_channels).
    """
    if not multiplication_free:
        return cols @ signs2d.T
    out = np.empty((cols.shape[0], signs2d.shape[0]), dtype=cols.dtype)
    for o, row in enumerate(signs2d):
        positive = row > 0
        out[:, o] = cols[:, positive].sum(axis=1) - cols[:, ~positive].sum(axis=1)
    return out


def binary_conv2d_forward(
    x: Tensor,
    filt: BinaryFilter,
    stride: int = 1,
    padding: Padding = "same",
    multiplication_free: bool = True,
) -> Tuple[Tensor, ConvCache]:
    """
    Convolution approximated as (I (+) B) * alpha.

    The accumulation uses only the signs in B; alpha is applied with one multiply
    per output element. There is no bias.

    Args:
        x (Tensor): Input (N, c, H, W) or (c, H, W).
        filt (BinaryFilter): Binarized filter bank.
        stride (int): Step between receptive fields.
        padding: "same", "valid" or explicit pads.
        multiplication_free (bool): Use the add/subtract-only accumulation kernel.

    Returns:
        The output (N, out_channels, out_h, out_w) and a cache whose filters are
        the effective alpha * B, for `binary_conv2d_backward_cached`.
    """
    x = as_batch(x)
    signs = filt.binary_weights
    check_conv_shapes(x, signs)
    kernel = signs.shape[2:]
    conv_output_hw(x.shape[2:], kernel, stride, padding)
    pads = resolve_pads(x.shape[2:], kernel, stride, padding)
    cols, out_hw = im2col(x, kernel, stride, pads)
    signs2d = signs.reshape(signs.shape[0], -1)
    out = signed_accumulate(cols, signs2d, multiplication_free) * filt.alpha.astype(cols.dtype)
    out = out.reshape(x.shape[0], *out_hw, -1).transpose(0, 3, 1, 2)
    effective2d = filt.effective().reshape(signs.shape[0], -1).astype(cols.dtype)
    return out, ConvCache(cols, effective2d, x.shape, kernel, stride, pads, out_hw)


def binary_conv2d_backward_cached(dout: Tensor, cache: ConvCache) -> Tuple[Tensor, Tensor]:
    """
    Input and weight gradients through the effective filter alpha * B.

    The weight gradient is the gradient with respect to alpha * B; the optimizer
    applies it to the real-valued weights.
    """
    dx, dweights, _ = conv2d_backward(dout, cache, with_bias=False)
    return dx, dweights


def binary_conv2d_backward(
    dout: Tensor, x: Tensor, filt: BinaryFilter, stride: int = 1, padding: Padding = "same"
) -> Tuple[Tensor, Tensor]:
    """
    Same as `binary_conv2d_backward_cached`, recomputing the unfolded input from `x`.
    """
    x = as_batch(x)
    check_conv_shapes(x, filt.binary_weights)
    kernel = filt.binary_weights.shape[2:]
    pads = resolve_pads(x.shape[2:], kernel, stride, padding)
    cols, out_hw = im2col(x, kernel, stride, pads)
    effective2d = filt.effective().reshape(filt.binary_weights.shape[0], -1)
    cache = ConvCache(cols, effective2d.astype(cols.dtype), x.shape, kernel, stride, pads, out_hw)
    return binary_conv2d_backward_cached(as_batch(dout), cache)


def effective_filter(filt: BinaryFilter) -> DenseConvFilter:
    """
    The dense, bias-free filter equivalent to a binary one.
    """
    return DenseConvFilter(filt.effective())
