# Standard library imports
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

# Third-party imports
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Tensor = np.ndarray
Pads = Tuple[Tuple[int, int], Tuple[int, int]]
Padding = Union[str, Pads]


@dataclass
class DenseConvFilter:
    """
    Real-valued convolution filter bank.

    Attributes:
        weights (Tensor): Filters shaped (out_channels, in_channels, kh, kw).
        bias (Tensor, optional): One value per output channel; only the plain CNN has it.
    """

    weights: Tensor
    bias: Optional[Tensor] = None


@dataclass
class ConvCache:
    """
    What a convolution's backward pass needs from its forward pass.
    """

    cols: Tensor
    filters2d: Tensor
    x_shape: Tuple[int, ...]
    kernel: Tuple[int, int]
    stride: int
    pads: Pads
    out_hw: Tuple[int, int]


def check_finite(x: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite values in {where}")
    return x


def as_batch(x: Tensor) -> Tensor:
    """
    Promote a single c x H x W image to a batch of one.
    """
    x = np.asarray(x)
    if x.ndim == 3:
        return x[np.newaxis]
    if x.ndim != 4:
        raise ValueError(f"expected a c x H x W image or a batch of them, got shape {x.shape}")
    return x


def same_pads(size: int, kernel: int, stride: int) -> Tuple[int, int]:
    """
    Zero padding giving ceil(size / stride) outputs, split evenly with the extra
    row or column at the bottom/right.
    """
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def resolve_pads(
    hw: Tuple[int, int], kernel: Tuple[int, int], stride: int, padding: Padding
) -> Pads:
    if padding == "same":
        return same_pads(hw[0], kernel[0], stride), same_pads(hw[1], kernel[1], stride)
    if padding == "valid":
        return (0, 0), (0, 0)
    if isinstance(padding, tuple):
        return padding
    raise ValueError(f"Unsupported padding: {padding}")


def conv_output_hw(
    hw: Tuple[int, int], kernel: Tuple[int, int], stride: int, padding: Padding
) -> Tuple[int, int]:
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    (top, bottom), (left, right) = resolve_pads(hw, kernel, stride, padding)
    out_h = (hw[0] + top + bottom - kernel[0]) // stride + 1
    out_w = (hw[1] + left + right - kernel[1]) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ValueError(f"kernel {kernel} does not fit input {hw} with padding {padding}")
    return out_h, out_w


def im2col(
    x: Tensor, kernel: Tuple[int, int], stride: int, pads: Pads
) -> Tuple[Tensor, Tuple[int, int]]:
    """
    Unfold every receptive field of a batch into one row.

    Returns:
        cols of shape (N * out_h * out_w, C * kh * kw), ordered (C, kh, kw) along
        a row like a flattened filter, and the output size (out_h, out_w).
    """
    (top, bottom), (left, right) = pads
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    windows = sliding_window_view(xp, kernel, axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, out_h, out_w = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, -1)
    return cols, (out_h, out_w)


def col2im(
    dcols: Tensor,
    x_shape: Tuple[int, ...],
    kernel: Tuple[int, int],
    stride: int,
    pads: Pads,
    out_hw: Tuple[int, int],
) -> Tensor:
    """
    Scatter-add unfolded gradients back onto the input grid (inverse of im2col).
    """
    n, c, h, w = x_shape
    kh, kw = kernel
    out_h, out_w = out_hw
    (top, bottom), (left, right) = pads
    d = dcols.reshape(n, out_h, out_w, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    dxp = np.zeros((n, c, h + top + bottom, w + left + right), dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += d[
                :, :, i, j
            ]
    return dxp[:, :, top : top + h, left : left + w]


def check_conv_shapes(x: Tensor, weights: Tensor) -> None:
    if weights.ndim != 4 or x.shape[1] != weights.shape[1]:
        raise ValueError(f"shape mismatch: input {x.shape} vs filter {weights.shape}")


def conv2d_forward(
    x: Tensor, filt: DenseConvFilter, stride: int = 1, padding: Padding = "same"
) -> Tuple[Tensor, ConvCache]:
    """
    Cross-correlation of a batch with a dense filter bank (no kernel flip).

    Args:
        x (Tensor): Input of shape (N, C, H, W) or (C, H, W).
        filt (DenseConvFilter): Filters and optional bias.
        stride (int): Step between receptive fields.
        padding: "same", "valid" or explicit ((top, bottom), (left, right)).

    Returns:
        The output (N, F, out_h, out_w) and the cache for `conv2d_backward`.
    """
    x = as_batch(x)
    weights = filt.weights
    check_conv_shapes(x, weights)
    kernel = weights.shape[2:]
    conv_output_hw(x.shape[2:], kernel, stride, padding)
    pads = resolve_pads(x.shape[2:], kernel, stride, padding)
    cols, out_hw = im2col(x, kernel, stride, pads)
    filters2d = weights.reshape(weights.shape[0], -1)
    out = cols @ filters2d.T
    if filt.bias is not None:
        out = out + filt.bias
    out = out.reshape(x.shape[0], *out_hw, -1).transpose(0, 3, 1, 2)
    return out, ConvCache(cols, filters2d, x.shape, kernel, stride, pads, out_hw)


def conv2d_backward(
    dout: Tensor, cache: ConvCache, with_bias: bool = True
) -> Tuple[Tensor, Tensor, Optional[Tensor]]:
    """
    Gradients of a convolution with respect to its input, filters and bias.
    """
    n_filters = cache.filters2d.shape[0]
    expected = (cache.x_shape[0], n_filters, *cache.out_hw)
    if dout.shape != expected:
        raise ValueError(f"shape mismatch: grad_out {dout.shape} vs output {expected}")
    dout2d = dout.transpose(0, 2, 3, 1).reshape(-1, n_filters)
    dweights = (dout2d.T @ cache.cols).reshape(
        n_filters, cache.x_shape[1], *cache.kernel
    )
    dbias = dout2d.sum(axis=0) if with_bias else None
    dcols = dout2d @ cache.filters2d
    dx = col2im(dcols, cache.x_shape, cache.kernel, cache.stride, cache.pads, cache.out_hw)
    return dx, dweights, dbias


def maxpool2x2_forward(x: Tensor) -> Tuple[Tensor, tuple]:
    """
    Non-overlapping 2x2 max-pooling with stride 2.

    Ties go to the first element of the window in row-major order.
    """
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"max-pooling needs even spatial dims, got {h}x{w}")
    windows = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., np.newaxis], axis=-1)[..., 0]
    return out, (x.shape, arg)


def maxpool2x2_backward(dout: Tensor, cache: tuple) -> Tensor:
    shape, arg = cache
    n, c, h, w = shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., np.newaxis], dout[..., np.newaxis], axis=-1)
    return (
        dwin.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(shape)
    )


def relu_forward(x: Tensor) -> Tuple[Tensor, Tensor]:
    mask = x > 0
    return np.where(mask, x, 0).astype(x.dtype, copy=False), mask


def relu_backward(dout: Tensor, mask: Tensor) -> Tensor:
    return np.where(mask, dout, 0).astype(dout.dtype, copy=False)


def fully_connected_forward(x: Tensor, weights: Tensor, bias: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Affine layer `x @ W.T + b` over a batch of flat vectors.

    Args:
        x (Tensor): Input (N, in) or a single vector (in,).
        weights (Tensor): Weights shaped (out, in).
        bias (Tensor): Bias shaped (out,).
    """
    x2d = np.atleast_2d(x)
    if weights.ndim != 2 or x2d.shape[1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise ValueError(
            f"shape mismatch: input {x.shape} vs weights {weights.shape} / bias {bias.shape}"
        )
    out = x2d @ weights.T + bias
    return (out if x.ndim == 2 else out[0]), x2d


def fully_connected_backward(
    dout: Tensor, x2d: Tensor, weights: Tensor
) -> Tuple[Tensor, Tensor, Tensor]:
    dout2d = np.atleast_2d(dout)
    dx = dout2d @ weights
    return (dx if dout.ndim == 2 else dx[0]), dout2d.T @ x2d, dout2d.sum(axis=0)


def dropout_forward(
    x: Tensor, p_keep: float, training: bool, rng: Optional[np.random.Generator]
) -> Tuple[Tensor, Optional[Tensor]]:
    """
    Inverted dropout: survivors are scaled by 1/p_keep at training time, so
    inference is the identity.

    Returns:
        The output and the scaled keep-mask (None when nothing was dropped).
    """
    if not 0.0 < p_keep <= 1.0:
        raise ValueError(f"keep probability must be in (0, 1], got {p_keep}")
    if not training or p_keep == 1.0:
        return x, None
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    mask = (rng.random(x.shape) < p_keep).astype(x.dtype) / x.dtype.type(p_keep)
    return x * mask, mask


def dropout_backward(dout: Tensor, mask: Optional[Tensor]) -> Tensor:
    return dout if mask is None else dout * mask


def _bound_infinite(logits: Tensor) -> Tensor:
    # +/-inf become finite extremes: an infinitely dominant class then gets probability 1.
    if np.all(np.isfinite(logits)):
        return logits
    bound = np.finfo(logits.dtype).max / 2
    return np.nan_to_num(logits, nan=np.nan, posinf=bound, neginf=-bound)


def softmax(logits: Tensor) -> Tensor:
    logits = _bound_infinite(logits)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_xent(logits: Tensor, labels) -> Tuple[float, Tensor]:
    """
    Mean softmax cross-entropy and its gradient with respect to the logits.

    Args:
        logits (Tensor): Scores (N, K) or a single vector (K,).
        labels: Class indices (N,) or a single index.

    Returns:
        The mean loss and softmax(logits) - onehot(labels), divided by N.
    """
    single = logits.ndim == 1
    logits2d = np.atleast_2d(_bound_infinite(logits))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape[0] != logits2d.shape[0]:
        raise ValueError(f"shape mismatch: logits {logits.shape} vs labels {labels.shape}")
    rows = np.arange(labels.shape[0])
    shifted = logits2d - logits2d.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[rows, labels]))
    grad = softmax(logits2d)
    grad[rows, labels] -= 1.0
    grad /= labels.shape[0]
    return loss, (grad[0] if single else grad)
