"""
Loop-level forward pass that counts every arithmetic operation as it happens.

The kernels are only practical for tiny models. They check that the closed-form counts of
`op_counter` describe what a scalar implementation does.
"""

# Standard library imports
import math
from typing import List, Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.binary_weights import binarize
from src.instrumentation.op_counter import OpCounter
from src.instrumentation.tally import OpTally
from src.models.ensemble import CombineMode
from src.models.graph import Conv, Dense, Dropout, Flatten, InputKind, MaxPool, ModelGraph, Relu
from src.nn.layers import resolve_pads


def fwht_loops(image: np.ndarray, tally: OpTally) -> np.ndarray:
    c, h, w = image.shape
    out = image.astype(np.float64).copy()

    def butterfly(vec):
        n = len(vec)
        step = 1
        while step < n:
            for start in range(0, n, 2 * step):
                for i in range(start, start + step):
                    a, b = vec[i], vec[i + step]
                    vec[i] = a + b
                    vec[i + step] = a - b
                    tally.adds_subs += 2
            step *= 2

    for ch in range(c):
        for row in range(h):
            vec = list(out[ch, row])
            butterfly(vec)
            out[ch, row] = vec
        for col in range(w):
            vec = list(out[ch, :, col])
            butterfly(vec)
            out[ch, :, col] = vec
    scale = (1.0 / math.sqrt(2.0)) ** (int(h).bit_length() - 1 + int(w).bit_length() - 1)
    for idx in np.ndindex(out.shape):
        out[idx] *= scale
        tally.multiplies += 1
    return out


def conv_loops(x: np.ndarray, layer: Conv, weights, bias, tally: OpTally) -> np.ndarray:
    c, h, w = x.shape
    k, s = layer.kernel, layer.stride
    (top, bottom), (left, right) = resolve_pads((h, w), (k, k), s, layer.padding)
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right)))
    out_h = (h + top + bottom - k) // s + 1
    out_w = (w + left + right - k) // s + 1
    out = np.zeros((layer.out_channels, out_h, out_w))
    if layer.binary:
        filt = binarize(weights)
        signs, alpha = filt.binary_weights, filt.alpha
    for o in range(layer.out_channels):
        for oy in range(out_h):
            for ox in range(out_w):
                acc = None
                for ci in range(c):
                    for i in range(k):
                        for j in range(k):
                            value = float(xp[ci, oy * s + i, ox * s + j])
                            if layer.binary:
                                # Sign selects add or subtract; the first term seeds the sum.
                                term = value if signs[o, ci, i, j] > 0 else -value
                            else:
                                term = value * float(weights[o, ci, i, j])
                                tally.multiplies += 1
                            if acc is None:
                                acc = term
                            else:
                                acc += term
                                tally.adds_subs += 1
                if layer.binary:
                    acc *= float(alpha[o])
                    tally.multiplies += 1
                elif bias is not None:
                    acc += float(bias[o])
                    tally.adds_subs += 1
                out[o, oy, ox] = acc
    return out


def dense_loops(x: np.ndarray, weights, bias, tally: OpTally) -> np.ndarray:
    out = np.zeros(weights.shape[0])
    for o in range(weights.shape[0]):
        acc = float(bias[o])
        for i in range(weights.shape[1]):
            acc += float(x[i]) * float(weights[o, i])
            tally.multiplies += 1
            tally.adds_subs += 1
        out[o] = acc
    return out


def relu_loops(x: np.ndarray, tally: OpTally) -> np.ndarray:
    out = x.copy()
    for idx in np.ndindex(x.shape):
        tally.comparisons += 1
        if out[idx] < 0:
            out[idx] = 0.0
    return out


def maxpool_loops(x: np.ndarray, tally: OpTally) -> np.ndarray:
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for oy in range(h // 2):
            for ox in range(w // 2):
                window = x[ch, 2 * oy : 2 * oy + 2, 2 * ox : 2 * ox + 2].ravel()
                best = window[0]
                for value in window[1:]:
                    tally.comparisons += 1
                    if value > best:
                        best = value
                out[ch, oy, ox] = best
    return out


def combine_loops(yy_b: np.ndarray, yy_h: np.ndarray, model: ModelGraph, tally: OpTally):
    out = np.zeros_like(yy_b)
    if model.combiner.mode == CombineMode.SIMPLE:
        for i in range(len(out)):
            out[i] = (yy_b[i] + yy_h[i]) * 0.5
            tally.adds_subs += 1
            tally.multiplies += 1
        return out
    w = model.combiner.value
    one_minus_w = 1.0 - w
    tally.adds_subs += 1
    for i in range(len(out)):
        out[i] = w * yy_b[i] + one_minus_w * yy_h[i]
        tally.multiplies += 2
        tally.adds_subs += 1
    return out


def _counter(layer: str, tally: OpTally) -> OpCounter:
    return OpCounter(layer, tally.multiplies, tally.adds_subs, tally.comparisons)


def _run_layer(layer, x, params, prefix, tally: OpTally) -> np.ndarray:
    if isinstance(layer, Conv):
        bias = params.get(f"{prefix}.b") if layer.bias else None
        return conv_loops(x, layer, params[f"{prefix}.W"], bias, tally)
    if isinstance(layer, Dense):
        return dense_loops(x, params[f"{prefix}.W"], params[f"{prefix}.b"], tally)
    if isinstance(layer, Relu):
        return relu_loops(x, tally)
    if isinstance(layer, MaxPool):
        return maxpool_loops(x, tally)
    if isinstance(layer, Flatten):
        return x.reshape(-1)
    if isinstance(layer, Dropout):
        return x
    raise ValueError(f"Unsupported layer type: {type(layer).__name__}")


def reference_forward(model: ModelGraph, image: np.ndarray) -> Tuple[np.ndarray, List[OpCounter]]:
    """
    Run one raw (c, H, W) image through `model` with scalar loops, in inference mode.

    Args:
        model (ModelGraph): The network.
        image (np.ndarray): Raw pixels of one image.

    Returns:
        The logits and the operations each layer actually performed, in the same
        order and naming as `count_forward_ops`.
    """
    counters = []
    outputs = []
    for branch in model.branches:
        x = np.asarray(image, dtype=np.float64)
        if branch.input_kind == InputKind.HADAMARD:
            _, h, w = branch.input_shape
            x = np.pad(x, ((0, 0), (0, h - x.shape[1]), (0, w - x.shape[2])))
            tally = OpTally()
            x = fwht_loops(x, tally)
            counters.append(_counter(f"{branch.name}.fwht", tally))
        for layer in branch.layers:
            tally = OpTally()
            prefix = f"{branch.name}.{layer.name}"
            x = _run_layer(layer, x, model.params, prefix, tally)
            counters.append(_counter(prefix, tally))
        outputs.append(x)

    features = outputs[0]
    if model.combiner is not None:
        tally = OpTally()
        features = combine_loops(outputs[0], outputs[1], model, tally)
        counters.append(_counter("combiner", tally))
    for layer in model.head:
        tally = OpTally()
        prefix = f"head.{layer.name}"
        features = _run_layer(layer, features, model.params, prefix, tally)
        counters.append(_counter(prefix, tally))
    return features, counters
