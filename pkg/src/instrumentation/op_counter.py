# Standard library imports
from dataclasses import dataclass
from typing import List

# Third-party imports
import numpy as np

# Local application imports
from src.instrumentation.tally import OpTally
from src.models.ensemble import CombineMode
from src.models.graph import Conv, Dense, Dropout, Flatten, InputKind, MaxPool, ModelGraph, Relu
from src.models.network import densify


@dataclass
class OpCounter:
    """
    Arithmetic operations one layer performs on a single image at inference.

    Attributes:
        layer (str): Layer name, e.g. "bwn.conv1", "hin.fwht" or "combiner".
        multiplies (int): Multiplications.
        adds_subs (int): Additions and subtractions.
        comparisons (int): Comparisons (ReLU, max-pooling).
    """

    layer: str
    multiplies: int = 0
    adds_subs: int = 0
    comparisons: int = 0

    def as_tally(self) -> OpTally:
        return OpTally(self.multiplies, self.adds_subs, self.comparisons)


@dataclass
class OpSummary:
    """
    Forward-pass totals of a model, next to the multiplies its dense twin would need.
    """

    multiplies: int
    adds_subs: int
    comparisons: int
    conv_multiplies: int
    dense_multiplies: int

    @property
    def multiply_reduction(self) -> float:
        return self.dense_multiplies / self.multiplies if self.multiplies else float("inf")


def fwht_ops(shape) -> OpCounter:
    """
    Operations of the scaled 2-D transform of a (c, H, W) input whose sides are
    powers of two: N log2 N adds per row and per column, one multiply per element.
    """
    c, h, w = shape
    log_h, log_w = int(h).bit_length() - 1, int(w).bit_length() - 1
    return OpCounter("fwht", multiplies=c * h * w, adds_subs=c * h * w * (log_h + log_w))


def layer_ops(name: str, layer, in_shape, out_shape) -> OpCounter:
    out_elems = int(np.prod(out_shape))
    if isinstance(layer, Conv):
        n = in_shape[0] * layer.kernel * layer.kernel
        adds = out_elems * (n - 1) + (out_elems if layer.bias else 0)
        mults = out_elems if layer.binary else out_elems * n
        return OpCounter(name, multiplies=mults, adds_subs=adds)
    if isinstance(layer, Dense):
        fan_in = in_shape[0]
        return OpCounter(name, multiplies=fan_in * layer.units, adds_subs=fan_in * layer.units)
    if isinstance(layer, Relu):
        return OpCounter(name, comparisons=out_elems)
    if isinstance(layer, MaxPool):
        return OpCounter(name, comparisons=3 * out_elems)
    if isinstance(layer, (Dropout, Flatten)):
        return OpCounter(name)
    raise ValueError(f"Unsupported layer type: {type(layer).__name__}")


def combine_ops(model: ModelGraph, length: int) -> OpCounter:
    if model.combiner.mode == CombineMode.SIMPLE:
        return OpCounter("combiner", multiplies=length, adds_subs=length)
    # 1 - W is formed once per image.
    return OpCounter("combiner", multiplies=2 * length, adds_subs=length + 1)


def count_forward_ops(model: ModelGraph) -> List[OpCounter]:
    """
    Per-layer operation counts of one inference forward pass on a single image.

    The counts depend only on layer shapes and the variant: a binary convolution
    costs one multiply per output element (alpha) where the dense one costs n, and
    a Hadamard branch pays for transforming its input. Dropout is free at inference.

    Args:
        model (ModelGraph): The network.

    Returns:
        list[OpCounter]: One entry per layer in execution order, branches first.
    """
    counters = []
    features = None
    for branch in model.branches:
        shape = branch.input_shape
        if branch.input_kind == InputKind.HADAMARD:
            fwht = fwht_ops(shape)
            fwht.layer = f"{branch.name}.fwht"
            counters.append(fwht)
        for layer in branch.layers:
            out = layer.output_shape(shape)
            counters.append(layer_ops(f"{branch.name}.{layer.name}", layer, shape, out))
            shape = out
        features = shape
    if model.combiner is not None:
        counters.append(combine_ops(model, int(np.prod(features))))
    for layer in model.head:
        out = layer.output_shape(features)
        counters.append(layer_ops(f"head.{layer.name}", layer, features, out))
        features = out
    return counters


def total_ops(counters: List[OpCounter]) -> OpTally:
    total = OpTally()
    for counter in counters:
        total.add(counter.as_tally())
    return total


def conv_multiplies(model: ModelGraph, counters: List[OpCounter]) -> int:
    conv_names = {prefix for prefix, layer, _, _ in model.walk() if isinstance(layer, Conv)}
    return sum(c.multiplies for c in counters if c.layer in conv_names)


def summarize_ops(model: ModelGraph) -> OpSummary:
    """
    Totals of `count_forward_ops` plus the multiplies of the same network with
    every binary convolution computed densely.
    """
    counters = count_forward_ops(model)
    total = total_ops(counters)
    dense = total_ops(count_forward_ops(densify(model)))
    return OpSummary(
        multiplies=total.multiplies,
        adds_subs=total.adds_subs,
        comparisons=total.comparisons,
        conv_multiplies=conv_multiplies(model, counters),
        dense_multiplies=dense.multiplies,
    )
