# Standard library imports
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.binary_weights import binarize, binary_conv2d_backward_cached, binary_conv2d_forward
from src.models.ensemble import CombineMode, EnsembleCombiner
from src.nn.layers import (
    DenseConvFilter,
    Tensor,
    conv2d_backward,
    conv2d_forward,
    conv_output_hw,
    dropout_backward,
    dropout_forward,
    fully_connected_backward,
    fully_connected_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
)

Shape = Tuple[int, ...]
Grads = Dict[str, Tensor]


class DatasetName(str, Enum):
    MNIST = "mnist"
    CIFAR10 = "cifar10"


class Arch(str, Enum):
    CONVPOOL = "convpool"
    ALLCNN = "allcnn"


class Variant(str, Enum):
    CNN = "cnn"
    BWN = "bwn"
    HIN = "hin"
    BWHIN_NORMAL = "bwhin-normal"
    BWHIN_RANDOM = "bwhin-random"


class InputKind(str, Enum):
    RAW = "raw"
    HADAMARD = "hadamard"


@dataclass
class ForwardContext:
    """
    Per-call switches threaded through every layer.

    Attributes:
        training (bool): Enables dropout.
        rng (np.random.Generator, optional): Dropout randomness.
        multiplication_free (bool): Use the add/subtract-only binary kernel.
        debug_checks (bool): Verify every activation is finite.
    """

    training: bool = False
    rng: Optional[np.random.Generator] = None
    multiplication_free: bool = True
    debug_checks: bool = False


@dataclass(frozen=True)
class Conv:
    name: str
    out_channels: int
    kernel: int
    stride: int = 1
    padding: str = "same"
    binary: bool = False
    bias: bool = False

    def output_shape(self, in_shape: Shape) -> Shape:
        out_h, out_w = conv_output_hw(
            in_shape[1:], (self.kernel, self.kernel), self.stride, self.padding
        )
        return self.out_channels, out_h, out_w

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        shapes = {"W": (self.out_channels, in_shape[0], self.kernel, self.kernel)}
        if self.bias:
            shapes["b"] = (self.out_channels,)
        return shapes

    def forward(self, x, params, prefix, ctx):
        weights = params[f"{prefix}.W"]
        if self.binary:
            return binary_conv2d_forward(
                x, binarize(weights), self.stride, self.padding, ctx.multiplication_free
            )
        bias = params[f"{prefix}.b"] if self.bias else None
        return conv2d_forward(x, DenseConvFilter(weights, bias), self.stride, self.padding)

    def backward(self, dout, cache, params, prefix):
        if self.binary:
            dx, dweights = binary_conv2d_backward_cached(dout, cache)
            return dx, {f"{prefix}.W": dweights}
        dx, dweights, dbias = conv2d_backward(dout, cache, with_bias=self.bias)
        grads = {f"{prefix}.W": dweights}
        if self.bias:
            grads[f"{prefix}.b"] = dbias
        return dx, grads


@dataclass(frozen=True)
class Relu:
    name: str

    def output_shape(self, in_shape: Shape) -> Shape:
        return in_shape

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        return {}

    def forward(self, x, params, prefix, ctx):
        return relu_forward(x)

    def backward(self, dout, cache, params, prefix):
        return relu_backward(dout, cache), {}


@dataclass(frozen=True)
class MaxPool:
    name: str

    def output_shape(self, in_shape: Shape) -> Shape:
        c, h, w = in_shape
        if h % 2 or w % 2:
            raise ValueError(f"max-pooling needs even spatial dims, got {h}x{w}")
        return c, h // 2, w // 2

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        return {}

    def forward(self, x, params, prefix, ctx):
        return maxpool2x2_forward(x)

    def backward(self, dout, cache, params, prefix):
        return maxpool2x2_backward(dout, cache), {}


@dataclass(frozen=True)
class Dropout:
    name: str
    p_keep: float

    def output_shape(self, in_shape: Shape) -> Shape:
        return in_shape

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        return {}

    def forward(self, x, params, prefix, ctx):
        return dropout_forward(x, self.p_keep, ctx.training, ctx.rng)

    def backward(self, dout, cache, params, prefix):
        return dropout_backward(dout, cache), {}


@dataclass(frozen=True)
class Flatten:
    name: str = "flatten"

    def output_shape(self, in_shape: Shape) -> Shape:
        return (int(np.prod(in_shape)),)

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        return {}

    def forward(self, x, params, prefix, ctx):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache, params, prefix):
        return dout.reshape(cache), {}


@dataclass(frozen=True)
class Dense:
    name: str
    units: int

    def output_shape(self, in_shape: Shape) -> Shape:
        return (self.units,)

    def param_shapes(self, in_shape: Shape) -> Dict[str, Shape]:
        return {"W": (self.units, in_shape[0]), "b": (self.units,)}

    def forward(self, x, params, prefix, ctx):
        return fully_connected_forward(x, params[f"{prefix}.W"], params[f"{prefix}.b"])

    def backward(self, dout, cache, params, prefix):
        dx, dweights, dbias = fully_connected_backward(dout, cache, params[f"{prefix}.W"])
        return dx, {f"{prefix}.W": dweights, f"{prefix}.b": dbias}


@dataclass
class Branch:
    """
    One convolutional stack, from its input to its flattened features.

    Attributes:
        name (str): Parameter prefix ("cnn", "bwn" or "hin").
        input_kind (InputKind): Raw pixels or Hadamard-transformed pixels.
        input_shape (tuple): (channels, height, width) of one input image.
        layers (list): Layer specs in execution order, ending with Flatten.
    """

    name: str
    input_kind: InputKind
    input_shape: Shape
    layers: list


@dataclass
class ModelGraph:
    """
    A network of one dataset x architecture x variant, with its parameters.

    BWHIN variants hold two branches whose flattened outputs meet in `combiner`;
    every variant ends with the shared fully-connected head.
    """

    dataset: DatasetName
    arch: Arch
    variant: Variant
    branches: List[Branch]
    head: list
    params: Dict[str, Tensor] = field(default_factory=dict)
    combiner: Optional[EnsembleCombiner] = None
    num_classes: int = 10

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def walk(self) -> Iterator[Tuple[str, object, Shape, Shape]]:
        """
        Yield (prefix, layer, input shape, output shape) for every layer, branches first.
        """
        features = None
        for branch in self.branches:
            shape = branch.input_shape
            for layer in branch.layers:
                out = layer.output_shape(shape)
                yield f"{branch.name}.{layer.name}", layer, shape, out
                shape = out
            features = shape
        for layer in self.head:
            out = layer.output_shape(features)
            yield f"head.{layer.name}", layer, features, out
            features = out

    def declared_shapes(self) -> Dict[str, Shape]:
        return {prefix: out for prefix, _, _, out in self.walk()}

    def trainable_names(self) -> List[str]:
        names = list(self.params)
        if self.combiner is not None and not self.combiner.trainable:
            names.remove("combiner.w")
        return names

    def conv_bias_names(self) -> List[str]:
        return [
            f"{prefix}.b"
            for prefix, layer, _, _ in self.walk()
            if isinstance(layer, Conv) and f"{prefix}.b" in self.params
        ]

    def apply_constraints(self) -> None:
        """
        Keep W_combined inside [0, 1] after an update.
        """
        if self.combiner is not None and self.combiner.mode == CombineMode.WEIGHTED:
            self.combiner.clamp()
