# Standard library imports
import copy
import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

# Third-party imports
import numpy as np

# Local application imports
from src.binary_weights import binarize, effective_filter
from src.models.ensemble import combine, combine_backward
from src.models.graph import Conv, ForwardContext, Grads, InputKind, ModelGraph
from src.nn.layers import Tensor, check_finite, softmax_xent
from src.wht import fwht_images

Inputs = Union[Tensor, Dict[InputKind, Tensor]]


@dataclass
class ForwardCache:
    """
    Everything `backward` needs from one forward pass.
    """

    branch_caches: List[list] = field(default_factory=list)
    branch_outputs: List[Tensor] = field(default_factory=list)
    head_caches: list = field(default_factory=list)
    shapes: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    logits: Optional[Tensor] = None


def prepare_inputs(model: ModelGraph, images: Tensor) -> Dict[InputKind, Tensor]:
    """
    Turn a batch of raw [0, 1] images into the inputs each branch expects.

    The Hadamard branch gets the per-channel orthonormal 2-D transform, computed in
    double precision and cast to the model's precision.
    """
    dtype = model.dtype
    inputs = {}
    for branch in model.branches:
        if branch.input_kind == InputKind.HADAMARD:
            inputs[branch.input_kind] = fwht_images(images).astype(dtype)
        else:
            inputs[branch.input_kind] = np.asarray(images, dtype=dtype)
    return inputs


def _branch_input(model: ModelGraph, branch, inputs: Inputs) -> Tensor:
    if isinstance(inputs, dict):
        if branch.input_kind not in inputs:
            raise ValueError(f"missing {branch.input_kind.value} input for branch {branch.name}")
        x = inputs[branch.input_kind]
    elif len(model.branches) == 1:
        x = inputs
    else:
        raise ValueError(
            f"{model.variant.value} needs raw and hadamard inputs; use prepare_inputs()"
        )
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(branch.input_shape):
        raise ValueError(
            f"input shape {tuple(x.shape[1:])} does not match {model.variant.value} "
            f"branch {branch.name}, which expects {tuple(branch.input_shape)}"
        )
    return x


def _run_layers(layers, x, params, prefix, ctx, cache: ForwardCache, store: list) -> Tensor:
    for layer in layers:
        name = f"{prefix}.{layer.name}"
        x, layer_cache = layer.forward(x, params, name, ctx)
        if ctx.debug_checks:
            check_finite(x, name)
        cache.shapes[name] = tuple(x.shape[1:])
        store.append(layer_cache)
    return x


def forward(
    model: ModelGraph,
    inputs: Inputs,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    multiplication_free: bool = True,
    debug_checks: bool = False,
) -> Tuple[Tensor, ForwardCache]:
    """
    Run a batch through every branch, the combiner and the shared head.

    Args:
        model (ModelGraph): The network.
        inputs: A dict of inputs per InputKind (see `prepare_inputs`), or a single
            array for one-branch models.
        training (bool): Apply dropout.
        rng (np.random.Generator, optional): Dropout randomness, needed when training.
        multiplication_free (bool): Use the add/subtract-only binary kernel.
        debug_checks (bool): Fail on the first non-finite activation.

    Returns:
        The logits (N, num_classes) and the cache for `backward`.

    Raises:
        ValueError: If an input does not have the shape its branch expects.
    """
    ctx = ForwardContext(training, rng, multiplication_free, debug_checks)
    cache = ForwardCache()
    for branch in model.branches:
        x = _branch_input(model, branch, inputs)
        store = []
        x = _run_layers(branch.layers, x, model.params, branch.name, ctx, cache, store)
        cache.branch_caches.append(store)
        cache.branch_outputs.append(x)

    if model.combiner is not None:
        features = combine(*cache.branch_outputs, model.combiner)
    else:
        features = cache.branch_outputs[0]
    cache.logits = _run_layers(
        model.head, features, model.params, "head", ctx, cache, cache.head_caches
    )
    return cache.logits, cache


def _back_layers(layers, dout, caches, params, prefix, grads: Grads) -> Tensor:
    for layer, layer_cache in zip(reversed(layers), reversed(caches)):
        dout, layer_grads = layer.backward(dout, layer_cache, params, f"{prefix}.{layer.name}")
        grads.update(layer_grads)
    return dout


def backward(model: ModelGraph, cache: ForwardCache, labels) -> Tuple[float, Grads]:
    """
    Softmax cross-entropy loss and the gradient of every trainable parameter.

    Binary convolutions report the gradient of their effective filter alpha * B;
    W_combined gets a gradient only when it is trainable.

    Returns:
        The mean loss of the batch and a dict of gradients by parameter name.
    """
    loss, dlogits = softmax_xent(cache.logits, labels)
    grads: Grads = {}
    dfeatures = _back_layers(model.head, dlogits, cache.head_caches, model.params, "head", grads)

    if model.combiner is not None:
        d_binary, d_hadamard, d_weight = combine_backward(
            dfeatures, *cache.branch_outputs, model.combiner
        )
        douts = [d_binary, d_hadamard]
        if model.combiner.trainable:
            grads["combiner.w"] = d_weight
    else:
        douts = [dfeatures]

    for branch, store, dout in zip(model.branches, cache.branch_caches, douts):
        _back_layers(branch.layers, dout, store, model.params, branch.name, grads)
    return loss, grads


def predict(model: ModelGraph, images: Tensor, batch_size: int = 1000, **kwargs) -> np.ndarray:
    """
    Class index of the largest logit per image; ties resolve to the lowest index.
    """
    labels = []
    for start in range(0, images.shape[0], batch_size):
        chunk = prepare_inputs(model, images[start : start + batch_size])
        logits, _ = forward(model, chunk, training=False, **kwargs)
        labels.append(np.argmax(logits, axis=1))
    return np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)


def evaluate(
    model: ModelGraph, images: Tensor, labels: np.ndarray, batch_size: int = 1000, **kwargs
) -> Tuple[float, float]:
    """
    Mean loss and accuracy over a dataset, in inference mode.
    """
    total_loss, correct = 0.0, 0
    for start in range(0, images.shape[0], batch_size):
        chunk_labels = labels[start : start + batch_size]
        chunk = prepare_inputs(model, images[start : start + batch_size])
        logits, _ = forward(model, chunk, training=False, **kwargs)
        loss, _ = softmax_xent(logits, chunk_labels)
        total_loss += loss * chunk_labels.shape[0]
        correct += int(np.sum(np.argmax(logits, axis=1) == chunk_labels))
    count = max(images.shape[0], 1)
    return total_loss / count, correct / count


def densify(model: ModelGraph) -> ModelGraph:
    """
    Copy of `model` with every binary convolution replaced by a bias-free dense
    convolution holding alpha * B.

    The copy computes the same function; it is the dense baseline of the same
    shape for operation counting and a differentiable stand-in for gradient checks.
    """
    dense = copy.deepcopy(model)
    for branch in dense.branches:
        for i, layer in enumerate(branch.layers):
            if isinstance(layer, Conv) and layer.binary:
                name = f"{branch.name}.{layer.name}.W"
                filt = effective_filter(binarize(dense.params[name]))
                dense.params[name] = filt.weights.astype(dense.dtype)
                branch.layers[i] = dataclasses.replace(layer, binary=False)
    return dense
