# Standard library imports
import logging
from typing import List, Optional, Sequence

# Third-party imports
import numpy as np

# Local application imports
from config.config import Config
from src.models.ensemble import CombineMode, make_combiner
from src.models.graph import (
    Arch,
    Branch,
    Conv,
    DatasetName,
    Dense,
    Dropout,
    Flatten,
    InputKind,
    MaxPool,
    ModelGraph,
    Relu,
    Variant,
)
from src.optimizer import init_weights

RAW_SHAPES = {DatasetName.MNIST: (1, 28, 28), DatasetName.CIFAR10: (3, 32, 32)}
HADAMARD_SHAPES = {DatasetName.MNIST: (1, 32, 32), DatasetName.CIFAR10: (3, 32, 32)}
FC_UNITS = {DatasetName.MNIST: 200, DatasetName.CIFAR10: 512}

BRANCHES = {
    Variant.CNN: [("cnn", InputKind.RAW)],
    Variant.BWN: [("bwn", InputKind.RAW)],
    Variant.HIN: [("hin", InputKind.HADAMARD)],
    Variant.BWHIN_NORMAL: [("bwn", InputKind.RAW), ("hin", InputKind.HADAMARD)],
    Variant.BWHIN_RANDOM: [("bwn", InputKind.RAW), ("hin", InputKind.HADAMARD)],
}
COMBINE_MODES = {
    Variant.BWHIN_NORMAL: CombineMode.SIMPLE,
    Variant.BWHIN_RANDOM: CombineMode.WEIGHTED,
}


def _mnist_trunk(arch: Arch, binary: bool, bias: bool, hadamard: bool) -> list:
    # 28x28 raw images keep their size through a 6x6 "same" conv; 32x32 Hadamard
    # images are brought back to 28x28 by a 5x5 "valid" conv instead.
    def conv(name, channels, kernel, stride=1, padding="same"):
        return Conv(name, channels, kernel, stride, padding, binary, bias)

    first = conv("conv1", 6, 5, padding="valid") if hadamard else conv("conv1", 6, 6)
    if arch == Arch.CONVPOOL:
        return [
            first, Relu("relu1"),
            conv("conv2", 12, 5), Relu("relu2"), MaxPool("pool1"),
            conv("conv3", 24, 4), Relu("relu3"), MaxPool("pool2"),
            Flatten(),
        ]  # fmt: skip
    return [
        first, Relu("relu1"),
        conv("conv2", 12, 5, stride=2), Relu("relu2"),
        conv("conv3", 24, 4, stride=2), Relu("relu3"),
        Flatten(),
    ]  # fmt: skip


def _cifar_trunk(arch: Arch, binary: bool, bias: bool, keep: Sequence[float]) -> list:
    def conv(name, channels, stride=1):
        return Conv(name, channels, 3, stride, "same", binary, bias)

    if arch == Arch.CONVPOOL:
        return [
            conv("conv1", 32), Relu("relu1"),
            conv("conv2", 32), Relu("relu2"), MaxPool("pool1"), Dropout("drop1", keep[0]),
            conv("conv3", 64), Relu("relu3"),
            conv("conv4", 64), Relu("relu4"), MaxPool("pool2"), Dropout("drop2", keep[1]),
            Flatten(),
        ]  # fmt: skip
    return [
        conv("conv1", 32), Relu("relu1"),
        conv("conv2", 32, stride=2), Relu("relu2"), Dropout("drop1", keep[0]),
        conv("conv3", 64), Relu("relu3"),
        conv("conv4", 64, stride=2), Relu("relu4"), Dropout("drop2", keep[1]),
        Flatten(),
    ]  # fmt: skip


def head_layers(units: int, keep_fc: float, num_classes: int = 10) -> list:
    return [
        Dense("fc1", units),
        Relu("relu_fc"),
        Dropout("drop_fc", keep_fc),
        Dense("fc2", num_classes),
    ]


def assemble_model(
    dataset: DatasetName,
    arch: Arch,
    variant: Variant,
    branches: List[Branch],
    head: list,
    rng: np.random.Generator,
    weight_init: str = "normal",
    weight_std: float = 0.1,
    bias_init: float = 0.1,
    dtype=np.float32,
    w_combined_frozen: bool = False,
    w_combined_mean: float = 0.5,
    w_combined_std: float = 0.25,
    num_classes: int = 10,
) -> ModelGraph:
    """
    Create a ModelGraph from explicit layer lists and draw its initial parameters.

    Weights are drawn with `weight_init`, biases are set to `bias_init`, and a
    weighted combiner draws W_combined from a normal distribution truncated to [0, 1].
    Parameters are drawn in layer order, so a seed fixes the whole initialization.

    Raises:
        ValueError: If two branches end in feature vectors of different lengths.
    """
    model = ModelGraph(dataset, arch, variant, branches, head, num_classes=num_classes)
    branch_outputs = set()
    for prefix, layer, in_shape, out_shape in model.walk():
        for suffix, shape in layer.param_shapes(in_shape).items():
            scheme = "constant" if suffix == "b" else weight_init
            model.params[f"{prefix}.{suffix}"] = init_weights(
                shape, scheme, rng, std=weight_std, value=bias_init, dtype=dtype
            )
        if not prefix.startswith("head.") and isinstance(layer, Flatten):
            branch_outputs.add(out_shape)
    if len(branch_outputs) > 1:
        raise ValueError(
            f"branch outputs differ in length {sorted(branch_outputs)}; the Hadamard "
            "branch's first convolution must restore the raw branch's feature size"
        )

    if len(branches) == 2:
        model.combiner = make_combiner(
            COMBINE_MODES[variant],
            rng,
            mean=w_combined_mean,
            std=w_combined_std,
            trainable=not w_combined_frozen,
            dtype=dtype,
        )
        model.params["combiner.w"] = model.combiner.weight
    return model


def build_model(
    dataset,
    arch,
    variant,
    rng: np.random.Generator,
    keep_probs: Optional[Sequence[float]] = None,
    weight_init: Optional[str] = None,
    weight_std: Optional[float] = None,
    bias_init: Optional[float] = None,
    dtype=np.float32,
    w_combined_frozen: bool = False,
) -> ModelGraph:
    """
    Build one of the twenty dataset x architecture x variant networks.

    Unset hyperparameters come from the dataset's block in config.json.

    Args:
        dataset: "mnist" or "cifar10".
        arch: "convpool" or "allcnn".
        variant: "cnn", "bwn", "hin", "bwhin-normal" or "bwhin-random".
        rng (np.random.Generator): Source of the initial parameters.
        keep_probs (sequence, optional): Dropout keep-probabilities in table order
            (MNIST: FC only; CIFAR-10: first block, second block, FC).
        w_combined_frozen (bool): Keep W_combined at its random initial value.

    Returns:
        ModelGraph: The initialized network.

    Raises:
        ValueError: On an unknown dataset, architecture or variant.
    """
    try:
        dataset, arch, variant = DatasetName(dataset), Arch(arch), Variant(variant)
    except ValueError as e:
        raise ValueError(f"Unsupported model combination: {e}") from e

    defaults = Config.dataset_defaults(dataset.value)
    keep = list(keep_probs if keep_probs is not None else defaults["keep_probs"])
    expected_keeps = 1 if dataset == DatasetName.MNIST else 3
    if len(keep) != expected_keeps:
        raise ValueError(
            f"{dataset.value} needs {expected_keeps} dropout keep-probabilities, got {keep}"
        )

    binary = variant != Variant.CNN
    branches = []
    for name, kind in BRANCHES[variant]:
        hadamard = kind == InputKind.HADAMARD
        if dataset == DatasetName.MNIST:
            layers = _mnist_trunk(arch, binary, not binary, hadamard)
        else:
            layers = _cifar_trunk(arch, binary, not binary, keep)
        shape = HADAMARD_SHAPES[dataset] if hadamard else RAW_SHAPES[dataset]
        branches.append(Branch(name, kind, shape, layers))

    w_init = Config.get("w_combined_init", {})
    model = assemble_model(
        dataset,
        arch,
        variant,
        branches,
        head_layers(FC_UNITS[dataset], keep[-1]),
        rng,
        weight_init=weight_init or defaults["weight_init"],
        weight_std=weight_std if weight_std is not None else defaults["weight_std"],
        bias_init=bias_init if bias_init is not None else defaults["bias_init"],
        dtype=dtype,
        w_combined_frozen=w_combined_frozen,
        w_combined_mean=w_init.get("mean", 0.5),
        w_combined_std=w_init.get("std", 0.25),
    )
    logging.info(
        f"Built {variant.value}/{arch.value}/{dataset.value} with "
        f"{sum(p.size for p in model.params.values())} parameters."
    )
    return model
