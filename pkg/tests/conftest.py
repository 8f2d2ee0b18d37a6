# Standard library imports
import json

# Third-party imports
import numpy as np
import pytest

# Local application imports
from config.config import DEFAULT_CONFIG_PATH, Config
from src.data.datasets import write_cifar10_batch, write_idx_images, write_idx_labels
from src.models.builder import assemble_model, head_layers
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
    Relu,
    Variant,
)


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """
    Point the configuration at a copy whose log file lives in the test's tmp dir.
    """
    with open(DEFAULT_CONFIG_PATH, "r") as f:
        config = json.load(f)
    config["log_path"] = str(tmp_path / "logs" / "bwhin.log")
    config["progress_bar"] = False
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    monkeypatch.setenv("BWHIN_CONFIG", str(path))
    Config.reset()
    yield config
    Config.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mnist_dir(tmp_path):
    """
    Synthetic MNIST in IDX format: 200 training and 50 test images.
    """
    data = tmp_path / "mnist"
    data.mkdir()
    gen = np.random.default_rng(7)
    for prefix, count in (("train", 200), ("t10k", 50)):
        labels = gen.integers(0, 10, size=count, dtype=np.uint8)
        images = gen.integers(0, 60, size=(count, 28, 28), dtype=np.uint8)
        # A bright block whose position encodes the label makes the task learnable.
        for i, label in enumerate(labels):
            images[i, 2 * label : 2 * label + 6, 4:24] = 255
        write_idx_images(data / f"{prefix}-images-idx3-ubyte", images)
        write_idx_labels(data / f"{prefix}-labels-idx1-ubyte", labels)
    return data


@pytest.fixture
def cifar_dir(tmp_path):
    """
    Synthetic CIFAR-10 binary batches with 20 records each.
    """
    data = tmp_path / "cifar"
    data.mkdir()
    gen = np.random.default_rng(11)
    names = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    for name in names:
        images = gen.integers(0, 256, size=(20, 3, 32, 32), dtype=np.uint8)
        labels = gen.integers(0, 10, size=20, dtype=np.uint8)
        write_cifar10_batch(data / name, images, labels)
    return data


@pytest.fixture
def tiny_bwhin():
    """
    A shrunken weighted BWHIN in double precision: 1x3x3 raw images, whose
    Hadamard inputs are 1x4x4, two 2-filter binary convolutions meeting at 18
    features, and a 5-unit head over 3 classes.
    """

    def make(seed: int = 0, frozen: bool = False):
        branches = [
            Branch(
                "bwn",
                InputKind.RAW,
                (1, 3, 3),
                [Conv("conv1", 2, 2, padding="same", binary=True), Relu("relu1"), Flatten()],
            ),
            Branch(
                "hin",
                InputKind.HADAMARD,
                (1, 4, 4),
                [Conv("conv1", 2, 2, padding="valid", binary=True), Relu("relu1"), Flatten()],
            ),
        ]
        head = [Dense("fc1", 5), Relu("relu_fc"), Dense("fc2", 3)]
        return assemble_model(
            DatasetName.MNIST,
            Arch.CONVPOOL,
            Variant.BWHIN_RANDOM,
            branches,
            head,
            np.random.default_rng(seed),
            weight_std=0.5,
            dtype=np.float64,
            w_combined_frozen=frozen,
            num_classes=3,
        )

    return make


@pytest.fixture
def tiny_cnn():
    """
    A small real-valued network with biases, pooling and dropout: 1x4x4 inputs.
    """

    def make(seed: int = 0):
        branches = [
            Branch(
                "cnn",
                InputKind.RAW,
                (1, 4, 4),
                [
                    Conv("conv1", 2, 3, bias=True),
                    Relu("relu1"),
                    MaxPool("pool1"),
                    Flatten(),
                ],
            )
        ]
        return assemble_model(
            DatasetName.MNIST,
            Arch.CONVPOOL,
            Variant.CNN,
            branches,
            head_layers(4, 0.5, num_classes=3),
            np.random.default_rng(seed),
            weight_std=0.5,
            dtype=np.float64,
            num_classes=3,
        )

    return make


def numeric_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """
    Central differences of the scalar function `f()` with respect to `x`, which
    is perturbed in place and restored.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + eps
        plus = f()
        x[idx] = original - eps
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


@pytest.fixture
def grad_check():
    return numeric_gradient, relative_error
