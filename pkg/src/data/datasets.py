# Standard library imports
import gzip
import struct
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.wht import fwht_images

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
NUM_CLASSES = 10

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}
CIFAR_SUBDIR = "cifar-10-batches-bin"


class DatasetFormatError(ValueError):
    """A dataset file does not follow its binary format."""


class BadMagicError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class CountMismatchError(DatasetFormatError):
    pass


@dataclass
class Dataset:
    """
    A split of an image classification dataset.

    Attributes:
        images (np.ndarray): Pixels in [0, 1], shaped (N, channels, height, width).
        labels (np.ndarray): Class indices 0-9, shaped (N,).
        split (str): "train" or "test".
        name (str): Dataset name, e.g. "mnist" or "mnist-hadamard".
    """

    images: np.ndarray
    labels: np.ndarray
    split: str
    name: str = ""

    def __len__(self) -> int:
        return self.labels.shape[0]


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        gz = path.with_name(path.name + ".gz")
        if gz.exists():
            path = gz
        else:
            raise FileNotFoundError(f"Missing dataset file: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_idx(raw: bytes, magic: int, dims: int, path) -> Tuple[Tuple[int, ...], bytes]:
    header = 4 * (1 + dims)
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: header is truncated")
    found, *shape = struct.unpack(f">{1 + dims}I", raw[:header])
    if found != magic:
        raise BadMagicError(f"{path}: bad magic {found}, expected {magic}")
    payload = raw[header:]
    expected = int(np.prod(shape))
    if len(payload) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes of data, found {len(payload)}")
    return tuple(shape), payload[:expected]


def read_idx_images(path) -> np.ndarray:
    """
    Parse a big-endian IDX image file (magic 2051) into uint8 (N, rows, cols).
    """
    shape, payload = _parse_idx(_read_bytes(path), IDX_IMAGE_MAGIC, 3, path)
    return np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def read_idx_labels(path) -> np.ndarray:
    """
    Parse a big-endian IDX label file (magic 2049) into uint8 (N,).
    """
    shape, payload = _parse_idx(_read_bytes(path), IDX_LABEL_MAGIC, 1, path)
    return np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def _check_labels(labels: np.ndarray, path) -> np.ndarray:
    if labels.size and labels.max() >= NUM_CLASSES:
        raise DatasetFormatError(f"{path}: label {labels.max()} out of range 0-9")
    return labels.astype(np.int64)


def _normalize(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float32) / np.float32(255.0)


def load_mnist_split(data_dir, split: str) -> Dataset:
    image_file, label_file = MNIST_FILES[split]
    images = read_idx_images(Path(data_dir) / image_file)
    labels = read_idx_labels(Path(data_dir) / label_file)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{split}: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    labels = _check_labels(labels, Path(data_dir) / label_file)
    return Dataset(_normalize(images)[:, np.newaxis], labels, split, "mnist")


def load_mnist(data_dir) -> Tuple[Dataset, Dataset]:
    """
    Load the MNIST training and test splits from the four IDX files.

    Gzipped copies (`<name>.gz`) are read when the plain file is absent.

    Args:
        data_dir: Directory holding the IDX files.

    Returns:
        The train and test Datasets, images (N, 1, 28, 28) scaled by 1/255.

    Raises:
        FileNotFoundError: If a file is missing.
        BadMagicError, TruncatedFileError, CountMismatchError: On malformed files.
    """
    train, test = load_mnist_split(data_dir, "train"), load_mnist_split(data_dir, "test")
    logging.info(f"Loaded MNIST from {data_dir}: {len(train)} train / {len(test)} test.")
    return train, test


def read_cifar10_batch(path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parse a CIFAR-10 binary batch: records of 1 label byte and 3072 pixel bytes
    (1024 red, 1024 green, 1024 blue, each row-major 32x32).

    Returns:
        uint8 images (N, 3, 32, 32) and labels (N,).
    """
    raw = _read_bytes(path)
    if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES:
        raise TruncatedFileError(
            f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    return records[:, 1:].reshape(-1, 3, 32, 32), records[:, 0]


def write_cifar10_batch(path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 3 * 32 * 32)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    with open(path, "wb") as f:
        f.write(np.concatenate([labels, images], axis=1).tobytes())


def _cifar_root(data_dir) -> Path:
    nested = Path(data_dir) / CIFAR_SUBDIR
    return nested if nested.is_dir() else Path(data_dir)


def load_cifar10_split(data_dir, split: str) -> Dataset:
    root = _cifar_root(data_dir)
    parts = [read_cifar10_batch(root / name) for name in CIFAR_FILES[split]]
    images = np.concatenate([p[0] for p in parts])
    labels = _check_labels(np.concatenate([p[1] for p in parts]), root)
    return Dataset(_normalize(images), labels, split, "cifar10")


def load_cifar10(data_dir) -> Tuple[Dataset, Dataset]:
    """
    Load the CIFAR-10 training batches 1-5 and the test batch.

    Files are looked up in `data_dir` or its `cifar-10-batches-bin` subdirectory.

    Returns:
        The train and test Datasets, images (N, 3, 32, 32) scaled by 1/255.
    """
    train, test = load_cifar10_split(data_dir, "train"), load_cifar10_split(data_dir, "test")
    logging.info(f"Loaded CIFAR-10 from {data_dir}: {len(train)} train / {len(test)} test.")
    return train, test


def load_dataset(name: str, data_dir) -> Tuple[Dataset, Dataset]:
    if name == "mnist":
        return load_mnist(data_dir)
    if name == "cifar10":
        return load_cifar10(data_dir)
    raise ValueError(f"Unsupported dataset: {name}")


def load_split(name: str, data_dir, split: str) -> Dataset:
    if split not in ("train", "test"):
        raise ValueError(f"Unsupported split: {split}")
    if name == "mnist":
        return load_mnist_split(data_dir, split)
    if name == "cifar10":
        return load_cifar10_split(data_dir, split)
    raise ValueError(f"Unsupported dataset: {name}")


def hadamard_preprocess(ds: Dataset) -> Dataset:
    """
    Apply the orthonormal 2-D Hadamard transform to every channel of every image.

    Images are padded to power-of-two sides first (MNIST 28x28 becomes 32x32).
    The transformed pixels are no longer confined to [0, 1].
    """
    images = fwht_images(ds.images).astype(ds.images.dtype)
    return Dataset(images, ds.labels, ds.split, f"{ds.name}-hadamard")
