# Standard library imports
import gzip
import struct

# Third-party imports
import numpy as np
import pytest

# Local application imports
from src.data.batch_iterator import BatchIterator
from src.data.datasets import (
    BadMagicError,
    CountMismatchError,
    Dataset,
    DatasetFormatError,
    TruncatedFileError,
    hadamard_preprocess,
    load_cifar10,
    load_dataset,
    load_mnist,
    load_split,
    read_cifar10_batch,
    read_idx_images,
    write_cifar10_batch,
    write_idx_images,
    write_idx_labels,
)


def test_load_mnist_shapes_and_scaling(mnist_dir):
    train, test = load_mnist(mnist_dir)
    assert train.images.shape == (200, 1, 28, 28)
    assert test.images.shape == (50, 1, 28, 28)
    assert train.images.dtype == np.float32
    assert train.images.max() == pytest.approx(1.0)
    assert train.images.min() >= 0.0
    assert train.labels.dtype == np.int64
    assert (train.split, test.split, train.name) == ("train", "test", "mnist")


def test_idx_pixels_are_divided_by_255(tmp_path):
    images = np.array([[[0, 51], [102, 255]]], dtype=np.uint8)
    write_idx_images(tmp_path / "train-images-idx3-ubyte", images)
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte", np.array([4]))
    ds = load_split("mnist", tmp_path, "train")
    np.testing.assert_allclose(ds.images[0, 0], [[0.0, 0.2], [0.4, 1.0]], atol=1e-7)
    assert ds.labels.tolist() == [4]


def test_gzipped_idx_files_are_read(mnist_dir):
    for path in list(mnist_dir.iterdir()):
        with gzip.open(path.with_name(path.name + ".gz"), "wb") as f:
            f.write(path.read_bytes())
        path.unlink()
    train, _ = load_mnist(mnist_dir)
    assert len(train) == 200


def test_bad_magic_is_rejected(tmp_path):
    path = tmp_path / "images"
    path.write_bytes(struct.pack(">4I", 2049, 1, 2, 2) + bytes(4))
    with pytest.raises(BadMagicError, match="bad magic"):
        read_idx_images(path)


def test_truncated_idx_file_is_rejected(tmp_path):
    path = tmp_path / "images"
    path.write_bytes(struct.pack(">4I", 2051, 3, 28, 28) + bytes(100))
    with pytest.raises(TruncatedFileError):
        read_idx_images(path)
    path.write_bytes(struct.pack(">2I", 2051, 3))
    with pytest.raises(TruncatedFileError):
        read_idx_images(path)


def test_image_and_label_counts_must_agree(mnist_dir):
    write_idx_labels(mnist_dir / "t10k-labels-idx1-ubyte", np.zeros(49, dtype=np.uint8))
    with pytest.raises(CountMismatchError):
        load_mnist(mnist_dir)


def test_out_of_range_labels_are_rejected(mnist_dir):
    write_idx_labels(mnist_dir / "t10k-labels-idx1-ubyte", np.full(50, 10, dtype=np.uint8))
    with pytest.raises(DatasetFormatError, match="out of range"):
        load_split("mnist", mnist_dir, "test")


def test_missing_files_raise_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path)
    with pytest.raises(FileNotFoundError):
        load_cifar10(tmp_path)


def test_cifar_records_hold_planar_channels(tmp_path):
    images = np.zeros((2, 3, 32, 32), dtype=np.uint8)
    images[:, 0], images[:, 1], images[:, 2] = 10, 20, 30
    images[1, 2, 31, 31] = 255
    write_cifar10_batch(tmp_path / "batch.bin", images, np.array([3, 9]))
    raw = (tmp_path / "batch.bin").read_bytes()
    assert len(raw) == 2 * 3073
    assert raw[0] == 3 and raw[1] == 10 and raw[1 + 1024] == 20 and raw[1 + 2048] == 30

    decoded, labels = read_cifar10_batch(tmp_path / "batch.bin")
    np.testing.assert_array_equal(decoded, images)
    assert labels.tolist() == [3, 9]


def test_cifar_length_must_be_whole_records(tmp_path):
    (tmp_path / "bad.bin").write_bytes(bytes(3073 + 5))
    with pytest.raises(TruncatedFileError, match="3073"):
        read_cifar10_batch(tmp_path / "bad.bin")
    (tmp_path / "empty.bin").write_bytes(b"")
    with pytest.raises(TruncatedFileError):
        read_cifar10_batch(tmp_path / "empty.bin")


def test_load_cifar10(cifar_dir):
    train, test = load_dataset("cifar10", cifar_dir)
    assert train.images.shape == (100, 3, 32, 32)
    assert test.images.shape == (20, 3, 32, 32)
    assert 0.0 <= train.images.min() and train.images.max() <= 1.0


def test_cifar_files_may_sit_in_the_archive_folder(cifar_dir):
    nested = cifar_dir / "cifar-10-batches-bin"
    nested.mkdir()
    for path in list(cifar_dir.glob("*.bin")):
        path.rename(nested / path.name)
    train, _ = load_cifar10(cifar_dir)
    assert len(train) == 100


def test_unknown_dataset_and_split():
    with pytest.raises(ValueError, match="Unsupported dataset"):
        load_dataset("svhn", ".")
    with pytest.raises(ValueError, match="Unsupported split"):
        load_split("mnist", ".", "validation")


def test_hadamard_preprocess(mnist_dir):
    _, test = load_mnist(mnist_dir)
    transformed = hadamard_preprocess(test)
    assert transformed.images.shape == (50, 1, 32, 32)
    assert transformed.name == "mnist-hadamard"
    assert transformed.images.dtype == np.float32
    np.testing.assert_array_equal(transformed.labels, test.labels)
    energy = np.sum(test.images[0].astype(np.float64) ** 2)
    assert np.sum(transformed.images[0].astype(np.float64) ** 2) == pytest.approx(energy, rel=1e-5)


def _toy_dataset(n):
    images = np.arange(n, dtype=np.float32).reshape(n, 1, 1, 1)
    return Dataset(images, np.arange(n) % 10, "train", "toy")


def test_batches_cover_every_sample_once_per_epoch():
    it = BatchIterator(_toy_dataset(10), batch_size=5, seed=3)
    first = np.concatenate([it.next_batch()[1] for _ in range(2)])
    assert sorted(first.tolist()) == list(range(10))
    assert it.epoch() == 1


def test_a_batch_crossing_an_epoch_boundary_carries_over():
    dataset = _toy_dataset(10)
    it = BatchIterator(dataset, batch_size=4, seed=0)
    batches = [it.next_batch()[0].ravel() for _ in range(5)]
    stream = np.concatenate(batches)
    assert sorted(stream[:10].tolist()) == list(range(10))
    assert sorted(stream[10:20].tolist()) == list(range(10))
    assert len(batches[2]) == 4


def test_seek_reproduces_the_same_batch():
    dataset = _toy_dataset(23)
    it = BatchIterator(dataset, batch_size=7, seed=5)
    batches = [it.next_batch()[0] for _ in range(6)]
    fresh = BatchIterator(dataset, batch_size=7, seed=5)
    fresh.seek(4)
    np.testing.assert_array_equal(fresh.next_batch()[0], batches[4])
    np.testing.assert_array_equal(next(fresh)[0], batches[5])
    np.testing.assert_array_equal(fresh.indices_at(1), it.indices_at(1))


def test_batch_order_depends_on_the_seed():
    dataset = _toy_dataset(50)
    a = BatchIterator(dataset, batch_size=50, seed=1).indices_at(0)
    b = BatchIterator(dataset, batch_size=50, seed=1).indices_at(0)
    c = BatchIterator(dataset, batch_size=50, seed=2).indices_at(0)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_batch_iterator_validation():
    with pytest.raises(ValueError, match="empty"):
        BatchIterator(_toy_dataset(0))
    with pytest.raises(ValueError, match="batch size"):
        BatchIterator(_toy_dataset(4), batch_size=0)
    with pytest.raises(ValueError):
        BatchIterator(_toy_dataset(4)).seek(-1)
