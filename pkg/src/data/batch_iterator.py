# Standard library imports
from typing import Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.data.datasets import Dataset

# Stream tag keeping batch order independent of dropout draws.
BATCH_STREAM = 0


class BatchIterator:
    """
    Deterministic mini-batch stream over a dataset.

    Each epoch is a fresh permutation drawn from `default_rng([seed, 0, epoch])`, and
    the permutations are concatenated into one endless index stream. A batch that
    runs past the end of an epoch takes its remaining samples from the next one, so
    every sample is seen exactly once per epoch and batch `i` depends only on
    `seed`, `batch_size` and `i`. That makes resuming at an iteration exact.
    """

    def __init__(self, dataset: Dataset, batch_size: int = 100, seed: int = 0):
        if len(dataset) == 0:
            raise ValueError("cannot iterate over an empty dataset")
        if batch_size <= 0:
            raise ValueError(f"batch size must be positive, got {batch_size}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.iteration = 0
        self._epoch = -1
        self._order = None

    def _permutation(self, epoch: int) -> np.ndarray:
        if epoch != self._epoch:
            rng = np.random.default_rng([self.seed, BATCH_STREAM, epoch])
            self._order = rng.permutation(len(self.dataset))
            self._epoch = epoch
        return self._order

    def indices_at(self, iteration: int) -> np.ndarray:
        """
        Sample indices of batch number `iteration`.
        """
        n = len(self.dataset)
        start = iteration * self.batch_size
        stop = start + self.batch_size
        parts = []
        while start < stop:
            epoch, offset = divmod(start, n)
            take = min(stop - start, n - offset)
            parts.append(self._permutation(epoch)[offset : offset + take])
            start += take
        return np.concatenate(parts)

    def seek(self, iteration: int) -> None:
        if iteration < 0:
            raise ValueError(f"iteration must be non-negative, got {iteration}")
        self.iteration = iteration

    def epoch(self) -> int:
        return self.iteration * self.batch_size // len(self.dataset)

    def next_batch(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Images and labels of the current batch; advances the iterator.
        """
        idx = self.indices_at(self.iteration)
        self.iteration += 1
        return self.dataset.images[idx], self.dataset.labels[idx]

    def __iter__(self):
        return self

    def __next__(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.next_batch()
