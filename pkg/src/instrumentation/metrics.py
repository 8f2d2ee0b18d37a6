# Standard library imports
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, List, Union

SPLITS = ("train", "test")


@dataclass
class MetricsRecord:
    """
    One evaluation point of a training run.

    Attributes:
        iteration (int): Training iterations completed.
        split (str): "train" (mean loss over the last evaluation window) or "test".
        loss (float): Mean softmax cross-entropy.
        accuracy (float): Fraction correct, in [0, 1].
        mults (int): Forward multiplies per image.
        adds (int): Forward additions/subtractions per image.
        seconds (float): Wall-clock time since the run started.
    """

    iteration: int
    split: str
    loss: float
    accuracy: float
    mults: int
    adds: int
    seconds: float = 0.0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"Unsupported split: {self.split}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")


def log_metrics(record: MetricsRecord, sink: Union[str, Path, IO[str]]) -> None:
    """
    Append a record as one JSON line and flush it.

    Args:
        record (MetricsRecord): The record.
        sink: A path (opened in append mode) or an open text stream.
    """
    line = json.dumps(asdict(record)) + "\n"
    if isinstance(sink, (str, Path)):
        with open(sink, "a") as f:
            f.write(line)
        return
    sink.write(line)
    sink.flush()


def read_metrics(path) -> List[MetricsRecord]:
    records = []
    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(MetricsRecord(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as e:
                raise ValueError(f"{path}:{number}: malformed metrics record: {e}") from e
    return records
