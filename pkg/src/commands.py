# Standard library imports
import sys
import json
import struct
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

# Third-party imports
import numpy as np
import pandas as pd

# Local application imports
from config.config import Config
from src.data.datasets import (
    IDX_IMAGE_MAGIC,
    Dataset,
    hadamard_preprocess,
    load_split,
    read_cifar10_batch,
    read_idx_images,
)
from src.instrumentation import checkpoint
from src.instrumentation.metrics import read_metrics
from src.instrumentation.op_counter import count_forward_ops, summarize_ops
from src.models.builder import build_model
from src.models.network import evaluate, predict
from src.trainer import CONFIG_FILE, TrainConfig, Trainer

VARIANT_LABELS = {
    "cnn": "CNN",
    "bwn": "BWN",
    "hin": "HIN",
    "bwhin-normal": "BWHIN-NormalAvg",
    "bwhin-random": "BWHIN-RandomAvg",
}
ARCH_LABELS = {"convpool": "ConvPool-CNN", "allcnn": "All-CNN"}


def cmd_train(config: TrainConfig, resume: Optional[str] = None) -> int:
    """
    Train one network and report its final test accuracy.

    Returns:
        int: 0 on completion.
    """
    result = Trainer(config, resume=resume).run()
    print(
        f"{config.variant}/{config.arch}/{config.dataset}: {result.iterations} iterations, "
        f"test accuracy {100 * result.test_accuracy:.2f}%, loss {result.test_loss:.4f}"
    )
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return 0


@dataclass
class EvalReport:
    loss: float
    accuracy: float
    ops: pd.DataFrame
    multiplies: int
    adds_subs: int
    dense_multiplies: int
    per_class: pd.DataFrame


def evaluate_checkpoint(
    path,
    dataset: Optional[str],
    split: str,
    data_dir,
    batch_size: Optional[int] = None,
    multiplication_free: Optional[bool] = None,
) -> EvalReport:
    """
    Restore a checkpoint into the graph of `dataset` and evaluate it on one split.

    The graph takes its architecture and variant from the checkpoint; a checkpoint
    from the other dataset therefore fails with a shape mismatch.

    Unless given, the binary kernel and batch size are the ones the training run
    evaluated with, so the run's final test record is reproduced exactly.

    Raises:
        ShapeMismatchError: If the checkpoint does not fit the dataset's graph.
    """
    meta = checkpoint.read_checkpoint_meta(path)
    dataset = dataset or meta["dataset"]
    target = build_model(
        dataset,
        meta["arch"],
        meta["variant"],
        np.random.default_rng(0),
        keep_probs=meta["keep_probs"] if dataset == meta["dataset"] else None,
        dtype=np.float64 if meta["precision"] == "f64" else np.float32,
        w_combined_frozen=meta["w_combined_frozen"],
    )
    model, _, _ = checkpoint.load_checkpoint(path, target)
    data = load_split(dataset, data_dir, split)
    if batch_size is None:
        batch_size = meta.get("eval_batch_size", Config.get("eval_batch_size", 1000))
    if multiplication_free is None:
        multiplication_free = meta.get(
            "multiplication_free", Config.get("multiplication_free_kernel", True)
        )
    kernel = dict(batch_size=batch_size, multiplication_free=multiplication_free)
    loss, accuracy = evaluate(model, data.images, data.labels, **kernel)
    predictions = predict(model, data.images, **kernel)
    per_class = (
        pd.DataFrame({"label": data.labels, "correct": predictions == data.labels})
        .groupby("label")["correct"]
        .agg(images="size", accuracy="mean")
        .reset_index()
    )
    ops = pd.DataFrame([vars(c) for c in count_forward_ops(model)])
    summary = summarize_ops(model)
    return EvalReport(
        loss,
        accuracy,
        ops,
        summary.multiplies,
        summary.adds_subs,
        summary.dense_multiplies,
        per_class,
    )


def cmd_eval(checkpoint_path, dataset: Optional[str], split: str, data_dir, **kwargs) -> int:
    """
    Print accuracy, loss and per-layer operation counts of a checkpoint.
    """
    report = evaluate_checkpoint(checkpoint_path, dataset, split, data_dir, **kwargs)
    print(f"{split} accuracy {100 * report.accuracy:.2f}%, loss {report.loss:.4f}")
    print(report.per_class.to_string(index=False))
    print(report.ops.to_string(index=False))
    print(
        f"total per image: {report.multiplies} multiplies, {report.adds_subs} adds/subs "
        f"({report.dense_multiplies} multiplies with dense convolutions)"
    )
    return 0


def read_images_any(path) -> tuple:
    """
    Read images from an IDX image file, a CIFAR-10 batch or a BWHN container.

    IDX and CIFAR pixels are scaled to [0, 1]; container images are taken as stored.

    Returns:
        Images (N, c, H, W) as float64 and labels (N,) or None.

    Raises:
        ValueError: If the file is empty or in none of the three formats.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Missing input file: {path}")
    with open(path, "rb") as f:
        head = f.read(4)
    if not head:
        raise ValueError(f"{path}: empty file")
    if head == checkpoint.MAGIC:
        arrays = checkpoint.read_arrays(path)
        if "images" not in arrays:
            raise ValueError(f"{path}: container has no images array")
        return arrays["images"].astype(np.float64), arrays.get("labels")
    if len(head) == 4 and struct.unpack(">I", head)[0] == IDX_IMAGE_MAGIC:
        images = read_idx_images(path)[:, np.newaxis]
        return images.astype(np.float64) / 255.0, None
    images, labels = read_cifar10_batch(path)
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def cmd_transform(input_path, output_path) -> int:
    """
    Write the orthonormal Hadamard transform of every image channel to a container.

    Each side is zero-padded to a power of two (MNIST 28x28 becomes 32x32). The
    transform is its own inverse, so transforming a container output again gives
    back the padded originals.
    """
    images, labels = read_images_any(input_path)
    transformed = hadamard_preprocess(Dataset(images, labels, "", Path(input_path).name))
    arrays = {"images": transformed.images}
    if labels is not None:
        arrays["labels"] = np.asarray(labels, dtype=np.int64)
    checkpoint.write_arrays(output_path, arrays)
    logging.info(f"Transformed {images.shape[0]} images from {input_path} to {output_path}.")
    print(f"{output_path}: {arrays['images'].shape[0]} images of {arrays['images'].shape[1:]}")
    return 0


def _run_info(metrics_path: Path) -> dict:
    echo = metrics_path.with_name(CONFIG_FILE)
    if echo.exists():
        with open(echo, "r") as f:
            config = json.load(f)
        return {k: config.get(k, "") for k in ("dataset", "arch", "variant")}
    return {"dataset": "", "arch": "", "variant": ""}


def load_curves(metrics_paths: Sequence) -> pd.DataFrame:
    """
    Gather metrics files into one table, one row per record.

    Rows are sorted by iteration within each run and split; a repeated iteration
    (from a resumed run) keeps its latest record.
    """
    frames = []
    for number, path in enumerate(metrics_paths):
        path = Path(path)
        records = read_metrics(path)
        frame = pd.DataFrame([vars(r) for r in records])
        if frame.empty:
            continue
        for key, value in _run_info(path).items():
            frame[key] = value
        frame["run"] = str(path.parent)
        frame["order"] = number
        frames.append(frame)
    if not frames:
        raise ValueError("no metrics records to report")
    curves = pd.concat(frames, ignore_index=True)
    curves = curves.drop_duplicates(subset=["order", "split", "iteration"], keep="last")
    curves = curves.sort_values(["order", "split", "iteration"], kind="stable")
    curves["accuracy_pct"] = (100 * curves["accuracy"]).round(2)
    columns = ["run", "dataset", "arch", "variant", "split", "iteration", "loss",
               "accuracy", "accuracy_pct", "mults", "adds", "seconds"]  # fmt: skip
    return curves[columns].reset_index(drop=True)


def summary_table(curves: pd.DataFrame) -> pd.DataFrame:
    """
    Final test accuracy (percent, 2 decimals) in a variant x architecture grid.
    """
    test = curves[curves["split"] == "test"]
    if test.empty:
        return pd.DataFrame()
    final = test.groupby("run", sort=False).tail(1).copy()
    final["Variant"] = final["variant"].map(VARIANT_LABELS).fillna(final["variant"])
    final["Architecture"] = final["arch"].map(ARCH_LABELS).fillna(final["arch"])
    final["Dataset"] = final["dataset"]
    table = final.pivot_table(
        index=["Dataset", "Variant"],
        columns="Architecture",
        values="accuracy_pct",
        aggfunc="last",
    )
    order = [v for v in VARIANT_LABELS.values() if v in set(final["Variant"])]
    order += [v for v in final["Variant"].unique() if v not in order]
    table = table.reindex(order, level="Variant")
    arch_order = [a for a in ARCH_LABELS.values() if a in table.columns]
    arch_order += [a for a in table.columns if a not in arch_order]
    return table[arch_order].round(2)


def operations_table(curves: pd.DataFrame) -> pd.DataFrame:
    last = curves.groupby("run", sort=False).tail(1)
    return last[["run", "dataset", "arch", "variant", "mults", "adds"]].reset_index(drop=True)


def cmd_report(
    metrics_paths: List, csv_path=None, xlsx_path=None, sep: str = ","
) -> int:
    """
    Print the accuracy summary of one or more runs and emit their curves.

    The curves go to `csv_path` as delimiter-separated values, or to stdout when
    no path is given. With `xlsx_path` a workbook with "Curves", "Summary" and
    "Operations" sheets is written as well.
    """
    curves = load_curves(metrics_paths)
    summary = summary_table(curves)
    print(summary.to_string(float_format=lambda v: f"{v:.2f}"))
    if csv_path:
        curves.to_csv(csv_path, sep=sep, index=False)
    else:
        curves.to_csv(sys.stdout, sep=sep, index=False)
    if xlsx_path:
        with pd.ExcelWriter(xlsx_path, engine="openpyxl") as writer:
            curves.to_excel(writer, sheet_name="Curves", index=False)
            summary.to_excel(writer, sheet_name="Summary")
            operations_table(curves).to_excel(writer, sheet_name="Operations", index=False)
        logging.info(f"Report written to {xlsx_path}.")
    return 0
