# Standard library imports
import json
import struct
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

# Third-party imports
import numpy as np

# Local application imports
from src.models.builder import build_model
from src.models.graph import ModelGraph
from src.optimizer import AdamState

MAGIC = b"BWHN"
FORMAT_VERSION = 1

DTYPE_TAGS = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
    np.dtype(np.uint8): 3,
    np.dtype(np.int64): 4,
}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}


class CheckpointError(ValueError):
    """A checkpoint file cannot be read or does not fit the target model."""


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


@dataclass
class TrainingState:
    """
    Optimizer moments and the iteration the run stopped at.
    """

    adam: AdamState
    iteration: int = 0


def write_arrays(path, arrays: Dict[str, np.ndarray]) -> None:
    """
    Write named arrays to the container format.

    Layout: magic "BWHN", u32 version, u32 count, then per array a u32 name length,
    the UTF-8 name, u32 rank, u32 dims, a u8 dtype tag and the raw payload.
    All integers and payloads are little-endian.

    Raises:
        ValueError: If an array has a dtype the format cannot tag.
    """
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    for name, array in arrays.items():
        array = np.asarray(array)
        if array.dtype not in DTYPE_TAGS:
            raise ValueError(f"Unsupported array dtype for {name}: {array.dtype}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
        chunks.append(struct.pack("<B", DTYPE_TAGS[array.dtype]))
        chunks.append(np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.raw):
            raise CheckpointError(f"{self.path}: file is truncated")
        chunk = self.raw[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def u32(self, count: int = 1) -> Tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count))


def read_arrays(path) -> Dict[str, np.ndarray]:
    """
    Read every named array of a container file, in file order.

    Raises:
        BadMagicError: If the file does not start with "BWHN".
        VersionMismatchError: If the format version is not supported.
        CheckpointError: If the file is truncated or holds an unknown dtype tag.
    """
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)
    if reader.take(4) != MAGIC:
        raise BadMagicError(f"{path}: bad magic, not a BWHN container")
    version, count = reader.u32(2)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}"
        )
    arrays = {}
    for _ in range(count):
        (name_len,) = reader.u32()
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.u32()
        shape = reader.u32(rank) if rank else ()
        (tag,) = struct.unpack("<B", reader.take(1))
        if tag not in TAG_DTYPES:
            raise CheckpointError(f"{path}: unknown dtype tag {tag} for {name}")
        dtype = TAG_DTYPES[tag].newbyteorder("<")
        payload = reader.take(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize)
        arrays[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(TAG_DTYPES[tag])
    return arrays


def _encode_meta(meta: dict) -> np.ndarray:
    return np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)


def _decode_meta(array: np.ndarray) -> dict:
    return json.loads(array.tobytes().decode("utf-8"))


def model_meta(
    model: ModelGraph, keep_probs, multiplication_free: bool = True, eval_batch_size: int = 1000
) -> dict:
    return {
        "dataset": model.dataset.value,
        "arch": model.arch.value,
        "variant": model.variant.value,
        "precision": "f64" if model.dtype == np.float64 else "f32",
        "keep_probs": [float(p) for p in keep_probs],
        "w_combined_frozen": bool(model.combiner is not None and not model.combiner.trainable),
        "multiplication_free": bool(multiplication_free),
        "eval_batch_size": int(eval_batch_size),
    }


def save_checkpoint(
    model: ModelGraph,
    state: TrainingState,
    path,
    keep_probs,
    multiplication_free: bool = True,
    eval_batch_size: int = 1000,
) -> None:
    """
    Save the real-valued parameters, the ADAM moments and the iteration counter.

    Binary weights and scaling factors are not stored; they follow from W.

    Args:
        model (ModelGraph): The network.
        state (TrainingState): Optimizer state and iteration.
        path: Output file.
        keep_probs: Dropout keep-probabilities the model was built with.
        multiplication_free (bool): Binary kernel the run evaluated with.
        eval_batch_size (int): Batch size of the run's test evaluations.
    """
    adam = state.adam
    meta = model_meta(model, keep_probs, multiplication_free, eval_batch_size)
    arrays = {"meta": _encode_meta(meta)}
    for name, value in model.params.items():
        arrays[f"param/{name}"] = value
    for name in model.params:
        if name in adam.m:
            arrays[f"adam.m/{name}"] = adam.m[name]
            arrays[f"adam.v/{name}"] = adam.v[name]
    arrays["adam.hyper"] = np.array([adam.beta1, adam.beta2, adam.eps], dtype=np.float64)
    arrays["adam.t"] = np.array(adam.t, dtype=np.int64)
    arrays["iteration"] = np.array(state.iteration, dtype=np.int64)
    write_arrays(path, arrays)
    logging.info(f"Checkpoint written to {path} at iteration {state.iteration}.")


def restore_params(model: ModelGraph, arrays: Dict[str, np.ndarray], path="") -> None:
    """
    Copy stored parameters into `model` in place.

    Raises:
        ShapeMismatchError: If a parameter is missing, extra, or shaped differently.
    """
    stored = {k[len("param/") :]: v for k, v in arrays.items() if k.startswith("param/")}
    missing = sorted(set(model.params) - set(stored))
    extra = sorted(set(stored) - set(model.params))
    if missing or extra:
        raise ShapeMismatchError(
            f"{path}: checkpoint does not fit {model.variant.value}/{model.arch.value}/"
            f"{model.dataset.value} (missing {missing}, unexpected {extra})"
        )
    for name, value in stored.items():
        if value.shape != model.params[name].shape:
            raise ShapeMismatchError(
                f"{path}: shape mismatch for {name}: checkpoint {value.shape} "
                f"vs model {model.params[name].shape}"
            )
    for name, value in stored.items():
        np.copyto(model.params[name], value)


def read_checkpoint_meta(path) -> dict:
    arrays = read_arrays(path)
    if "meta" not in arrays:
        raise CheckpointError(f"{path}: not a checkpoint (no metadata)")
    return _decode_meta(arrays["meta"])


def load_checkpoint(
    path, model: Optional[ModelGraph] = None
) -> Tuple[ModelGraph, TrainingState, dict]:
    """
    Load a checkpoint, rebuilding its model from the stored metadata unless a
    target `model` is given.

    Args:
        path: Checkpoint file.
        model (ModelGraph, optional): Graph to restore into, e.g. one built from
            command-line flags.

    Returns:
        The model, its TrainingState, and the stored metadata.

    Raises:
        BadMagicError, VersionMismatchError: On a foreign or outdated file.
        ShapeMismatchError: If the parameters do not fit the target graph.
    """
    arrays = read_arrays(path)
    if "meta" not in arrays:
        raise CheckpointError(f"{path}: not a checkpoint (no metadata)")
    meta = _decode_meta(arrays["meta"])
    if model is None:
        model = build_model(
            meta["dataset"],
            meta["arch"],
            meta["variant"],
            np.random.default_rng(0),
            keep_probs=meta["keep_probs"],
            dtype=np.float64 if meta["precision"] == "f64" else np.float32,
            w_combined_frozen=meta["w_combined_frozen"],
        )
    restore_params(model, arrays, path)

    beta1, beta2, eps = (float(v) for v in arrays["adam.hyper"])
    adam = AdamState(beta1=beta1, beta2=beta2, eps=eps, t=int(arrays["adam.t"]))
    for name, value in model.params.items():
        m = arrays.get(f"adam.m/{name}")
        adam.m[name] = m.astype(value.dtype) if m is not None else np.zeros_like(value)
        v = arrays.get(f"adam.v/{name}")
        adam.v[name] = v.astype(value.dtype) if v is not None else np.zeros_like(value)
    state = TrainingState(adam, int(arrays["iteration"]))
    logging.info(f"Checkpoint {path} loaded at iteration {state.iteration}.")
    return model, state, meta
