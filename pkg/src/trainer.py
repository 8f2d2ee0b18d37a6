# Standard library imports
import json
import time
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

# Third-party imports
import numpy as np
from tqdm import tqdm

# Local application imports
from config.config import Config
from src.data.batch_iterator import BatchIterator
from src.data.datasets import load_dataset
from src.instrumentation.checkpoint import TrainingState, load_checkpoint, save_checkpoint
from src.instrumentation.metrics import MetricsRecord, log_metrics
from src.instrumentation.op_counter import summarize_ops
from src.models.builder import build_model
from src.models.network import backward, evaluate, forward, prepare_inputs
from src.optimizer import AdamState, LrSchedule, adam_step, lr_at

PRECISIONS = {"f32": np.float32, "f64": np.float64}
# Stream tag of the per-iteration dropout generator.
DROPOUT_STREAM = 1

METRICS_FILE = "metrics.jsonl"
CONFIG_FILE = "config.json"
CHECKPOINT_FILE = "checkpoint.bwhn"


@dataclass
class TrainConfig:
    """
    Everything one training run depends on.

    Build it with `TrainConfig.from_defaults`, which fills unset values from the
    dataset's block in config.json.
    """

    dataset: str
    arch: str = "convpool"
    variant: str = "bwn"
    iterations: int = 10000
    batch_size: int = 100
    lr0: float = 0.003
    lr_decay: float = 0.0001
    keep_probs: List[float] = field(default_factory=lambda: [0.75])
    seed: int = 0
    data_dir: str = "data/"
    out_dir: str = "runs/"
    eval_every: int = 100
    eval_batch_size: int = 1000
    precision: str = "f32"
    w_combined_frozen: bool = False
    lr_schedule: str = "exponential"
    lr_min: float = 0.0
    weight_init: str = "normal"
    weight_std: float = 0.1
    bias_init: float = 0.1
    multiplication_free: bool = True
    debug_checks: bool = False
    progress_bar: bool = True
    wall_time: bool = True

    @classmethod
    def from_defaults(cls, dataset: str, **overrides) -> "TrainConfig":
        """
        Create a config from config.json, replacing only the overrides that are not None.

        Raises:
            ValueError: On an unknown dataset or an unknown override key.
        """
        defaults = Config.dataset_defaults(dataset)
        values = {
            "dataset": dataset,
            "iterations": defaults["iterations"],
            "batch_size": defaults["batch_size"],
            "lr0": defaults["lr0"],
            "lr_decay": defaults["lr_decay"],
            "keep_probs": list(defaults["keep_probs"]),
            "weight_init": defaults["weight_init"],
            "weight_std": defaults["weight_std"],
            "bias_init": defaults["bias_init"],
            "seed": Config.get("seed", 0),
            "data_dir": Config.get("data_dir", "data/"),
            "out_dir": Config.get("out_dir", "runs/"),
            "eval_every": Config.get("eval_every", 100),
            "eval_batch_size": Config.get("eval_batch_size", 1000),
            "precision": Config.get("precision", "f32"),
            "lr_schedule": Config.get("lr_schedule", "exponential"),
            "lr_min": Config.get("lr_min", 0.0),
            "multiplication_free": Config.get("multiplication_free_kernel", True),
            "debug_checks": Config.get("debug_checks", False),
            "progress_bar": Config.get("progress_bar", True),
        }
        known = {f.name for f in fields(cls)}
        for key, value in overrides.items():
            if key not in known:
                raise ValueError(f"Unsupported training option: {key}")
            if value is not None:
                values[key] = value
        config = cls(**values)
        config.validate()
        return config

    def validate(self) -> None:
        if self.precision not in PRECISIONS:
            raise ValueError(f"Unsupported precision: {self.precision}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be non-negative, got {self.iterations}")
        if self.batch_size <= 0 or self.eval_every <= 0 or self.eval_batch_size <= 0:
            raise ValueError("batch size, eval batch size and eval-every must be positive")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    iterations: int
    test_loss: float
    test_accuracy: float
    run_dir: Path
    checkpoint_path: Path
    metrics_path: Path


class Trainer:
    """
    Runs the training loop of one network: batch, forward, loss, backward, ADAM
    with a decayed learning rate, periodic test evaluation, final checkpoint.

    Batch order and dropout masks are pure functions of (seed, iteration), so a
    run resumed from a checkpoint follows the uninterrupted trajectory.
    """

    def __init__(self, config: TrainConfig, resume: Optional[str] = None):
        self.config = config
        self.resume = resume
        self.run_dir = Path(config.out_dir)
        self.metrics_path = self.run_dir / METRICS_FILE
        self.checkpoint_path = self.run_dir / CHECKPOINT_FILE

    def _build(self):
        cfg = self.config
        model = build_model(
            cfg.dataset,
            cfg.arch,
            cfg.variant,
            np.random.default_rng(cfg.seed),
            keep_probs=cfg.keep_probs,
            weight_init=cfg.weight_init,
            weight_std=cfg.weight_std,
            bias_init=cfg.bias_init,
            dtype=cfg.dtype,
            w_combined_frozen=cfg.w_combined_frozen,
        )
        if self.resume:
            model, state, _ = load_checkpoint(self.resume, model)
            return model, state
        adam_config = Config.get("adam", {})
        adam = AdamState.for_params(
            model.params,
            beta1=adam_config.get("beta1", 0.9),
            beta2=adam_config.get("beta2", 0.999),
            eps=adam_config.get("eps", 1e-8),
        )
        return model, TrainingState(adam, 0)

    def _write_config_echo(self) -> None:
        echo = self.config.to_dict()
        echo["resume"] = self.resume
        with open(self.run_dir / CONFIG_FILE, "w") as f:
            json.dump(echo, f, indent=2, sort_keys=True)

    def run(self) -> TrainResult:
        """
        Train for `config.iterations` iterations (counted from the resume point's
        iteration when resuming) and write metrics, config echo and checkpoint.

        Returns:
            TrainResult: The last test evaluation and the files written.

        Raises:
            FileNotFoundError: If the dataset files are missing.
            ValueError: On invalid options or a non-finite loss.
        """
        cfg = self.config
        train, test = load_dataset(cfg.dataset, cfg.data_dir)
        model, state = self._build()

        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._write_config_echo()
        if not self.resume:
            self.metrics_path.write_text("")

        ops = summarize_ops(model)
        schedule = LrSchedule(cfg.lr0, cfg.lr_decay, cfg.lr_schedule, cfg.lr_min)
        batches = BatchIterator(train, cfg.batch_size, cfg.seed)
        batches.seek(state.iteration)
        start_time = time.perf_counter()

        def seconds() -> float:
            return time.perf_counter() - start_time if cfg.wall_time else 0.0

        def log_test(iteration: int):
            loss, accuracy = evaluate(
                model,
                test.images,
                test.labels,
                batch_size=cfg.eval_batch_size,
                multiplication_free=cfg.multiplication_free,
            )
            log_metrics(
                MetricsRecord(
                    iteration, "test", loss, accuracy, ops.multiplies, ops.adds_subs, seconds()
                ),
                self.metrics_path,
            )
            logging.info(f"Iteration {iteration}: test loss {loss:.4f}, accuracy {accuracy:.4f}.")
            return loss, accuracy

        window_loss, window_correct, window_seen = [], 0, 0
        test_loss, test_accuracy = None, None
        last = state.iteration + cfg.iterations
        logging.info(
            f"Training {cfg.variant}/{cfg.arch}/{cfg.dataset} from iteration "
            f"{state.iteration} to {last}."
        )
        for t in tqdm(
            range(state.iteration, last), desc="Training", disable=not cfg.progress_bar
        ):
            images, labels = batches.next_batch()
            rng = np.random.default_rng([cfg.seed, DROPOUT_STREAM, t])
            logits, cache = forward(
                model,
                prepare_inputs(model, images),
                training=True,
                rng=rng,
                multiplication_free=cfg.multiplication_free,
                debug_checks=cfg.debug_checks,
            )
            loss, grads = backward(model, cache, labels)
            if not np.isfinite(loss):
                raise ValueError(f"non-finite loss at iteration {t}")
            adam_step(state.adam, model.params, grads, lr_at(schedule, t))
            model.apply_constraints()
            state.iteration = t + 1

            window_loss.append(loss)
            window_correct += int(np.sum(np.argmax(logits, axis=1) == labels))
            window_seen += labels.shape[0]
            if state.iteration % cfg.eval_every == 0 or state.iteration == last:
                log_metrics(
                    MetricsRecord(
                        state.iteration,
                        "train",
                        float(np.mean(window_loss)),
                        window_correct / window_seen,
                        ops.multiplies,
                        ops.adds_subs,
                        seconds(),
                    ),
                    self.metrics_path,
                )
                window_loss, window_correct, window_seen = [], 0, 0
                test_loss, test_accuracy = log_test(state.iteration)

        if test_accuracy is None:
            test_loss, test_accuracy = log_test(state.iteration)
        save_checkpoint(
            model,
            state,
            self.checkpoint_path,
            cfg.keep_probs,
            multiplication_free=cfg.multiplication_free,
            eval_batch_size=cfg.eval_batch_size,
        )
        return TrainResult(
            state.iteration,
            test_loss,
            test_accuracy,
            self.run_dir,
            self.checkpoint_path,
            self.metrics_path,
        )
