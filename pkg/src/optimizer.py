# Standard library imports
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

# Third-party imports
import numpy as np

Tensor = np.ndarray

SCHEDULE_MODES = ("exponential", "floor")
INIT_SCHEMES = ("normal", "xavier", "constant")


class NonFiniteGradientError(ValueError):
    """Raised when a gradient handed to the optimizer contains NaN or Inf."""


@dataclass(frozen=True)
class LrSchedule:
    """
    Exponentially decaying learning rate.

    Attributes:
        lr0 (float): Initial learning rate.
        decay_rate (float): Per-iteration decay constant.
        mode (str): "exponential" for lr0 * exp(-decay * t), "floor" for
            lr_min + (lr0 - lr_min) * exp(-decay * t).
        lr_min (float): Asymptote of the floor schedule.
    """

    lr0: float
    decay_rate: float = 0.0
    mode: str = "exponential"
    lr_min: float = 0.0

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"initial learning rate must be positive, got {self.lr0}")
        if self.decay_rate < 0:
            raise ValueError(f"decay rate must be non-negative, got {self.decay_rate}")
        if self.mode not in SCHEDULE_MODES:
            raise ValueError(f"Unsupported learning-rate schedule: {self.mode}")
        if self.mode == "floor" and not 0 <= self.lr_min < self.lr0:
            raise ValueError(f"lr_min must be in [0, lr0), got {self.lr_min}")


def lr_at(schedule: LrSchedule, t: int) -> float:
    """
    Learning rate at iteration `t`.
    """
    decay = math.exp(-schedule.decay_rate * t)
    if schedule.mode == "floor":
        return schedule.lr_min + (schedule.lr0 - schedule.lr_min) * decay
    return schedule.lr0 * decay


@dataclass
class AdamState:
    """
    Moment estimates of ADAM for a set of named parameters.

    Attributes:
        m (dict): First moments, one per parameter name.
        v (dict): Second moments, one per parameter name.
        t (int): Number of steps taken.
    """

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, Tensor] = field(default_factory=dict)
    v: Dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Dict[str, Tensor], **hyper) -> "AdamState":
        state = cls(**hyper)
        for name, value in params.items():
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        return state


def adam_step(
    state: AdamState, params: Dict[str, Tensor], grads: Dict[str, Tensor], lr: float
) -> Dict[str, Tensor]:
    """
    Apply one bias-corrected ADAM update in place.

    Only parameters present in `grads` move. Binary-weight layers hand in the
    gradient of their effective filter; it is applied to the real-valued weights
    stored in `params`.

    Args:
        state (AdamState): Moments, updated in place; `t` advances by one.
        params (dict): Parameters, updated in place.
        grads (dict): Gradients by parameter name.
        lr (float): Learning rate of this step.

    Returns:
        dict: `params`.

    Raises:
        ValueError: If a gradient's shape differs from its parameter's.
        NonFiniteGradientError: If a gradient holds NaN or Inf.
    """
    for name, grad in grads.items():
        if name not in params or grad.shape != params[name].shape:
            expected = params[name].shape if name in params else None
            raise ValueError(f"shape mismatch for {name}: gradient {grad.shape} vs {expected}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"non-finite gradient in layer {name}")

    state.t += 1
    correction1 = 1 - state.beta1**state.t
    correction2 = 1 - state.beta2**state.t
    for name, grad in grads.items():
        param = params[name]
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= state.beta1
        m += (1 - state.beta1) * grad
        v *= state.beta2
        v += (1 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.dtype, copy=False)
    return params


def fans(shape: Tuple[int, ...]) -> Tuple[int, int]:
    """
    Fan-in and fan-out of a dense (out, in) or convolution (out, in, kh, kw) weight.
    """
    if len(shape) == 2:
        return shape[1], shape[0]
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    raise ValueError(f"cannot compute fans of shape {shape}")


def init_weights(
    shape: Tuple[int, ...],
    scheme: str,
    rng: np.random.Generator,
    std: float = 0.1,
    value: float = 0.1,
    dtype=np.float32,
) -> Tensor:
    """
    Draw an initial parameter tensor.

    Args:
        shape (tuple): Parameter shape.
        scheme (str): "normal" (mean 0, standard deviation `std`), "xavier"
            (Glorot uniform in +-sqrt(6 / (fan_in + fan_out))) or "constant" (`value`,
            used for biases).
        rng (np.random.Generator): Source of randomness.

    Returns:
        Tensor: The initial values.
    """
    if scheme == "normal":
        values = rng.normal(0.0, std, size=shape)
    elif scheme == "xavier":
        fan_in, fan_out = fans(tuple(shape))
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        values = rng.uniform(-limit, limit, size=shape)
    elif scheme == "constant":
        values = np.full(shape, value)
    else:
        raise ValueError(f"Unsupported initialization scheme: {scheme}")
    return values.astype(dtype)
