"""Adam optimizer (bias-corrected) and scalar parameter schedules."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, NumericError


@dataclass(frozen=True)
class AdamState:
    """Immutable optimizer state; :func:`adam_step` returns a new one."""

    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        params = np.asarray(params, dtype=np.float64).reshape(-1)
        if not lr > 0:
            raise ConfigurationError("learning rate must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigurationError("betas must lie in [0, 1)")
        return cls(params=params, m=np.zeros_like(params),
                   v=np.zeros_like(params), step=0, lr=lr,
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state, grads):
    """One bias-corrected Adam update; returns the successor state.

    Raises NumericError naming the first offending index when a gradient
    entry is not finite.
    """
    grads = np.asarray(grads, dtype=np.float64).reshape(-1)
    if grads.shape != state.params.shape:
        raise ConfigurationError("gradient length does not match parameters")
    bad = ~np.isfinite(grads)
    if np.any(bad):
        raise NumericError(
            f"non-finite gradient at parameter index {int(np.argmax(bad))}")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    params = state.params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, params=params, m=m, v=v, step=t)


@dataclass(frozen=True)
class Schedule:
    """Scalar schedule over a fixed number of steps.

    ``constant`` always yields ``start``; ``log_interpolate`` moves from
    ``start`` to ``end`` geometrically (linear in log space).
    """

    kind: str
    start: float
    end: float
    total_steps: int

    def __post_init__(self):
        if self.kind not in ("constant", "log_interpolate"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if not (self.start > 0 and self.end > 0):
            raise ConfigurationError("schedule endpoints must be positive")
        if self.total_steps < 1:
            raise ConfigurationError("total_steps must be at least 1")


def schedule_value(schedule, step):
    """Schedule value at an integer step in [0, total_steps]."""
    if not 0 <= step <= schedule.total_steps:
        raise ConfigurationError(
            f"step {step} outside [0, {schedule.total_steps}]")
    if schedule.kind == "constant":
        return schedule.start
    frac = step / schedule.total_steps
    return float(np.exp((1.0 - frac) * np.log(schedule.start)
                        + frac * np.log(schedule.end)))
