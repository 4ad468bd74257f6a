"""Shared numeric contracts: objectives, iteration state, stopping rules, callbacks.

Everything here is double precision. A solver run owns its state objects
exclusively; independent runs may execute concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Step tags recorded per iteration.
STEP_FW = "FW"
STEP_PAIRWISE = "pairwise"
STEP_AWAY = "away"
STEP_INFACE = "in-face"
STEP_DROP = "drop"
STEP_LAZY = "lazy-hit"
STEP_CORRECTION = "correction"

STEP_TYPES = (
    STEP_FW,
    STEP_PAIRWISE,
    STEP_AWAY,
    STEP_INFACE,
    STEP_DROP,
    STEP_LAZY,
    STEP_CORRECTION,
)

# Termination tags.
TERM_GAP = "gap-reached"
TERM_ITERATIONS = "iteration-limit"
TERM_TIME = "time-limit"
TERM_CALLBACK = "callback-stop"
TERM_STALL = "numerical-stall"


class ContractViolation(ValueError):
    """A caller broke a documented precondition."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values or failed to converge."""


@dataclass
class Objective:
    """Differentiable objective with an in-place gradient evaluator.

    ``gradient_into(storage, x)`` writes the gradient at ``x`` into
    ``storage`` (same shape as ``x``) to avoid per-iteration allocation.
    ``domain_check``, when present, must be consulted before evaluating
    ``value``/``gradient_into`` at a candidate point.
    """

    value: Callable[[np.ndarray], float]
    gradient_into: Callable[[np.ndarray, np.ndarray], None]
    domain_check: Optional[Callable[[np.ndarray], bool]] = None

    def gradient(self, x: np.ndarray) -> np.ndarray:
        storage = np.empty_like(x, dtype=np.float64)
        self.gradient_into(storage, x)
        return storage

    def in_domain(self, x: np.ndarray) -> bool:
        return self.domain_check is None or bool(self.domain_check(x))


@dataclass
class IterationState:
    """Snapshot of one solver iteration."""

    t: int
    x: np.ndarray
    grad: Optional[np.ndarray]
    v: Optional[np.ndarray]
    gamma: float
    primal: float
    dual_gap: float
    step_type: str
    elapsed_ns: int
    lmo_calls: int
    active_set_size: int = 0


@dataclass
class StopCriteria:
    """Run bounds: dual-gap threshold, iteration cap, wall-clock cap (s)."""

    epsilon: float = 1e-7
    max_iterations: int = 10_000_000
    max_time: float = 3600.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ContractViolation("epsilon must be strictly positive")
        if self.max_iterations < 0:
            # 0 is allowed: "evaluate the start point only"
            raise ContractViolation("max_iterations must be nonnegative")
        if self.max_time <= 0:
            raise ContractViolation("max_time must be strictly positive")


@dataclass
class RunResult:
    """Final iterate plus the decimated per-iteration trajectory."""

    x_final: np.ndarray
    primal_final: float
    dual_gap_final: float
    trajectory: list[IterationState]
    termination: str
    lmo_calls: int = 0
    elapsed_ns: int = 0


def fw_gap(grad: np.ndarray, x: np.ndarray, v: np.ndarray) -> float:
    """Frank-Wolfe gap ``<grad, x - v>``.

    Nonnegative whenever ``v`` exactly minimizes ``<grad, .>`` over the
    feasible region and ``x`` is feasible.
    """
    if grad.shape != x.shape or x.shape != v.shape:
        raise ContractViolation(
            f"dimension mismatch: grad {grad.shape}, x {x.shape}, v {v.shape}"
        )
    return float(np.vdot(grad, x - v))


def strong_gap_bound(phi: float) -> float:
    """Upper bound on the strong FW gap implied by a standard-gap bound phi."""
    if phi < 0:
        raise ContractViolation("phi must be nonnegative")
    return 2.0 * phi


def invoke_callback(cb, state: IterationState, active_set=None) -> bool:
    """Run a user callback; returns whether the solver should continue.

    A callback returning no flag (None) means "continue". A False return
    obliges the caller to terminate with ``callback-stop``. Exceptions
    raised by the callback propagate unchanged.
    """
    if cb is None:
        return True
    flag = cb(state, active_set)
    if flag is None:
        return True
    return bool(flag)


class LogSchedule:
    """Decides which iterations enter the trajectory.

    Default: every iteration up to ``dense_until``, then geometric
    thinning by ``thin_factor`` to bound memory on long runs. A fixed
    integer stride can be requested instead.
    """

    def __init__(self, stride: Optional[int] = None, dense_until: int = 1000,
                 thin_factor: float = 1.5):
        if stride is not None and stride < 1:
            raise ContractViolation("stride must be >= 1")
        self.stride = stride
        self.dense_until = dense_until
        self.thin_factor = thin_factor
        self._next = 0

    def should_log(self, t: int) -> bool:
        if self.stride is not None:
            return t % self.stride == 0
        if t <= self.dense_until:
            return True
        if t >= self._next:
            nxt = max(self._next, self.dense_until)
            while nxt <= t:
                nxt = int(nxt * self.thin_factor) + 1
            self._next = nxt
            return True
        return False
