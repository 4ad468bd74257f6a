"""Implementation of the scripting facade.

The facade consumes the condgrad package only through its public API:
oracle classes, the Objective/SolverConfig/StopCriteria contracts, and the
solver entry points. Results are extracted into plain data so they stay
valid after the solve returns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

import condgrad
from condgrad import atom_dense


class Variant(enum.Enum):
    STANDARD = "standard"
    LAZY = "lazy"
    AWAY = "away"
    PAIRWISE = "pairwise"
    BLENDED_PAIRWISE = "blended_pairwise"


class Step(enum.Enum):
    ADAPTIVE = "adaptive"
    SECANT = "secant"
    MONOTONIC = "monotonic"
    AGNOSTIC = "agnostic"
    GENERALIZED_AGNOSTIC = "generalized_agnostic"


_SOLVERS = {
    Variant.STANDARD: condgrad.frank_wolfe,
    Variant.LAZY: condgrad.lazy_frank_wolfe,
    Variant.AWAY: condgrad.away_frank_wolfe,
    Variant.PAIRWISE: condgrad.pairwise_cg,
    Variant.BLENDED_PAIRWISE: condgrad.blended_pairwise_cg,
}


def _make_step(step: Step):
    if step is Step.ADAPTIVE:
        return condgrad.AdaptiveStep()
    if step is Step.SECANT:
        return condgrad.SecantStep()
    if step is Step.MONOTONIC:
        return condgrad.MonotonicStep()
    if step is Step.AGNOSTIC:
        return condgrad.AgnosticStep(2)
    if step is Step.GENERALIZED_AGNOSTIC:
        return condgrad.GeneralizedAgnosticStep()
    raise ValueError(f"unknown step {step!r}")


class UserCallableError(RuntimeError):
    """A user-supplied callable raised; carries the solver iteration."""

    def __init__(self, kind: str, iteration: int, cause: BaseException):
        super().__init__(
            f"user {kind} callable raised at iteration t={iteration}: {cause!r}"
        )
        self.kind = kind
        self.iteration = iteration


@dataclass
class BoundOracle:
    """Handle over a condgrad oracle plus its expected direction shape."""

    inner: object
    shape: tuple

    def extreme_point(self, direction):
        return self.inner.extreme_point(direction)


def probability_simplex_oracle(tau: float = 1.0, dim: Optional[int] = None) -> BoundOracle:
    return BoundOracle(condgrad.ProbabilitySimplexOracle(tau),
                       (dim,) if dim else ())


def ksparse_oracle(k: int, tau: float = 1.0, dim: Optional[int] = None) -> BoundOracle:
    return BoundOracle(condgrad.KSparseOracle(k, tau), (dim,) if dim else ())


def hypersimplex_oracle(k: int, tau: float = 1.0, dim: Optional[int] = None) -> BoundOracle:
    return BoundOracle(condgrad.HypersimplexOracle(k, tau), (dim,) if dim else ())


def box_oracle(lower, upper) -> BoundOracle:
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    return BoundOracle(condgrad.BoxOracle(lower, upper), lower.shape)


def birkhoff_oracle(n: int) -> BoundOracle:
    return BoundOracle(condgrad.BirkhoffOracle(), (n, n))


def nuclear_norm_oracle(tau: float, rows: int, cols: int) -> BoundOracle:
    return BoundOracle(condgrad.NuclearNormOracle(tau), (rows, cols))


def spectraplex_oracle(tau: float, n: int) -> BoundOracle:
    return BoundOracle(condgrad.SpectraplexOracle(tau), (n, n))


def _check_shape(oracle: BoundOracle, direction: np.ndarray):
    if oracle.shape and tuple(direction.shape) != tuple(oracle.shape):
        raise ValueError(
            f"direction shape {direction.shape} does not match the oracle "
            f"dimension {oracle.shape}"
        )


def compute_extreme_point(oracle: BoundOracle, direction) -> np.ndarray:
    """Extreme point minimizing ``<direction, .>``, as a dense array."""
    direction = np.asarray(direction, dtype=np.float64)
    _check_shape(oracle, direction)
    return atom_dense(oracle.inner.extreme_point(direction))


@dataclass
class BoundResult:
    """Plain-data view of a solver run."""

    x: np.ndarray
    primal: float
    dual_gap: float
    termination: str
    lmo_calls: int
    trajectory: list = field(default_factory=list)  # (t, primal, dual_gap, step_type)


def solve(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray, np.ndarray], None],
    oracle: BoundOracle,
    x0,
    variant: Variant = Variant.STANDARD,
    step: Step = Step.ADAPTIVE,
    epsilon: float = 1e-7,
    max_iterations: int = 10_000_000,
    max_time: float = 3600.0,
    kappa: float = 2.0,
    domain_check: Optional[Callable[[np.ndarray], bool]] = None,
    callback: Optional[Callable] = None,
) -> BoundResult:
    """Drive a condgrad solver with user-supplied callables.

    ``grad`` must write the gradient into its first argument. Exceptions
    raised inside ``f``/``grad`` abort the solve and resurface as
    :class:`UserCallableError` carrying the iteration counter.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _check_shape(oracle, x0)
    context = {"t": 0}

    def wrapped_value(x):
        try:
            return float(f(x))
        except Exception as exc:
            raise UserCallableError("objective", context["t"], exc) from exc

    def wrapped_gradient(storage, x):
        try:
            grad(storage, x)
        except UserCallableError:
            raise
        except Exception as exc:
            raise UserCallableError("gradient", context["t"], exc) from exc

    objective = condgrad.Objective(
        value=wrapped_value,
        gradient_into=wrapped_gradient,
        domain_check=domain_check,
    )

    def tracking_callback(state, active_set):
        context["t"] = state.t + 1  # subsequent evaluations belong to t+1
        if callback is not None:
            return callback(state, active_set)
        return True

    config = condgrad.SolverConfig(
        step_strategy=_make_step(step),
        stop=condgrad.StopCriteria(epsilon=epsilon,
                                   max_iterations=max_iterations,
                                   max_time=max_time),
        kappa=kappa,
        lazy=(variant is Variant.LAZY),
        callback=tracking_callback,
    )
    solver = _SOLVERS[variant]
    result = solver(objective, oracle.inner, x0, config)
    return BoundResult(
        x=np.array(atom_dense(result.x_final), copy=True),
        primal=float(result.primal_final),
        dual_gap=float(result.dual_gap_final),
        termination=result.termination,
        lmo_calls=result.lmo_calls,
        trajectory=[(s.t, s.primal, s.dual_gap, s.step_type)
                    for s in result.trajectory],
    )
