"""Step-length strategies.

All strategies consume a :class:`StepContext` describing a candidate move
``x - gamma * d`` with ``gamma in [0, gamma_max]`` and return the chosen
``gamma``. Open-loop rules are pure functions of the iteration counter;
the adaptive and monotonic rules keep per-run state and must not be shared
across concurrent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ContractViolation, NumericalError, Objective


@dataclass
class StepContext:
    """Inputs for one step-length query (convention: next = x - gamma*d)."""

    objective: Objective
    x: np.ndarray
    d: np.ndarray
    grad: np.ndarray
    gamma_max: float
    t: int


def agnostic_step(t: int, ell: int) -> float:
    """Open-loop rule ``ell / (t + ell)``."""
    if ell < 1 or t < 0:
        raise ContractViolation("need ell >= 1 and t >= 0")
    return ell / (t + ell)


def generalized_agnostic_step(t: int, g: Optional[Callable[[int], float]] = None) -> float:
    """Open-loop rule ``g(t) / (t + g(t))`` with default g(t) = 2 + ln(t+1)."""
    gt = (2.0 + math.log(t + 1)) if g is None else float(g(t))
    if gt < 0:
        raise ContractViolation("g(t) must be nonnegative")
    return gt / (t + gt)


class AgnosticStep:
    def __init__(self, ell: int = 2):
        if ell < 1:
            raise ContractViolation("ell must be >= 1")
        self.ell = ell

    def step(self, ctx: StepContext) -> float:
        return min(agnostic_step(ctx.t, self.ell), ctx.gamma_max)


class GeneralizedAgnosticStep:
    def __init__(self, g: Optional[Callable[[int], float]] = None):
        self.g = g

    def step(self, ctx: StepContext) -> float:
        return min(generalized_agnostic_step(ctx.t, self.g), ctx.gamma_max)


class MonotonicStep:
    """Open-loop step halved until the move stays in the domain and makes
    strict primal progress. The halving exponent persists across
    iterations and never decreases."""

    def __init__(self):
        self.n_halvings = 1

    def step(self, ctx: StepContext) -> float:
        obj = ctx.objective
        fx = obj.value(ctx.x)
        for n in range(self.n_halvings, self.n_halvings + 65):
            gamma = min(2.0 ** (-n) / (2.0 + ctx.t), ctx.gamma_max)
            y = ctx.x - gamma * ctx.d
            if not obj.in_domain(y):
                continue
            if obj.value(y) < fx:
                self.n_halvings = n
                return gamma
        return 0.0  # stall signal


class AdaptiveStep:
    """Short step with a dynamically estimated smoothness constant.

    The estimate shrinks by ``eta`` before each query and grows by ``tau``
    until the probe gradient satisfies ``<grad f(x - gamma d), d> >= 0``.
    The accepted estimate persists across iterations.
    """

    def __init__(self, eta: float = 0.9, tau: float = 2.0,
                 l_estimate: Optional[float] = None):
        if not (eta <= 1.0 < tau):
            raise ContractViolation("need eta <= 1 < tau")
        self.eta = eta
        self.tau = tau
        self.l_estimate = l_estimate
        self.stalled = False

    def _bootstrap_estimate(self, ctx: StepContext) -> float:
        obj = ctx.objective
        eps = 1e-4
        d_norm = float(np.linalg.norm(ctx.d))
        for _ in range(8):
            y = ctx.x - eps * ctx.d
            if obj.in_domain(y):
                g_probe = obj.gradient(y)
                if np.isfinite(g_probe).all():
                    num = float(np.linalg.norm(ctx.grad - g_probe))
                    return max(num / (eps * d_norm), 1e-8)
            eps /= 10.0
        return 1.0

    def step(self, ctx: StepContext) -> float:
        self.stalled = False
        gd = float(np.vdot(ctx.grad, ctx.d))
        dn2 = float(np.vdot(ctx.d, ctx.d))
        if gd < -1e-12 * (1.0 + abs(gd)):
            raise ContractViolation("adaptive step needs <grad, d> >= 0")
        if gd <= 0.0 or dn2 == 0.0:
            return 0.0
        if self.l_estimate is None:
            self.l_estimate = self._bootstrap_estimate(ctx)
        obj = ctx.objective
        m = self.eta * self.l_estimate
        gamma = min(gd / (m * dn2), ctx.gamma_max)
        for _ in range(100):
            gamma = min(gd / (m * dn2), ctx.gamma_max)
            y = ctx.x - gamma * ctx.d
            if obj.in_domain(y):
                g_probe = obj.gradient(y)
                if not np.isfinite(g_probe).all():
                    raise NumericalError("non-finite gradient while probing step size")
                if float(np.vdot(g_probe, ctx.d)) >= 0.0:
                    self.l_estimate = m
                    return gamma
            m *= self.tau
        self.stalled = True
        return gamma


class SecantStep:
    """Secant search for a root of ``h(gamma) = <grad f(x - gamma d), d>``.

    The maximum step is halved until the far endpoint lies in the domain;
    iterates are projected to ``[0, gamma_max]``. On exhausting the
    iteration budget the probed step with the smallest function value is
    returned.
    """

    def __init__(self, max_iters: int = 40, tol: float = 1e-10):
        if max_iters < 1:
            raise ContractViolation("max_iters must be >= 1")
        self.max_iters = max_iters
        self.tol = tol

    def step(self, ctx: StepContext) -> float:
        obj = ctx.objective
        gd = float(np.vdot(ctx.grad, ctx.d))
        scale = 1.0 + abs(gd)
        if gd < -1e-12 * scale:
            raise ContractViolation("secant step needs <grad, d> >= 0")
        if gd <= self.tol * scale:
            return 0.0  # already stationary along d

        gamma_max = ctx.gamma_max
        halvings = 0
        while not obj.in_domain(ctx.x - gamma_max * ctx.d):
            gamma_max /= 2.0
            halvings += 1
            if halvings > 64:
                raise NumericalError("could not halve the step into the domain")

        def h(gamma: float) -> float:
            return float(np.vdot(obj.gradient(ctx.x - gamma * ctx.d), ctx.d))

        gamma_prev, h_prev = 0.0, gd
        gamma_cur = gamma_max
        h_cur = h(gamma_cur)
        probed = [0.0, gamma_cur]
        for _ in range(self.max_iters):
            if abs(h_cur - h_prev) <= self.tol * scale:
                return gamma_cur
            gamma_new = gamma_cur - h_cur * (gamma_cur - gamma_prev) / (h_cur - h_prev)
            gamma_new = min(max(gamma_new, 0.0), gamma_max)
            gamma_prev, h_prev = gamma_cur, h_cur
            gamma_cur = gamma_new
            h_cur = h(gamma_cur)
            probed.append(gamma_cur)
        values = [obj.value(ctx.x - g * ctx.d) for g in probed]
        return probed[int(np.argmin(values))]


def quadratic_exact_step(a_apply, b, x, d, gamma_max: float) -> float:
    """Exact line search for ``f = 0.5 x'Ax + b'x`` along ``x - gamma d``."""
    num = float(np.vdot(a_apply(x) + b, d))
    den = float(np.vdot(a_apply(d), d))
    if den <= 1e-16 * float(np.vdot(d, d)):
        return gamma_max if num > 0.0 else 0.0
    return min(max(num / den, 0.0), gamma_max)


class QuadraticExactStep:
    """Strategy wrapper around :func:`quadratic_exact_step`."""

    def __init__(self, a_apply, b):
        self.a_apply = a_apply
        self.b = b

    def step(self, ctx: StepContext) -> float:
        return quadratic_exact_step(self.a_apply, self.b, ctx.x, ctx.d, ctx.gamma_max)
