"""Frank-Wolfe solver variants.

Every solver is a driver loop over the oracle/step-size/active-set
contracts with the sign convention ``x_{t+1} = x_t - gamma * d_t``.
Callbacks fire after the iterate update and before the termination checks
of the next iteration; returning False stops the run. Active-set variants
accept a pre-built :class:`~condgrad.activeset.ActiveSet` in place of the
starting vertex for warm starts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .activeset import ActiveSet, QuadCacheActiveSet, quad_correction
from .core import (
    STEP_AWAY,
    STEP_CORRECTION,
    STEP_DROP,
    STEP_FW,
    STEP_INFACE,
    STEP_LAZY,
    STEP_PAIRWISE,
    TERM_CALLBACK,
    TERM_GAP,
    TERM_ITERATIONS,
    TERM_STALL,
    TERM_TIME,
    ContractViolation,
    IterationState,
    LogSchedule,
    NumericalError,
    Objective,
    RunResult,
    StopCriteria,
    fw_gap,
    invoke_callback,
)
from .lmo import (
    UnsupportedOracleError,
    VertexCache,
    atom_dense,
    cached_extreme_point,
    supports_inface,
)
from .stepsize import AdaptiveStep, StepContext

_DROP_SLACK = 1.0 - 1e-12
# After a failed exact-gap certificate, retry at most every this many steps.
_CERT_COOLDOWN = 100


@dataclass
class SolverConfig:
    """Knobs shared by all variants."""

    step_strategy: object = None  # None selects a fresh AdaptiveStep
    stop: StopCriteria = field(default_factory=StopCriteria)
    kappa: float = 2.0
    lazy: bool = False
    lazy_tolerance: float = 2.0
    cache_cap: int = 5000
    callback: Optional[Callable] = None
    log_schedule: Optional[LogSchedule] = None
    quad: Optional[tuple] = None  # (a_apply, b) when the objective is quadratic
    use_quad_cache: bool = False
    correction_interval: Optional[int] = None

    def __post_init__(self):
        if self.kappa < 1.0:
            raise ContractViolation("kappa must be >= 1")
        if self.lazy_tolerance < 1.0:
            raise ContractViolation("lazy_tolerance must be >= 1")
        if self.correction_interval is not None and self.correction_interval < 1:
            raise ContractViolation("correction_interval must be >= 1")


class _CountingOracle:
    """Counts exact oracle invocations (cache hits bypass this)."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def extreme_point(self, g):
        self.calls += 1
        return self.inner.extreme_point(g)

    def inface_extreme_points(self, g, x):
        self.calls += 1
        return self.inner.inface_extreme_points(g, x)

    def coordinate_bounds(self, x):
        return self.inner.coordinate_bounds(x)


class _Run:
    """Timing, trajectory logging, and limit checks shared by variants."""

    def __init__(self, cfg: SolverConfig, objective: Objective):
        self.cfg = cfg
        self.objective = objective
        self.stop = cfg.stop
        self.schedule = cfg.log_schedule if cfg.log_schedule is not None else LogSchedule()
        self.trajectory: list[IterationState] = []
        self.t = 0
        self._t0 = time.perf_counter_ns()

    def elapsed_ns(self) -> int:
        return time.perf_counter_ns() - self._t0

    def limit_termination(self) -> Optional[str]:
        if self.t >= self.stop.max_iterations:
            return TERM_ITERATIONS
        if self.elapsed_ns() >= self.stop.max_time * 1e9:
            return TERM_TIME
        return None

    def observe(self, x, grad, v, gamma, gap, tag, lmo_calls,
                active_set=None, aset_size=0) -> bool:
        """Record the just-completed iteration (respecting the logging
        stride) and fire the callback. Returns False when the callback
        requests a stop. The objective value is only evaluated when a
        snapshot is actually needed."""
        if not np.isfinite(gap):
            self._raise_non_finite(x, gap, lmo_calls)
        want_log = self.schedule.should_log(self.t)
        cb = self.cfg.callback
        if not want_log and cb is None:
            return True
        primal = self.objective.value(x)
        if not np.isfinite(primal):
            self._raise_non_finite(x, gap, lmo_calls)
        state = IterationState(
            t=self.t, x=np.array(x, copy=True), grad=grad, v=v, gamma=gamma,
            primal=primal, dual_gap=gap, step_type=tag,
            elapsed_ns=self.elapsed_ns(), lmo_calls=lmo_calls,
            active_set_size=aset_size,
        )
        if want_log:
            self.trajectory.append(state)
        if cb is not None and not invoke_callback(cb, state, active_set):
            return False
        return True

    def _raise_non_finite(self, x, gap, lmo_calls):
        err = NumericalError("non-finite objective or gap encountered")
        err.partial = self.finish(x, gap, TERM_STALL, lmo_calls)
        raise err

    def finish(self, x, gap, termination, lmo_calls) -> RunResult:
        return RunResult(
            x_final=np.array(x, copy=True),
            primal_final=float(self.objective.value(x)),
            dual_gap_final=float(gap), trajectory=self.trajectory,
            termination=termination, lmo_calls=lmo_calls,
            elapsed_ns=self.elapsed_ns(),
        )


def _strategy(cfg: SolverConfig):
    return cfg.step_strategy if cfg.step_strategy is not None else AdaptiveStep()


class _LazyGap:
    """Dual-gap estimate for lazified runs: halves on oracle misses, never
    increases, and remembers failed exact certificates to avoid
    re-certifying every iteration."""

    def __init__(self, phi0: float):
        self.phi = phi0
        self._failed_at = np.inf
        self._failed_t = -(10 ** 9)

    def update(self, phi_new: float):
        self.phi = min(self.phi, phi_new)

    def should_certify(self, epsilon: float, t: int) -> bool:
        if self.phi > epsilon:
            return False
        return self.phi < self._failed_at or t >= self._failed_t + _CERT_COOLDOWN

    def certificate_failed(self, t: int):
        self._failed_at = self.phi
        self._failed_t = t


# ---------------------------------------------------------------------------
# Standard and lazified Frank-Wolfe


def frank_wolfe(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Vanilla Frank-Wolfe: move toward the oracle vertex each iteration."""
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)

    x = atom_dense(x0).copy()
    grad = objective.gradient(x)
    v = atom_dense(oracle.extreme_point(grad))
    gap = fw_gap(grad, x, v)
    if not run.observe(x, grad, v, 0.0, gap, STEP_FW, oracle.calls):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)

    termination = None
    while True:
        if gap <= cfg.stop.epsilon:
            termination = TERM_GAP
            break
        termination = run.limit_termination()
        if termination:
            break
        d = x - v
        gamma = strategy.step(StepContext(objective, x, d, grad, 1.0, run.t))
        stalled = getattr(strategy, "stalled", False) or (gamma <= 0.0 and gap > 0.0)
        x = x - gamma * d
        run.t += 1
        grad = objective.gradient(x)
        v = atom_dense(oracle.extreme_point(grad))
        gap = fw_gap(grad, x, v)
        if not run.observe(x, grad, v, gamma, gap, STEP_FW, oracle.calls):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    return run.finish(x, gap, termination, oracle.calls)


def lazy_frank_wolfe(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Frank-Wolfe reusing cached vertices against a halving gap estimate.

    The reported per-iteration gap is the estimate; termination is
    certified by one exact oracle call.
    """
    cfg = config or SolverConfig(lazy=True)
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    cache = VertexCache(cfg.cache_cap)

    x = atom_dense(x0).copy()
    grad = objective.gradient(x)
    v_atom = oracle.extreme_point(grad)
    cache.insert(v_atom)
    v = atom_dense(v_atom)
    gap_exact = fw_gap(grad, x, v)
    lazy = _LazyGap(gap_exact / 2.0)
    if not run.observe(x, grad, v, 0.0, lazy.phi, STEP_FW, oracle.calls):
        return run.finish(x, gap_exact, TERM_CALLBACK, oracle.calls)
    if gap_exact <= cfg.stop.epsilon:
        return run.finish(x, gap_exact, TERM_GAP, oracle.calls)

    termination = None
    final_gap = None
    while True:
        if lazy.should_certify(cfg.stop.epsilon, run.t):
            v_cert = atom_dense(oracle.extreme_point(grad))
            gap_exact = fw_gap(grad, x, v_cert)
            if gap_exact <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap_exact
                break
            lazy.certificate_failed(run.t)
        termination = run.limit_termination()
        if termination:
            break
        v_atom, hit, phi_new = cached_extreme_point(
            cache, oracle, grad, x, lazy.phi, cfg.lazy_tolerance
        )
        lazy.update(phi_new)
        v = atom_dense(v_atom)
        if not hit:
            gap_now = fw_gap(grad, x, v)
            if gap_now <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap_now
                break
        d = x - v
        gamma = strategy.step(StepContext(objective, x, d, grad, 1.0, run.t))
        x = x - gamma * d
        run.t += 1
        grad = objective.gradient(x)
        tag = STEP_LAZY if hit else STEP_FW
        if not run.observe(x, grad, v, gamma, lazy.phi, tag, oracle.calls):
            termination = TERM_CALLBACK
            break
    if final_gap is None:
        final_gap = fw_gap(grad, x, atom_dense(oracle.extreme_point(grad)))
    return run.finish(x, final_gap, termination, oracle.calls)


# ---------------------------------------------------------------------------
# Active-set variants


def _initial_active_set(x0, cfg: SolverConfig) -> ActiveSet:
    if isinstance(x0, ActiveSet):
        return x0
    if cfg.use_quad_cache:
        if cfg.quad is None:
            raise ContractViolation("use_quad_cache requires cfg.quad = (a_apply, b)")
        return QuadCacheActiveSet.from_vertex_quadratic(cfg.quad[0], cfg.quad[1], x0)
    return ActiveSet.from_vertex(x0)


def _maybe_correct(aset, cfg: SolverConfig, run) -> bool:
    if cfg.correction_interval is None or cfg.quad is None:
        return False
    if len(aset) < 2 or (run.t + 1) % cfg.correction_interval != 0:
        return False
    return quad_correction(aset, cfg.quad[0], cfg.quad[1])


def away_frank_wolfe(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Away-step Frank-Wolfe over an explicit active set."""
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    aset = _initial_active_set(x0, cfg)
    x = aset.iterate

    grad = objective.gradient(x)
    v_atom = oracle.extreme_point(grad)
    v = atom_dense(v_atom)
    gap = fw_gap(grad, x, v)
    if not run.observe(x, grad, v, 0.0, gap, STEP_FW, oracle.calls, aset, len(aset)):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)

    termination = None
    while True:
        if gap <= cfg.stop.epsilon:
            termination = TERM_GAP
            break
        termination = run.limit_termination()
        if termination:
            break
        a_idx, _ = aset.argminmax(grad)
        a = aset.dense_atom(a_idx)
        away_gap = float(np.vdot(grad, a - x))
        if gap >= away_gap:
            d = x - v
            gamma = strategy.step(StepContext(objective, x, d, grad, 1.0, run.t))
            aset.apply_fw(v_atom, gamma)
            tag = STEP_FW
        else:
            lam = aset.weight(a_idx)
            gamma_max = lam / max(1.0 - lam, 1e-16)
            d = a - x
            gamma = strategy.step(StepContext(objective, x, d, grad, gamma_max, run.t))
            tag = STEP_DROP if gamma >= gamma_max * _DROP_SLACK else STEP_AWAY
            aset.apply_away(a_idx, gamma, gamma_max)
        stalled = getattr(strategy, "stalled", False) or (gamma <= 0.0)
        if _maybe_correct(aset, cfg, run):
            tag = STEP_CORRECTION
        x = aset.iterate
        run.t += 1
        grad = objective.gradient(x)
        v_atom = oracle.extreme_point(grad)
        v = atom_dense(v_atom)
        gap = fw_gap(grad, x, v)
        if not run.observe(x, grad, v, gamma, gap, tag, oracle.calls, aset, len(aset)):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    return run.finish(x, gap, termination, oracle.calls)


def pairwise_cg(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Pairwise conditional gradients: weight moves from the away atom to
    the FW vertex. With ``cfg.lazy`` the FW vertex comes from the cache."""
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    aset = _initial_active_set(x0, cfg)
    x = aset.iterate
    cache = VertexCache(cfg.cache_cap) if cfg.lazy else None

    grad = objective.gradient(x)
    v_atom = oracle.extreme_point(grad)
    if cache is not None:
        cache.insert(v_atom)
    v = atom_dense(v_atom)
    gap = fw_gap(grad, x, v)
    lazy = _LazyGap(gap / 2.0) if cfg.lazy else None
    reported = lazy.phi if lazy else gap
    if not run.observe(x, grad, v, 0.0, reported, STEP_PAIRWISE, oracle.calls, aset, len(aset)):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)
    if gap <= cfg.stop.epsilon:
        return run.finish(x, gap, TERM_GAP, oracle.calls)

    termination = None
    final_gap = None
    while True:
        if lazy is None:
            if gap <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap
                break
        elif lazy.should_certify(cfg.stop.epsilon, run.t):
            v_cert = atom_dense(oracle.extreme_point(grad))
            gap_now = fw_gap(grad, x, v_cert)
            if gap_now <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap_now
                break
            lazy.certificate_failed(run.t)
        termination = run.limit_termination()
        if termination:
            break
        if lazy is None:
            v_use, hit = v_atom, False
        else:
            v_use, hit, phi_new = cached_extreme_point(
                cache, oracle, grad, x, lazy.phi, cfg.lazy_tolerance
            )
            lazy.update(phi_new)
            if not hit:
                gap_now = fw_gap(grad, x, atom_dense(v_use))
                if gap_now <= cfg.stop.epsilon:
                    termination = TERM_GAP
                    final_gap = gap_now
                    break
        a_idx, _ = aset.argminmax(grad)
        a = aset.dense_atom(a_idx)
        d = a - atom_dense(v_use)
        gamma_max = aset.weight(a_idx)
        gamma = strategy.step(StepContext(objective, x, d, grad, gamma_max, run.t))
        tag = STEP_DROP if gamma >= gamma_max * _DROP_SLACK else STEP_PAIRWISE
        stalled = getattr(strategy, "stalled", False) or (
            gamma <= 0.0 and float(np.vdot(grad, d)) > 0.0
        )
        aset.apply_pairwise(a_idx, v_use, gamma)
        if _maybe_correct(aset, cfg, run):
            tag = STEP_CORRECTION
        x = aset.iterate
        run.t += 1
        grad = objective.gradient(x)
        if lazy is None:
            v_atom = oracle.extreme_point(grad)
            v = atom_dense(v_atom)
            gap = fw_gap(grad, x, v)
            reported = gap
        else:
            v = None
            reported = lazy.phi
        if not run.observe(x, grad, v, gamma, reported, tag, oracle.calls, aset, len(aset)):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    if final_gap is None:
        if lazy is None:
            final_gap = gap
        else:
            final_gap = fw_gap(grad, x, atom_dense(oracle.extreme_point(grad)))
    return run.finish(x, final_gap, termination, oracle.calls)


def blended_pairwise_cg(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Blended pairwise conditional gradients.

    Prefers a local pairwise step from the away atom to the local FW atom
    whenever ``kappa`` times the local gap covers the global gap (or its
    lazified estimate); otherwise takes a global FW step.
    """
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    aset = _initial_active_set(x0, cfg)
    x = aset.iterate
    cache = VertexCache(cfg.cache_cap) if cfg.lazy else None

    grad = objective.gradient(x)
    v_atom = oracle.extreme_point(grad)
    if cache is not None:
        cache.insert(v_atom)
    v = atom_dense(v_atom)
    gap = fw_gap(grad, x, v)
    lazy = _LazyGap(gap / 2.0) if cfg.lazy else None
    reported = lazy.phi if lazy else gap
    if not run.observe(x, grad, v, 0.0, reported, STEP_FW, oracle.calls, aset, len(aset)):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)
    if gap <= cfg.stop.epsilon:
        return run.finish(x, gap, TERM_GAP, oracle.calls)

    termination = None
    final_gap = None
    while True:
        if lazy is None:
            if gap <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap
                break
        elif lazy.should_certify(cfg.stop.epsilon, run.t):
            v_cert = atom_dense(oracle.extreme_point(grad))
            gap_now = fw_gap(grad, x, v_cert)
            if gap_now <= cfg.stop.epsilon:
                termination = TERM_GAP
                final_gap = gap_now
                break
            lazy.certificate_failed(run.t)
        termination = run.limit_termination()
        if termination:
            break
        dots = aset.dot_with_atoms(grad)
        a_idx = int(np.argmax(dots))
        s_idx = int(np.argmin(dots))
        local_gap = float(dots[a_idx] - dots[s_idx])
        test_rhs = lazy.phi if lazy is not None else gap
        hit = False
        if cfg.kappa * local_gap >= test_rhs:
            a = aset.dense_atom(a_idx)
            s = aset.dense_atom(s_idx)
            d = a - s
            gamma_max = aset.weight(a_idx)
            gamma = strategy.step(StepContext(objective, x, d, grad, gamma_max, run.t))
            tag = STEP_DROP if gamma >= gamma_max * _DROP_SLACK else STEP_PAIRWISE
            stalled = getattr(strategy, "stalled", False) or (
                gamma <= 0.0 and local_gap > 0.0
            )
            aset.apply_pairwise(a_idx, aset.atoms[s_idx], gamma)
        else:
            if lazy is not None:
                v_atom, hit, phi_new = cached_extreme_point(
                    cache, oracle, grad, x, lazy.phi, cfg.lazy_tolerance
                )
                lazy.update(phi_new)
                if not hit:
                    gap_now = fw_gap(grad, x, atom_dense(v_atom))
                    if gap_now <= cfg.stop.epsilon:
                        termination = TERM_GAP
                        final_gap = gap_now
                        break
            d = x - atom_dense(v_atom)
            gamma = strategy.step(StepContext(objective, x, d, grad, 1.0, run.t))
            tag = STEP_LAZY if hit else STEP_FW
            stalled = getattr(strategy, "stalled", False) or (
                gamma <= 0.0 and float(np.vdot(grad, d)) > 0.0
            )
            aset.apply_fw(v_atom, gamma)
        if _maybe_correct(aset, cfg, run):
            tag = STEP_CORRECTION
        x = aset.iterate
        run.t += 1
        grad = objective.gradient(x)
        if lazy is None:
            v_atom = oracle.extreme_point(grad)
            v = atom_dense(v_atom)
            gap = fw_gap(grad, x, v)
            reported = gap
        else:
            v = None
            reported = lazy.phi
        if not run.observe(x, grad, v, gamma, reported, tag, oracle.calls, aset, len(aset)):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    if final_gap is None:
        if lazy is None:
            final_gap = gap
        else:
            final_gap = fw_gap(grad, x, atom_dense(oracle.extreme_point(grad)))
    return run.finish(x, final_gap, termination, oracle.calls)


# ---------------------------------------------------------------------------
# Decomposition-invariant variants


def _ratio_gamma_max(x, d, lower, upper) -> float:
    """Largest gamma keeping ``x - gamma * d`` inside the coordinate bounds."""
    gamma_max = np.inf
    pos = d > 1e-15
    if np.any(pos):
        head = np.maximum(x[pos] - lower[pos], 0.0)
        gamma_max = min(gamma_max, float(np.min(head / d[pos])))
    neg = d < -1e-15
    if np.any(neg):
        head = np.maximum(upper[neg] - x[neg], 0.0)
        gamma_max = min(gamma_max, float(np.min(head / (-d[neg]))))
    return gamma_max


def dicg(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Decomposition-invariant CG: no active set; the pairwise direction
    uses the in-face away vertex and the global FW vertex, with the step
    capped by a coordinate ratio test against the bounds."""
    if not supports_inface(lmo):
        raise UnsupportedOracleError("dicg requires an oracle with in-face support")
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    x = atom_dense(x0).copy()

    grad = objective.gradient(x)
    v = atom_dense(oracle.extreme_point(grad))
    gap = fw_gap(grad, x, v)
    if not run.observe(x, grad, v, 0.0, gap, STEP_PAIRWISE, oracle.calls):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)

    termination = None
    lower, upper = oracle.coordinate_bounds(x)
    while True:
        if gap <= cfg.stop.epsilon:
            termination = TERM_GAP
            break
        termination = run.limit_termination()
        if termination:
            break
        _, a_in = oracle.inface_extreme_points(grad, x)
        d = atom_dense(a_in) - v
        gamma_max = _ratio_gamma_max(x, d, lower, upper)
        gamma = strategy.step(StepContext(objective, x, d, grad, gamma_max, run.t))
        stalled = getattr(strategy, "stalled", False) or (
            gamma <= 0.0 and float(np.vdot(grad, d)) > 0.0 and gamma_max > 0.0
        )
        x = x - gamma * d
        run.t += 1
        grad = objective.gradient(x)
        v = atom_dense(oracle.extreme_point(grad))
        gap = fw_gap(grad, x, v)
        if not run.observe(x, grad, v, gamma, gap, STEP_PAIRWISE, oracle.calls):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    return run.finish(x, gap, termination, oracle.calls)


def bdicg(objective: Objective, lmo, x0, config: Optional[SolverConfig] = None) -> RunResult:
    """Blended decomposition-invariant CG: in-face pairwise step whenever
    ``kappa`` times the in-face gap covers the global gap, else global FW."""
    if not supports_inface(lmo):
        raise UnsupportedOracleError("bdicg requires an oracle with in-face support")
    cfg = config or SolverConfig()
    oracle = _CountingOracle(lmo)
    strategy = _strategy(cfg)
    run = _Run(cfg, objective)
    x = atom_dense(x0).copy()

    grad = objective.gradient(x)
    v = atom_dense(oracle.extreme_point(grad))
    gap = fw_gap(grad, x, v)
    if not run.observe(x, grad, v, 0.0, gap, STEP_FW, oracle.calls):
        return run.finish(x, gap, TERM_CALLBACK, oracle.calls)

    termination = None
    lower, upper = oracle.coordinate_bounds(x)
    while True:
        if gap <= cfg.stop.epsilon:
            termination = TERM_GAP
            break
        termination = run.limit_termination()
        if termination:
            break
        s_in, a_in = oracle.inface_extreme_points(grad, x)
        s = atom_dense(s_in)
        a = atom_dense(a_in)
        local_gap = float(np.vdot(grad, a - s))
        if cfg.kappa * local_gap >= gap:
            d = a - s
            gamma_max = _ratio_gamma_max(x, d, lower, upper)
            tag = STEP_INFACE
        else:
            d = x - v
            gamma_max = 1.0
            tag = STEP_FW
        gamma = strategy.step(StepContext(objective, x, d, grad, gamma_max, run.t))
        stalled = getattr(strategy, "stalled", False) or (
            gamma <= 0.0 and float(np.vdot(grad, d)) > 0.0 and gamma_max > 0.0
        )
        x = x - gamma * d
        run.t += 1
        grad = objective.gradient(x)
        v = atom_dense(oracle.extreme_point(grad))
        gap = fw_gap(grad, x, v)
        if not run.observe(x, grad, v, gamma, gap, tag, oracle.calls):
            termination = TERM_CALLBACK
            break
        if stalled:
            termination = TERM_STALL
            break
    return run.finish(x, gap, termination, oracle.calls)


# ---------------------------------------------------------------------------
# Block-coordinate Frank-Wolfe and alternating linear minimization


@dataclass
class BlockProblem:
    """Product-domain description for the block-coordinate solver.

    ``update_order`` selects the blocks touched each round: ``"cyclic"``
    (one block per round, round-robin), ``"full"`` (all blocks every
    round), ``("random", seed)`` (one seeded-random block per round), or a
    custom list of block-index lists cycled round-robin. ``step_rule`` is
    ``"fw"`` or ``"blended-pairwise"`` applied to every block.
    """

    oracles: Sequence
    dims: Sequence[int]
    update_order: object = "full"
    step_rule: str = "fw"
    step_factory: Optional[Callable[[], object]] = None
    kappa: float = 2.0

    def __post_init__(self):
        if len(self.oracles) != len(self.dims):
            raise ContractViolation("one oracle per block is required")
        if any(d < 1 for d in self.dims):
            raise ContractViolation("block dimensions must be positive")
        if self.step_rule not in ("fw", "blended-pairwise"):
            raise ContractViolation(f"unknown block step rule {self.step_rule!r}")

    @property
    def slices(self) -> list:
        out = []
        start = 0
        for d in self.dims:
            out.append(slice(start, start + d))
            start += d
        return out

    def blocks_for_round(self, t: int, rng) -> list:
        m = len(self.dims)
        if self.update_order == "full":
            return list(range(m))
        if self.update_order == "cyclic":
            return [t % m]
        if isinstance(self.update_order, tuple) and self.update_order[0] == "random":
            return [int(rng.integers(m))]
        order = self.update_order
        return list(order[t % len(order)])


def block_coordinate_fw(objective: Objective, blocks: BlockProblem, x0,
                        config: Optional[SolverConfig] = None) -> RunResult:
    """Block-coordinate FW: one full gradient per round, then per-block
    oracle calls and steps for the selected blocks only; untouched blocks
    are copied unchanged. The dual gap is the sum of per-block gaps."""
    cfg = config or SolverConfig()
    run = _Run(cfg, objective)
    slices = blocks.slices
    m = len(blocks.dims)
    oracles = [_CountingOracle(o) for o in blocks.oracles]
    factory = blocks.step_factory or AdaptiveStep
    strategies = [factory() for _ in range(m)]
    rng = np.random.default_rng(
        blocks.update_order[1] if isinstance(blocks.update_order, tuple) else 0
    )

    if isinstance(x0, (list, tuple)):
        x = np.concatenate([atom_dense(b).ravel() for b in x0]).astype(np.float64)
    else:
        x = atom_dense(x0).astype(np.float64).copy()
    if x.size != sum(blocks.dims):
        raise ContractViolation("x0 does not match the block dimensions")

    asets: list = [None] * m
    if blocks.step_rule == "blended-pairwise":
        asets = [ActiveSet.from_vertex(x[sl].copy()) for sl in slices]

    def lmo_calls() -> int:
        return sum(o.calls for o in oracles)

    def sweep_gaps(grad_full) -> np.ndarray:
        gaps = np.empty(m)
        for i in range(m):
            g_i = grad_full[slices[i]]
            v_i = atom_dense(oracles[i].extreme_point(g_i))
            gaps[i] = float(np.vdot(g_i, x[slices[i]] - v_i))
        return gaps

    def total_atoms() -> int:
        return sum(len(a) for a in asets if a is not None)

    grad = objective.gradient(x)
    block_gaps = sweep_gaps(grad)
    gap = float(block_gaps.sum())
    if not run.observe(x, grad, None, 0.0, gap, STEP_FW, lmo_calls(), asets, total_atoms()):
        return run.finish(x, gap, TERM_CALLBACK, lmo_calls())

    termination = None
    while True:
        if gap <= cfg.stop.epsilon:
            block_gaps = sweep_gaps(grad)  # certify with fresh per-block gaps
            gap = float(block_gaps.sum())
            if gap <= cfg.stop.epsilon:
                termination = TERM_GAP
                break
        termination = run.limit_termination()
        if termination:
            break
        chosen = blocks.blocks_for_round(run.t, rng)
        gamma = 0.0
        tag = STEP_FW
        for i in chosen:
            sl = slices[i]
            g_i = grad[sl]
            x_i = x[sl]
            v_atom = oracles[i].extreme_point(g_i)
            v_i = atom_dense(v_atom)
            gap_i = float(np.vdot(g_i, x_i - v_i))
            block_gaps[i] = gap_i
            d_full = np.zeros_like(x)
            if blocks.step_rule == "blended-pairwise":
                aset = asets[i]
                dots = aset.dot_with_atoms(g_i)
                a_idx = int(np.argmax(dots))
                s_idx = int(np.argmin(dots))
                local_gap = float(dots[a_idx] - dots[s_idx])
                if blocks.kappa * local_gap >= gap_i:
                    d_full[sl] = aset.dense_atom(a_idx) - aset.dense_atom(s_idx)
                    gamma_max = aset.weight(a_idx)
                    gamma = strategies[i].step(
                        StepContext(objective, x, d_full, grad, gamma_max, run.t))
                    aset.apply_pairwise(a_idx, aset.atoms[s_idx], gamma)
                    tag = STEP_PAIRWISE
                else:
                    d_full[sl] = x_i - v_i
                    gamma = strategies[i].step(
                        StepContext(objective, x, d_full, grad, 1.0, run.t))
                    aset.apply_fw(v_atom, gamma)
                x[sl] = aset.iterate
            else:
                d_full[sl] = x_i - v_i
                gamma = strategies[i].step(
                    StepContext(objective, x, d_full, grad, 1.0, run.t))
                x[sl] = x_i - gamma * d_full[sl]
        run.t += 1
        grad = objective.gradient(x)
        gap = float(block_gaps.sum())
        if not run.observe(x, grad, None, gamma, gap, tag, lmo_calls(), asets, total_atoms()):
            termination = TERM_CALLBACK
            break
    return run.finish(x, gap, termination, lmo_calls())


@dataclass
class AlmProblem:
    """Feasibility (or constrained-objective) problem over an intersection
    of sets, one oracle per set, all living in the same space."""

    oracles: Sequence
    dim: int
    penalty: float = 1.0
    outer_objective: Optional[Objective] = None

    def __post_init__(self):
        if len(self.oracles) < 2:
            raise ContractViolation("ALM needs at least two sets")
        if self.penalty <= 0:
            raise ContractViolation("penalty must be positive")


@dataclass
class AlmResult:
    result: RunResult
    block_points: list
    average: np.ndarray
    infeasibility: float


def alternating_linear_minimization(alm: AlmProblem, x0_blocks,
                                    config: Optional[SolverConfig] = None) -> AlmResult:
    """Alternating linear minimization over the product of the sets.

    Minimizes ``penalty/2 * sum_i ||x_i - avg||^2 + f(avg)`` with the
    block-coordinate solver (full-block order). The penalty doubles every
    1000 rounds while the infeasibility measure stalls.
    """
    cfg = config or SolverConfig()
    m = len(alm.oracles)
    d = alm.dim
    lam = {"value": float(alm.penalty)}
    outer = alm.outer_objective

    def split(z):
        return z.reshape(m, d)

    def value(z):
        pts = split(z)
        avg = pts.mean(axis=0)
        val = 0.5 * lam["value"] * float(((pts - avg) ** 2).sum())
        if outer is not None:
            val += outer.value(avg)
        return val

    def gradient_into(storage, z):
        pts = split(z)
        avg = pts.mean(axis=0)
        g = lam["value"] * (pts - avg)
        if outer is not None:
            g = g + outer.gradient(avg) / m
        storage[:] = g.ravel()

    domain_check = None
    if outer is not None and outer.domain_check is not None:
        domain_check = lambda z: outer.domain_check(split(z).mean(axis=0))

    product_objective = Objective(value, gradient_into, domain_check)

    def infeasibility_of(z) -> float:
        pts = split(z)
        avg = pts.mean(axis=0)
        return float(((pts - avg) ** 2).sum())

    checkpoint = {"t": 0, "infeas": np.inf}
    user_cb = cfg.callback

    def alm_callback(state, extras):
        if state.t - checkpoint["t"] >= 1000:
            infeas = infeasibility_of(state.x)
            if infeas > 0.9 * checkpoint["infeas"]:
                lam["value"] *= 2.0
            checkpoint["t"] = state.t
            checkpoint["infeas"] = infeas
        if user_cb is not None:
            return invoke_callback(user_cb, state, extras)
        return True

    blocks = BlockProblem(
        oracles=alm.oracles,
        dims=[d] * m,
        update_order="full",
        step_rule="blended-pairwise",
        kappa=cfg.kappa,
    )
    inner_cfg = SolverConfig(
        step_strategy=cfg.step_strategy, stop=cfg.stop, kappa=cfg.kappa,
        callback=alm_callback, log_schedule=cfg.log_schedule,
    )
    result = block_coordinate_fw(product_objective, blocks, x0_blocks, inner_cfg)
    pts = split(result.x_final)
    avg = pts.mean(axis=0)
    return AlmResult(
        result=result,
        block_points=[pts[i].copy() for i in range(m)],
        average=avg,
        infeasibility=infeasibility_of(result.x_final),
    )
