import numpy as np
import pytest

import condgrad as cg
from condgrad.activeset import ActiveSet
from condgrad.core import (
    TERM_CALLBACK,
    TERM_GAP,
    TERM_ITERATIONS,
    NumericalError,
    Objective,
    StopCriteria,
)
from condgrad.lmo import (
    BoxOracle,
    ProbabilitySimplexOracle,
    UnsupportedOracleError,
    atom_dense,
)
from condgrad.stepsize import AgnosticStep


def projection_objective(y):
    """f(x) = 0.5 ||x - y||^2 with gradient x - y."""
    y = np.asarray(y, dtype=float)

    def value(x):
        r = x - y
        return 0.5 * float(np.vdot(r, r))

    def gradient_into(storage, x):
        storage[...] = x - y

    return Objective(value=value, gradient_into=gradient_into)


def stop(eps=1e-7, iters=200000, seconds=60.0):
    return StopCriteria(epsilon=eps, max_iterations=iters, max_time=seconds)


def full_log():
    return cg.core.LogSchedule(stride=1)


class TestFrankWolfe:
    def test_interior_simplex_projection(self):
        y = np.array([0.5, 0.3, 0.2])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.frank_wolfe(obj, lmo, lmo.extreme_point(np.zeros(3)),
                             cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7
        assert np.allclose(res.x_final, y, atol=1e-3)

    def test_optimal_vertex_immediate_stop(self):
        # linear objective optimized at the starting vertex
        c = np.array([-1.0, 0.0, 1.0])
        obj = Objective(value=lambda x: float(c @ x),
                        gradient_into=lambda s, x: s.__setitem__(..., c))
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.frank_wolfe(obj, lmo, np.array([1.0, 0.0, 0.0]),
                             cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.trajectory[-1].t == 0

    def test_zero_iteration_budget(self):
        obj = projection_objective([0.0, 1.0])
        lmo = ProbabilitySimplexOracle(1.0)
        x0 = np.array([1.0, 0.0])
        res = cg.frank_wolfe(obj, lmo, x0,
                             cg.SolverConfig(stop=stop(iters=0)))
        assert res.termination == TERM_ITERATIONS
        assert np.array_equal(res.x_final, x0)

    def test_non_finite_objective_raises_with_partial(self):
        calls = {"n": 0}

        def value(x):
            calls["n"] += 1
            return np.nan if calls["n"] > 3 else float(x @ x)

        obj = Objective(value=value,
                        gradient_into=lambda s, x: s.__setitem__(..., 2 * x))
        lmo = ProbabilitySimplexOracle(1.0)
        with pytest.raises(NumericalError) as err:
            cg.frank_wolfe(obj, lmo, np.array([1.0, 0.0]),
                           cg.SolverConfig(stop=stop(), log_schedule=full_log()))
        assert hasattr(err.value, "partial")

    def test_primal_monotone_under_adaptive(self):
        y = np.array([0.2, 0.1, 0.4, 0.3])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.frank_wolfe(obj, lmo, lmo.extreme_point(np.zeros(4)),
                             cg.SolverConfig(stop=stop(),
                                             log_schedule=full_log()))
        primals = [s.primal for s in res.trajectory]
        assert all(b <= a + 1e-12 for a, b in zip(primals, primals[1:]))


class TestLazyFrankWolfe:
    def test_matches_plain_run(self):
        inst = cg.gen_simplex_ls(20, 40, seed=3)
        cfg_args = dict(stop=stop(eps=1e-4))
        plain = cg.frank_wolfe(inst.objective, inst.lmo, inst.x0,
                               cg.SolverConfig(**cfg_args))
        lazy = cg.lazy_frank_wolfe(inst.objective, inst.lmo, inst.x0,
                                   cg.SolverConfig(lazy=True, **cfg_args))
        assert lazy.termination == TERM_GAP
        assert abs(lazy.primal_final - plain.primal_final) <= 1e-4
        iterations = lazy.trajectory[-1].t
        assert iterations >= 100
        assert lazy.lmo_calls < iterations

    def test_gap_estimate_nonincreasing(self):
        inst = cg.gen_simplex_ls(15, 30, seed=5)
        res = cg.lazy_frank_wolfe(
            inst.objective, inst.lmo, inst.x0,
            cg.SolverConfig(lazy=True, stop=stop(eps=1e-5),
                            log_schedule=full_log()))
        phis = [s.dual_gap for s in res.trajectory]
        assert all(b <= a + 1e-15 for a, b in zip(phis, phis[1:]))

    def test_tiny_cache_still_converges(self):
        y = np.array([0.5, 0.3, 0.2])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.lazy_frank_wolfe(obj, lmo, lmo.extreme_point(np.zeros(3)),
                                  cg.SolverConfig(lazy=True, cache_cap=1,
                                                  stop=stop()))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7

    def test_final_gap_is_exact(self):
        inst = cg.gen_simplex_ls(10, 20, seed=2)
        res = cg.lazy_frank_wolfe(inst.objective, inst.lmo, inst.x0,
                                  cg.SolverConfig(lazy=True, stop=stop(eps=1e-5)))
        grad = inst.objective.gradient(res.x_final)
        v = atom_dense(inst.lmo.extreme_point(grad))
        exact = cg.fw_gap(grad, res.x_final, v)
        assert res.dual_gap_final == pytest.approx(exact, abs=1e-12)


class TestAwayFrankWolfe:
    def test_two_face_optimum_and_sparse_final_set(self):
        # projection of a point pulled off a 2-face: optimum (0.6, 0.4, 0...)
        y = np.array([0.6, 0.4, -0.1, -0.1, -0.1])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.away_frank_wolfe(obj, lmo, np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
                                  cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert np.allclose(res.x_final, [0.6, 0.4, 0.0, 0.0, 0.0], atol=1e-4)
        assert res.trajectory[-1].active_set_size <= 2

    def test_vertex_optimum_collapses(self):
        y = np.array([1.5, 0.0, 0.0])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.away_frank_wolfe(obj, lmo, np.array([0.0, 0.0, 1.0]),
                                  cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.trajectory[-1].active_set_size == 1
        assert np.allclose(res.x_final, [1.0, 0.0, 0.0], atol=1e-7)

    def test_optimal_start_stops_immediately(self):
        y = np.array([1.5, 0.0, 0.0])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.away_frank_wolfe(obj, lmo, np.array([1.0, 0.0, 0.0]),
                                  cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.trajectory[-1].t == 0


class TestPairwiseCg:
    def test_interior_projection(self):
        y = np.array([0.5, 0.3, 0.2])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.pairwise_cg(obj, lmo, lmo.extreme_point(np.zeros(3)),
                             cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7

    def test_two_atom_seesaw(self):
        y = np.array([0.3, 0.7])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.pairwise_cg(obj, lmo, np.array([1.0, 0.0]),
                             cg.SolverConfig(stop=stop()))
        assert np.allclose(res.x_final, y, atol=1e-6)

    def test_optimal_singleton_stops(self):
        y = np.array([1.5, 0.0])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.pairwise_cg(obj, lmo, np.array([1.0, 0.0]),
                             cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.trajectory[-1].t == 0

    def test_lazy_pairwise_converges_with_fewer_calls(self):
        inst = cg.gen_simplex_ls(20, 40, seed=4)
        plain = cg.pairwise_cg(inst.objective, inst.lmo, inst.x0,
                               cg.SolverConfig(stop=stop()))
        lazy = cg.pairwise_cg(inst.objective, inst.lmo, inst.x0,
                              cg.SolverConfig(lazy=True, stop=stop()))
        assert plain.termination == TERM_GAP and lazy.termination == TERM_GAP
        assert lazy.lmo_calls < plain.lmo_calls
        assert abs(lazy.primal_final - plain.primal_final) <= 1e-6


class TestBlendedPairwiseCg:
    def test_ksparse_projection_and_cardinality(self):
        inst = cg.gen_ksparse_projection(20, 3, seed=1)
        sizes = []
        cb = lambda state, aset: sizes.append((state.t, state.active_set_size)) or True
        res = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                     cg.SolverConfig(stop=stop(), callback=cb))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7
        assert all(size <= t + 1 for t, size in sizes)

    def test_kappa_sparsity_comparison(self):
        inst = cg.gen_ksparse_projection(20, 3, seed=2)
        finals = {}
        for kappa in (1.0, 2.0):
            res = cg.blended_pairwise_cg(
                inst.objective, inst.lmo, inst.x0,
                cg.SolverConfig(kappa=kappa, stop=stop()))
            assert res.termination == TERM_GAP
            finals[kappa] = res.trajectory[-1].active_set_size
        assert finals[2.0] <= finals[1.0] + 2

    def test_optimal_start_stops_at_zero(self):
        y = np.array([1.5, 0.0])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.blended_pairwise_cg(obj, lmo, np.array([1.0, 0.0]),
                                     cg.SolverConfig(stop=stop()))
        assert res.trajectory[-1].t == 0

    def test_warm_start_active_set(self):
        y = np.array([0.5, 0.3, 0.2])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        warm = ActiveSet.from_decomposition(
            [(0.4, np.array([1.0, 0.0, 0.0])), (0.6, np.array([0.0, 1.0, 0.0]))])
        res = cg.blended_pairwise_cg(obj, lmo, warm, cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP

    def test_selection_inequality_matches_tags(self):
        # spy on the step queries: pairwise steps must satisfy the blending
        # test against the exact global gap, FW steps must use d = x - v
        inst = cg.gen_ksparse_projection(15, 3, seed=3)
        lmo = inst.lmo
        records = []

        class Spy(cg.AdaptiveStep):
            def step(self, ctx):
                records.append((ctx.x.copy(), ctx.d.copy(), ctx.grad.copy()))
                return super().step(ctx)

        kappa = 2.0
        res = cg.blended_pairwise_cg(
            inst.objective, lmo, inst.x0,
            cg.SolverConfig(step_strategy=Spy(), kappa=kappa, stop=stop(),
                            log_schedule=full_log()))
        tags = [s.step_type for s in res.trajectory[1:]]
        assert len(tags) == len(records)
        for tag, (x, d, grad) in zip(tags, records):
            v = atom_dense(lmo.extreme_point(grad))
            global_gap = float(np.vdot(grad, x - v))
            if tag in ("pairwise", "drop"):
                assert kappa * float(np.vdot(grad, d)) >= global_gap - 1e-12
            else:
                assert tag == "FW"
                assert np.allclose(d, x - v, atol=1e-12)

    def test_lazy_bpcg_fewer_exact_calls(self):
        inst = cg.gen_ksparse_projection(30, 4, seed=5)
        plain = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                       cg.SolverConfig(stop=stop()))
        lazy = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                      cg.SolverConfig(lazy=True, stop=stop()))
        assert plain.termination == TERM_GAP and lazy.termination == TERM_GAP
        assert lazy.lmo_calls < plain.lmo_calls
        assert abs(lazy.primal_final - plain.primal_final) <= 1e-6


def doubly_stochastic_checker(tol=1e-9):
    failures = []

    def cb(state, aset):
        x = state.x
        if np.abs(x.sum(axis=0) - 1).max() > tol or np.abs(x.sum(axis=1) - 1).max() > tol:
            failures.append(state.t)
        if x.min() < -1e-12:
            failures.append(state.t)
        return True

    return cb, failures


class TestDicg:
    def test_birkhoff_fit(self):
        inst = cg.gen_birkhoff(3, seed=1)
        cb, failures = doubly_stochastic_checker()
        res = cg.dicg(inst.objective, inst.lmo, inst.x0,
                      cg.SolverConfig(stop=stop(), callback=cb))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7
        assert not failures
        assert all(s.active_set_size == 0 for s in res.trajectory)

    def test_optimal_vertex_stop(self):
        y = np.array([1.0, 0.0, 0.0])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        res = cg.dicg(obj, lmo, np.array([1.0, 0.0, 0.0]),
                      cg.SolverConfig(stop=stop()))
        assert res.trajectory[-1].t == 0

    def test_simplex_coordinates_stay_nonnegative(self):
        y = np.array([0.4, 0.3, 0.2, 0.1])
        obj = projection_objective(y)
        lmo = ProbabilitySimplexOracle(1.0)
        lows = []
        cb = lambda state, aset: lows.append(state.x.min()) or True
        res = cg.dicg(obj, lmo, np.array([1.0, 0.0, 0.0, 0.0]),
                      cg.SolverConfig(stop=stop(), callback=cb))
        assert res.termination == TERM_GAP
        assert min(lows) >= -1e-12

    def test_unsupported_oracle_refused(self):
        inst = cg.gen_ksparse_projection(10, 2, seed=1)
        with pytest.raises(UnsupportedOracleError):
            cg.dicg(inst.objective, inst.lmo, inst.x0, cg.SolverConfig(stop=stop()))


class TestBdicg:
    def test_matches_dicg_on_birkhoff(self):
        inst = cg.gen_birkhoff(3, seed=1)
        cb, failures = doubly_stochastic_checker()
        res_b = cg.bdicg(inst.objective, inst.lmo, inst.x0,
                         cg.SolverConfig(stop=stop(), callback=cb))
        res_d = cg.dicg(inst.objective, inst.lmo, inst.x0,
                        cg.SolverConfig(stop=stop()))
        assert res_b.termination == TERM_GAP and res_d.termination == TERM_GAP
        assert not failures
        assert abs(res_b.primal_final - res_d.primal_final) <= 1e-5 * (
            1 + abs(res_d.primal_final))

    def test_huge_kappa_prefers_inface(self):
        inst = cg.gen_birkhoff(3, seed=2)
        res = cg.bdicg(inst.objective, inst.lmo, inst.x0,
                       cg.SolverConfig(kappa=1e9, stop=stop(iters=200),
                                       log_schedule=full_log()))
        tags = [s.step_type for s in res.trajectory[1:]]
        assert tags.count("in-face") > 0.9 * len(tags)

    def test_selection_inequality_recomputable(self):
        inst = cg.gen_birkhoff(3, seed=3)
        kappa = 2.0
        res = cg.bdicg(inst.objective, inst.lmo, inst.x0,
                       cg.SolverConfig(kappa=kappa, stop=stop(),
                                       log_schedule=full_log()))
        assert res.termination == TERM_GAP
        traj = res.trajectory
        for prev, cur in zip(traj, traj[1:]):
            s_in, a_in = inst.lmo.inface_extreme_points(prev.grad, prev.x)
            local = float(np.vdot(prev.grad, atom_dense(a_in) - atom_dense(s_in)))
            global_gap = float(np.vdot(prev.grad, prev.x - prev.v))
            expected = "in-face" if kappa * local >= global_gap else "FW"
            assert cur.step_type == expected


class TestBlockCoordinate:
    def test_separable_blocks_match_independent_runs(self):
        y1 = np.array([0.5, 0.3, 0.2])
        y2 = np.array([0.1, 0.6, 0.3])
        obj = projection_objective(np.concatenate([y1, y2]))
        lmo1, lmo2 = ProbabilitySimplexOracle(1.0), ProbabilitySimplexOracle(1.0)
        blocks = cg.BlockProblem(oracles=[lmo1, lmo2], dims=[3, 3])
        x0 = [lmo1.extreme_point(np.zeros(3)), lmo2.extreme_point(np.zeros(3))]
        res = cg.block_coordinate_fw(obj, blocks, x0, cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert np.allclose(res.x_final[:3], y1, atol=1e-3)
        assert np.allclose(res.x_final[3:], y2, atol=1e-3)

    def test_full_order_matches_product_fw_under_open_loop(self):
        y = np.array([0.5, 0.3, 0.2, 0.1, 0.6, 0.3])
        obj = projection_objective(y)

        class ProductOracle:
            def extreme_point(self, g):
                out = np.zeros(6)
                out[int(np.argmin(g[:3]))] = 1.0
                out[3 + int(np.argmin(g[3:]))] = 1.0
                return out

        blocks = cg.BlockProblem(
            oracles=[ProbabilitySimplexOracle(1.0), ProbabilitySimplexOracle(1.0)],
            dims=[3, 3], update_order="full",
            step_factory=lambda: AgnosticStep(2))
        x0 = np.array([1.0, 0, 0, 1.0, 0, 0])
        res_block = cg.block_coordinate_fw(
            obj, blocks, x0.copy(),
            cg.SolverConfig(stop=stop(iters=50), log_schedule=full_log()))
        res_full = cg.frank_wolfe(
            obj, ProductOracle(), x0.copy(),
            cg.SolverConfig(step_strategy=AgnosticStep(2),
                            stop=stop(iters=50), log_schedule=full_log()))
        for sb, sf in zip(res_block.trajectory, res_full.trajectory):
            assert np.allclose(sb.x, sf.x, atol=1e-12)

    def test_custom_order_leaves_other_block_untouched(self):
        y = np.array([0.5, 0.3, 0.2, 0.1, 0.6, 0.3])
        obj = projection_objective(y)
        blocks = cg.BlockProblem(
            oracles=[ProbabilitySimplexOracle(1.0), ProbabilitySimplexOracle(1.0)],
            dims=[3, 3], update_order=[[0]])
        x0 = np.array([1.0, 0, 0, 0, 1.0, 0])
        res = cg.block_coordinate_fw(obj, blocks, x0.copy(),
                                     cg.SolverConfig(stop=stop(iters=100)))
        assert np.array_equal(res.x_final[3:], x0[3:])

    def test_blended_pairwise_block_rule(self):
        y = np.array([0.5, 0.3, 0.2, 0.1, 0.6, 0.3])
        obj = projection_objective(y)
        blocks = cg.BlockProblem(
            oracles=[ProbabilitySimplexOracle(1.0), ProbabilitySimplexOracle(1.0)],
            dims=[3, 3], step_rule="blended-pairwise")
        x0 = np.array([1.0, 0, 0, 1.0, 0, 0])
        res = cg.block_coordinate_fw(obj, blocks, x0, cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert np.allclose(res.x_final, y, atol=1e-5)

    def test_cyclic_and_random_orders_converge(self):
        y = np.array([0.5, 0.5, 0.2, 0.8])
        obj = projection_objective(y)
        for order in ("cyclic", ("random", 7)):
            blocks = cg.BlockProblem(
                oracles=[ProbabilitySimplexOracle(1.0), ProbabilitySimplexOracle(1.0)],
                dims=[2, 2], update_order=order)
            res = cg.block_coordinate_fw(
                obj, blocks, np.array([1.0, 0, 1.0, 0]),
                cg.SolverConfig(stop=stop()))
            assert res.termination == TERM_GAP


class TestAlm:
    def test_intersecting_boxes(self):
        boxes = [BoxOracle(np.zeros(2), np.ones(2)),
                 BoxOracle(np.full(2, 0.5), np.full(2, 1.5))]
        alm = cg.AlmProblem(oracles=boxes, dim=2, penalty=1.0)
        x0 = [boxes[0].extreme_point(np.zeros(2)),
              boxes[1].extreme_point(np.zeros(2))]
        out = cg.alternating_linear_minimization(
            alm, x0, cg.SolverConfig(stop=stop(eps=2.5e-7, seconds=10.0)))
        assert out.infeasibility <= 1e-6
        avg = out.average
        assert np.all(avg >= 0.5 - 1e-3) and np.all(avg <= 1.0 + 1e-3)

    def test_identical_sets_zero_infeasibility(self):
        boxes = [BoxOracle(np.zeros(2), np.ones(2)),
                 BoxOracle(np.zeros(2), np.ones(2))]
        alm = cg.AlmProblem(oracles=boxes, dim=2)
        vertex = boxes[0].extreme_point(np.zeros(2))
        out = cg.alternating_linear_minimization(
            alm, [vertex, vertex], cg.SolverConfig(stop=stop()))
        assert out.infeasibility == 0.0

    def test_disjoint_intervals_floor(self):
        sets = [BoxOracle(np.array([0.0]), np.array([1.0])),
                BoxOracle(np.array([2.0]), np.array([3.0]))]
        alm = cg.AlmProblem(oracles=sets, dim=1)
        out = cg.alternating_linear_minimization(
            alm, [np.array([0.0]), np.array([3.0])],
            cg.SolverConfig(stop=stop(seconds=10.0)))
        # squared-distance floor: x1* = 1, x2* = 2, average 1.5
        assert out.infeasibility == pytest.approx(0.5, abs=1e-3)
        assert out.average[0] == pytest.approx(1.5, abs=1e-3)

    def test_outer_objective(self):
        boxes = [BoxOracle(np.zeros(2), np.ones(2)),
                 BoxOracle(np.full(2, 0.5), np.full(2, 1.5))]
        target = np.array([0.9, 0.9])
        alm = cg.AlmProblem(oracles=boxes, dim=2, penalty=2.0,
                            outer_objective=projection_objective(target))
        x0 = [b.extreme_point(np.zeros(2)) for b in boxes]
        out = cg.alternating_linear_minimization(
            alm, x0, cg.SolverConfig(stop=stop(eps=1e-9, seconds=10.0)))
        assert out.infeasibility <= 1e-6
        assert np.allclose(out.average, target, atol=1e-3)


class TestCallbacksAndStops:
    def test_callback_stop_reported(self):
        inst = cg.gen_simplex_ls(10, 20, seed=1)
        cb = lambda state, aset: state.t < 5
        res = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                     cg.SolverConfig(stop=stop(), callback=cb))
        assert res.termination == TERM_CALLBACK
        assert res.trajectory[-1].t == 5

    def test_callback_exception_propagates(self):
        inst = cg.gen_simplex_ls(10, 20, seed=1)

        def cb(state, aset):
            if state.t == 3:
                raise KeyError("boom")
            return True

        with pytest.raises(KeyError):
            cg.frank_wolfe(inst.objective, inst.lmo, inst.x0,
                           cg.SolverConfig(stop=stop(), callback=cb))

    def test_time_limit(self):
        inst = cg.gen_simplex_ls(30, 60, seed=1)
        res = cg.frank_wolfe(inst.objective, inst.lmo, inst.x0,
                             cg.SolverConfig(stop=stop(eps=1e-16, seconds=0.2)))
        assert res.termination == "time-limit"


class TestCorrectionWiring:
    def test_periodic_correction_inside_bpcg(self):
        inst = cg.gen_simplex_ls(15, 25, seed=8)
        cfg = cg.SolverConfig(stop=stop(), quad=inst.quad,
                              correction_interval=10,
                              log_schedule=full_log())
        res = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0, cfg)
        assert res.termination == TERM_GAP
        tags = [s.step_type for s in res.trajectory]
        assert "correction" in tags
        primals = [s.primal for s in res.trajectory]
        assert all(b <= a + 1e-12 for a, b in zip(primals, primals[1:]))

    def test_correction_with_quad_cache(self):
        inst = cg.gen_simplex_ls(12, 20, seed=9)
        cfg = cg.SolverConfig(stop=stop(), quad=inst.quad,
                              use_quad_cache=True, correction_interval=5)
        res = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0, cfg)
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7


class TestTrajectoryInvariants:
    def test_gap_nonnegative_and_counters_monotone(self):
        inst = cg.gen_ksparse_projection(12, 3, seed=4)
        runs = [
            cg.frank_wolfe(inst.objective, inst.lmo, inst.x0,
                           cg.SolverConfig(stop=stop(), log_schedule=full_log())),
            cg.away_frank_wolfe(inst.objective, inst.lmo, inst.x0,
                                cg.SolverConfig(stop=stop(), log_schedule=full_log())),
            cg.pairwise_cg(inst.objective, inst.lmo, inst.x0,
                           cg.SolverConfig(stop=stop(), log_schedule=full_log())),
            cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                   cg.SolverConfig(stop=stop(), log_schedule=full_log())),
        ]
        for res in runs:
            traj = res.trajectory
            assert all(s.dual_gap >= -1e-12 for s in traj)
            ts = [s.t for s in traj]
            assert ts == sorted(ts)
            ns = [s.elapsed_ns for s in traj]
            assert all(b >= a for a, b in zip(ns, ns[1:]))
            calls = [s.lmo_calls for s in traj]
            assert all(b >= a for a, b in zip(calls, calls[1:]))

    def test_primal_monotone_across_active_set_variants(self):
        inst = cg.gen_simplex_ls(15, 25, seed=6)
        for solver in (cg.away_frank_wolfe, cg.pairwise_cg,
                       cg.blended_pairwise_cg):
            res = solver(inst.objective, inst.lmo, inst.x0,
                         cg.SolverConfig(stop=stop(), log_schedule=full_log()))
            primals = [s.primal for s in res.trajectory]
            assert all(b <= a + 1e-12 for a, b in zip(primals, primals[1:]))

    def test_gap_reached_implies_final_gap_below_epsilon(self):
        inst = cg.gen_ksparse_projection(10, 2, seed=7)
        res = cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0,
                                     cg.SolverConfig(stop=stop()))
        assert res.termination == TERM_GAP
        assert res.dual_gap_final <= 1e-7


class TestVariantAgreement:
    def test_ksparse_agreement(self):
        inst = cg.gen_ksparse_projection(10, 2, seed=1)
        cfg = lambda: cg.SolverConfig(stop=stop())
        runs = {
            "standard": cg.frank_wolfe(inst.objective, inst.lmo, inst.x0, cfg()),
            "lazy": cg.lazy_frank_wolfe(inst.objective, inst.lmo, inst.x0,
                                        cg.SolverConfig(lazy=True, stop=stop())),
            "afw": cg.away_frank_wolfe(inst.objective, inst.lmo, inst.x0, cfg()),
            "pcg": cg.pairwise_cg(inst.objective, inst.lmo, inst.x0, cfg()),
            "bpcg": cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0, cfg()),
        }
        values = {k: r.primal_final for k, r in runs.items()}
        for k, r in runs.items():
            assert r.termination == TERM_GAP, k
        ref = values["bpcg"]
        for k, val in values.items():
            assert abs(val - ref) <= 1e-5 * (1 + abs(ref)), (k, val, ref)

    def test_birkhoff_agreement_with_dicg(self):
        inst = cg.gen_birkhoff(4, seed=1)
        cfg = lambda: cg.SolverConfig(stop=stop())
        runs = [
            cg.blended_pairwise_cg(inst.objective, inst.lmo, inst.x0, cfg()),
            cg.dicg(inst.objective, inst.lmo, inst.x0, cfg()),
            cg.bdicg(inst.objective, inst.lmo, inst.x0, cfg()),
        ]
        vals = [r.primal_final for r in runs]
        for r in runs:
            assert r.termination == TERM_GAP
        for v in vals:
            assert abs(v - vals[0]) <= 1e-5 * (1 + abs(vals[0]))
