import numpy as np
import pytest

from decopt import (
    ConsensusQuadratic,
    LeastSquaresObjective,
    RunConfig,
    StepsizeSchedule,
    build_laplacian,
    compression_for_free_bound,
    make_complete,
    make_ring,
    make_star,
    parse_quantizer,
    run,
    spectral_profile,
    theoretical_stepsizes,
)
import decopt.engine as engine
from decopt.errors import (
    BudgetExhaustedError,
    DualUnavailableError,
    MissingMError,
    MissingSigmaError,
    NonFiniteError,
)
from decopt.streams import stream

from reference_impl import run_uncompressed


def consensus(d, n, seed=0, noise_var=0.0):
    return ConsensusQuadratic(stream(seed, 0xC0).standard_normal((d, n)), noise_var=noise_var)


def least_squares(n, m, d, seed=1, ridge=1.0):
    rng = stream(seed, 0x15)
    rows = [rng.standard_normal((m, d)) / np.sqrt(d) for _ in range(n)]
    rhs = [rng.standard_normal(m) for _ in range(n)]
    return LeastSquaresObjective(rows, rhs, ridge=ridge)


class TestTheoreticalStepsizes:
    def test_option_a_star_100(self):
        p = spectral_profile(build_laplacian(make_star(100)))
        s = theoretical_stepsizes("A", p, 1.0, 1.0, 0.0)
        assert abs(s.theta - 0.01) < 1e-12
        assert s.alpha == 1.0
        assert abs(s.predicted_rate - 0.01) < 1e-12

    def test_option_b_ring_3(self):
        p = spectral_profile(build_laplacian(make_ring(3)))
        s = theoretical_stepsizes("B", p, 1.0, 1.0, 0.0)
        assert abs(s.theta - 1.0 / 6.0) < 1e-12
        assert s.eta == 1.0
        assert abs(s.predicted_rate - 0.5) < 1e-12

    def test_option_d_ring_3(self):
        p = spectral_profile(build_laplacian(make_ring(3)))
        s = theoretical_stepsizes("D", p, 1.0, 1.0, 0.0, m=5)
        assert abs(s.predicted_rate - 1.0 / 12.0) < 1e-12

    def test_option_c_needs_sigma(self):
        p = spectral_profile(build_laplacian(make_ring(3)))
        with pytest.raises(MissingSigmaError):
            theoretical_stepsizes("C", p, 1.0, 1.0, 0.0)

    def test_option_c_eta_minimum(self):
        p = spectral_profile(build_laplacian(make_ring(3)))
        s = theoretical_stepsizes("C", p, 1.0, 2.0, 0.0, sigma_sq=4.0, epsilon=1e-2)
        expected = min(0.25, np.sqrt(1e-2) / (4 * 2.0), 1e-2 * 3.0 / (16 * 4.0 * 3.0))
        assert abs(s.eta - expected) < 1e-15

    def test_option_d_needs_m(self):
        p = spectral_profile(build_laplacian(make_ring(3)))
        with pytest.raises(MissingMError):
            theoretical_stepsizes("D", p, 1.0, 1.0, 0.0)

    def test_alpha_tracks_omega(self):
        p = spectral_profile(build_laplacian(make_ring(4)))
        s = theoretical_stepsizes("B", p, 1.0, 1.0, 3.0)
        assert abs(s.alpha - 0.25) < 1e-15


class TestFreeBound:
    def test_star_100(self):
        p = spectral_profile(build_laplacian(make_star(100)))
        assert abs(compression_for_free_bound(p, 1.0) - 100.0) < 1e-6

    def test_ring_is_order_one(self):
        # rho/rho_inf = lambda_max / maxw ~ 4 regardless of n: compression
        # budget on the ring stays O(1)
        p = spectral_profile(build_laplacian(make_ring(100)))
        bound = compression_for_free_bound(p, 1.0)
        assert abs(bound - p.rho / p.rho_inf) < 1e-9
        assert bound < 5.0
        p_small = spectral_profile(build_laplacian(make_ring(10)))
        assert abs(compression_for_free_bound(p_small, 1.0) - bound) < 0.5

    def test_complete(self):
        # rho = 1 and rho_inf = 1/n, so the kappa*rho branch binds at kappa = 1
        p = spectral_profile(build_laplacian(make_complete(6)))
        assert abs(p.rho - 1.0) < 1e-9
        assert abs(p.rho_inf - 1.0 / 6.0) < 1e-9
        assert abs(compression_for_free_bound(p, 1.0) - 1.0) < 1e-9
        assert abs(compression_for_free_bound(p, 6.0) - 6.0) < 1e-8


class TestStep:
    def test_hand_worked_two_nodes(self):
        obj = ConsensusQuadratic(np.array([[1.0, -1.0]]))
        cfg = RunConfig(option="B", graph=make_complete(2), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes=StepsizeSchedule(0.25, 1.0, 1.0), iters=1)
        rt = engine.prepare(cfg)
        s1 = engine.step(engine.init_state(cfg), cfg, runtime=rt)
        assert np.array_equal(s1.x, [[1.0, -1.0]])
        assert np.array_equal(s1.h, [[1.0, -1.0]])
        assert np.array_equal(s1.z, [[-0.5, 0.5]])

    def test_does_not_mutate_input(self):
        obj = consensus(4, 5)
        cfg = RunConfig(option="B", graph=make_ring(5), quantizer=parse_quantizer("dith:3"),
                        objective=obj, stepsizes="theoretical", iters=1)
        rt = engine.prepare(cfg)
        s0 = engine.init_state(cfg)
        x0, z0, h0 = s0.x.copy(), s0.z.copy(), s0.h.copy()
        engine.step(s0, cfg, runtime=rt)
        assert np.array_equal(s0.x, x0) and np.array_equal(s0.z, z0) and np.array_equal(s0.h, h0)

    def test_identity_alpha_one_tracks_x_exactly(self):
        obj = consensus(6, 10)
        cfg = RunConfig(option="B", graph=make_ring(10), quantizer=parse_quantizer("identity"),
                        objective=obj,
                        stepsizes=StepsizeSchedule(theta=0.05, eta=1.0, alpha=1.0), iters=1)
        rt = engine.prepare(cfg)
        state = engine.init_state(cfg)
        for _ in range(100):
            state = engine.step(state, cfg, runtime=rt)
            assert np.array_equal(state.h, state.x)

    def test_conservation_residual_is_zero(self):
        obj = consensus(8, 12)
        for sharing in ("per_node", "per_edge"):
            cfg = RunConfig(option="B", graph=make_ring(12), quantizer=parse_quantizer("dith:3"),
                            objective=obj, stepsizes="theoretical", iters=200,
                            delta_sharing=sharing)
            tr = run(cfg)
            assert np.all(tr.dual_residual == 0.0)
            assert tr.dual_sum[0] == 0.0
            assert tr.dual_sum.max() <= 1e-9 * max(tr.z_absmax.max(), 1e-300)

    def test_matrix_accumulation_close_to_edge_order(self):
        obj = consensus(5, 8)
        traces = {}
        for acc in ("edge_order", "matrix"):
            cfg = RunConfig(option="B", graph=make_ring(8), quantizer=parse_quantizer("dith:3"),
                            objective=obj, stepsizes="theoretical", iters=150,
                            z_accumulation=acc, seed=4)
            traces[acc] = run(cfg)
        gap = np.abs(traces["matrix"].max_err - traces["edge_order"].max_err)
        assert gap.max() < 1e-10

    def test_matrix_accumulation_per_edge_agrees(self):
        obj = consensus(5, 8)
        traces = {}
        for acc in ("edge_order", "matrix"):
            cfg = RunConfig(option="B", graph=make_ring(8), quantizer=parse_quantizer("dith:3"),
                            objective=obj, stepsizes="theoretical", iters=150,
                            delta_sharing="per_edge", z_accumulation=acc, seed=4)
            traces[acc] = run(cfg)
        gap = np.abs(traces["matrix"].max_err - traces["edge_order"].max_err)
        assert gap.max() < 1e-10

    def test_option_a_requires_dual(self):
        obj = least_squares(4, 3, 2)
        cfg = RunConfig(option="A", graph=make_ring(4), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes="theoretical", iters=1)
        engine.prepare(cfg)  # least squares has a conjugate
        from decopt import LogisticObjective
        rngl = stream(0, 9)
        lobj = LogisticObjective([rngl.standard_normal((3, 2))] * 4,
                                 [np.array([1.0, -1.0, 1.0])] * 4)
        cfg = RunConfig(option="A", graph=make_ring(4), quantizer=parse_quantizer("identity"),
                        objective=lobj, stepsizes=StepsizeSchedule(0.1, None, 1.0), iters=1)
        with pytest.raises(DualUnavailableError):
            engine.prepare(cfg)


class TestReduction:
    @pytest.mark.parametrize("option", ["A", "B"])
    def test_bit_for_bit_against_reference(self, option):
        d, n, iters = 6, 10, 500
        obj = consensus(d, n, seed=3)
        graph = make_ring(n)
        theta, eta, alpha = 0.04, 1.0, 1.0
        cfg = RunConfig(option=option, graph=graph, quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes=StepsizeSchedule(theta, eta, alpha),
                        iters=iters)
        rt = engine.prepare(cfg)
        state = engine.init_state(cfg)
        engine_hist = [state.x.copy()]
        for _ in range(iters):
            state = engine.step(state, cfg, runtime=rt)
            engine_hist.append(state.x.copy())
        targets_cols = [list(obj.targets[:, i]) for i in range(n)]
        ref_hist = run_uncompressed(option, targets_cols, graph.edges, theta, eta, alpha, iters)
        for k in range(iters + 1):
            ref_k = np.array(ref_hist[k]).T
            assert np.array_equal(engine_hist[k], ref_k), f"mismatch at iteration {k}"


class TestAEquivalentB:
    @pytest.mark.parametrize("qtext", ["identity", "dith:3"])
    def test_same_trajectories(self, qtext):
        d, n, iters = 6, 10, 400
        obj = consensus(d, n, seed=5)
        graph = make_ring(n)
        prof = spectral_profile(build_laplacian(graph))
        w = engine.quantizers.omega(parse_quantizer(qtext), d)
        theta = 1.0 / (2 * prof.lambda_max + 24 * w * prof.max_edge_weight)
        sched = StepsizeSchedule(theta=theta, eta=1.0, alpha=1.0 / (w + 1.0))
        states = {}
        for option in ("A", "B"):
            cfg = RunConfig(option=option, graph=graph, quantizer=parse_quantizer(qtext),
                            objective=obj, stepsizes=sched, iters=iters, seed=11)
            rt = engine.prepare(cfg)
            s = engine.init_state(cfg)
            hist = [s.x.copy()]
            for _ in range(iters):
                s = engine.step(s, cfg, runtime=rt)
                hist.append(s.x.copy())
            states[option] = hist
        worst = max(np.max(np.abs(a - b)) for a, b in zip(states["A"], states["B"]))
        assert worst <= 1e-12


class TestRun:
    def test_zero_iterations_when_eps_above_initial(self):
        obj = consensus(4, 6)
        cfg = RunConfig(option="B", graph=make_ring(6), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes="theoretical", iters=100, eps=1e6)
        tr = run(cfg)
        assert tr.iterations == 0
        assert tr.converged
        assert len(tr) == 1

    def test_budget_exhausted_carries_trace(self):
        obj = consensus(4, 6)
        cfg = RunConfig(option="B", graph=make_ring(6), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes="theoretical", iters=5, eps=1e-14)
        with pytest.raises(BudgetExhaustedError) as err:
            run(cfg)
        assert err.value.trace is not None
        assert err.value.trace.iterations == 5

    def test_divergence_guard(self):
        obj = consensus(4, 6)
        cfg = RunConfig(option="B", graph=make_ring(6), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes=StepsizeSchedule(5.0, 1.0, 1.0), iters=10**5)
        with pytest.raises(NonFiniteError):
            run(cfg)

    def test_determinism(self):
        obj = consensus(5, 8, noise_var=0.5)
        def once():
            cfg = RunConfig(option="C", graph=make_star(8), quantizer=parse_quantizer("rand:2"),
                            objective=obj,
                            stepsizes=StepsizeSchedule(0.02, 0.3, 0.5), iters=120, seed=17)
            return run(cfg)
        a, b = once(), once()
        assert np.array_equal(a.max_err, b.max_err)
        assert np.array_equal(a.final_state.x, b.final_state.x)
        assert np.array_equal(a.lyapunov, b.lyapunov)

    def test_bits_linear(self):
        obj = consensus(5, 8)
        cfg = RunConfig(option="B", graph=make_ring(8), quantizer=parse_quantizer("rand:2"),
                        objective=obj, stepsizes="theoretical", iters=50)
        tr = run(cfg)
        diffs = np.diff(tr.bits_cum)
        assert np.all(diffs == diffs[0])

    def test_option_d_runs_and_converges(self):
        obj = least_squares(6, 8, 5)
        cfg = RunConfig(option="D", graph=make_ring(6), quantizer=parse_quantizer("dith:3"),
                        objective=obj, stepsizes="theoretical", iters=40000, eps=1e-8,
                        delta_sharing="per_edge", seed=2)
        tr = run(cfg)
        assert tr.converged
        assert tr.max_err[-1] <= 1e-8

    def test_option_c_noise_floor_exists(self):
        obj = consensus(5, 8, noise_var=1.0)
        sched = StepsizeSchedule(theta=0.05, eta=0.25, alpha=1.0)
        cfg = RunConfig(option="C", graph=make_ring(8), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes=sched, iters=3000, seed=6)
        tr = run(cfg)
        tail = tr.max_err[1500:]
        assert 0 < tail.mean() < 1.0  # stochastic floor, no convergence, no divergence

    def test_h_distance_shrinks_with_quantization(self):
        obj = consensus(6, 10, seed=8)
        x_star, _ = obj.centralized_solution()
        cfg = RunConfig(option="B", graph=make_ring(10), quantizer=parse_quantizer("dith:3"),
                        objective=obj, stepsizes="theoretical", iters=6000,
                        delta_sharing="per_edge", seed=9)
        rt = engine.prepare(cfg)
        s = engine.init_state(cfg)
        h0 = float(np.sum((s.h - x_star[:, None]) ** 2))
        for _ in range(6000):
            s = engine.step(s, cfg, runtime=rt)
        hT = float(np.sum((s.h - x_star[:, None]) ** 2))
        assert hT < 1e-6 * h0


class TestGradCallAccounting:
    def test_option_b_counts_components(self):
        obj = least_squares(4, 7, 3)
        cfg = RunConfig(option="B", graph=make_ring(4), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes="theoretical", iters=10)
        tr = run(cfg)
        per_iter = np.diff(tr.grad_calls_cum)
        assert np.all(per_iter == 4 * 7)  # full gradient = m components per node

    def test_option_d_is_cheap_per_iteration(self):
        obj = least_squares(4, 10, 3)
        cfg = RunConfig(option="D", graph=make_ring(4), quantizer=parse_quantizer("identity"),
                        objective=obj, stepsizes="theoretical", iters=300, seed=3)
        tr = run(cfg)
        assert tr.grad_calls_cum[0] == 4 * 10  # initial anchor gradients
        per_iter = np.diff(tr.grad_calls_cum).mean()
        # two component evaluations per node plus occasional anchor refresh
        assert 2 * 4 <= per_iter <= 4 * (2 + 10 * 0.35)
