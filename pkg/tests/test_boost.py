import numpy as np
import pytest

from opregboost.baselines import fb_step
from opregboost.boost import (BoostConfig, cvxreg_boost_step, opreg_boost_step,
                              opreg_boost_interpolated_step)
from opregboost.core import (CompositeProblem, CurvatureBounds, OperatorHandle,
                             ProblemStream, forward_backward_map)
from opregboost.opreg import RegressionDataset, opreg_fit, StopRule


def static_quadratic_stream(H, horizon=50, prox=None, shift=None):
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    eig = np.linalg.eigvalsh(H)
    b = shift if shift is not None else np.zeros(n)
    problem = CompositeProblem(
        dim=n,
        value=lambda x: 0.5 * float(x @ H @ x) - float(b @ x),
        grad=lambda x: H @ x - b,
        prox=prox or (lambda y, alpha: y),
        curvature=CurvatureBounds(mu=float(eig[0]) * 0.99, L=float(eig[-1])))
    truth = np.linalg.solve(H, b)
    return ProblemStream(dim=n, horizon=horizon, period_delta=1.0, rng_seed=0,
                         ground_truth=lambda k: truth.copy(),
                         problem_at=lambda k: problem)


class TestBoostConfig:
    @pytest.mark.parametrize("kwargs", [
        {"alpha": 0.0}, {"alpha": 0.1, "ell": 1}, {"alpha": 0.1, "zeta": 1.0},
        {"alpha": 0.1, "rho": 0.0}, {"alpha": 0.1, "sample_sigma": 0.0},
        {"alpha": 0.1, "tau": 0},
    ])
    def test_rejects_bad_knobs(self, kwargs):
        with pytest.raises(ValueError):
            BoostConfig(**kwargs)


class TestOpRegBoostStep:
    def test_no_op_on_contractive_static_quadratic(self):
        # zeta above the map's contraction factor: the fit passes the data
        # through and the boosted step coincides with forward-backward
        H = np.diag([1.0, 2.0, 3.0])
        alpha = 0.25  # factors |1 - alpha*lam| in [0.25, 0.75], zeta = 0.9
        stream = static_quadratic_stream(H, shift=np.array([1.0, -2.0, 0.5]))
        cfg = BoostConfig(alpha=alpha, ell=3, zeta=0.9, rho=1e-2, rng_seed=1)
        x_boost = np.array([2.0, -1.0, 1.5])
        x_fb = x_boost.copy()
        for k in range(20):
            x_boost, _, _, _ = opreg_boost_step(stream, k, x_boost, cfg)
            x_fb = fb_step(stream.problem_at(k), alpha, x_fb)
            assert np.max(np.abs(x_boost - x_fb)) <= 1e-6, k

    def test_prox_applied_exactly_once(self):
        H = np.diag([1.0, 2.0])
        base = static_quadratic_stream(H)
        offset = static_quadratic_stream(H, prox=lambda y, a: y + 1.0)
        cfg = BoostConfig(alpha=0.3, ell=3, zeta=0.9, rho=1e-2, rng_seed=2)
        x = np.array([1.0, 1.0])
        a, _, _, _ = opreg_boost_step(base, 0, x, cfg)
        b, _, _, _ = opreg_boost_step(offset, 0, x, cfg)
        assert np.allclose(b - a, 1.0)

    def test_operator_call_accounting(self):
        H = np.diag([1.0, 2.0])
        stream = static_quadratic_stream(H)
        counters = []

        def operator_at(k, alpha):
            op = forward_backward_map(stream.problem_at(k), alpha)
            counters.append(op)
            return op

        counted = ProblemStream(dim=2, horizon=5, period_delta=1.0, rng_seed=0,
                                ground_truth=stream.ground_truth,
                                problem_at=stream.problem_at,
                                operator_at=operator_at)
        cfg = BoostConfig(alpha=0.3, ell=4, zeta=0.9, rho=1e-2, rng_seed=3)
        _, _, stats, _ = opreg_boost_step(counted, 0, np.ones(2), cfg)
        assert stats.operator_calls == 4
        assert sum(op.call_counter for op in counters) == 4

    def test_anchor_draw_keyed_on_step_index(self):
        # the same (seed, k) must give the same step regardless of history
        H = np.diag([1.0, 2.0])
        stream = static_quadratic_stream(H)
        cfg = BoostConfig(alpha=0.3, ell=3, zeta=0.9, rho=1e-2, rng_seed=4)
        x = np.array([0.7, -0.2])
        a, _, _, _ = opreg_boost_step(stream, 7, x, cfg)
        b, _, _, _ = opreg_boost_step(stream, 7, x, cfg)
        assert np.array_equal(a, b)

    def test_rejects_nonfinite_iterate(self):
        stream = static_quadratic_stream(np.diag([1.0, 2.0]))
        cfg = BoostConfig(alpha=0.3)
        with pytest.raises(ValueError):
            opreg_boost_step(stream, 0, np.array([np.nan, 0.0]), cfg)


class TestZetaMonotonicity:
    def test_fit_residual_monotone_in_zeta(self):
        rng = np.random.default_rng(5)
        data = RegressionDataset(points=rng.standard_normal((4, 3)),
                                 evaluations=2 * rng.standard_normal((4, 3)))
        stop = StopRule(max_iter=500, tol=1e-12)
        residuals = [opreg_fit(data, z, 1.0, stop)[1].objective
                     for z in (0.5, 0.7, 0.9)]
        assert residuals[0] >= residuals[1] >= residuals[2]


class TestCvxRegBoostStep:
    def test_matches_fb_on_exact_class_member(self):
        H = np.diag([2.0, 3.0, 4.0])
        stream = static_quadratic_stream(H, shift=np.array([1.0, 0.0, -1.0]))
        bounds = CurvatureBounds(mu=1.0, L=10.0)
        cfg = BoostConfig(alpha=0.1, ell=3, zeta=0.9, rho=1e-2, rng_seed=6)
        x_boost = np.array([1.0, 1.0, 1.0])
        x_fb = x_boost.copy()
        for k in range(10):
            x_boost, _, stats = cvxreg_boost_step(stream, k, x_boost, cfg, bounds)
            x_fb = fb_step(stream.problem_at(k), cfg.alpha, x_fb)
            assert np.max(np.abs(x_boost - x_fb)) <= 1e-6, k
            assert stats.gradient_calls == 3


class TestInterpolatedVariant:
    def test_tau_one_equals_plain_boost(self):
        stream = static_quadratic_stream(np.diag([1.0, 2.0]))
        cfg = BoostConfig(alpha=0.3, ell=3, zeta=0.9, rho=1e-2, tau=1, rng_seed=7)
        x_a = np.array([1.0, -1.0])
        x_b = x_a.copy()
        cache = None
        for k in range(6):
            x_a, cache, _ = opreg_boost_interpolated_step(stream, k, x_a, cfg, cache)
            x_b, _, _, _ = opreg_boost_step(stream, k, x_b, cfg)
            assert np.array_equal(x_a, x_b), k

    def test_refresh_period_call_accounting(self):
        stream = static_quadratic_stream(np.diag([1.0, 2.0]), horizon=10)
        cfg = BoostConfig(alpha=0.3, ell=3, zeta=0.9, rho=1e-2, tau=5, rng_seed=8)
        x = np.array([1.0, -1.0])
        cache = None
        for k in range(10):
            x, cache, stats = opreg_boost_interpolated_step(stream, k, x, cfg, cache)
            expected = 3 if k % 5 == 0 else 1
            assert stats.operator_calls == expected, k

    def test_trajectory_contractive_between_refreshes(self):
        # identity prox, static problem, nonexpansive raw map: between
        # refreshes the realized iteration contracts at factor zeta
        H = np.diag([1.0, 2.0, 3.0])
        stream = static_quadratic_stream(H, shift=np.array([0.5, 0.5, 0.5]))
        cfg = BoostConfig(alpha=0.25, ell=3, zeta=0.9, rho=1e-2, tau=50,
                          rng_seed=9)
        map_tol = max(cfg.map_theta * 10, 1e-8)
        x_prev = np.array([2.0, -2.0, 1.0])
        x, cache, _ = opreg_boost_interpolated_step(stream, 0, x_prev, cfg, None)
        steps = [x_prev, x]
        for k in range(1, 8):
            x, cache, _ = opreg_boost_interpolated_step(stream, k, x, cfg, cache)
            steps.append(x)
        for k in range(2, len(steps) - 1):
            d_prev = np.linalg.norm(steps[k] - steps[k - 1])
            d_next = np.linalg.norm(steps[k + 1] - steps[k])
            assert d_next <= cfg.zeta * d_prev + map_tol, k

    def test_cache_required_between_refreshes(self):
        stream = static_quadratic_stream(np.diag([1.0, 2.0]))
        cfg = BoostConfig(alpha=0.3, tau=3, rng_seed=10)
        # k not a refresh step and no cache: the step must still work by
        # fitting fresh (treated as a refresh)
        x, cache, stats = opreg_boost_interpolated_step(stream, 1, np.ones(2),
                                                        cfg, None)
        assert cache is not None
        assert stats.operator_calls == cfg.ell
