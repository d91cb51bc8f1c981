"""Gradients of the full synthesis-plus-loss chain, ADAM, and fitting."""

import numpy as np
import pytest

from sfsep.config import Config
from sfsep.engine import (
    AdamState, RawParams, SeparationProblem, adam_step, fit_mixture, loss_and_gradient,
    to_source_params,
)
from sfsep.gradcheck import gradcheck_problem, gradient_check
from sfsep.metrics import si_sdr
from sfsep.separation import soft_masks, wiener_separate
from sfsep.synth import synthesize_mixture

CFG = Config()


def random_raw(rng, J, N, cfg=CFG):
    return RawParams(rng.normal(-1.5, 0.3, (J, N)), rng.normal(-2.5, 0.3, (J, N)),
                     rng.normal(0, 0.2, (J, N, cfg.lpc_order + 1)),
                     rng.normal(-1.5, 0.3, (J, cfg.noise_mag_len)))


class TestRawParams:
    def test_vector_round_trip(self, rng):
        raw = random_raw(rng, 2, 5)
        back = raw.with_vector(raw.vector())
        for a, b in zip(raw.arrays(), back.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_initial_is_flat(self):
        p = to_source_params(RawParams.initial(1, 4, CFG))[0]
        np.testing.assert_allclose(p.lsf[0], np.arange(1, 21) * np.pi / 21)

    def test_slices_cover_vector(self, rng):
        raw = random_raw(rng, 2, 5)
        s = raw.slices()
        assert s["noise_mag"].stop == raw.vector().size


class TestGradient:
    def test_exact_at_small_steps(self):
        report = gradient_check(seed=0, coords=60, tol=1e-3, steps=(1e-4, 1e-5))
        assert report.passed, report.per_class()

    def test_alpha_coordinate_example(self):
        problem, raw = gradcheck_problem(seed=3)
        g = problem.loss_and_gradient(raw).gradient.alpha[0, 5]
        vec, i = raw.vector(), raw.slices()["alpha"].start + 5
        h = 1e-4
        up, down = vec.copy(), vec.copy()
        up[i] += h
        down[i] -= h
        fd = (problem.loss_value(raw.with_vector(up)) - problem.loss_value(raw.with_vector(down))) / (2 * h)
        assert abs(fd - g) / max(abs(fd), abs(g)) < 1e-3

    def test_against_full_bin_loss(self, rng):
        cfg = CFG.replace(loss_skip_edge_bins=False)
        n = 4000
        N = -(-n // 256)
        target = 0.1 * rng.standard_normal(n)
        problem = SeparationProblem(target, [np.full(N, 200.0)], cfg, 0)
        raw = random_raw(rng, 1, N, cfg)
        g = problem.loss_and_gradient(raw).gradient.vector()
        vec = raw.vector()
        h = 1e-6
        for i in rng.choice(vec.size, 15, replace=False):
            up, down = vec.copy(), vec.copy()
            up[i] += h
            down[i] -= h
            fd = (problem.loss_value(raw.with_vector(up)) - problem.loss_value(raw.with_vector(down))) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-4)

    def test_silent_saturated_amplitudes(self):
        n = 4000
        N = -(-n // 256)
        problem = SeparationProblem(np.zeros(n), [np.full(N, 200.0)], CFG, 0)

        def alpha_grad(x):
            raw = RawParams(np.full((1, N), x), np.full((1, N), x),
                            np.zeros((1, N, 21)), np.full((1, 65), x))
            return np.max(np.abs(problem.loss_and_gradient(raw).gradient.alpha))

        # the log term is scale-invariant, so the collapse comes from the activation slope
        assert alpha_grad(-10.0) < 1e-3 * alpha_grad(-2.0)
        assert alpha_grad(-30.0) < 1e-12

    def test_duplicated_sources(self, rng):
        n = 4000
        N = -(-n // 256)
        one = random_raw(rng, 1, N)
        one.gain[:] = -60.0
        one.noise_mag[:] = -60.0  # each source draws its own noise; make it negligible
        two = RawParams(*(np.concatenate([a, a]) for a in one.arrays()))
        f0 = np.full(N, 180.0)
        g = loss_and_gradient(two, [f0, f0], 0.1 * rng.standard_normal(n), CFG).gradient
        np.testing.assert_allclose(g.alpha[0], g.alpha[1], rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(g.lsf[0], g.lsf[1], rtol=1e-5, atol=1e-8)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_names_stage(self, rng):
        n = 4000
        N = -(-n // 256)
        problem = SeparationProblem(np.zeros(n), [np.full(N, 200.0)], CFG, 0)
        raw = random_raw(rng, 1, N)
        raw.alpha[0, 3] = np.nan
        with pytest.raises(FloatingPointError):
            problem.loss_and_gradient(raw)


class TestAdam:
    def test_first_step(self):
        s = adam_step(AdamState.create(np.zeros(5)), np.ones(5), lr=1e-4)
        np.testing.assert_allclose(s.params, -1e-4, rtol=1e-6)

    def test_zero_gradient(self):
        s = adam_step(AdamState.create(np.arange(3.0)), np.zeros(3))
        np.testing.assert_array_equal(s.params, np.arange(3.0))

    def test_sign_flip(self):
        a = adam_step(AdamState.create(np.zeros(3)), np.array([1.0, -2.0, 3.0]))
        b = adam_step(AdamState.create(np.zeros(3)), -np.array([1.0, -2.0, 3.0]))
        np.testing.assert_allclose(a.params, -b.params)

    def test_matches_reference(self, rng):
        """Hand-written loop of the textbook update."""
        x = rng.standard_normal(4)
        state = AdamState.create(x)
        m = v = np.zeros(4)
        for t in range(1, 6):
            g = rng.standard_normal(4)
            state = adam_step(state, g, 1e-2)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g ** 2
            x = x - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(state.params, x, rtol=1e-12)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            adam_step(AdamState.create(np.zeros(3)), np.zeros(4))


class TestFit:
    def test_needs_sources(self):
        with pytest.raises(ValueError, match="J must be >= 1"):
            fit_mixture(np.zeros(4096), [], CFG, steps=1)

    def test_stationary_at_truth(self, rng):
        n = 4000
        N = -(-n // 256)
        f0s = [np.full(N, 210.0)]
        truth = random_raw(rng, 1, N)
        mixture = SeparationProblem(np.zeros(n), f0s, CFG, 7).synthesize(truth).sum(axis=0)
        result = fit_mixture(mixture, f0s, CFG, init=truth, steps=10, seed=7)
        assert max(result.losses) <= 1.01 * result.losses[0] + 1e-9

    def test_loss_trace_and_best(self, rng):
        n = 4000
        N = -(-n // 256)
        mixture = 0.05 * rng.standard_normal(n)
        result = fit_mixture(mixture, [np.full(N, 150.0)], CFG.replace(lr=1e-2), steps=20)
        assert len(result.losses) == 21
        assert result.best_loss == min(result.losses)

    def test_reproducible(self, rng):
        n = 4000
        N = -(-n // 256)
        mixture = 0.05 * rng.standard_normal(n)
        a = fit_mixture(mixture, [np.full(N, 150.0)], CFG.replace(lr=1e-2), steps=5)
        b = fit_mixture(mixture, [np.full(N, 150.0)], CFG.replace(lr=1e-2), steps=5)
        assert a.losses == b.losses

    @pytest.mark.slow
    def test_single_tone_round_trip(self):
        cfg = CFG.replace(lr=1e-2)
        n = 8000
        N = -(-n // 256)
        f0 = np.full(N, 220.0)
        truth = to_source_params(RawParams(np.full((1, N), -3.0), np.full((1, N), -12.0),
                                           np.random.default_rng(0).normal(0, 0.3, (1, N, 21)),
                                           np.full((1, 65), -3.0)))
        mixture = synthesize_mixture(truth, [f0], cfg, seed=11, num_samples=n).samples
        result = fit_mixture(mixture, [f0], cfg, steps=300, seed=0)
        assert result.losses[-1] < 0.1 * result.losses[0]
        synth = SeparationProblem(mixture, [f0], cfg, 0).synthesize(result.params)
        est = wiener_separate(mixture, soft_masks(synth))
        assert si_sdr(est[0], mixture) > 25
