"""F0-informed NMF baseline."""

import numpy as np
import pytest

from sfsep.config import Config
from sfsep.nmf import (
    NmfModel, harmonic_template, init_from_f0, kl_divergence, nmf_fit, nmf_separate,
    partition_activations, quantize_midi,
)
from sfsep.scenes import two_voice_scene

CFG = Config()


def test_constant_pitch_one_template():
    model = init_from_f0([np.full(40, 220.0)], 30, CFG)
    assert model.num_templates == 1


def test_a4_on_grid():
    model = init_from_f0([np.full(10, 440.0)], 8, CFG)
    assert model.template_pitch[0] == pytest.approx(69.0)
    assert quantize_midi(69.0) == 690


def test_vibrato_templates():
    midi = 60 + 0.3 * np.sin(np.linspace(0, 6 * np.pi, 400))
    f0 = 440 * 2 ** ((midi - 69) / 12)
    model = init_from_f0([f0], 300, CFG)
    assert model.num_templates == 7


def test_all_silent():
    with pytest.raises(ValueError, match="nothing to initialize"):
        init_from_f0([np.zeros(10)], 8, CFG)


def test_template_shape():
    t = harmonic_template(250.0, 2048, 16000, 20)
    assert t.sum() == pytest.approx(1.0)
    assert np.argmax(t) == 32
    assert t[64] == pytest.approx(t[32] / 2)


def test_activation_pattern():
    model = init_from_f0([np.full(40, 220.0), np.full(40, 330.0)], 30, CFG)
    assert set(np.unique(model.H)) <= {0.0, 1.0}
    f0 = np.full(40, 220.0)
    f0[:20] = 220 * 2 ** (0.3 / 12)
    model = init_from_f0([f0], 30, CFG)
    # every frame is voiced and both templates lie within reach of each other
    assert set(np.unique(model.H)) == {1e-4, 1.0}


def test_fixed_point(rng):
    W = rng.uniform(0.1, 1, (30, 4))
    H = rng.uniform(0.1, 1, (4, 12))
    out = nmf_fit(W @ H, NmfModel(W, H, np.arange(4.0)), iters=5)
    np.testing.assert_allclose(out.W, W, rtol=1e-9)
    np.testing.assert_allclose(out.H, H, rtol=1e-9)


def test_nonneg_zeros_and_monotone(rng):
    V = rng.exponential(size=(40, 25))
    W = rng.uniform(size=(40, 5)) * (rng.random((40, 5)) > 0.3)
    H = rng.uniform(size=(5, 25)) * (rng.random((5, 25)) > 0.3)
    out = nmf_fit(V, NmfModel(W, H, np.arange(5.0)), iters=200)
    assert out.W.min() >= 0 and out.H.min() >= 0
    assert np.all(out.H[H == 0] == 0) and np.all(out.W[W == 0] == 0)
    assert np.max(np.diff(out.divergence)) <= 1e-10
    assert len(out.divergence) == 201


def test_divergence_definition():
    V = np.array([[1.0, 0.0], [2.0, 3.0]])
    L = np.array([[2.0, 1.0], [2.0, 1.0]])
    ref = 1 * np.log(1 / 2) - 1 + 2 + 0 - 0 + 1 + 0 + 3 * np.log(3) - 3 + 1
    assert kl_divergence(V, L) == pytest.approx(ref)


def test_partition_is_exact():
    f0s = [np.full(40, 440.0), np.full(40, 220.0)]
    model = init_from_f0(f0s, 30, CFG)
    parts = partition_activations(model, f0s, CFG)
    np.testing.assert_array_equal(parts.sum(axis=0), model.H)
    assert np.all((parts[0] > 0) <= (np.isclose(model.template_pitch, 69.0)[:, None]))


def test_single_source_recovers_mixture(rng):
    x = rng.standard_normal(8000)
    out = nmf_separate(x, [np.full(32, 200.0)], CFG, iters=10)
    assert np.sqrt(np.mean((out.estimates[0] - x) ** 2)) < 1e-6


@pytest.mark.slow
def test_two_voice_scene():
    from sfsep.metrics import si_sdr
    scene = two_voice_scene(1.0)
    out = nmf_separate(scene.mixture, scene.f0s, CFG)
    assert min(si_sdr(e, s) for e, s in zip(out.estimates, scene.sources)) > 10
    assert np.max(np.diff(out.model.divergence)) <= 1e-10
