"""Harmonic oscillator, FIR design, excitation and full source synthesis."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sfsep.config import Config
from sfsep.dsp import hann, overlap_add, padded_length
from sfsep.lsf import exp_sigmoid, raw_to_lsf
from sfsep.synth import (
    F0Track, SourceParams, excitation, fir_from_magnitude, harmonic_rolloff_ir,
    harmonic_signal, load_params, rolloff_magnitude, rolloff_response, save_params,
    synthesize_mixture, synthesize_source, white_noise,
)

CFG = Config()


def flat_lsf(N, K=20):
    return np.tile(np.arange(1, K + 1) * np.pi / (K + 1), (N, 1))


def params(N, alpha=0.1, gain=0.01, lsf=None, seed=0):
    rng = np.random.default_rng(seed)
    lsf = flat_lsf(N) if lsf is None else lsf
    return SourceParams(np.full(N, alpha), np.full(N, gain), lsf,
                        rng.uniform(0.1, 1.0, CFG.noise_mag_len))


def peak_freqs(x, fs, count):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    freqs = np.fft.rfftfreq(len(x), 1 / fs)
    return freqs[np.argsort(spec)[::-1][:count]], spec


class TestHarmonics:
    def test_quarter_period(self):
        h = harmonic_signal(np.full(100, 100.0), 1, 16000)
        assert h[40] == pytest.approx(1.0, abs=1e-12)
        assert h[0] == 0.0

    def test_silent(self):
        assert np.all(harmonic_signal(np.zeros(500), 80, 16000) == 0)

    def test_silent_after_voiced(self):
        f0 = np.r_[np.full(100, 130.0), np.zeros(100)]
        assert np.all(harmonic_signal(f0, 80, 16000)[100:] == 0)

    def test_nyquist_mask(self):
        h = harmonic_signal(np.full(16000, 5000.0), 2, 16000)
        np.testing.assert_allclose(h, harmonic_signal(np.full(16000, 5000.0), 1, 16000))
        f, _ = peak_freqs(h, 16000, 1)
        assert f[0] == pytest.approx(5000.0, abs=1.0)

    def test_octave_shift_doubles_fundamental(self):
        f1, _ = peak_freqs(harmonic_signal(np.full(16000, 150.0), 1, 16000), 16000, 1)
        f2, _ = peak_freqs(harmonic_signal(np.full(16000, 300.0), 1, 16000), 16000, 1)
        assert f2[0] == pytest.approx(2 * f1[0], abs=1.0)

    def test_near_nyquist_no_images(self):
        h = harmonic_signal(np.full(16000, 7000.0), 80, 16000)
        _, spec = peak_freqs(h, 16000, 1)
        freqs = np.fft.rfftfreq(16000, 1 / 16000)
        away = np.abs(freqs - 7000.0) > 50
        assert 20 * np.log10(spec[away].max() / spec.max()) < -40

    def test_closed_form(self):
        t = np.arange(2000)
        h = harmonic_signal(np.full(2000, 220.0), 3, 16000)
        ref = sum(np.sin(2 * np.pi * i * 220.0 * t / 16000) for i in (1, 2, 3))
        np.testing.assert_allclose(h, ref, atol=1e-9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            harmonic_signal([-1.0, 100.0], 2, 16000)


class TestFir:
    def test_flat_is_windowed_delta(self):
        ir = fir_from_magnitude(np.ones(65), 128)
        assert np.argmax(np.abs(ir)) == 64
        assert ir[64] == pytest.approx(1.0)
        assert np.max(np.abs(np.delete(ir, 64))) < 1e-12

    def test_zero(self):
        assert np.all(fir_from_magnitude(np.zeros(65)) == 0)

    def test_half_band(self):
        # cutoff midway between the last pass sample (31) and the first stop sample (32)
        mag = np.r_[np.ones(32), np.zeros(33)]
        ir = fir_from_magnitude(mag, 128)
        resp = np.abs(np.fft.rfft(ir, 4096))
        freqs = np.linspace(0, 0.5, len(resp))
        at_cut = resp[np.argmin(np.abs(freqs - 31.5 / 128))]
        assert 20 * np.log10(at_cut) == pytest.approx(-6.0, abs=1.0)
        band = (freqs > 0.236) & (freqs < 0.256)
        assert np.all(np.diff(resp[band]) <= 1e-9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            fir_from_magnitude(np.r_[1.0, -1.0, 1.0])

    def test_linear(self, rng):
        a, b = rng.uniform(size=(2, 65))
        np.testing.assert_allclose(fir_from_magnitude(a + 2 * b),
                                   fir_from_magnitude(a) + 2 * fir_from_magnitude(b))


class TestRolloff:
    def test_examples(self):
        np.testing.assert_allclose(rolloff_magnitude([100.0, 200.0, 400.0]), [1.0, 1.0, 0.5])
        assert 20 * np.log10(rolloff_magnitude(400.0)) == pytest.approx(-6.02, abs=0.01)

    def test_response_grid(self):
        r = rolloff_response(65, 16000)
        assert r[0] == 1.0 and r[-1] == pytest.approx(200 / 8000)

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            rolloff_response(1, 16000)


class TestExcitation:
    def test_silent(self):
        n = padded_length(4096, 512, 256)
        e = excitation(np.zeros(n), np.ones(n), np.ones(8), 3, np.ones(8), np.zeros(16))
        assert np.all(e == 0)

    def test_harmonic_only_spectrum(self):
        n = padded_length(16000, 512, 256)
        h = harmonic_signal(np.full(n, 250.0), 30, 16000)
        e = excitation(np.ones(n), h, harmonic_rolloff_ir(CFG), 0, np.ones(128),
                       np.zeros((n - 512) // 256 + 1))
        frame = e[20] * hann(512)
        spec = np.abs(np.fft.rfft(frame, 16000))
        freqs = np.fft.rfftfreq(16000, 1 / 16000)
        harmonic = np.abs(((freqs + 125) % 250) - 125) < 80
        assert np.sum(spec[harmonic] ** 2) > 0.99 * np.sum(spec ** 2)

    def test_deterministic(self):
        n = padded_length(4096, 512, 256)
        args = (np.ones(n), np.ones(n), np.ones(8), 7, np.ones(8), np.ones(16))
        assert np.array_equal(excitation(*args), excitation(*args))

    def test_noise_range_and_streams(self):
        w = white_noise(10000, 3, 0)
        assert w.min() >= -1.0 and w.max() < 1.0
        assert not np.array_equal(w, white_noise(10000, 3, 1))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            excitation(np.ones(10), np.ones(11), np.ones(4), 0, np.ones(4), np.ones(1))


class TestSynthesize:
    def test_silence(self):
        p = params(20, alpha=0.0, gain=0.0)
        y = synthesize_source(p, np.full(20, 200.0), CFG, 0, 20 * 256)
        assert np.all(y.samples == 0)

    def test_flat_filter_is_excitation_ola(self):
        N = 20
        p = params(N)
        f0 = np.full(N, 180.0)
        y = synthesize_source(p, f0, CFG, 5, N * 256).samples
        n = padded_length(N * 256, 512, 256)
        from sfsep.dsp import hann_upsample, linear_upsample
        h = harmonic_signal(linear_upsample(f0, 256, n), 80, 16000)
        e = excitation(hann_upsample(p.alpha, 256, n), h, harmonic_rolloff_ir(CFG),
                       white_noise(n, 5, 0), fir_from_magnitude(p.noise_mag), p.gain)
        np.testing.assert_allclose(y, overlap_add(e * hann(512), 256, n)[:N * 256], atol=1e-9)

    @given(st.integers(0, 2 ** 16))
    def test_finite(self, seed):
        rng = np.random.default_rng(seed)
        N = 8
        lsf = raw_to_lsf(exp_sigmoid(rng.uniform(-1, 1, (N, 21))))
        p = SourceParams(rng.uniform(0, 1, N), rng.uniform(0, 1, N), lsf,
                         rng.uniform(0, 1, 65))
        y = synthesize_source(p, rng.uniform(80, 1000, N), CFG, seed, N * 256).samples
        assert np.all(np.isfinite(y))

    def test_deterministic(self):
        p = params(10)
        a = synthesize_source(p, np.full(10, 300.0), CFG, 1, 2560).samples
        b = synthesize_source(p, np.full(10, 300.0), CFG, 1, 2560).samples
        assert a.tobytes() == b.tobytes()

    def test_mixture_additivity(self):
        p1, p2 = params(10, seed=1), params(10, alpha=0.2, seed=2)
        f1, f2 = np.full(10, 220.0), np.full(10, 330.0)
        mix = synthesize_mixture([p1, p2], [f1, f2], CFG, 4, 2560).samples
        s1 = synthesize_source(p1, f1, CFG, 4, 2560, stream=0).samples
        s2 = synthesize_source(p2, f2, CFG, 4, 2560, stream=1).samples
        np.testing.assert_allclose(mix, s1 + s2, atol=1e-12)

    def test_mixture_single(self):
        p = params(10)
        mix = synthesize_mixture([p], [np.full(10, 220.0)], CFG, 4, 2560).samples
        np.testing.assert_array_equal(mix, synthesize_source(p, np.full(10, 220.0), CFG, 4, 2560).samples)

    def test_mixture_needs_sources(self):
        with pytest.raises(ValueError, match="J must be >= 1"):
            synthesize_mixture([], [], CFG)

    def test_silent_f0_and_gain(self):
        N = 30
        f0 = np.full(N, 200.0)
        f0[10:20] = 0.0
        gain = np.zeros(N)
        p = SourceParams(np.full(N, 0.3), gain, flat_lsf(N), np.ones(65))
        y = synthesize_source(p, f0, CFG, 0, N * 256).samples
        quiet = y[15 * 256:17 * 256]
        assert 20 * np.log10(np.max(np.abs(quiet)) + 1e-300) < -80

    def test_frame_mismatch(self):
        with pytest.raises(ValueError):
            synthesize_source(params(10), np.full(9, 100.0), CFG)

    def test_f0_track(self):
        with pytest.raises(ValueError):
            F0Track([100.0, -1.0])


def test_params_round_trip(tmp_path):
    p = [params(6, seed=1), params(6, alpha=0.3, seed=2)]
    f0s = [np.full(6, 220.0), np.full(6, 330.0)]
    save_params(tmp_path / "p.json", p, f0s, CFG, 9, 1536)
    sources, tracks, cfg, seed, n = load_params(tmp_path / "p.json")
    assert (seed, n, cfg) == (9, 1536, CFG)
    for a, b in zip(sources, p):
        np.testing.assert_array_equal(a.lsf, b.lsf)
        np.testing.assert_array_equal(a.alpha, b.alpha)
    np.testing.assert_array_equal(tracks[1].f0_frames, f0s[1])
