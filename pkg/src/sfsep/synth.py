"""Harmonics-plus-noise excitation through a time-varying all-pole filter.

One source is rendered as

    e(n, t) = [alpha(t) h(t)] * r(t) + g(n) [w(t) * d(t)]     (per frame n)
    s(t)    = OLA_n( hann * allpole(e(n, .), a(n)) )

where ``h`` is a bank of harmonics of the F0 track, ``r`` a fixed spectral
roll-off, ``d`` a learned noise-shaping FIR, ``g`` a per-frame noise gain
and ``a(n)`` per-frame LPC coefficients obtained from LSFs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import Config
from .dsp import (
    AudioBuffer,
    frame_signal,
    hann,
    hann_upsample,
    linear_upsample,
    overlap_add,
    padded_length,
)
from .lsf import allpole_frames, lsf_to_lpc

PARAMS_FORMAT = "sfsep-params"


@dataclass
class F0Track:
    """F0 of one source at the model frame rate; 0 Hz marks silence."""

    f0_frames: np.ndarray
    source_index: int = 0

    def __post_init__(self):
        self.f0_frames = np.asarray(self.f0_frames, dtype=np.float64)
        if np.any(self.f0_frames < 0) or not np.all(np.isfinite(self.f0_frames)):
            raise ValueError("F0 values must be finite and >= 0")

    def __len__(self):
        return len(self.f0_frames)


@dataclass
class SourceParams:
    """Physical (post-activation) synthesis parameters of one source.

    ``alpha``, ``gain``: (N,) harmonic amplitude and noise gain per frame.
    ``lsf``: (N, K) line spectral frequencies per frame.
    ``noise_mag``: (L,) single-sided magnitude samples of the noise filter.
    ``harm_rolloff``: (L',) magnitude samples of the fixed harmonic filter;
    ``None`` means the configured roll-off.
    """

    alpha: np.ndarray
    gain: np.ndarray
    lsf: np.ndarray
    noise_mag: np.ndarray
    harm_rolloff: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.gain = np.asarray(self.gain, dtype=np.float64)
        self.lsf = np.atleast_2d(np.asarray(self.lsf, dtype=np.float64))
        self.noise_mag = np.asarray(self.noise_mag, dtype=np.float64)
        n = len(self.alpha)
        if len(self.gain) != n or self.lsf.shape[0] != n:
            raise ValueError("alpha, gain and lsf must have the same number of frames")

    @property
    def num_frames(self) -> int:
        return len(self.alpha)


def harmonic_signal(f0_samples, num_harmonics: int, fs: float) -> np.ndarray:
    """Sum of ``num_harmonics`` unit-amplitude harmonics of a sample-rate F0 track.

    The phase is the running (sample-and-hold) sum of the instantaneous
    frequency, starting at zero: ``phi_i[t] = 2 pi i sum_{v<t} f0[v] / fs``.
    Harmonic ``i`` is muted at samples where ``i * f0 > fs / 2``; every
    harmonic is muted where ``f0 == 0`` (the frozen phase would otherwise
    leave a DC offset).
    """
    f0 = np.asarray(f0_samples, dtype=np.float64)
    if np.any(f0 < 0):
        raise ValueError("F0 must be non-negative")
    cycles = np.concatenate(([0.0], np.cumsum(f0[:-1]) / fs))
    cycles -= np.floor(cycles)
    out = np.zeros_like(f0)
    nyquist = fs / 2.0
    voiced = f0 > 0
    for i in range(1, num_harmonics + 1):
        active = voiced & (i * f0 <= nyquist)
        if not active.any():
            break
        out += np.where(active, np.sin(2.0 * np.pi * ((i * cycles) % 1.0)), 0.0)
    return out


def rolloff_magnitude(freqs, rate_db_per_octave: float = 6.0, ref_hz: float = 200.0):
    """Flat below ``ref_hz``, then falling by ``rate`` dB per octave.

    A rate of 6 means a ``ref_hz / f`` decay (about -6.02 dB per octave).
    """
    f = np.asarray(freqs, dtype=np.float64)
    exponent = rate_db_per_octave / 6.0
    return np.where(f <= ref_hz, 1.0, (ref_hz / np.maximum(f, ref_hz)) ** exponent)


def rolloff_response(L: int, fs: float, rate_db_per_octave: float = 6.0,
                     ref_hz: float = 200.0) -> np.ndarray:
    """:func:`rolloff_magnitude` sampled at ``L`` points from 0 to ``fs / 2``."""
    if L < 2:
        raise ValueError("need at least two magnitude samples")
    return rolloff_magnitude(np.linspace(0.0, fs / 2.0, L), rate_db_per_octave, ref_hz)


@lru_cache(maxsize=16)
def _fir_matrix(L: int, ir_len: int) -> np.ndarray:
    n = 2 * (L - 1)
    basis = np.fft.irfft(np.eye(L), n=n, axis=-1)
    basis = np.roll(basis, n // 2, axis=-1)
    out = np.zeros((L, ir_len))
    if ir_len <= n:
        start = n // 2 - ir_len // 2
        out[:] = basis[:, start:start + ir_len]
    else:
        start = ir_len // 2 - n // 2
        out[:, start:start + n] = basis
    out *= hann(ir_len)
    out.setflags(write=False)
    return out.T


def fir_from_magnitude(mag, ir_len: int = 128) -> np.ndarray:
    """Linear-phase FIR from sampled single-sided magnitudes (frequency sampling).

    The ``L`` magnitudes are read as a zero-phase spectrum on ``2(L-1)``
    points, inverse transformed, shifted to be causal, and cut to
    ``ir_len`` taps under a Hann window.  The map is linear in ``mag``.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.shape[-1] < 2:
        raise ValueError("need at least two magnitude samples")
    if np.any(mag < 0):
        raise ValueError("magnitudes must be non-negative")
    return mag @ _fir_matrix(mag.shape[-1], ir_len).T


def fir_matrix(L: int, ir_len: int) -> np.ndarray:
    """The ``(ir_len, L)`` matrix behind :func:`fir_from_magnitude`."""
    return _fir_matrix(L, ir_len)


def white_noise(length: int, seed: int, stream: int = 0) -> np.ndarray:
    """Uniform noise in [-1, 1) from a per-call generator."""
    rng = np.random.default_rng([seed, stream])
    return rng.uniform(-1.0, 1.0, length)


def frame_fir(signal: np.ndarray, ir: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    """Frame ``signal`` and convolve every frame with ``ir`` from zero state.

    Done in the frequency domain with an FFT of ``2 * frame_size``; each
    output frame keeps the first ``frame_size`` samples.
    """
    nfft = 2 * frame_size
    spec = np.fft.rfft(frame_signal(signal, frame_size, hop), nfft, axis=-1)
    return np.fft.irfft(spec * np.fft.rfft(ir, nfft), nfft, axis=-1)[:, :frame_size]


def excitation(alpha_t, h_t, r_ir, noise, d_ir, gain_frames,
               frame_size: int = 512, hop: int = 256) -> np.ndarray:
    """Framed harmonics-plus-noise excitation, shape ``(N, frame_size)``.

    ``alpha_t``, ``h_t`` and ``noise`` are sample-rate signals covering the
    padded frame grid; ``gain_frames`` has one value per frame.  ``noise``
    may be an integer seed.
    """
    alpha_t = np.asarray(alpha_t, dtype=np.float64)
    h_t = np.asarray(h_t, dtype=np.float64)
    gain = np.asarray(gain_frames, dtype=np.float64)
    if alpha_t.shape != h_t.shape:
        raise ValueError("alpha_t and h_t must have the same length")
    if isinstance(noise, (int, np.integer)):
        noise = white_noise(len(h_t), int(noise))
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != h_t.shape:
        raise ValueError("noise must match the harmonic signal length")
    n_frames = (len(h_t) - frame_size) // hop + 1
    if len(gain) != n_frames:
        raise ValueError(f"{len(gain)} gains for {n_frames} frames")
    harm = frame_fir(alpha_t * h_t, r_ir, frame_size, hop)
    noi = frame_fir(noise, d_ir, frame_size, hop)
    return harm + gain[:, None] * noi


def upsample_f0(f0_frames, cfg: Config, length: int) -> np.ndarray:
    return linear_upsample(f0_frames, cfg.hop, length)


def harmonic_rolloff_ir(cfg: Config) -> np.ndarray:
    mag = rolloff_response(cfg.noise_mag_len, cfg.fs, cfg.rolloff_db_per_octave,
                           cfg.rolloff_ref_hz)
    return fir_from_magnitude(mag, cfg.ir_len)


def synthesize_source(params: SourceParams, f0, cfg: Config | None = None,
                      seed: int = 0, num_samples: int | None = None,
                      stream: int = 0) -> AudioBuffer:
    """Render one source.

    Parameters
    ----------
    params : SourceParams
        ``N`` frames of parameters on the model frame grid.
    f0 : F0Track or array_like
        ``N`` F0 values in Hz.
    seed, stream : int
        Select the noise realization.
    num_samples : int, optional
        Output length; defaults to ``N * hop``.
    """
    cfg = cfg or Config()
    f0_frames = f0.f0_frames if isinstance(f0, F0Track) else np.asarray(f0, dtype=float)
    n = params.num_frames
    if len(f0_frames) != n:
        raise ValueError(f"F0 track has {len(f0_frames)} frames, parameters have {n}")
    if num_samples is None:
        num_samples = n * cfg.hop
    if -(-num_samples // cfg.hop) != n:
        raise ValueError(f"{n} frames do not match {num_samples} samples")
    length = padded_length(num_samples, cfg.fft_size, cfg.hop)
    h = harmonic_signal(upsample_f0(f0_frames, cfg, length), cfg.num_harmonics, cfg.fs)
    alpha_t = hann_upsample(params.alpha, cfg.hop, length)
    if params.harm_rolloff is None:
        r_ir = harmonic_rolloff_ir(cfg)
    else:
        r_ir = fir_from_magnitude(params.harm_rolloff, cfg.ir_len)
    d_ir = fir_from_magnitude(params.noise_mag, cfg.ir_len)
    e = excitation(alpha_t, h, r_ir, white_noise(length, seed, stream), d_ir,
                   params.gain, cfg.fft_size, cfg.hop)
    y = allpole_frames(e, lsf_to_lpc(params.lsf))
    out = overlap_add(y * hann(cfg.fft_size), cfg.hop, length)[:num_samples]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("synthesis produced non-finite samples")
    return AudioBuffer(out, cfg.fs)


def synthesize_mixture(all_params, all_f0s, cfg: Config | None = None, seed: int = 0,
                       num_samples: int | None = None) -> AudioBuffer:
    """Sum of the sources; source ``j`` uses noise stream ``j``."""
    cfg = cfg or Config()
    if len(all_params) != len(all_f0s):
        raise ValueError("need one F0 track per parameter set")
    if not all_params:
        raise ValueError("J must be >= 1")
    total = None
    for j, (p, f0) in enumerate(zip(all_params, all_f0s)):
        s = synthesize_source(p, f0, cfg, seed, num_samples, stream=j).samples
        total = s if total is None else total + s
    return AudioBuffer(total, cfg.fs)


def save_params(path, sources: list[SourceParams], f0s, cfg: Config, seed: int,
                num_samples: int, extra: dict | None = None) -> None:
    """Write a parameter bundle as JSON."""
    doc = {
        "format": PARAMS_FORMAT,
        "version": 1,
        "config": cfg.to_dict(),
        "seed": int(seed),
        "num_samples": int(num_samples),
        "loss_reduction": "sum",
        "sources": [],
    }
    for p, f0 in zip(sources, f0s):
        f0 = f0.f0_frames if isinstance(f0, F0Track) else np.asarray(f0, dtype=float)
        doc["sources"].append({
            "alpha": p.alpha.tolist(),
            "gain": p.gain.tolist(),
            "lsf": p.lsf.tolist(),
            "noise_mag": p.noise_mag.tolist(),
            "f0": f0.tolist(),
        })
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_params(path):
    """Read a bundle written by :func:`save_params`.

    Returns ``(sources, f0s, cfg, seed, num_samples)``.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != PARAMS_FORMAT:
        raise ValueError(f"{path}: not a {PARAMS_FORMAT} document")
    cfg = Config.from_dict(doc["config"])
    sources, f0s = [], []
    for j, s in enumerate(doc["sources"]):
        sources.append(SourceParams(s["alpha"], s["gain"], s["lsf"], s["noise_mag"]))
        f0s.append(F0Track(s["f0"], j))
    return sources, f0s, cfg, int(doc.get("seed", 0)), int(doc["num_samples"])
