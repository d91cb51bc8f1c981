"""Reproducible synthetic scenes generated with the package's own synthesizer."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .dsp import write_wav
from .f0 import frame_times, write_f0_csv
from .lsf import lpc_to_lsf
from .synth import SourceParams, synthesize_source

VOWELS = {
    # (formant centres, bandwidths) in Hz
    "a": ((730.0, 1090.0, 2440.0, 3400.0), (90.0, 110.0, 160.0, 250.0)),
    "i": ((270.0, 2290.0, 3010.0, 3700.0), (60.0, 100.0, 150.0, 250.0)),
    "u": ((300.0, 870.0, 2240.0, 3300.0), (60.0, 90.0, 150.0, 250.0)),
}


def formant_lsf(formants, bandwidths, order: int = 20, fs: float = 16000.0,
                floor_radius: float = 0.6) -> np.ndarray:
    """LSFs of an all-pole filter with resonances at ``formants``.

    Each formant contributes a conjugate pole pair of radius
    ``exp(-pi * bw / fs)``.  The remaining order is filled with weak,
    evenly spread poles of radius ``floor_radius`` so the filter has
    exactly ``order`` coefficients.
    """
    if 2 * len(formants) > order:
        raise ValueError("too many formants for the LPC order")
    poles = [np.exp(-np.pi * bw / fs + 2j * np.pi * f / fs)
             for f, bw in zip(formants, bandwidths)]
    spare = order // 2 - len(poles)
    for k in range(spare):
        poles.append(floor_radius * np.exp(1j * np.pi * (k + 0.5) / spare))
    poles = np.array(poles)
    a = np.real(np.poly(np.concatenate([poles, poles.conj()])))[1:]
    return lpc_to_lsf(a)


def vibrato_f0(base_hz: float, num_frames: int, rate_hz: float = 5.0, depth: float = 0.02,
               frame_rate: float = 62.5, phase: float = 0.0) -> np.ndarray:
    """F0 per frame with sinusoidal vibrato of relative ``depth``."""
    t = np.arange(num_frames) / frame_rate
    return base_hz * (1.0 + depth * np.sin(2 * np.pi * rate_hz * t + phase))


@dataclass
class Scene:
    mixture: np.ndarray
    sources: np.ndarray
    f0s: np.ndarray
    params: list[SourceParams]
    cfg: Config
    seed: int


def two_voice_scene(duration: float = 2.0, seed: int = 1234, cfg: Config | None = None,
                    base_hz=(220.0, 330.0), vowels=("a", "i"), level: float = 0.1) -> Scene:
    """Two harmonic-plus-noise voices with vibrato, mixed at equal level.

    Amplitudes follow smooth attack / release envelopes; the aperiodic
    gain and noise shaping are small but non-zero.  Synthesis is linear
    in ``(alpha, gain)``, so each voice is scaled to an RMS of ``level``
    by scaling those two envelopes.
    """
    cfg = cfg or Config()
    num_samples = int(round(duration * cfg.fs))
    N = -(-num_samples // cfg.hop)
    frame_rate = cfg.fs / cfg.hop
    t = np.arange(N) / frame_rate
    params, f0s, sources = [], [], []
    for j, (f, vowel) in enumerate(zip(base_hz, vowels)):
        f0 = vibrato_f0(f, N, rate_hz=5.0 + 0.7 * j, depth=0.015, frame_rate=frame_rate,
                        phase=1.3 * j)
        env = np.clip(np.minimum(t / 0.15, (duration - t) / 0.15), 0.0, 1.0)
        alpha = 0.25 * (0.8 + 0.2 * np.sin(2 * np.pi * 0.7 * t + j)) * env + 1e-4
        gain = 0.02 * env + 1e-4
        lsf = np.tile(formant_lsf(*VOWELS[vowel], order=cfg.lpc_order, fs=cfg.fs), (N, 1))
        noise_mag = np.linspace(0.3, 0.02, cfg.noise_mag_len)
        unit = synthesize_source(SourceParams(alpha, gain, lsf, noise_mag), f0, cfg, seed,
                                 num_samples, stream=j).samples
        scale = level / np.sqrt(np.mean(unit ** 2))
        p = SourceParams(alpha * scale, gain * scale, lsf, noise_mag)
        params.append(p)
        f0s.append(f0)
        sources.append(synthesize_source(p, f0, cfg, seed, num_samples, stream=j).samples)
    sources = np.stack(sources)
    return Scene(sources.sum(axis=0), sources, np.stack(f0s), params, cfg, seed)


def write_scene(scene: Scene, directory) -> Path:
    """Write a scene in the layout the command-line tools expect.

    Creates ``mixture.wav``, ``f0.csv`` (assigned layout on the model
    frame grid) and ``refs/source_<j>.wav`` under ``directory``.
    """
    directory = Path(directory)
    (directory / "refs").mkdir(parents=True, exist_ok=True)
    write_wav(directory / "mixture.wav", scene.mixture, scene.cfg.fs)
    for j, s in enumerate(scene.sources):
        write_wav(directory / "refs" / f"source_{j}.wav", s, scene.cfg.fs)
    write_f0_csv(directory / "f0.csv", scene.f0s,
                 frame_times(scene.f0s.shape[1], scene.cfg))
    return directory
