"""F0-informed NMF baseline with harmonic templates on a 0.1-semitone grid.

Templates are harmonic combs; activations start at 1 only where a source
is singing that quantized pitch (with a small floor on neighbouring
pitches) and 0 everywhere else.  Multiplicative updates keep those zeros,
so the F0 tracks constrain the whole factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .dsp import StftConfig
from .f0 import frame_times, hz_to_midi, midi_to_hz
from .separation import EPS, padded_istft, padded_stft, ratio_masks

RESOLUTION = 0.1  # semitones
FLOOR = 1e-4
NEIGHBOURHOOD = 0.5  # semitones
BLUR = np.exp(-np.array([1.0, 0.0, 1.0]) / (2 * 0.5 ** 2))


@dataclass
class NmfModel:
    """Templates ``W`` (F x R), activations ``H`` (R x N) and template pitches (MIDI)."""

    W: np.ndarray
    H: np.ndarray
    template_pitch: np.ndarray
    divergence: list[float] = field(default_factory=list)

    @property
    def num_templates(self) -> int:
        return self.W.shape[1]


def quantize_midi(midi, resolution: float = RESOLUTION):
    """Round MIDI values to the grid; the integer index avoids float drift."""
    return np.round(np.asarray(midi, dtype=np.float64) / resolution).astype(np.int64)


def harmonic_template(f0_hz: float, fft_size: int, fs: float, partials: int = 20) -> np.ndarray:
    """Comb with partial ``p`` at amplitude ``1/p``, blurred over +-1 bin, unit sum."""
    num_bins = fft_size // 2 + 1
    t = np.zeros(num_bins)
    for p in range(1, partials + 1):
        b = int(round(p * f0_hz * fft_size / fs))
        if b >= num_bins - 1:
            break
        for off, w in zip((-1, 0, 1), BLUR):
            if 0 <= b + off < num_bins:
                t[b + off] += w / p
    total = t.sum()
    if total == 0:
        raise ValueError(f"no partial of {f0_hz} Hz lies below Nyquist")
    return t / total


def track_midi_on_grid(f0s, num_frames: int, cfg: Config, stft_cfg: StftConfig) -> np.ndarray:
    """Quantized MIDI index per source and STFT frame (``-1`` = silent).

    The STFT is the padded one of :mod:`sfsep.separation`; each of its
    frames takes the F0 of the model frame whose centre is nearest.
    """
    f0s = np.atleast_2d(np.asarray(f0s, dtype=np.float64))
    pad = stft_cfg.fft_size - stft_cfg.hop
    centres = (np.arange(num_frames) * stft_cfg.hop - pad + stft_cfg.fft_size / 2) / cfg.fs
    model_t = frame_times(f0s.shape[1], cfg)
    idx = np.clip(np.round((centres - model_t[0]) * cfg.fs / cfg.hop).astype(int),
                  0, f0s.shape[1] - 1)
    vals = f0s[:, idx]
    q = np.full(vals.shape, -1, dtype=np.int64)
    voiced = vals > 0
    q[voiced] = quantize_midi(hz_to_midi(vals[voiced]))
    return q


def init_from_f0(f0s, num_frames: int, cfg: Config | None = None,
                 stft_cfg: StftConfig | None = None) -> NmfModel:
    """Templates for every quantized pitch in the tracks and F0-shaped activations."""
    cfg = cfg or Config()
    stft_cfg = stft_cfg or cfg.mask_cfg
    q = track_midi_on_grid(f0s, num_frames, cfg, stft_cfg)
    pitches = np.unique(q[q >= 0])
    if pitches.size == 0:
        raise ValueError("nothing to initialize: all F0 tracks are silent")
    W = np.stack([harmonic_template(float(midi_to_hz(p * RESOLUTION)), stft_cfg.fft_size,
                                    cfg.fs, cfg.nmf_partials) for p in pitches], axis=1)
    H = np.zeros((len(pitches), num_frames))
    reach = int(round(NEIGHBOURHOOD / RESOLUTION))
    for track in q:
        voiced = track >= 0
        near = np.abs(pitches[:, None] - track[None, :]) <= reach
        H[near & voiced] = np.maximum(H[near & voiced], FLOOR)
        H[(pitches[:, None] == track[None, :]) & voiced] = 1.0
    return NmfModel(W, H, pitches * RESOLUTION)


def kl_divergence(V: np.ndarray, Lam: np.ndarray) -> float:
    """Generalized KL divergence ``sum V log(V / Lam) - V + Lam`` (``0 log 0 = 0``)."""
    pos = V > 0
    return float(np.sum(V[pos] * np.log(V[pos] / Lam[pos])) - V.sum() + Lam.sum())


def nmf_fit(V, model: NmfModel, iters: int = 200, eps: float = EPS) -> NmfModel:
    """Multiplicative KL updates of ``H`` then ``W`` for ``iters`` iterations.

    The model is ``WH + eps``.  Treating ``eps`` as a fixed extra component
    makes these updates exact majorize-minimize steps, so the recorded
    divergence (one entry at the start plus one per iteration) does not
    increase.  Zero entries stay zero.
    """
    V = np.asarray(V, dtype=np.float64)
    if np.any(V < 0):
        raise ValueError("V must be nonnegative")
    W, H = model.W.copy(), model.H.copy()
    if V.shape != (W.shape[0], H.shape[1]):
        raise ValueError(f"V has shape {V.shape}, model expects {(W.shape[0], H.shape[1])}")
    divergence = [kl_divergence(V, W @ H + eps)]
    for _ in range(iters):
        ratio = V / (W @ H + eps)
        denom = W.sum(axis=0)[:, None]
        H *= np.divide(W.T @ ratio, denom, out=np.zeros_like(H), where=denom > 0)
        ratio = V / (W @ H + eps)
        denom = H.sum(axis=1)[None, :]
        W *= np.divide(ratio @ H.T, denom, out=np.zeros_like(W), where=denom > 0)
        divergence.append(kl_divergence(V, W @ H + eps))
    return NmfModel(W, H, model.template_pitch.copy(), divergence)


def partition_activations(model: NmfModel, f0s, cfg: Config | None = None,
                          stft_cfg: StftConfig | None = None) -> np.ndarray:
    """Split ``H`` into ``J`` parts by the nearest source pitch at each frame.

    Returns ``(J, R, N)``; the parts sum exactly to ``H``.  Ties go to the
    lower source index.
    """
    cfg = cfg or Config()
    stft_cfg = stft_cfg or cfg.mask_cfg
    R, N = model.H.shape
    q = track_midi_on_grid(f0s, N, cfg, stft_cfg)
    pitches = quantize_midi(model.template_pitch)
    dist = np.abs(pitches[None, :, None] - q[:, None, :]).astype(np.float64)
    dist[np.broadcast_to((q < 0)[:, None, :], dist.shape)] = np.inf
    owner = np.argmin(dist, axis=0)
    parts = np.zeros((q.shape[0],) + model.H.shape)
    for j in range(q.shape[0]):
        parts[j] = np.where(owner == j, model.H, 0.0)
    return parts


@dataclass
class NmfResult:
    estimates: np.ndarray
    masks: np.ndarray
    model: NmfModel


def nmf_separate(mixture, f0s, cfg: Config | None = None, iters: int | None = None) -> NmfResult:
    """Fit the F0-informed NMF to the mixture and Wiener-filter each source."""
    cfg = cfg or Config()
    iters = cfg.nmf_iters if iters is None else iters
    stft_cfg = cfg.mask_cfg
    m = np.asarray(getattr(mixture, "samples", mixture), dtype=np.float64)
    spec = padded_stft(m, stft_cfg)
    V = np.abs(spec)
    model = nmf_fit(V, init_from_f0(f0s, V.shape[1], cfg, stft_cfg), iters)
    parts = partition_activations(model, f0s, cfg, stft_cfg)
    masks = ratio_masks(np.stack([model.W @ h for h in parts]))
    est = np.stack([padded_istft(mk * spec, stft_cfg, len(m)) for mk in masks])
    return NmfResult(est, masks, model)
