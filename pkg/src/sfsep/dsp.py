"""Framing, STFT/iSTFT, overlap-add, and frame-rate to sample-rate upsampling.

All frames are left-aligned: frame ``n`` covers samples ``[n*hop, n*hop + fft_size)``.
Windows are periodic Hann unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile

__all__ = [
    "AudioBuffer",
    "StftConfig",
    "Spectrogram",
    "hann",
    "num_frames",
    "padded_length",
    "frame_signal",
    "overlap_add",
    "stft",
    "istft",
    "check_cola",
    "cola_constant",
    "linear_upsample",
    "hann_upsample",
    "hann_upsample_adjoint",
    "read_wav",
    "write_wav",
]


@dataclass
class AudioBuffer:
    """Mono audio with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio only")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains NaN or Inf")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    fft_size: int
    hop: int
    window: str = "hann"

    def __post_init__(self):
        if self.fft_size <= 0 or self.hop <= 0:
            raise ValueError("fft_size and hop must be positive")
        if self.hop > self.fft_size:
            raise ValueError("hop must not exceed fft_size")
        if self.window not in ("hann", "rect"):
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def get_window(self) -> np.ndarray:
        if self.window == "rect":
            return np.ones(self.fft_size)
        return hann(self.fft_size)


@dataclass
class Spectrogram:
    """Time-frequency grid of shape ``(num_bins, num_frames)``."""

    values: np.ndarray
    config: StftConfig
    kind: str = "complex"
    pad: int = field(default=0)

    def __post_init__(self):
        if self.kind not in ("complex", "magnitude", "log-magnitude"):
            raise ValueError(f"unknown spectrogram kind {self.kind!r}")
        if self.values.shape[0] != self.config.num_bins:
            raise ValueError("first axis must have fft_size // 2 + 1 bins")
        if self.kind == "magnitude" and np.any(self.values < 0):
            raise ValueError("magnitude spectrogram has negative entries")

    @property
    def shape(self):
        return self.values.shape

    def magnitude(self) -> "Spectrogram":
        if self.kind != "complex":
            raise ValueError("magnitude() needs a complex spectrogram")
        return Spectrogram(np.abs(self.values), self.config, "magnitude", self.pad)


def hann(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def num_frames(length: int, fft_size: int, hop: int) -> int:
    """Number of left-aligned frames that fit entirely inside ``length`` samples."""
    if length < fft_size:
        return 0
    return (length - fft_size) // hop + 1


def padded_length(length: int, fft_size: int, hop: int) -> int:
    """Length after end-padding so that ``ceil(length / hop)`` frames fit.

    This is the frame grid of the synthesis model: every sample of the
    original signal lies under two frames except the first ``hop`` samples.
    """
    n = -(-length // hop)
    return (n - 1) * hop + fft_size


def frame_signal(x: np.ndarray, fft_size: int, hop: int) -> np.ndarray:
    """Split ``x`` into an ``(N, fft_size)`` array of (read-only) frame views."""
    return sliding_window_view(x, fft_size)[::hop]


def overlap_add(frames: np.ndarray, hop: int, length: int | None = None) -> np.ndarray:
    """Overlap-add ``(N, T)`` frames at the given hop."""
    n, size = frames.shape
    total = (n - 1) * hop + size if n else 0
    out = np.zeros(max(total, length or 0))
    # loop over the (few) frame offsets inside one frame, not over frames
    step = size // hop if size % hop == 0 else None
    if step is not None and n:
        for k in range(step):
            seg = frames[:, k * hop:(k + 1) * hop]
            start = k * hop
            out[start:start + n * hop] += seg.reshape(-1)
    else:
        for i in range(n):
            out[i * hop:i * hop + size] += frames[i]
    if length is not None:
        out = out[:length]
    return out


def _as_array(signal) -> np.ndarray:
    if isinstance(signal, AudioBuffer):
        return signal.samples
    return np.asarray(signal, dtype=np.float64)


def stft(signal, cfg: StftConfig, pad_end: bool = False) -> Spectrogram:
    """Short-time Fourier transform with left-aligned frames.

    Parameters
    ----------
    signal : AudioBuffer or array_like
        Real input of length at least ``cfg.fft_size``.
    cfg : StftConfig
    pad_end : bool
        Zero-pad the end to :func:`padded_length` first, so the grid has
        ``ceil(len / hop)`` frames (the model's frame grid).

    Returns
    -------
    Spectrogram
        Complex values of shape ``(fft_size // 2 + 1, N)`` with
        ``N = (len - fft_size) // hop + 1`` (computed on the padded length
        if ``pad_end``).
    """
    x = _as_array(signal)
    if pad_end:
        x = np.pad(x, (0, padded_length(len(x), cfg.fft_size, cfg.hop) - len(x)))
    if len(x) < cfg.fft_size:
        raise ValueError(
            f"input too short: {len(x)} samples < fft_size {cfg.fft_size}"
        )
    frames = frame_signal(x, cfg.fft_size, cfg.hop) * cfg.get_window()
    values = np.fft.rfft(frames, axis=-1).T
    return Spectrogram(values, cfg, "complex")


def cola_constant(window: np.ndarray, hop: int) -> np.ndarray:
    """Shifted-window sum folded onto one hop period."""
    window = np.asarray(window, dtype=np.float64)
    reps = -(-len(window) // hop)
    padded = np.zeros(reps * hop)
    padded[:len(window)] = window
    return padded.reshape(reps, hop).sum(axis=0)


def check_cola(window, hop: int, rtol: float = 1e-10) -> bool:
    """True if ``window`` shifted by multiples of ``hop`` sums to a constant."""
    s = cola_constant(window, hop)
    mean = s.mean()
    if mean == 0:
        return False
    return bool(np.max(np.abs(s - mean)) <= rtol * abs(mean))


def istft(spec: Spectrogram | np.ndarray, cfg: StftConfig | None = None,
          length: int | None = None) -> np.ndarray:
    """Inverse of :func:`stft` by plain overlap-add.

    Frames are inverse-transformed and overlap-added without a synthesis
    window, then divided by the overlap-add constant of the analysis
    window, so the fully overlapped interior is reconstructed exactly.
    """
    if isinstance(spec, Spectrogram):
        values = spec.values
        cfg = cfg or spec.config
    else:
        values = np.asarray(spec)
    if cfg is None:
        raise ValueError("istft needs an StftConfig")
    if not check_cola(cfg.get_window(), cfg.hop):
        raise ValueError(
            f"window {cfg.window!r} with hop {cfg.hop} violates constant overlap-add"
        )
    const = cola_constant(cfg.get_window(), cfg.hop).mean()
    frames = np.fft.irfft(values.T, n=cfg.fft_size, axis=-1)
    return overlap_add(frames, cfg.hop, length) / const


def linear_upsample(frame_series, hop: int, total_len: int,
                    offset: float | None = None) -> np.ndarray:
    """Piecewise-linear interpolation from frame rate to sample rate.

    Frame ``n`` is anchored at sample ``n*hop + offset`` (``offset``
    defaults to ``hop``, the center of a frame of length ``2*hop``).
    Values beyond the first and last anchors are held constant.
    """
    if total_len <= 0:
        raise ValueError("total_len must be positive")
    f = np.asarray(frame_series, dtype=np.float64)
    if f.size < 1:
        raise ValueError("need at least one frame")
    offset = hop if offset is None else offset
    centers = np.arange(len(f)) * hop + offset
    return np.interp(np.arange(total_len), centers, f)


def _hann_upsample_index(n_frames: int, hop: int, total_len: int):
    t = np.arange(total_len)
    k = t // hop
    w = hann(2 * hop)
    pos = t - k * hop
    cur = np.clip(k, 0, n_frames - 1)
    prev = np.clip(k - 1, 0, n_frames - 1)
    return cur, prev, w[pos], w[pos + hop]


def hann_upsample(frame_series, hop: int, total_len: int) -> np.ndarray:
    """Upsample by overlap-adding Hann windows of length ``2*hop``.

    Frame ``n`` contributes ``value[n] * w(t - n*hop)``; the edge frames are
    repeated so the output holds the first and last value at the borders.
    """
    f = np.asarray(frame_series, dtype=np.float64)
    if f.size < 1:
        raise ValueError("need at least one frame")
    cur, prev, w_rise, w_fall = _hann_upsample_index(len(f), hop, total_len)
    return f[cur] * w_rise + f[prev] * w_fall


def hann_upsample_adjoint(grad: np.ndarray, n_frames: int, hop: int) -> np.ndarray:
    """Transpose of :func:`hann_upsample` applied to a sample-rate gradient."""
    cur, prev, w_rise, w_fall = _hann_upsample_index(n_frames, hop, len(grad))
    out = np.bincount(cur, weights=grad * w_rise, minlength=n_frames)
    out += np.bincount(prev, weights=grad * w_fall, minlength=n_frames)
    return out


def read_wav(path, expected_rate: int = 16000) -> AudioBuffer:
    """Read a mono PCM16 or float WAV file at ``expected_rate``."""
    rate, data = wavfile.read(Path(path))
    if data.ndim != 1:
        raise ValueError(
            f"{path}: expected mono audio, got {data.shape[1]} channels"
        )
    if rate != expected_rate:
        raise ValueError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz "
            "(resample the file first)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(samples, rate)


def write_wav(path, audio, sample_rate: int = 16000, pcm16: bool = False) -> None:
    """Write mono audio as float32 (default) or PCM16."""
    if isinstance(audio, AudioBuffer):
        sample_rate = audio.sample_rate
        audio = audio.samples
    x = np.asarray(audio, dtype=np.float64)
    if pcm16:
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = x.astype(np.float32)
    wavfile.write(Path(path), sample_rate, data)
