"""Multi-scale spectral reconstruction loss and its gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, frame_signal, overlap_add

LOG_FLOOR = 1e-7
DEFAULT_SCALES = (2048, 1024, 512, 256, 128, 64)


@dataclass
class LossBreakdown:
    """Per-scale ``(linear, log)`` L1 terms and their total."""

    per_scale: dict[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(lin + log for lin, log in self.per_scale.values()))


def scale_configs(scales=DEFAULT_SCALES, overlap: float = 0.75) -> list[StftConfig]:
    return [StftConfig(c, max(1, int(round(c * (1.0 - overlap))))) for c in scales]


def _spectrum(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    if len(x) < cfg.fft_size:
        raise ValueError(
            f"input too short: {len(x)} samples < fft_size {cfg.fft_size}"
        )
    return np.fft.rfft(frame_signal(x, cfg.fft_size, cfg.hop) * cfg.get_window(), axis=-1)


def magnitudes(x, cfgs: list[StftConfig]) -> list[np.ndarray]:
    """Magnitude spectrograms (frames x bins) of ``x`` at every scale."""
    x = np.asarray(x, dtype=np.float64)
    return [np.abs(_spectrum(x, c)) for c in cfgs]


def _bins(mag: np.ndarray, skip_edge_bins: bool) -> np.ndarray:
    return mag[:, 1:-1] if skip_edge_bins else mag


def _terms(target: np.ndarray, est: np.ndarray) -> tuple[float, float]:
    lin = np.abs(target - est).sum()
    log = np.abs(np.log(np.maximum(target, LOG_FLOOR))
                 - np.log(np.maximum(est, LOG_FLOOR))).sum()
    return float(lin), float(log)


def multiscale_loss(m, m_est, scales=DEFAULT_SCALES, overlap: float = 0.75,
                    skip_edge_bins: bool = False) -> LossBreakdown:
    """Sum over FFT sizes of ``||M - M~||_1 + ||log M - log M~||_1``.

    Magnitudes are floored at 1e-7 before the log; L1 norms are sums over
    bins and frames.  Hann windows with the given overlap.

    With ``skip_edge_bins`` the DC and Nyquist bins are left out.  Their
    spectra are real, so their magnitude is ``|x|`` of a real number that
    keeps crossing zero: not differentiable there and log-singular.
    """
    m = np.asarray(getattr(m, "samples", m), dtype=np.float64)
    m_est = np.asarray(getattr(m_est, "samples", m_est), dtype=np.float64)
    if m.shape != m_est.shape:
        raise ValueError(f"length mismatch: {m.shape} vs {m_est.shape}")
    out = LossBreakdown()
    for cfg in scale_configs(scales, overlap):
        out.per_scale[cfg.fft_size] = _terms(
            _bins(np.abs(_spectrum(m, cfg)), skip_edge_bins),
            _bins(np.abs(_spectrum(m_est, cfg)), skip_edge_bins),
        )
    return out


class SpectralLoss:
    """Multi-scale loss against a fixed target, with the gradient w.r.t. the estimate."""

    def __init__(self, target, cfgs: list[StftConfig], skip_edge_bins: bool = False):
        self.target = np.asarray(getattr(target, "samples", target), dtype=np.float64)
        self.cfgs = list(cfgs)
        self.skip_edge_bins = skip_edge_bins
        self.target_mags = [_bins(m, skip_edge_bins)
                            for m in magnitudes(self.target, self.cfgs)]
        self.target_logs = [np.log(np.maximum(m, LOG_FLOOR)) for m in self.target_mags]

    def value(self, x) -> LossBreakdown:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.target.shape:
            raise ValueError(f"length mismatch: {x.shape} vs {self.target.shape}")
        out = LossBreakdown()
        for cfg, tm in zip(self.cfgs, self.target_mags):
            out.per_scale[cfg.fft_size] = _terms(
                tm, _bins(np.abs(_spectrum(x, cfg)), self.skip_edge_bins))
        return out

    def value_and_grad(self, x) -> tuple[LossBreakdown, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.target.shape:
            raise ValueError(f"length mismatch: {x.shape} vs {self.target.shape}")
        out = LossBreakdown()
        grad = np.zeros_like(x)
        for cfg, tm, tl in zip(self.cfgs, self.target_mags, self.target_logs):
            spec = _spectrum(x, cfg)
            if self.skip_edge_bins:
                spec = spec[:, 1:-1]
            mag = np.abs(spec)
            clamped = np.maximum(mag, LOG_FLOOR)
            log_est = np.log(clamped)
            out.per_scale[cfg.fft_size] = (
                float(np.abs(tm - mag).sum()), float(np.abs(tl - log_est).sum())
            )
            d_mag = np.sign(mag - tm)
            d_mag += np.where(mag > LOG_FLOOR, np.sign(log_est - tl) / clamped, 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                unit = np.where(mag > 0, spec / mag, 0.0)
            g = d_mag * unit
            if self.skip_edge_bins:
                g = np.pad(g, ((0, 0), (1, 1)))
            # adjoint of the one-sided real FFT
            g[:, 1:cfg.fft_size // 2] *= 0.5
            frames = cfg.fft_size * np.fft.irfft(g, n=cfg.fft_size, axis=-1)
            frames *= cfg.get_window()
            grad += overlap_add(frames, cfg.hop, len(x))
        return out, grad
