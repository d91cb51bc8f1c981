"""Soft masks from synthesized sources and Wiener-style extraction from the mixture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import StftConfig, istft, stft

EPS = 1e-12


@dataclass
class MaskSet:
    """``J`` masks of shape (bins, frames) on the grid of :func:`padded_stft`."""

    masks: np.ndarray
    mask_cfg: StftConfig
    num_samples: int

    @property
    def num_sources(self) -> int:
        return self.masks.shape[0]


def padded_stft(x, cfg: StftConfig) -> np.ndarray:
    """STFT after padding ``fft_size - hop`` zeros on both sides.

    With this padding every input sample lies in the fully overlapped
    region, so :func:`padded_istft` inverts it exactly.
    """
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    pad = cfg.fft_size - cfg.hop
    tail = (-(len(x) + 2 * pad - cfg.fft_size)) % cfg.hop
    return stft(np.pad(x, (pad, pad + tail)), cfg).values


def padded_istft(values: np.ndarray, cfg: StftConfig, num_samples: int) -> np.ndarray:
    pad = cfg.fft_size - cfg.hop
    return istft(values, cfg)[pad:pad + num_samples]


def ratio_masks(mags: np.ndarray, eps: float = EPS) -> np.ndarray:
    """``mags[j] / sum_j mags[j]``; bins where the sum is below ``eps`` get ``1/J``."""
    total = mags.sum(axis=0)
    J = mags.shape[0]
    safe = np.where(total > eps, total, 1.0)
    return np.where(total > eps, mags / safe, 1.0 / J)


def soft_masks(synth_sources, mask_cfg: StftConfig | None = None) -> MaskSet:
    """Magnitude-ratio masks of the synthesized sources (default 2048 / 256 grid)."""
    mask_cfg = mask_cfg or StftConfig(2048, 256)
    sources = [np.asarray(getattr(s, "samples", s), dtype=np.float64) for s in synth_sources]
    n = len(sources[0])
    if any(len(s) != n for s in sources):
        raise ValueError("synthesized sources must have equal lengths")
    mags = np.stack([np.abs(padded_stft(s, mask_cfg)) for s in sources])
    return MaskSet(ratio_masks(mags), mask_cfg, n)


def wiener_separate(mixture, masks: MaskSet) -> np.ndarray:
    """Apply each mask to the mixture STFT and invert; returns (J, num_samples)."""
    m = np.asarray(getattr(mixture, "samples", mixture), dtype=np.float64)
    if len(m) != masks.num_samples:
        raise ValueError(
            f"mixture has {len(m)} samples, masks were built for {masks.num_samples}"
        )
    spec = padded_stft(m, masks.mask_cfg)
    if spec.shape != masks.masks.shape[1:]:
        raise ValueError(f"mask grid {masks.masks.shape[1:]} != mixture grid {spec.shape}")
    return np.stack([padded_istft(mk * spec, masks.mask_cfg, len(m)) for mk in masks.masks])
