"""Objective separation metrics and the frame-wise evaluation protocol."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, stft

CAP_DB = 100.0


def _arr(x) -> np.ndarray:
    return np.asarray(getattr(x, "samples", x), dtype=np.float64)


def _ratio_db(target_energy: float, residual_energy: float) -> float:
    if residual_energy <= target_energy * 10.0 ** (-CAP_DB / 10.0):
        return CAP_DB
    return float(min(CAP_DB, 10.0 * np.log10(target_energy / residual_energy)))


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, capped at +100 dB.

    The reference is scaled by its least-squares projection coefficient;
    the ratio compares that scaled reference with the remaining residual.
    """
    est, ref = _arr(est), _arr(ref)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise ValueError("silent reference")
    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    return _ratio_db(np.dot(target, target), np.dot(residual, residual))


def spectral_snr(est, ref, cfg: StftConfig | None = None) -> float:
    """``10 log10(sum |S|^2 / sum (|S| - |S^|)^2)`` on magnitude spectrograms."""
    cfg = cfg or StftConfig(2048, 256)
    est, ref = _arr(est), _arr(ref)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    S = np.abs(stft(ref, cfg).values)
    S_hat = np.abs(stft(est, cfg).values)
    energy = np.sum(S ** 2)
    if energy == 0:
        raise ValueError("silent reference")
    return _ratio_db(energy, np.sum((S - S_hat) ** 2))


@dataclass
class EvalReport:
    si_sdr: list[float] = field(default_factory=list)
    frame_index: list[int] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)
    total_frames: int = 0

    @property
    def mean(self) -> float:
        return float(np.mean(self.si_sdr)) if self.si_sdr else float("nan")

    @property
    def median(self) -> float:
        return float(np.median(self.si_sdr)) if self.si_sdr else float("nan")

    def to_dict(self) -> dict:
        return {
            "si_sdr": self.si_sdr,
            "frame_index": self.frame_index,
            "excluded_frames": self.excluded,
            "num_excluded": len(self.excluded),
            "total_frames": self.total_frames,
            "mean": self.mean if self.si_sdr else None,
            "median": self.median if self.si_sdr else None,
        }


def framewise_eval(est, ref, fs: int = 16000, frame_len: float = 1.0,
                   energy_thresh: float = 10.0) -> EvalReport:
    """SI-SDR on non-overlapping frames of ``frame_len`` seconds.

    Frames whose reference energy (sum of squared samples) is below
    ``energy_thresh`` are excluded; a trailing partial frame is dropped.
    """
    est, ref = _arr(est), _arr(ref)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    size = int(round(frame_len * fs))
    n = len(ref) // size
    report = EvalReport(total_frames=n)
    for i in range(n):
        r = ref[i * size:(i + 1) * size]
        if np.dot(r, r) < energy_thresh:
            report.excluded.append(i)
            continue
        report.si_sdr.append(si_sdr(est[i * size:(i + 1) * size], r))
        report.frame_index.append(i)
    return report
