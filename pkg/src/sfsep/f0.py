"""Assigning multi-F0 estimates to sources and reading / writing F0 CSV files.

Two CSV layouts are understood:

* raw: header ``time,f0,...``; each row lists the time in seconds followed
  by however many F0 values (Hz) were detected in that frame;
* assigned: header ``time,src0,...,src{J-1}``; one column per source, with
  0 meaning silent.

Both are resampled to the model frame grid by nearest-frame lookup on the
frame centres ``(n * hop + fft_size / 2) / fs``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config

MISSING_COST = 1e12


@dataclass
class MultiF0Frame:
    """All F0 values (Hz) detected at ``time`` seconds; absent pitches are not listed."""

    time: float
    f0s: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.f0s = [float(f) for f in self.f0s]
        if any(f <= 0 for f in self.f0s):
            raise ValueError("F0 values must be positive; leave silent pitches out")


def hz_to_midi(f):
    """``69 + 12 log2(f / 440)``; returns NaN where ``f <= 0`` (silent)."""
    f = np.asarray(f, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(f > 0, 69.0 + 12.0 * np.log2(np.where(f > 0, f, 1.0) / 440.0), np.nan)
    return out if out.ndim else float(out)


def midi_to_hz(m):
    return 440.0 * 2.0 ** ((np.asarray(m, dtype=np.float64) - 69.0) / 12.0)


def _reference(tracks: np.ndarray, j: int, n: int, window: int) -> float | None:
    """Value of track ``j`` at the nearest assigned frame within ``window`` of ``n``.

    At equal distance the earlier frame wins.
    """
    num = tracks.shape[1]
    for d in range(1, window + 1):
        for m in (n - d, n + d):
            if 0 <= m < num and tracks[j, m] > 0:
                return tracks[j, m]
    return None


def _cost(values, sources, refs) -> float:
    total = 0.0
    for v, j in zip(values, sources):
        total += MISSING_COST if refs[j] is None else abs(v - refs[j])
    return total


def assign_f0s(frames, J: int, window: int = 50) -> np.ndarray:
    """Distribute per-frame F0 estimates over ``J`` non-crossing source tracks.

    Pass 1 handles frames holding exactly ``J`` values: they are sorted
    in descending order so source 0 is the highest voice.  Pass 2 walks
    the remaining frames in time order.  With fewer than ``J`` values,
    the assignment minimizing the summed Hz distance to each source's
    nearest assigned frame (within ``window`` frames) is chosen; with
    more than ``J`` values, the ``J`` values (kept in descending order)
    that best continue the neighbouring tracks are kept.  Frames
    resolved in pass 2 serve as references for later frames.  Ties go
    to the lower source index.

    Returns
    -------
    ndarray, shape (J, len(frames))
        Hz, 0 where a source is silent.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    n_frames = len(frames)
    tracks = np.zeros((J, n_frames))
    pending = []
    for n, fr in enumerate(frames):
        vals = sorted(fr.f0s, reverse=True)
        if len(vals) == J:
            tracks[:, n] = vals
        elif vals:
            pending.append(n)
    for n in pending:
        vals = sorted(frames[n].f0s, reverse=True)
        refs = [_reference(tracks, j, n, window) for j in range(J)]
        if len(vals) < J:
            best, best_cost = None, np.inf
            for sources in itertools.permutations(range(J), len(vals)):
                c = _cost(vals, sources, refs)
                if c < best_cost:
                    best, best_cost = sources, c
            for v, j in zip(vals, best):
                tracks[j, n] = v
        else:
            best, best_cost = None, np.inf
            for chosen in itertools.combinations(vals, J):
                c = _cost(chosen, range(J), refs)
                if c < best_cost:
                    best, best_cost = chosen, c
            tracks[:, n] = best
    return tracks


def frame_times(num_frames: int, cfg: Config | None = None) -> np.ndarray:
    """Centre time (seconds) of each model frame."""
    cfg = cfg or Config()
    return (np.arange(num_frames) * cfg.hop + cfg.fft_size / 2) / cfg.fs


def _nearest(times: np.ndarray, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Nearest-row lookup; targets farther than one row spacing outside the data get 0."""
    if len(times) == 0:
        return np.zeros((values.shape[1] if values.ndim == 2 else 0, len(targets)))
    order = np.argsort(times, kind="stable")
    times, values = times[order], values[order]
    idx = np.clip(np.searchsorted(times, targets), 1, max(len(times) - 1, 1))
    if len(times) == 1:
        idx = np.zeros_like(targets, dtype=int)
    else:
        left_closer = (targets - times[idx - 1]) <= (times[idx] - targets)
        idx = np.where(left_closer, idx - 1, idx)
    spacing = np.median(np.diff(times)) if len(times) > 1 else np.inf
    out = values[idx].T.copy()
    outside = (targets < times[0] - spacing) | (targets > times[-1] + spacing)
    out[:, outside] = 0.0
    return out


def read_f0_csv(path):
    """Parse either CSV layout.

    Returns ``("assigned", times, values (rows, J))`` or
    ``("raw", frames)`` with a list of :class:`MultiF0Frame`.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty F0 file")
    header = [c.strip().lower() for c in rows[0]]
    if not header or header[0] != "time":
        raise ValueError(f"{path}: first column must be 'time'")
    body = rows[1:]
    try:
        parsed = [[float(c) for c in r if c.strip()] for r in body]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from exc
    if len(header) > 1 and all(h.startswith("src") for h in header[1:]):
        J = len(header) - 1
        if any(len(r) != J + 1 for r in parsed):
            raise ValueError(f"{path}: assigned layout needs {J + 1} columns on every row")
        arr = np.array(parsed, dtype=np.float64).reshape(-1, J + 1)
        if np.any(arr[:, 1:] < 0):
            raise ValueError(f"{path}: negative F0 value")
        return "assigned", arr[:, 0], arr[:, 1:]
    frames = [MultiF0Frame(r[0], [v for v in r[1:] if v > 0]) for r in parsed]
    return "raw", frames


def load_f0_tracks(path, J: int, num_frames: int, cfg: Config | None = None,
                   window: int | None = None) -> np.ndarray:
    """Load a CSV (either layout) as ``(J, num_frames)`` tracks on the model grid."""
    cfg = cfg or Config()
    window = cfg.f0_window if window is None else window
    kind, *data = read_f0_csv(path)
    if kind == "assigned":
        times, values = data
        if values.shape[1] != J:
            raise ValueError(f"{path}: file has {values.shape[1]} sources, expected {J}")
    else:
        frames = data[0]
        times = np.array([f.time for f in frames])
        values = assign_f0s(frames, J, window).T
    return _nearest(times, values, frame_times(num_frames, cfg))


def write_f0_csv(path, tracks, times) -> None:
    """Write tracks ``(J, N)`` in the assigned layout."""
    tracks = np.atleast_2d(np.asarray(tracks, dtype=np.float64))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"src{j}" for j in range(tracks.shape[0])])
        for t, col in zip(times, tracks.T):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in col])
