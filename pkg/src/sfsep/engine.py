"""Direct per-mixture fitting of the source models.

The unconstrained parameters of every source are optimized with ADAM on the
multi-scale spectral loss between the observed mixture and the sum of the
synthesized sources.  Gradients are exact reverse-mode derivatives written
out stage by stage: spectral loss -> overlap-add -> all-pole recursion
(adjoint recursion run backward per frame) -> LSF to LPC -> increments ->
activation, and in parallel through the frame-wise FIR filters and the
Hann upsampling of the harmonic amplitudes.  The noise realization is held
fixed during a fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .dsp import frame_signal, hann, hann_upsample, hann_upsample_adjoint, overlap_add, padded_length
from .lsf import (
    allpole_frames,
    allpole_frames_backward,
    exp_sigmoid,
    exp_sigmoid_grad,
    lsf_to_lpc,
    lsf_to_lpc_backward,
    raw_to_lsf,
    raw_to_lsf_backward,
)
from .objective import LossBreakdown, SpectralLoss
from .synth import (
    SourceParams,
    fir_from_magnitude,
    fir_matrix,
    harmonic_rolloff_ir,
    harmonic_signal,
    upsample_f0,
    white_noise,
)

log = logging.getLogger(__name__)

PARAM_CLASSES = ("alpha", "gain", "lsf", "noise_mag")
LSF_YMAX = 2.0
AMP_YMAX = 1.0


@dataclass
class RawParams:
    """Unconstrained parameters for ``J`` sources.

    Shapes: ``alpha`` and ``gain`` (J, N), ``lsf`` (J, N, K+1),
    ``noise_mag`` (J, L).
    """

    alpha: np.ndarray
    gain: np.ndarray
    lsf: np.ndarray
    noise_mag: np.ndarray

    @classmethod
    def initial(cls, J: int, N: int, cfg: Config) -> "RawParams":
        """Quiet, spectrally flat start: equal LSF increments give ``A(z) = 1``."""
        return cls(
            np.full((J, N), cfg.init_alpha),
            np.full((J, N), cfg.init_gain),
            np.zeros((J, N, cfg.lpc_order + 1)),
            np.full((J, cfg.noise_mag_len), cfg.init_noise_mag),
        )

    @property
    def num_sources(self) -> int:
        return self.alpha.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.alpha, self.gain, self.lsf, self.noise_mag]

    def vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec: np.ndarray) -> "RawParams":
        parts, start = [], 0
        for a in self.arrays():
            parts.append(np.asarray(vec[start:start + a.size], dtype=np.float64).reshape(a.shape))
            start += a.size
        return RawParams(*parts)

    def copy(self) -> "RawParams":
        return RawParams(*(a.copy() for a in self.arrays()))

    def slices(self) -> dict[str, slice]:
        """Where each parameter class lives in :meth:`vector`."""
        out, start = {}, 0
        for name, a in zip(PARAM_CLASSES, self.arrays()):
            out[name] = slice(start, start + a.size)
            start += a.size
        return out


@dataclass
class GradientRecord:
    loss: float
    gradient: RawParams
    breakdown: LossBreakdown
    step: int | None = None


def to_source_params(raw: RawParams) -> list[SourceParams]:
    """Apply the fixed output activations to every source."""
    out = []
    for j in range(raw.num_sources):
        out.append(SourceParams(
            alpha=exp_sigmoid(raw.alpha[j], AMP_YMAX),
            gain=exp_sigmoid(raw.gain[j], AMP_YMAX),
            lsf=raw_to_lsf(exp_sigmoid(raw.lsf[j], LSF_YMAX)),
            noise_mag=exp_sigmoid(raw.noise_mag[j], AMP_YMAX),
        ))
    return out


class SeparationProblem:
    """A mixture, its F0 tracks, and everything that stays fixed during a fit.

    Parameters
    ----------
    mixture : array_like
        Mixture samples at ``cfg.fs``.
    f0s : array_like, shape (J, N)
        F0 tracks on the model frame grid, ``N = ceil(len(mixture) / hop)``.
    cfg : Config
    seed : int
        Noise realization; source ``j`` uses stream ``j``.
    """

    def __init__(self, mixture, f0s, cfg: Config | None = None, seed: int = 0):
        self.cfg = cfg = cfg or Config()
        self.mixture = np.asarray(getattr(mixture, "samples", mixture), dtype=np.float64)
        f0s = np.atleast_2d(np.asarray(
            [getattr(f, "f0_frames", f) for f in f0s], dtype=np.float64))
        if f0s.size == 0 or f0s.shape[0] < 1:
            raise ValueError("J must be >= 1")
        self.f0s = f0s
        self.seed = seed
        self.num_samples = len(self.mixture)
        self.num_frames = -(-self.num_samples // cfg.hop)
        if f0s.shape[1] != self.num_frames:
            raise ValueError(
                f"F0 tracks have {f0s.shape[1]} frames; a {self.num_samples}-sample "
                f"mixture needs {self.num_frames}"
            )
        self.length = padded_length(self.num_samples, cfg.fft_size, cfg.hop)
        self.window = hann(cfg.fft_size)
        self.nfft = 2 * cfg.fft_size
        self.loss = SpectralLoss(self.mixture, cfg.loss_cfgs(), cfg.loss_skip_edge_bins)
        self.harmonics = np.stack([
            harmonic_signal(upsample_f0(f, cfg, self.length), cfg.num_harmonics, cfg.fs)
            for f in f0s
        ])
        self.noise_spec = np.stack([
            np.fft.rfft(frame_signal(white_noise(self.length, seed, j), cfg.fft_size, cfg.hop),
                        self.nfft, axis=-1)
            for j in range(self.num_sources)
        ])
        self.r_spec = np.fft.rfft(harmonic_rolloff_ir(cfg), self.nfft)
        self.fir = fir_matrix(cfg.noise_mag_len, cfg.ir_len)

    @property
    def num_sources(self) -> int:
        return self.f0s.shape[0]

    def initial_params(self) -> RawParams:
        return RawParams.initial(self.num_sources, self.num_frames, self.cfg)

    # forward ---------------------------------------------------------------

    def _source_forward(self, raw: RawParams, j: int):
        cfg = self.cfg
        T = cfg.fft_size
        alpha = exp_sigmoid(raw.alpha[j], AMP_YMAX)
        gain = exp_sigmoid(raw.gain[j], AMP_YMAX)
        incr = exp_sigmoid(raw.lsf[j], LSF_YMAX)
        omega = raw_to_lsf(incr)
        a = lsf_to_lpc(omega)
        noise_mag = exp_sigmoid(raw.noise_mag[j], AMP_YMAX)
        d_spec = np.fft.rfft(noise_mag @ self.fir.T, self.nfft)

        harm = hann_upsample(alpha, cfg.hop, self.length) * self.harmonics[j]
        harm_spec = np.fft.rfft(frame_signal(harm, T, cfg.hop), self.nfft, axis=-1)
        e_harm = np.fft.irfft(harm_spec * self.r_spec, self.nfft, axis=-1)[:, :T]
        e_noise = np.fft.irfft(self.noise_spec[j] * d_spec, self.nfft, axis=-1)[:, :T]
        e = e_harm + gain[:, None] * e_noise
        y = allpole_frames(e, a)
        out = overlap_add(y * self.window, cfg.hop, self.length)[:self.num_samples]
        for stage, arr in (("excitation", e), ("all-pole filter", y)):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite values in {stage} of source {j}")
        cache = dict(gain=gain, incr=incr, omega=omega, a=a, e_noise=e_noise, y=y)
        return out, cache

    def synthesize(self, raw: RawParams) -> np.ndarray:
        """Synthesized sources, shape (J, num_samples)."""
        return np.stack([self._source_forward(raw, j)[0] for j in range(self.num_sources)])

    def loss_value(self, raw: RawParams) -> float:
        return self.loss.value(self.synthesize(raw).sum(axis=0)).total

    # backward --------------------------------------------------------------

    def _source_backward(self, raw: RawParams, j: int, g_out: np.ndarray, cache: dict):
        cfg = self.cfg
        T = cfg.fft_size
        g_full = np.zeros(self.length)
        g_full[:self.num_samples] = g_out
        g_y = frame_signal(g_full, T, cfg.hop) * self.window
        g_e, g_a = allpole_frames_backward(g_y, cache["y"], cache["a"])

        g_lsf = raw_to_lsf_backward(lsf_to_lpc_backward(g_a, cache["omega"]), cache["incr"])
        g_lsf *= exp_sigmoid_grad(raw.lsf[j], LSF_YMAX)

        g_gain = np.einsum("nt,nt->n", g_e, cache["e_noise"])
        g_gain *= exp_sigmoid_grad(raw.gain[j], AMP_YMAX)

        g_spec = np.fft.rfft(g_e, self.nfft, axis=-1)
        # noise FIR: correlate the gradient with the (gain-scaled) noise frames
        g_noise_spec = (g_spec * cache["gain"][:, None] * np.conj(self.noise_spec[j])).sum(axis=0)
        g_d = np.fft.irfft(g_noise_spec, self.nfft)[:cfg.ir_len]
        g_noise_mag = (self.fir.T @ g_d) * exp_sigmoid_grad(raw.noise_mag[j], AMP_YMAX)

        g_harm_frames = np.fft.irfft(g_spec * np.conj(self.r_spec), self.nfft, axis=-1)[:, :T]
        g_harm = overlap_add(g_harm_frames, cfg.hop, self.length)
        g_alpha = hann_upsample_adjoint(g_harm * self.harmonics[j], self.num_frames, cfg.hop)
        g_alpha *= exp_sigmoid_grad(raw.alpha[j], AMP_YMAX)
        return g_alpha, g_gain, g_lsf, g_noise_mag

    def loss_and_gradient(self, raw: RawParams) -> GradientRecord:
        """Loss of ``raw`` and its exact gradient w.r.t. every raw parameter."""
        outs, caches = [], []
        for j in range(self.num_sources):
            o, c = self._source_forward(raw, j)
            outs.append(o)
            caches.append(c)
        estimate = np.sum(outs, axis=0)
        breakdown, g_mix = self.loss.value_and_grad(estimate)
        if not np.isfinite(breakdown.total):
            raise FloatingPointError("non-finite loss")
        grads = [self._source_backward(raw, j, g_mix, caches[j])
                 for j in range(self.num_sources)]
        gradient = RawParams(*(np.stack(g) for g in zip(*grads)))
        return GradientRecord(breakdown.total, gradient, breakdown)


def loss_and_gradient(raw: RawParams, f0s, mixture, cfg: Config | None = None,
                      seed: int = 0) -> GradientRecord:
    """One-shot convenience wrapper around :class:`SeparationProblem`."""
    return SeparationProblem(mixture, f0s, cfg, seed).loss_and_gradient(raw)


@dataclass
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def create(cls, params) -> "AdamState":
        params = np.array(params, dtype=np.float64)
        return cls(params, np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(state: AdamState, gradient, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected ADAM update; returns a new state."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.params.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {state.params.shape}")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    params = state.params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(params, m, v, t)


@dataclass
class FitResult:
    params: RawParams
    losses: list[float] = field(default_factory=list)
    best_step: int = 0

    @property
    def best_loss(self) -> float:
        return self.losses[self.best_step]


def fit_mixture(mixture, f0s, cfg: Config | None = None, init: RawParams | None = None,
                steps: int | None = None, seed: int | None = None,
                callback=None) -> FitResult:
    """Fit the source models to one mixture with ADAM.

    Runs ``steps`` iterations (``cfg.steps`` by default) and returns the
    parameters with the lowest loss seen; ``losses[i]`` is the loss of the
    parameters before update ``i``, plus one final entry after the last update.
    """
    cfg = cfg or Config()
    if len(f0s) == 0:
        raise ValueError("J must be >= 1")
    steps = cfg.steps if steps is None else steps
    seed = cfg.seed if seed is None else seed
    problem = SeparationProblem(mixture, f0s, cfg, seed)
    raw = (init or problem.initial_params()).copy()
    state = AdamState.create(raw.vector())
    result = FitResult(raw.copy())
    best = np.inf
    for step in range(steps + 1):
        current = raw.with_vector(state.params)
        try:
            rec = problem.loss_and_gradient(current)
        except FloatingPointError as exc:
            raise FloatingPointError(f"fit diverged at step {step}: {exc}") from exc
        result.losses.append(rec.loss)
        if rec.loss < best:
            best = rec.loss
            result.params = current
            result.best_step = step
        if callback is not None:
            callback(step, rec)
        if step == steps:
            break
        if step % 100 == 0:
            log.debug("step %d loss %.6g", step, rec.loss)
        state = adam_step(state, rec.gradient.vector(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    return result
