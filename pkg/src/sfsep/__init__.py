"""F0-informed source separation with differentiable source-filter models."""

from .config import Config, load_config
from .dsp import AudioBuffer, StftConfig, istft, read_wav, stft, write_wav
from .engine import RawParams, SeparationProblem, fit_mixture
from .f0 import MultiF0Frame, assign_f0s, hz_to_midi, load_f0_tracks
from .metrics import framewise_eval, si_sdr, spectral_snr
from .nmf import nmf_separate
from .separation import soft_masks, wiener_separate
from .synth import SourceParams, synthesize_mixture, synthesize_source

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "Config", "MultiF0Frame", "RawParams", "SeparationProblem",
    "SourceParams", "StftConfig", "assign_f0s", "fit_mixture", "framewise_eval",
    "hz_to_midi", "istft", "load_config", "load_f0_tracks", "nmf_separate", "read_wav",
    "si_sdr", "soft_masks", "spectral_snr", "stft", "synthesize_mixture",
    "synthesize_source", "wiener_separate", "write_wav",
]
