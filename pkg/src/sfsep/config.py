"""Configuration shared by the synthesizer, the optimizer, and the CLI."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .dsp import StftConfig
from .objective import scale_configs


@dataclass(frozen=True)
class Config:
    fs: int = 16000
    fft_size: int = 512
    hop: int = 256
    lpc_order: int = 20
    num_harmonics: int = 80
    noise_mag_len: int = 65
    ir_len: int = 128
    rolloff_db_per_octave: float = 6.0
    rolloff_ref_hz: float = 200.0
    loss_scales: tuple[int, ...] = (2048, 1024, 512, 256, 128, 64)
    loss_overlap: float = 0.75
    loss_skip_edge_bins: bool = True
    mask_fft: int = 2048
    mask_hop: int = 256
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 2000
    seed: int = 0
    nmf_iters: int = 200
    nmf_partials: int = 20
    f0_window: int = 50
    frame_len: float = 1.0
    energy_thresh: float = 10.0
    # initial raw values (pre-activation)
    init_alpha: float = -2.0
    init_gain: float = -2.0
    init_noise_mag: float = -2.0

    def __post_init__(self):
        if self.lpc_order % 2:
            raise ValueError("lpc_order must be even")
        if self.fft_size != 2 * self.hop:
            raise ValueError("the synthesis frame grid needs hop = fft_size / 2")
        if self.noise_mag_len < 2:
            raise ValueError("noise_mag_len must be at least 2")
        object.__setattr__(self, "loss_scales", tuple(int(c) for c in self.loss_scales))

    @property
    def frame_cfg(self) -> StftConfig:
        return StftConfig(self.fft_size, self.hop)

    @property
    def mask_cfg(self) -> StftConfig:
        return StftConfig(self.mask_fft, self.mask_hop)

    def loss_cfgs(self) -> list[StftConfig]:
        return scale_configs(self.loss_scales, self.loss_overlap)

    def replace(self, **changes) -> "Config":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_scales"] = list(self.loss_scales)
        d["adam"] = {k: d.pop(k) for k in ("lr", "beta1", "beta2", "eps")}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        data = dict(data)
        adam = data.pop("adam", {}) or {}
        data.update(adam)
        # accept "K", "I", "L" style aliases
        aliases = {"K": "lpc_order", "I": "num_harmonics", "L": "noise_mag_len"}
        for short, long in aliases.items():
            if short in data:
                data[long] = data.pop(short)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> Config:
    with open(Path(path)) as fh:
        return Config.from_dict(json.load(fh))
