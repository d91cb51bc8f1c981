"""Finite-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .engine import PARAM_CLASSES, RawParams, SeparationProblem


@dataclass
class CoordinateCheck:
    param_class: str
    index: int
    analytic: float
    numeric: dict[float, float]

    def rel_error(self, h: float) -> float:
        fd = self.numeric[h]
        denom = max(abs(fd), abs(self.analytic))
        if denom == 0.0:
            return 0.0
        return abs(fd - self.analytic) / denom


@dataclass
class GradCheckReport:
    tol: float
    steps: tuple[float, ...]
    checks: list[CoordinateCheck] = field(default_factory=list)

    def worst(self) -> float:
        return max(c.rel_error(h) for c in self.checks for h in self.steps)

    def failures(self) -> list[CoordinateCheck]:
        return [c for c in self.checks if any(c.rel_error(h) >= self.tol for h in self.steps)]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def per_class(self) -> dict[str, tuple[int, float]]:
        out = {}
        for name in PARAM_CLASSES:
            errs = [c.rel_error(h) for c in self.checks if c.param_class == name
                    for h in self.steps]
            out[name] = (len(errs) // len(self.steps), max(errs) if errs else 0.0)
        return out


def gradcheck_problem(seed: int = 0, duration: float = 0.25, cfg: Config | None = None):
    """A single-source problem and a parameter point to check the gradient at.

    The target is silent, so every bin stays on one side of the L1 kinks;
    the parameter point is drawn around a quiet, mildly resonant model.
    """
    cfg = cfg or Config()
    rng = np.random.default_rng(seed)
    num_samples = int(round(duration * cfg.fs))
    n = -(-num_samples // cfg.hop)
    t = np.arange(n)
    f0 = 220.0 + 10.0 * np.sin(2 * np.pi * t / 12.0)
    problem = SeparationProblem(np.zeros(num_samples), [f0], cfg, seed)
    raw = RawParams(
        rng.normal(-1.5, 0.3, (1, n)),
        rng.normal(-2.5, 0.3, (1, n)),
        rng.normal(0.0, 0.2, (1, n, cfg.lpc_order + 1)),
        rng.normal(-1.5, 0.3, (1, cfg.noise_mag_len)),
    )
    return problem, raw


def _pick_coordinates(raw: RawParams, coords: int, rng) -> list[tuple[str, int]]:
    slices = raw.slices()
    per_class = -(-coords // len(slices))
    chosen = []
    for name, s in slices.items():
        size = s.stop - s.start
        take = min(size, per_class)
        chosen += [(name, int(i)) for i in rng.choice(size, take, replace=False)]
    if len(chosen) > coords:
        chosen = chosen[:coords]
    taken = {(n, i) for n, i in chosen}
    rest = [(name, i) for name, s in slices.items() for i in range(s.stop - s.start)
            if (name, i) not in taken]
    extra = coords - len(chosen)
    if extra > 0 and rest:
        pick = rng.choice(len(rest), min(extra, len(rest)), replace=False)
        chosen += [rest[i] for i in pick]
    return chosen


def gradient_check(seed: int = 0, coords: int = 200, tol: float = 1e-3,
                   steps=(1e-3, 1e-4), duration: float = 0.25,
                   cfg: Config | None = None) -> GradCheckReport:
    """Compare analytic gradients with central differences on random coordinates.

    Coordinates are spread over all four parameter classes.  A coordinate
    passes when the relative error ``|fd - g| / max(|fd|, |g|)`` is below
    ``tol`` for every step size in ``steps``.
    """
    problem, raw = gradcheck_problem(seed, duration, cfg)
    rng = np.random.default_rng(seed + 1)
    grad = problem.loss_and_gradient(raw).gradient.vector()
    vec = raw.vector()
    slices = raw.slices()
    report = GradCheckReport(tol, tuple(steps))
    for name, local in _pick_coordinates(raw, coords, rng):
        i = slices[name].start + local
        numeric = {}
        for h in steps:
            up, down = vec.copy(), vec.copy()
            up[i] += h
            down[i] -= h
            numeric[h] = (problem.loss_value(raw.with_vector(up))
                          - problem.loss_value(raw.with_vector(down))) / (2 * h)
        report.checks.append(CoordinateCheck(name, local, float(grad[i]), numeric))
    return report
