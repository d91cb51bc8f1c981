"""Command-line interface: ``sfsep <verb> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import Config, load_config
from .dsp import read_wav, write_wav
from .engine import SeparationProblem, fit_mixture, to_source_params
from .f0 import assign_f0s, load_f0_tracks, read_f0_csv, write_f0_csv
from .gradcheck import gradient_check
from .metrics import framewise_eval, spectral_snr
from .nmf import nmf_separate
from .separation import soft_masks, wiener_separate
from .synth import load_params, save_params, synthesize_mixture

log = logging.getLogger("sfsep")


def _config(args) -> Config:
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    changes = {}
    if getattr(args, "steps", None) is not None:
        changes["steps"] = args.steps
    if getattr(args, "lr", None) is not None:
        changes["lr"] = args.lr
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _load_inputs(args, cfg: Config):
    if args.sources < 1:
        raise ValueError("J must be >= 1")
    mixture = read_wav(args.mixture, cfg.fs)
    num_frames = -(-len(mixture) // cfg.hop)
    f0s = load_f0_tracks(args.f0, args.sources, num_frames, cfg)
    return mixture, f0s


def cmd_separate(args) -> int:
    cfg = _config(args)
    mixture, f0s = _load_inputs(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = fit_mixture(mixture, f0s, cfg, steps=cfg.steps, seed=cfg.seed)
    log.info("fit: %d steps in %.1f s, best loss %.6g at step %d", cfg.steps,
             time.perf_counter() - start, result.best_loss, result.best_step)
    synth = SeparationProblem(mixture, f0s, cfg, cfg.seed).synthesize(result.params)
    estimates = wiener_separate(mixture, soft_masks(synth, cfg.mask_cfg))
    for j, est in enumerate(estimates):
        write_wav(out / f"source_{j}.wav", est, cfg.fs)
        if args.emit_synth:
            write_wav(out / f"synth_{j}.wav", synth[j], cfg.fs)
    if args.emit_params:
        save_params(out / "params.json", to_source_params(result.params), f0s, cfg,
                    cfg.seed, len(mixture),
                    extra={"best_step": result.best_step, "losses": result.losses})
    return 0


def cmd_synthesize(args) -> int:
    sources, f0s, cfg, seed, num_samples = load_params(args.params)
    audio = synthesize_mixture(sources, f0s, cfg, seed, num_samples)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_wav(args.out, audio)
    return 0


def cmd_nmf(args) -> int:
    cfg = _config(args)
    mixture, f0s = _load_inputs(args, cfg)
    result = nmf_separate(mixture, f0s, cfg, iters=args.iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for j, est in enumerate(result.estimates):
        write_wav(out / f"source_{j}.wav", est, cfg.fs)
    log.info("nmf: %d templates, divergence %.6g -> %.6g", result.model.num_templates,
             result.model.divergence[0], result.model.divergence[-1])
    return 0


def cmd_evaluate(args) -> int:
    est_dir, ref_dir = Path(args.est_dir), Path(args.ref_dir)
    names = sorted(p.name for p in est_dir.glob("source_*.wav")
                   if (ref_dir / p.name).exists())
    if not names:
        raise ValueError(f"no matching source_*.wav files in {est_dir} and {ref_dir}")
    cfg = Config()
    seed = None
    params_path = est_dir / "params.json"
    if params_path.exists():
        seed = json.loads(params_path.read_text()).get("seed")
    report = {
        "format": "sfsep-eval",
        "version": 1,
        "config": {"fs": cfg.fs, "frame_len": args.frame_len,
                   "energy_thresh": args.energy_thresh,
                   "spectral_fft": cfg.mask_fft, "spectral_hop": cfg.mask_hop},
        "seed": seed,
        "sources": [],
    }
    for name in names:
        est = read_wav(est_dir / name, cfg.fs).samples
        ref = read_wav(ref_dir / name, cfg.fs).samples
        n = min(len(est), len(ref))
        if len(est) != len(ref):
            log.warning("%s: length mismatch (%d vs %d), truncating", name, len(est), len(ref))
        ev = framewise_eval(est[:n], ref[:n], cfg.fs, args.frame_len, args.energy_thresh)
        entry = {"file": name, **ev.to_dict()}
        try:
            entry["spectral_snr"] = spectral_snr(est[:n], ref[:n], cfg.mask_cfg)
        except ValueError:
            entry["spectral_snr"] = None
        report["sources"].append(entry)
        log.info("%s: median SI-SDR %.2f dB over %d frames", name, ev.median, len(ev.si_sdr))
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(json.dumps(report, indent=1))
    return 0


def cmd_gradcheck(args) -> int:
    start = time.perf_counter()
    report = gradient_check(seed=args.seed, coords=args.coords, tol=args.tol)
    for name, (count, worst) in report.per_class().items():
        print(f"{name:10s} coords={count:4d} worst_rel_err={worst:.3e}")
    failures = report.failures()
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {len(report.checks) - len(failures)}/{len(report.checks)} coordinates "
          f"below {args.tol:g} at h in {list(report.steps)} "
          f"({time.perf_counter() - start:.1f} s)")
    return 0 if report.passed else 1


def cmd_assign_f0(args) -> int:
    kind, *data = read_f0_csv(args.raw)
    if kind != "raw":
        raise ValueError(f"{args.raw}: already in the assigned layout")
    frames = data[0]
    tracks = assign_f0s(frames, args.sources, args.window)
    write_f0_csv(args.out, tracks, [f.time for f in frames])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfsep", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("separate", help="fit source models to a mixture and separate it")
    s.add_argument("--mixture", required=True)
    s.add_argument("--f0", required=True)
    s.add_argument("--sources", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("--emit-synth", action="store_true")
    s.add_argument("--emit-params", action="store_true")
    s.set_defaults(func=cmd_separate)

    s = sub.add_parser("synthesize", help="render a parameter JSON to audio")
    s.add_argument("--params", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("nmf", help="F0-informed NMF baseline")
    s.add_argument("--mixture", required=True)
    s.add_argument("--f0", required=True)
    s.add_argument("--sources", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--iters", type=int, default=200)
    s.add_argument("--config")
    s.set_defaults(func=cmd_nmf)

    s = sub.add_parser("evaluate", help="frame-wise SI-SDR report")
    s.add_argument("--est-dir", required=True)
    s.add_argument("--ref-dir", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--frame-len", type=float, default=1.0)
    s.add_argument("--energy-thresh", type=float, default=10.0)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--coords", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-3)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("assign-f0", help="assign raw multi-F0 estimates to sources")
    s.add_argument("--raw", required=True)
    s.add_argument("--sources", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--window", type=int, default=50)
    s.set_defaults(func=cmd_assign_f0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, FloatingPointError) as exc:
        print(f"sfsep {args.verb}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
