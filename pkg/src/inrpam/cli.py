"""Command-line interface.

Every command writes its outputs plus a JSON manifest ``<out>.manifest.json``
recording the resolved configuration, paths, seed, version and duration.
Errors are reported as one ``error:`` line on stderr with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BlindDeconvConfig, INTERPOLATORS, blind_deconvolve, interpolate
from .core import ConfigError, DimensionError, ImageGrid, InrPamError
from .forward import BOUNDARIES, DegradeConfig, degrade
from .io import (
    check_finite,
    ensure_parent,
    load_checkpoint,
    load_image,
    save_checkpoint,
    save_image,
    save_kernel,
    write_csv,
    write_manifest,
)
from .metrics import mse, psnr, ssim
from .phantom import VesselPhantomConfig, generate_vessels
from .psf import TransducerSpec, field_analytic, gaussian_psf, kernel_size_for_sigma, lateral_profile, synthesize_psf
from .reconstruct import TrainConfig, init_state, predict_dense, train

EXIT_ERROR = 2


def _dims(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 128x128, got {text!r}") from None


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _finish(command, args, config, inputs, outputs, seed, started):
    manifest = {
        "command": command,
        "config": config,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "seed": seed,
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    write_manifest(_manifest_path(outputs["image"] if "image" in outputs else next(iter(outputs.values()))), manifest)
    return manifest


def _sibling(out, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(out.stem + suffix)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_phantom(args) -> dict:
    started = time.perf_counter()
    cfg = VesselPhantomConfig(
        dims=args.dims,
        n_trunks=args.n_trunks,
        branch_probability=args.branch_probability,
        min_width=args.min_width,
        max_width=args.max_width,
        intensity_range=(args.intensity_low, args.intensity_high),
        curvature_scale=args.curvature,
        rng_seed=args.seed,
    )
    image = generate_vessels(cfg)
    ensure_parent(args.out)
    save_image(args.out, image)
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.__dict__.items()}
    return _finish("phantom", args, config, {}, {"image": args.out}, args.seed, started)


def cmd_degrade(args) -> dict:
    started = time.perf_counter()
    gt = load_image(args.input)
    size = args.kernel_size or kernel_size_for_sigma(args.sigma)
    kernel = gaussian_psf(args.sigma, size)
    cfg = DegradeConfig(stride=args.stride, boundary=args.boundary, noise_sigma=args.noise)
    observed = degrade(gt, kernel, cfg, args.seed)
    kernel_out = args.kernel_out or _sibling(args.out, ".kernel.pfg")
    ensure_parent(args.out)
    save_image(args.out, observed)
    save_kernel(kernel_out, kernel)
    config = {"sigma": args.sigma, "kernel_size": size, "stride": args.stride, "boundary": args.boundary, "noise_sigma": args.noise}
    return _finish("degrade", args, config, {"input": args.input}, {"image": args.out, "kernel": kernel_out}, args.seed, started)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        lr0=args.lr,
        lr_decay=args.lr_decay,
        decay_every=args.decay_every,
        adam_beta1=args.beta1,
        adam_beta2=args.beta2,
        adam_eps=args.adam_eps,
        tv_weight_eps=args.tv_weight,
        stride=args.stride,
        psf_init_sigma=args.psf_init_sigma,
        psf_kernel_size=args.psf_size,
        learn_psf=args.learn_psf,
        rng_seed=args.seed,
        boundary=args.boundary,
    )


def cmd_reconstruct(args) -> dict:
    started = time.perf_counter()
    observed = load_image(args.input)
    check_finite(observed)
    if args.resume:
        state, cfg, dims = load_checkpoint(args.resume)
        if args.epochs_set:
            cfg = TrainConfig(**{**cfg.to_dict(), "epochs": args.epochs})
    else:
        cfg = _train_config(args)
        dims = (observed.width * cfg.stride, observed.height * cfg.stride)
        state = init_state(cfg, dims)
    if (observed.width * cfg.stride, observed.height * cfg.stride) != tuple(dims):
        raise DimensionError("observed image does not match the checkpoint's dense dims")
    if min(dims) < cfg.psf_kernel_size:
        raise ConfigError(f"dense dims {dims[0]}x{dims[1]} smaller than --psf-size {cfg.psf_kernel_size}")
    train(state, observed, cfg)
    dense = predict_dense(state, dims)

    checkpoint = args.checkpoint or _sibling(args.out, ".ckpt")
    history = args.history or _sibling(args.out, ".loss.csv")
    sigma_out = _sibling(args.out, ".sigma.txt")
    ensure_parent(args.out)
    save_image(args.out, dense)
    save_checkpoint(checkpoint, state, cfg, dims)
    write_csv(history, ["epoch", "loss"], [(k, repr(v)) for k, v in enumerate(state.history)])
    Path(sigma_out).write_text(f"{state.psf.sigma!r}\n")
    outputs = {"image": args.out, "checkpoint": checkpoint, "history": history, "sigma": sigma_out}
    config = dict(cfg.to_dict(), fitted_sigma=state.psf.sigma, dense_dims=list(dims))
    inputs = {"input": args.input}
    if args.resume:
        inputs["resume"] = args.resume
    return _finish("reconstruct", args, config, inputs, outputs, cfg.rng_seed, started)


def cmd_baseline(args) -> dict:
    started = time.perf_counter()
    observed = load_image(args.input)
    size = args.psf_size or kernel_size_for_sigma(args.psf_init_sigma)
    cfg = BlindDeconvConfig(
        outer_iterations=args.iterations,
        inner_rl_steps_image=args.image_steps,
        inner_rl_steps_psf=args.psf_steps,
        psf_init=gaussian_psf(args.psf_init_sigma, size),
    )
    dense = interpolate(observed, args.stride, args.interp)
    restored, psf = blind_deconvolve(dense, cfg)
    psf_out = args.psf_out or _sibling(args.out, ".psf.pfg")
    ensure_parent(args.out)
    save_image(args.out, restored)
    save_kernel(psf_out, psf)
    config = {
        "interp": args.interp,
        "stride": args.stride,
        "outer_iterations": args.iterations,
        "inner_rl_steps_image": args.image_steps,
        "inner_rl_steps_psf": args.psf_steps,
        "psf_init_sigma": args.psf_init_sigma,
        "psf_size": size,
    }
    return _finish("baseline", args, config, {"input": args.input}, {"image": args.out, "psf": psf_out}, None, started)


def _parse_candidate(text: str) -> tuple[str, int, str]:
    parts = text.split(":", 2)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"candidate must be METHOD:STRIDE:PATH, got {text!r}")
    method, stride, path = parts
    return method, int(stride), path


def evaluate_rows(gt: ImageGrid, candidates, data_range: float = 1.0) -> list[tuple]:
    rows = []
    for method, stride, image in candidates:
        if image.shape != gt.shape:
            raise DimensionError(f"{method} output shape {image.shape} differs from ground truth {gt.shape}")
        rows.append((method, stride, f"{psnr(image, gt, data_range):.6f}", f"{ssim(image, gt, data_range):.6f}", f"{mse(image, gt):.6e}"))
    return rows


def cmd_evaluate(args) -> dict:
    started = time.perf_counter()
    gt = load_image(args.gt)
    candidates = [(m, s, load_image(p)) for m, s, p in args.candidate]
    rows = evaluate_rows(gt, candidates, args.data_range)
    ensure_parent(args.out)
    write_csv(args.out, ["method", "stride", "psnr_db", "ssim", "mse"], rows)
    inputs = {"gt": args.gt, **{f"{m}@{s}": p for m, s, p in args.candidate}}
    return _finish("evaluate", args, {"data_range": args.data_range}, inputs, {"table": args.out}, None, started)


def cmd_psf(args) -> dict:
    started = time.perf_counter()
    spec = TransducerSpec(
        aperture_radius=args.aperture,
        focal_length=args.focal_length,
        center_frequency=args.center_freq,
        fractional_bandwidth=args.bandwidth,
        sound_speed=args.sound_speed,
    )
    if not args.pitch > 0:
        raise ConfigError("--pitch must be positive")
    if args.size < 3 or args.size % 2 == 0:
        raise ConfigError("--size must be odd and >= 3")
    kernel = synthesize_psf(spec, args.pitch, args.size, args.omega_samples)
    half = args.size // 2
    # profile sampled finer than the pixel grid so nulls are resolved
    offsets = np.arange(half * args.profile_oversample + 1) * (args.pitch / args.profile_oversample)
    broadband = lateral_profile(spec, offsets, args.omega_samples)
    mono = np.abs(field_analytic(spec, offsets, spec.center_omega))
    rows = [
        (f"{x:.9e}", f"{b / broadband[0]:.12e}", f"{m / mono[0]:.12e}")
        for x, b, m in zip(offsets, broadband, mono)
    ]
    profile_out = args.profile_out or _sibling(args.out, ".profile.csv")
    ensure_parent(args.out)
    save_kernel(args.out, kernel)
    write_csv(profile_out, ["offset_m", "broadband", "center_frequency"], rows)
    config = dict(spec.__dict__, pitch=args.pitch, size=args.size, omega_samples=args.omega_samples,
                  first_zero_radius_m=spec.first_zero_radius())
    return _finish("psf", args, config, {}, {"kernel": args.out, "profile": profile_out}, None, started)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inrpam",
        description="Phantoms, degradation, INR reconstruction, baselines and evaluation for PSF-blurred, under-sampled images.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a vascular ground-truth phantom")
    p.add_argument("--dims", type=_dims, default=(128, 128))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n-trunks", type=int, default=4)
    p.add_argument("--branch-probability", type=float, default=0.5)
    p.add_argument("--min-width", type=float, default=1.5)
    p.add_argument("--max-width", type=float, default=4.0)
    p.add_argument("--intensity-low", type=float, default=0.6)
    p.add_argument("--intensity-high", type=float, default=1.0)
    p.add_argument("--curvature", type=float, default=0.06)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("degrade", help="blur, decimate and add noise to a ground truth")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel-out")
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--kernel-size", type=int, default=0, help="0: 2*ceil(3 sigma)+1")
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--boundary", choices=BOUNDARIES, default="reflect")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_degrade)

    d = TrainConfig()
    p = sub.add_parser("reconstruct", help="INR reconstruction with a learnable PSF")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--history")
    p.add_argument("--resume", help="continue from a checkpoint")
    p.add_argument("--stride", type=int, default=d.stride)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=d.lr0)
    p.add_argument("--lr-decay", type=float, default=d.lr_decay)
    p.add_argument("--decay-every", type=int, default=d.decay_every)
    p.add_argument("--beta1", type=float, default=d.adam_beta1)
    p.add_argument("--beta2", type=float, default=d.adam_beta2)
    p.add_argument("--adam-eps", type=float, default=d.adam_eps)
    p.add_argument("--tv-weight", type=float, default=d.tv_weight_eps)
    p.add_argument("--psf-init-sigma", type=float, default=d.psf_init_sigma)
    p.add_argument("--psf-size", type=int, default=d.psf_kernel_size)
    p.add_argument("--no-learn-psf", dest="learn_psf", action="store_false")
    p.add_argument("--boundary", choices=BOUNDARIES, default=d.boundary)
    p.add_argument("--seed", type=int, default=d.rng_seed)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("baseline", help="interpolation + blind deconvolution")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--psf-out")
    p.add_argument("--interp", choices=INTERPOLATORS, default="bicubic")
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--image-steps", type=int, default=5)
    p.add_argument("--psf-steps", type=int, default=5)
    p.add_argument("--psf-init-sigma", type=float, default=2.0)
    p.add_argument("--psf-size", type=int, default=0, help="0: 2*ceil(3 sigma)+1")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="PSNR/SSIM table against a ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--candidate", type=_parse_candidate, action="append", required=True, metavar="METHOD:STRIDE:PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--data-range", type=float, default=1.0)
    p.set_defaults(func=cmd_evaluate)

    s = TransducerSpec()
    p = sub.add_parser("psf", help="synthesize a physical transducer PSF")
    p.add_argument("--aperture", type=float, default=s.aperture_radius, help="aperture radius, m")
    p.add_argument("--focal-length", type=float, default=s.focal_length, help="m")
    p.add_argument("--center-freq", type=float, default=s.center_frequency, help="Hz")
    p.add_argument("--bandwidth", type=float, default=s.fractional_bandwidth, help="fractional")
    p.add_argument("--sound-speed", type=float, default=s.sound_speed, help="m/s")
    p.add_argument("--pitch", type=float, default=5e-6, help="pixel pitch, m")
    p.add_argument("--size", type=int, default=21)
    p.add_argument("--omega-samples", type=int, default=64)
    p.add_argument("--profile-oversample", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--profile-out")
    p.set_defaults(func=cmd_psf)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "reconstruct":
        args.epochs_set = args.epochs is not None
        if args.epochs is None:
            args.epochs = TrainConfig().epochs
    try:
        args.func(args)
    except (InrPamError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
