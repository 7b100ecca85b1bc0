"""Command line front end.

Every subcommand reads defaults from an optional JSON config file whose keys
are flat and namespaced ("train.iterations", "model.n_paths", "synth.count");
explicit flags win over the file, the file wins over built-in defaults, and
the effective merged configuration is echoed to stderr as one JSON line
before any work happens.

Exit codes: 0 on success, 1 on a domain error (reported as a single
machine-parseable stderr line: error: {"field": ..., "message": ...}),
2 on a usage error from the argument parser.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .blursim import (BlurConfig, CRF_KINDS, accumulate_blur, build_dataset,
                      read_clip, read_dataset, write_clip, write_dataset)
from .errors import HipassError
from .kernels import random_high_pass, verify_high_pass
from .metrics import psnr, spectrum_dump, ssim, subband_mse
from .model import (DOWNSAMPLE_FACTORS, FLOW_MODES, ModelConfig, VARIANTS,
                    load_checkpoint, save_checkpoint)
from .pnm import read_pnm, write_frame
from .sharpen import NAMED_KERNELS, UnsharpConfig, get_named_kernel, unsharp_mask
from .training import TrainingSchedule, train

# Mapped into "model.*" config keys; every other train option is "train.*".
_MODEL_DESTS = ("variant", "n_paths", "span", "channels", "res_blocks",
                "downsample", "basis")

_SPECS = {
    "synth": dict(
        help="render random scenes into a blurry/sharp dataset container",
        args=[
            (["--count"], dict(type=int, default=8, help="number of samples")),
            (["--canvas"], dict(type=int, nargs=2, default=[64, 64],
                                metavar=("H", "W"), help="canvas extents")),
            (["--frames"], dict(type=int, default=5,
                                help="blurry frames per sample")),
            (["--blur-b"], dict(type=int, default=5,
                                help="frames averaged per blurry frame")),
            (["--stride"], dict(type=int, default=1,
                                help="sharp frames between blur windows")),
            (["--crf"], dict(choices=CRF_KINDS, default="identity",
                             help="camera response applied after averaging")),
            (["--max-speed"], dict(type=float, default=2.0,
                                   help="largest per-frame motion in pixels")),
            (["--backdrop"], dict(action="store_true",
                                  help="paint a full-canvas moving texture "
                                       "under the patches")),
            (["--seed"], dict(type=int, default=0, help="master RNG seed")),
            (["--out"], dict(default="dataset.vten", help="output container")),
        ]),
    "blur": dict(
        help="temporally average a sharp clip container",
        args=[
            (["--in"], dict(dest="input", required=True, help="input clip container")),
            (["--blur-b"], dict(type=int, default=5,
                                help="frames averaged per output frame")),
            (["--stride"], dict(type=int, default=1, help="window stride")),
            (["--crf"], dict(choices=CRF_KINDS, default="identity",
                             help="camera response applied after averaging")),
            (["--out"], dict(default="blurred.vten", help="output container")),
        ]),
    "unsharp": dict(
        help="classic fixed-kernel unsharp masking of one image",
        args=[
            (["--in"], dict(dest="input", required=True, help="input PGM/PPM image")),
            (["--kernel"], dict(choices=sorted(NAMED_KERNELS), default="neg-laplacian",
                                help="high-pass detail kernel")),
            (["--amount"], dict(type=float, default=1.0,
                                help="detail gain added to the input")),
            (["--out"], dict(default="sharpened.pgm", help="output image")),
        ]),
    "train": dict(
        help="train a deblurring network on a dataset container",
        args=[
            (["--data"], dict(required=True, help="dataset container from synth")),
            (["--variant"], dict(choices=VARIANTS, default="adaptive",
                                 help="network variant")),
            (["--n-paths"], dict(type=int, default=2,
                                 help="dynamic extraction paths")),
            (["--span"], dict(type=int, default=1,
                              help="window reach in frames per side")),
            (["--channels"], dict(type=int, default=16, help="feature width")),
            (["--res-blocks"], dict(type=int, default=4,
                                    help="residual blocks in the recurrent module")),
            (["--downsample"], dict(type=float, default=0.25,
                                    choices=list(DOWNSAMPLE_FACTORS),
                                    help="preprocessor resolution factor")),
            (["--basis"], dict(default="default", help="kernel basis name")),
            (["--iterations"], dict(type=int, default=2000,
                                    help="optimizer steps")),
            (["--batch-size"], dict(type=int, default=2,
                                    help="clips per optimizer step")),
            (["--seq-len"], dict(type=int, default=5,
                                 help="frames per training clip")),
            (["--lr"], dict(type=float, default=2e-4, help="peak learning rate")),
            (["--min-lr"], dict(type=float, default=1e-7,
                                help="cosine schedule floor")),
            (["--val-interval"], dict(type=int, default=250,
                                      help="iterations between validations")),
            (["--val-count"], dict(type=int, default=16,
                                   help="samples held out for validation")),
            (["--no-augment"], dict(action="store_true",
                                    help="disable geometric augmentation")),
            (["--seed"], dict(type=int, default=0,
                              help="init and batch-sampling seed")),
            (["--out"], dict(default="model.vten", help="checkpoint path")),
        ]),
    "infer": dict(
        help="deblur a clip container with a trained checkpoint",
        args=[
            (["--ckpt"], dict(required=True, help="checkpoint from train")),
            (["--in"], dict(dest="input", required=True, help="input clip container")),
            (["--flow-mode"], dict(choices=list(FLOW_MODES), default="block",
                                   help="how warping flows are obtained")),
            (["--out"], dict(default="deblurred.vten", help="output container")),
        ]),
    "eval": dict(
        help="score a checkpoint on a dataset, or one clip against another",
        args=[
            (["--ckpt"], dict(default=None, help="checkpoint from train")),
            (["--data"], dict(default=None, help="dataset container from synth")),
            (["--flow"], dict(choices=["gt", "block", "zero"], default="gt",
                              help="warping flows: ground truth or estimated")),
            (["--outputs"], dict(default=None,
                                 help="clip container to score directly")),
            (["--truth"], dict(default=None,
                               help="ground-truth clip for --outputs")),
        ]),
    "verify-kernels": dict(
        help="draw random zero-sum kernels and check the high-pass property",
        args=[
            (["--trials"], dict(type=int, default=1000,
                                help="random kernels to draw")),
            (["--rows"], dict(type=int, default=3, help="kernel rows")),
            (["--cols"], dict(type=int, default=3, help="kernel columns")),
            (["--seed"], dict(type=int, default=0, help="base RNG seed")),
        ]),
    "analyze-spectrum": dict(
        help="compare restorations band by band, or dump an image spectrum",
        args=[
            (["--outputs"], dict(default=None,
                                 help="restored clip container to analyze")),
            (["--reference"], dict(default=None,
                                   help="reference restoration container")),
            (["--truth"], dict(default=None,
                               help="ground-truth clip container")),
            (["--in"], dict(dest="input", default=None,
                            help="PGM/PPM image or clip container to dump")),
            (["--frame"], dict(type=int, default=0,
                               help="frame index when the input is a clip")),
            (["--out"], dict(default="spectrum",
                             help="output base path (extensions added)")),
        ]),
}


class CliError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _emit_error(field: str, message: str) -> None:
    line = json.dumps({"field": field, "message": message})
    print(f"error: {line}", file=sys.stderr)


def _dest_of(flags, kwargs) -> str:
    if "dest" in kwargs:
        return kwargs["dest"]
    return flags[0].lstrip("-").replace("-", "_")


def _flat_key(cmd: str, dest: str) -> str:
    if cmd == "train" and dest in _MODEL_DESTS:
        return f"model.{dest}"
    return f"{cmd}.{dest}"


def build_parser(suppress_defaults: bool = False) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hipass",
        description="video deblurring with dynamically mixed high-pass kernels",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subs = parser.add_subparsers(dest="cmd", metavar="COMMAND")
    for cmd, spec in _SPECS.items():
        sub = subs.add_parser(cmd, help=spec["help"],
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.add_argument("--config", default=None,
                         help="JSON file with flat namespaced keys")
        sub.add_argument("--out-dir", default=".",
                         help="directory relative output paths land in")
        for flags, kwargs in spec["args"]:
            kw = dict(kwargs)
            if suppress_defaults:
                kw.pop("default", None)
                kw.pop("required", None)
                kw["default"] = argparse.SUPPRESS
            sub.add_argument(*flags, **kw)
    return parser


def _apply_config(cmd: str, args: argparse.Namespace, provided: dict) -> dict:
    """Merge defaults <- config file <- explicit flags; returns the echoed
    flat map."""
    key_to_dest = {}
    for flags, kwargs in _SPECS[cmd]["args"]:
        dest = _dest_of(flags, kwargs)
        key_to_dest[_flat_key(cmd, dest)] = dest
    key_to_dest[_flat_key(cmd, "out_dir")] = "out_dir"

    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise CliError("config", str(exc))
        except json.JSONDecodeError as exc:
            raise CliError("config", f"invalid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise CliError("config", "config root must be a JSON object")
        own_prefixes = (f"{cmd}.", "model.") if cmd == "train" else (f"{cmd}.",)
        for key, value in loaded.items():
            dest = key_to_dest.get(key)
            if dest is None:
                foreign = (not key.startswith(own_prefixes)
                           and (key.startswith("model.")
                                or any(key.startswith(f"{c}.") for c in _SPECS)))
                if foreign:
                    continue  # some other subcommand's namespace
                raise CliError(key, "unknown configuration key")
            if dest not in provided:
                setattr(args, dest, value)

    flat = {key: getattr(args, dest) for key, dest in sorted(key_to_dest.items())}
    print(f"config: {json.dumps(flat, sort_keys=True)}", file=sys.stderr)
    return flat


def _out_path(args, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(args.out_dir, path)


def _workers(count: int) -> int:
    raw = os.environ.get("HIPASS_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise CliError("HIPASS_THREADS", f"not an integer: {raw!r}")
    return max(1, min(count, cap))


# -- handlers -----------------------------------------------------------------

def _cmd_synth(args) -> int:
    blur = BlurConfig(b=args.blur_b, stride=args.stride, crf=args.crf)
    samples = build_dataset(args.count, tuple(args.canvas), args.frames, blur,
                            seed=args.seed, max_speed=args.max_speed,
                            workers=_workers(args.count), backdrop=args.backdrop)
    out = _out_path(args, args.out)
    write_dataset(out, samples)
    print(f"wrote {len(samples)} samples to {out}", file=sys.stderr)
    return 0


def _cmd_blur(args) -> int:
    clip = read_clip(args.input)
    cfg = BlurConfig(b=args.blur_b, stride=args.stride, crf=args.crf)
    out = accumulate_blur(clip, cfg)
    path = _out_path(args, args.out)
    write_clip(path, out)
    print(f"wrote {len(out)} frames to {path}", file=sys.stderr)
    return 0


def _cmd_unsharp(args) -> int:
    frame = read_pnm(args.input)
    cfg = UnsharpConfig(kernel=get_named_kernel(args.kernel), lam=args.amount)
    result = unsharp_mask(frame, cfg)
    path = _out_path(args, args.out)
    write_frame(path, result)
    print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    samples = read_dataset(args.data)
    if not samples:
        raise CliError("train.data", "dataset is empty")
    config = ModelConfig(
        variant=args.variant, n_paths=args.n_paths, span=args.span,
        in_channels=samples[0].blurry.data.shape[1], channels=args.channels,
        n_res_blocks=args.res_blocks, downsample=args.downsample,
        basis=args.basis)
    schedule = TrainingSchedule(
        iterations=args.iterations, batch_size=args.batch_size,
        seq_len=args.seq_len, initial_lr=args.lr, min_lr=args.min_lr,
        val_interval=args.val_interval, val_count=args.val_count,
        seed=args.seed, augment=not args.no_augment)
    result = train(samples, config, schedule)
    out = _out_path(args, args.out)
    save_checkpoint(out, result.net, result.state)
    with open(f"{out}.log.jsonl", "w") as fh:
        for record in result.log:
            fh.write(json.dumps(record) + "\n")
    print(f"final val_psnr={result.val_psnr_final:.3f} "
          f"baseline={result.baseline_psnr:.3f} checkpoint={out}")
    return 0


def _cmd_infer(args) -> int:
    net, _ = load_checkpoint(args.ckpt)
    clip = read_clip(args.input)
    out = net.forward_video(clip, flow_mode=args.flow_mode)
    path = _out_path(args, args.out)
    write_clip(path, out)
    print(f"wrote {len(out)} frames to {path}", file=sys.stderr)
    return 0


def _clip_ssim(a, b) -> float:
    return float(np.mean([ssim(a.data[t], b.data[t]) for t in range(len(a))]))


def _cmd_eval(args) -> int:
    if args.outputs is not None or args.truth is not None:
        if args.outputs is None or args.truth is None:
            raise CliError("eval.outputs", "--outputs and --truth go together")
        out = read_clip(args.outputs)
        truth = read_clip(args.truth)
        print(json.dumps({"count": len(out),
                          "psnr": round(psnr(out.data, truth.data), 4),
                          "ssim": round(_clip_ssim(out, truth), 4)}))
        return 0
    if args.ckpt is None or args.data is None:
        raise CliError("eval.ckpt",
                       "need either --ckpt with --data or --outputs with --truth")
    net, _ = load_checkpoint(args.ckpt)
    samples = read_dataset(args.data)
    if not samples:
        raise CliError("eval.data", "dataset is empty")
    scores, structs, base = [], [], []
    for s in samples:
        if args.flow == "gt":
            out = net.forward_video(s.blurry, flows=s.flow_gt)
        else:
            out = net.forward_video(s.blurry, flow_mode=args.flow)
        scores.append(psnr(out.data, s.sharp.data))
        structs.append(_clip_ssim(out, s.sharp))
        base.append(psnr(s.blurry.data, s.sharp.data))
    print(json.dumps({"count": len(samples),
                      "psnr": round(float(np.mean(scores)), 4),
                      "ssim": round(float(np.mean(structs)), 4),
                      "baseline_psnr": round(float(np.mean(base)), 4)}))
    return 0


def _cmd_verify_kernels(args) -> int:
    ok = 0
    for i in range(args.trials):
        kernel = random_high_pass(args.rows, args.cols, seed=args.seed + i)
        if verify_high_pass(kernel):
            ok += 1
    print(f"{ok}/{args.trials} high-pass")
    return 0 if ok == args.trials else 1


def _cmd_analyze_spectrum(args) -> int:
    triple = (args.outputs, args.reference, args.truth)
    if any(p is not None for p in triple):
        if any(p is None for p in triple):
            raise CliError("analyze-spectrum.outputs",
                           "--outputs, --reference and --truth go together")
        report = subband_mse(read_clip(args.outputs), read_clip(args.reference),
                             read_clip(args.truth),
                             reference_variant=os.path.basename(args.reference))
        base = _out_path(args, args.out)
        with open(f"{base}.jsonl", "w") as fh:
            for row in report.rows():
                fh.write(json.dumps(row) + "\n")
        with open(f"{base}.txt", "w") as fh:
            fh.write(report.table() + "\n")
        print(f"wrote {base}.jsonl and {base}.txt", file=sys.stderr)
        return 0
    if args.input is None:
        raise CliError("analyze-spectrum.in",
                       "need --in, or --outputs/--reference/--truth")
    if args.input.endswith(".vten"):
        clip = read_clip(args.input)
        if not 0 <= args.frame < len(clip):
            raise CliError("analyze-spectrum.frame",
                           f"frame {args.frame} out of range 0..{len(clip) - 1}")
        image = clip.data[args.frame]
    else:
        image = read_pnm(args.input).values
    base = _out_path(args, args.out)
    spectrum_dump(image, base)
    print(f"wrote {base}.pgm and {base}.vten", file=sys.stderr)
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "blur": _cmd_blur,
    "unsharp": _cmd_unsharp,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "verify-kernels": _cmd_verify_kernels,
    "analyze-spectrum": _cmd_analyze_spectrum,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help()
        return 2
    sentinel = build_parser(suppress_defaults=True)
    provided = vars(sentinel.parse_args(argv))
    try:
        _apply_config(args.cmd, args, provided)
        return _HANDLERS[args.cmd](args)
    except CliError as exc:
        _emit_error(exc.field, str(exc))
        return 1
    except (HipassError, OSError, ValueError) as exc:
        _emit_error(args.cmd, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
