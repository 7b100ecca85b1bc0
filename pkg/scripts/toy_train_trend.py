#!/usr/bin/env python3
"""Train the network variants (or an extraction-path-count sweep) on the
standard synthetic dataset and tabulate the validation-PSNR trend.

The interesting readout is the gain column: how far each trained variant
rises above the blurry-input PSNR of the same held-out clips, under paired
seeds (identical dataset, init seed and batch order).

Examples:
    python3 scripts/toy_train_trend.py --out results/trend.json
    python3 scripts/toy_train_trend.py --paths 0,1,2 --iterations 500
"""

import argparse
import json
import os
import sys
import time

from hipass.blursim import BlurConfig, build_dataset
from hipass.model import ModelConfig
from hipass.training import TrainingSchedule, train


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=216,
                    help="dataset size incl. the validation holdout")
    ap.add_argument("--resolution", type=int, default=64, help="square canvas")
    ap.add_argument("--frames", type=int, default=5, help="blurry frames per clip")
    ap.add_argument("--blur-b", type=int, default=5,
                    help="sharp frames averaged per blurry frame")
    ap.add_argument("--max-speed", type=float, default=1.2,
                    help="largest per-frame motion in pixels")
    ap.add_argument("--data-seed", type=int, default=2026)
    ap.add_argument("--train-seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--seq-len", type=int, default=None,
                    help="training clip length (default: min(frames, 5))")
    ap.add_argument("--val-count", type=int, default=16)
    ap.add_argument("--variants", default="adaptive,identity",
                    help="comma-separated variant list")
    ap.add_argument("--paths", default=None,
                    help="comma-separated path counts; sweeps the full "
                         "variant over these instead of --variants")
    ap.add_argument("--workers", type=int, default=4,
                    help="threads for dataset rendering")
    ap.add_argument("--out", default="results/toy_trend.json")
    return ap.parse_args()


def run_configs(args):
    if args.paths is not None:
        for n in (int(v) for v in args.paths.split(",")):
            yield f"{n}-path", ModelConfig(variant="adaptive", n_paths=n)
    else:
        for variant in args.variants.split(","):
            yield variant, ModelConfig(variant=variant)


def main():
    args = parse_args()
    t0 = time.perf_counter()
    blur = BlurConfig(b=args.blur_b, stride=1, crf="identity")
    samples = build_dataset(args.samples,
                            (args.resolution, args.resolution), args.frames,
                            blur, seed=args.data_seed,
                            max_speed=args.max_speed, workers=args.workers,
                            backdrop=True)
    print(f"dataset: {args.samples} clips in {time.perf_counter() - t0:.1f}s",
          file=sys.stderr)

    seq_len = min(args.frames, 5) if args.seq_len is None else args.seq_len
    rows = []
    for label, config in run_configs(args):
        schedule = TrainingSchedule(iterations=args.iterations,
                                    seq_len=seq_len,
                                    val_count=args.val_count,
                                    seed=args.train_seed)
        print(f"training {label} ...", file=sys.stderr)
        result = train(samples, config, schedule)
        rows.append({
            "label": label,
            "val_psnr": result.val_psnr_final,
            "baseline_psnr": result.baseline_psnr,
            "gain_db": result.val_psnr_final - result.baseline_psnr,
            "seconds": result.train_seconds,
            "curve": [round(e["val_psnr"], 4) for e in result.log
                      if "val_psnr" in e],
        })
        print(f"  {label}: {result.val_psnr_final:.2f} dB "
              f"({rows[-1]['gain_db']:+.2f} over blurry) "
              f"in {result.train_seconds:.0f}s", file=sys.stderr)

    header = f"{'run':<14} {'val PSNR':>9} {'blurry':>8} {'gain':>7} {'time':>7}"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(f"{r['label']:<14} {r['val_psnr']:>9.2f} "
              f"{r['baseline_psnr']:>8.2f} {r['gain_db']:>+7.2f} "
              f"{r['seconds']:>6.0f}s")

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump({"settings": vars(args), "runs": rows}, fh, indent=2)
    print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
