#!/usr/bin/env python3
"""Tabulate frequency-domain facts for a kernel basis, random non-negative
mixtures of it, and (optionally) the kernels a trained checkpoint predicts.

For every kernel the table lists the DC gain (zero for anything mixed from
the zero-sum basis), the radial frequency where the response first reaches
1/sqrt(2) of its peak, and the peak location. Sampled magnitude grids are
saved to a tensor container for plotting elsewhere.

Examples:
    python3 scripts/kernel_spectra.py --out results/spectra
    python3 scripts/kernel_spectra.py --ckpt model.vten --data dataset.vten
"""

import argparse
import os
import sys

import numpy as np

from hipass.blursim import read_dataset
from hipass.kernels import combine, frequency_response, resolve_basis
from hipass.model import load_checkpoint
from hipass.tensorops import VideoClip
from hipass.vten import write_tensors


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--basis", default="default", help="kernel basis name")
    ap.add_argument("--mixes", type=int, default=4,
                    help="random non-negative mixtures to include")
    ap.add_argument("--grid", type=int, default=64,
                    help="response samples per frequency axis")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ckpt", default=None,
                    help="trained checkpoint whose predicted kernels to add")
    ap.add_argument("--data", default=None,
                    help="dataset container supplying windows for --ckpt")
    ap.add_argument("--windows", type=int, default=3,
                    help="dataset clips to predict kernels for")
    ap.add_argument("--out", default="results/spectra",
                    help="output base path (.txt and .vten added)")
    return ap.parse_args()


def collect(args):
    """Yield (name, kernel) pairs in report order."""
    basis = resolve_basis(args.basis)
    for name, kernel in zip(basis.names, basis.kernels):
        yield f"basis/{name}", kernel
    rng = np.random.default_rng(args.seed)
    for i in range(args.mixes):
        coeffs = rng.uniform(0.0, 2.0, basis.size)
        yield f"mix/{i}", combine(basis, coeffs).kernel[0]
    if args.ckpt is None:
        return
    if args.data is None:
        sys.exit("--ckpt needs --data for input windows")
    net, _ = load_checkpoint(args.ckpt)
    samples = read_dataset(args.data)[:args.windows]
    span = net.config.span
    for si, sample in enumerate(samples):
        clip = sample.blurry
        mid = len(clip) // 2
        window = VideoClip(clip.data[mid - span:mid + span + 1])
        for pi, (kernel, _, _) in enumerate(net.dynamic_kernels(window)):
            yield f"predicted/clip{si}/path{pi}", kernel


def main():
    args = parse_args()
    rows = []
    tensors = []
    for name, kernel in collect(args):
        resp = frequency_response(kernel, grid=args.grid)
        peak = ",".join(f"{v:.3f}" for v in resp.peak_frequency)
        rows.append(f"{name:<28} dc={resp.dc_gain:9.2e} "
                    f"cutoff={resp.cutoff:6.3f} peak=({peak})")
        tensors.append((f"{name}/kernel", np.asarray(kernel, dtype=np.float64)))
        tensors.append((f"{name}/magnitudes", resp.magnitudes))

    table = "\n".join(rows)
    print(table)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(f"{args.out}.txt", "w") as fh:
        fh.write(table + "\n")
    write_tensors(f"{args.out}.vten", tensors)
    print(f"wrote {args.out}.txt and {args.out}.vten", file=sys.stderr)


if __name__ == "__main__":
    main()
