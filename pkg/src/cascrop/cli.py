"""Command-line entry point: ``cascrop {synth,train,predict,eval,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import cnn, harness
from .cascade import Hyper, ModelFileError, ccr_predict, ccr_predict_many, ccr_train, load_model, save_model
from .data import AnnotationError, SynthSpec, load_dataset, split, synth_generate, truth_array
from .geometry import denormalize
from .harness import curve_from_trajectories
from .imaging import PPMError, load_image

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# validation-selected bin shrinkage for the synthetic benchmark; `train` keeps
# the library default of 1.0
BENCH_BETA = 300.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _lam(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("lambda must lie in (0, 1]")
    return v


def _int_range(lo, hi=None):
    def check(text):
        v = int(text)
        if v < lo or (hi is not None and v > hi):
            raise argparse.ArgumentTypeError(f"must lie in [{lo}, {hi if hi is not None else 'inf'}]")
        return v

    return check


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_int_range(1), default=os.cpu_count() or 1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="cascrop", description="Cascaded cropping regression over boosted random ferns.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate the synthetic cropping benchmark")
    s.add_argument("--spec", required=True, help="SynthSpec JSON file")
    s.add_argument("--out", required=True)

    t = sub.add_parser("train", parents=[common], help="train a cascade model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--T", type=_int_range(0), default=30)
    t.add_argument("--S", type=_int_range(1, 8), default=4)
    t.add_argument("--M", type=_int_range(1), default=20)
    t.add_argument("--Q", type=_int_range(1), default=64)
    t.add_argument("--lambda", dest="lam", type=_lam, default=0.8)
    t.add_argument("--beta", type=float, default=1.0)
    t.add_argument("--cap", type=_int_range(32), default=256)
    t.add_argument("--init-crop", default="full", choices=["full", "scale-0.5", "scale-0.25", "1.0", "0.5", "0.25"])
    t.add_argument("--patience", type=_int_range(0), default=3, help="0 disables early stopping")
    t.add_argument("--val-fraction", type=float, default=0.1)
    t.add_argument("--weights", help="extractor weight file (default: seeded weights)")

    pr = sub.add_parser("predict", parents=[common], help="predict the crop of one image")
    pr.add_argument("--model", required=True)
    pr.add_argument("--image", required=True)
    pr.add_argument("--trace-dir")
    pr.add_argument("--json", action="store_true")

    e = sub.add_parser("eval", parents=[common], help="mean IoU / BDE of a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--json", action="store_true")
    e.add_argument("--abs-bde", action="store_true", help="mean absolute instead of squared edge displacement")

    b = sub.add_parser("bench", parents=[common], help="run an ablation sweep")
    b.add_argument("--sweep", required=True, choices=["ferns", "primitive", "init"])
    b.add_argument("--data", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--T", type=_int_range(0), default=30)
    b.add_argument("--cap", type=_int_range(32), default=128)
    b.add_argument("--beta", type=float, default=BENCH_BETA, help="bin shrinkage for every cell")
    b.add_argument("--train-fraction", type=float, default=0.7)
    b.add_argument("--overlay", action="store_true", help="also dump crop sequences for the first test image")
    return p


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    return path


def cmd_synth(args) -> int:
    spec = SynthSpec.load(_require(args.spec))
    records = synth_generate(spec, args.out)
    print(f"wrote {len(records)} images to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    samples = load_dataset(_require(args.data))
    if args.weights:
        extractor = cnn.load_weights(_require(args.weights)).with_cap(args.cap)
    else:
        extractor = cnn.seeded_config(args.seed, cap=args.cap)
    hyper = Hyper(
        T=args.T, S=args.S, M=args.M, Q=args.Q, beta=args.beta, lam=args.lam, seed=args.seed,
        val_fraction=args.val_fraction, patience=args.patience or None, init_crop=args.init_crop,
    )

    def progress(t, tr, va):
        if args.verbose:
            print(f"stage {t}: train_iou={tr:.4f} val_iou={va if va is None else round(va, 4)}", file=sys.stderr)

    model = ccr_train(samples, hyper, extractor, threads=args.threads, progress=progress)
    save_model(model, args.out)
    print(f"trained {model.T} stages on {model.stats['n_train']} images -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(_require(args.model))
    img = load_image(_require(args.image))
    crop, traj = ccr_predict(model, img)
    rect = denormalize(crop, img.dims)
    if args.trace_dir:
        harness.crop_sequence(model, img, args.trace_dir, stages=range(0, model.T + 1))
    if args.json:
        print(json.dumps({
            "crop": list(rect),
            "normalized": list(crop),
            "trajectory": [list(denormalize(row, img.dims)) for row in traj],
        }))
    else:
        print(*rect)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(_require(args.model))
    samples = load_dataset(_require(args.data))
    if not samples:
        raise AnnotationError("dataset has no annotations")
    traj = ccr_predict_many(model, [s.image for s in samples], threads=args.threads)
    final = curve_from_trajectories(traj[:, -1:], truth_array(samples), squared_bde=not args.abs_bde)[0]
    if args.json:
        print(json.dumps({"n": len(samples), "mean_iou": final.mean_iou, "mean_bde": final.mean_bde}))
    else:
        print(f"mean_iou={final.mean_iou:.3f} mean_bde={final.mean_bde:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    samples = load_dataset(_require(args.data))
    train, test = split(samples, args.train_fraction, seed=args.seed)
    extractor = cnn.seeded_config(args.seed, cap=args.cap)
    base = Hyper(T=args.T, beta=args.beta, seed=args.seed, patience=None)
    grid = harness.sweep_grid(args.sweep, base)
    config = {"sweep": args.sweep, "data": str(Path(args.data).resolve()), "T": args.T, "cap": args.cap,
              "seed": args.seed, "train_fraction": args.train_fraction, "beta": args.beta}
    out = harness.run_dir(args.out, config)
    curves, models = harness.run_sweep(grid, train, test, extractor, sweep=args.sweep, out_dir=out,
                                       threads=args.threads)
    if args.overlay:
        for cell, model in models.items():
            harness.crop_sequence(model, test[0].image, out / "overlays" / cell)
    print(harness.curve_table(curves))
    print(f"curves written to {out / (args.sweep + '.csv')}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", cnn.SmallCropWarning)
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, ModelFileError, AnnotationError, PPMError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
