"""camsel-export: emit probability logs, pair dumps, and masks."""

from __future__ import annotations

import argparse
import json
import sys

from .dataset import load_dataset, make_toy_dataset
from .export import ExportJob, export_masks, run_pair_dump_job, run_probability_job


def _job_from_args(args, mode: str) -> ExportJob:
    return ExportJob(
        dataset=args.dataset,
        backbone=args.backbone,
        mode=mode,
        classes=tuple(args.pair) if getattr(args, "pair", None) else None,
        tap_points=tuple(args.taps or ()),
        output_dir=args.out,
        input_size=args.input_size,
        seed=args.seed,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        max_epochs=args.max_epochs,
        stop_accuracy=args.stop_accuracy,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="camsel-export")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p):
        p.add_argument("--dataset", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--backbone", default="smallres4")
        p.add_argument("--taps", type=int, nargs="*", help="block indices to tap")
        p.add_argument("--input-size", dest="input_size", type=int, default=224)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=24)
        p.add_argument("--lr", type=float, default=1e-4)
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--max-epochs", dest="max_epochs", type=int, default=10)
        p.add_argument("--stop-accuracy", dest="stop_accuracy", type=float, default=0.95)

    p = sub.add_parser("probs", help="train an all-class model and export the probability log")
    add_train_flags(p)

    p = sub.add_parser("dumps", help="train a binary pair model and export layer dumps")
    add_train_flags(p)
    p.add_argument("--pair", nargs=2, required=True, metavar=("TARGET", "COMPARISON"))
    p.add_argument("--images", nargs="*", help="restrict to these image ids")

    p = sub.add_parser("masks", help="convert annotations into per-class binary masks")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("toy", help="synthesize the deterministic toy dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--images-per-class", dest="images_per_class", type=int, default=6)
    p.add_argument("--size", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "probs":
            result = run_probability_job(_job_from_args(args, "all"))
            print(f"probs -> {result['probability_log']} "
                  f"(train acc {result['training']['train_accuracy']:.3f})")
        elif args.command == "dumps":
            result = run_pair_dump_job(_job_from_args(args, "binary"), args.images)
            print(f"dumps -> {len(result['dump_dirs'])} pair dirs "
                  f"(train acc {result['training']['train_accuracy']:.3f})")
        elif args.command == "masks":
            written = export_masks(load_dataset(args.dataset), args.out)
            total = sum(len(v) for v in written.values())
            print(f"masks -> {total} files for {len(written)} images")
        else:
            data = make_toy_dataset(
                args.out, images_per_class=args.images_per_class,
                size=args.size, seed=args.seed,
            )
            print(f"toy dataset -> {args.out} ({len(data.samples)} images, "
                  f"{data.n_classes} classes)")
        return 0
    except (ValueError, KeyError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
