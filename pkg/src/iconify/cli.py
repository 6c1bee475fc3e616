"""Command-line surface: prepare, train, iconify, grid, verify.

Exit codes are a stable contract: 0 success, 1 verification/quality
failure, 2 usage or config error. Heavy imports happen inside commands so
``--threads`` can pin the BLAS pool before numpy loads.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_QUALITY = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _set_thread_env(argv):
    if "--threads" in argv:
        idx = argv.index("--threads")
        if idx + 1 < len(argv):
            n = argv[idx + 1]
            for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS",
                        "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
                os.environ.setdefault(var, n)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/numpy worker threads (1 = deterministic)")
    parser.add_argument("--output-dir", default=None,
                        help="directory for produced files")
    parser.add_argument("--config", default=None, help="run config file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iconify",
        description="Unpaired photo-to-icon translation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a training domain from raw data")
    _add_common(p)
    p.add_argument("--annotations", help="COCO-style annotation JSON")
    p.add_argument("--images", help="image directory for --annotations")
    p.add_argument("--icons", help="directory of icon PNGs to augment")
    p.add_argument("--logos", help="directory of square logo PNGs")
    p.add_argument("--augment", type=int, default=10,
                   help="replication factor for --icons")
    p.add_argument("--min-area", type=int, default=1024,
                   help="smallest object mask kept, in pixels")
    p.add_argument("--out", help="output domain directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model from a config file")
    _add_common(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("iconify", help="convert images with a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--direction", choices=("photo2icon", "icon2photo"),
                   default="photo2icon")
    p.add_argument("--reconstruct", action="store_true",
                   help="also write the round-trip image")
    p.add_argument("inputs", nargs="+", help="input PNGs")
    p.set_defaults(func=cmd_iconify)

    p = sub.add_parser("grid", help="tile images into a contact sheet")
    _add_common(p)
    p.add_argument("--row", action="append", nargs="+", metavar="IMG",
                   help="one row of images (repeatable)")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    _add_common(p)
    p.add_argument("--fast", action="store_true",
                   help="small-shape subset (< 60 s)")
    p.set_defaults(func=cmd_verify)
    return parser


# -- commands -----------------------------------------------------------------


def cmd_prepare(args) -> int:
    from . import data

    sources = [s for s in (args.annotations, args.icons, args.logos) if s]
    if len(sources) != 1:
        raise UsageError(
            "prepare needs exactly one of --annotations / --icons / --logos"
        )
    out = args.out or args.output_dir
    if not out:
        raise UsageError("prepare needs --out (or --output-dir)")
    src = Path(sources[0])
    if not src.exists():
        raise UsageError(f"input path does not exist: {src}")
    if args.images and not Path(args.images).exists():
        raise UsageError(f"image directory does not exist: {args.images}")

    out = Path(out)
    created = not out.exists()
    try:
        if args.annotations:
            annotated = data.load_annotations(args.annotations, args.images)
            cutouts, skipped = [], 0
            for ann in annotated:
                result = data.extract_objects(ann, min_area=args.min_area)
                cutouts.extend(result.cutouts)
                skipped += result.skipped
            data.save_domain_dir(
                out, [c.image for c in cutouts],
                labels=[c.label for c in cutouts],
                sources=[c.source_id for c in cutouts])
            print(f"cutouts: {len(cutouts)} (skipped {skipped} below "
                  f"{args.min_area} px) from {len(annotated)} images")
        elif args.icons:
            files = sorted(Path(args.icons).glob("*.png"))
            if not files:
                raise UsageError(f"no PNGs in {args.icons}")
            icons = [data.load_png(f) for f in files]
            params = data.AugmentParams(replicas=args.augment)
            seed = args.seed if args.seed is not None else 0
            augmented = data.augment_icons(icons, params, seed=seed)
            labels = [f.stem for f in files for _ in range(args.augment)]
            data.save_domain_dir(out, augmented, labels=labels,
                                 sources=labels)
            print(f"augmented: {len(augmented)} outputs from {len(icons)} icons "
                  f"(factor {args.augment})")
        else:
            files = sorted(Path(args.logos).glob("*.png"))
            if not files:
                raise UsageError(f"no PNGs in {args.logos}")
            logos = [data.load_png(f) for f in files]
            prepared = data.prepare_logos(logos)
            data.save_domain_dir(out, prepared,
                                 labels=[f.stem for f in files],
                                 sources=[f.stem for f in files])
            print(f"logos: {len(prepared)} prepared at "
                  f"{data.CANVAS_SIZE}×{data.CANVAS_SIZE}")
    except Exception:
        if created and out.exists():
            shutil.rmtree(out)  # never leave a partial domain behind
        raise
    return EXIT_OK


def cmd_train(args) -> int:
    from .config import ConfigError, load_config
    from .data import load_domain_dir
    from .training import (Trainer, build_cyclegan_model,
                           build_unit_train_model, resume_trainer)

    if not args.config:
        raise UsageError("train needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    if args.output_dir is not None:
        from dataclasses import replace
        cfg = replace(cfg, out_dir=args.output_dir)
    if not cfg.x_dir or not cfg.y_dir:
        raise UsageError("config must set [data] x_dir and y_dir")

    base = Path(args.config).parent
    x_set = load_domain_dir(_resolve(base, cfg.x_dir), "photos", seed=cfg.seed,
                            allowlist=_opt(base, cfg.x_allowlist),
                            denylist=_opt(base, cfg.x_denylist))
    y_set = load_domain_dir(_resolve(base, cfg.y_dir), "icons", seed=cfg.seed,
                            allowlist=_opt(base, cfg.y_allowlist),
                            denylist=_opt(base, cfg.y_denylist))

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = cfg.schedule()
    weights = cfg.weights()

    if args.resume:
        trainer = resume_trainer(args.resume, schedule, x_set, y_set, weights,
                                 seed=cfg.seed, batch_size=cfg.batch_size,
                                 base_lr=cfg.base_lr)
        log_mode = "a"
    else:
        if cfg.kind == "cyclegan":
            model = build_cyclegan_model(
                seed=cfg.seed, width=cfg.width, n_res_blocks=cfg.n_res_blocks,
                pool_capacity=cfg.pool_capacity, lr=cfg.base_lr)
        else:
            model = build_unit_train_model(
                seed=cfg.seed, width=cfg.width, n_res_blocks=cfg.n_res_blocks,
                pool_capacity=cfg.pool_capacity, lr=cfg.base_lr)
        trainer = Trainer(model, schedule, x_set, y_set, weights,
                          seed=cfg.seed, batch_size=cfg.batch_size,
                          base_lr=cfg.base_lr)
        log_mode = "w"

    log_path = out_dir / "loss_log.txt"
    with open(log_path, log_mode) as log_fh:
        paths = trainer.run(checkpoint_dir=out_dir, log_fh=log_fh)
    print(f"trained {trainer.global_step} steps; "
          f"{len(paths)} checkpoint(s) under {out_dir}")
    return EXIT_OK


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _opt(base: Path, p: str):
    return _resolve(base, p) if p else None


def cmd_iconify(args) -> int:
    from .data import from_unit_range, load_png, save_png, to_unit_range
    from .tensor import Tensor
    from .training import checkpoint_load, convert, reconstruct

    if not Path(args.checkpoint).exists():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    model, _ = checkpoint_load(args.checkpoint)
    out_dir = Path(args.output_dir) if args.output_dir else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)

    converted = 0
    for name in args.inputs:
        try:
            img = load_png(name)
        except Exception as exc:
            print(f"warning: skipping unreadable image {name}: {exc}",
                  file=sys.stderr)
            continue
        x = Tensor(to_unit_range(img)[None])
        stem = Path(name).stem
        if args.reconstruct:
            translated, cycled = reconstruct(model, x, args.direction)
            save_png(out_dir / f"{stem}.cycled.png",
                     from_unit_range(cycled.data[0]))
        else:
            translated = convert(model, x, args.direction)
        save_png(out_dir / f"{stem}.iconified.png",
                 from_unit_range(translated.data[0]))
        converted += 1
    if converted == 0:
        print("error: no input image could be read", file=sys.stderr)
        return EXIT_QUALITY
    print(f"wrote {converted} image(s) to {out_dir}")
    return EXIT_OK


def cmd_grid(args) -> int:
    from .data import load_png, save_png
    from .gridsheet import render_contact_sheet

    if not args.row:
        raise UsageError("grid needs at least one --row")
    rows = [[load_png(p) for p in row] for row in args.row]
    try:
        sheet = render_contact_sheet(rows)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    if args.output_dir:
        out = Path(args.output_dir) / out
        out.parent.mkdir(parents=True, exist_ok=True)
    save_png(out, sheet)
    print(f"contact sheet {sheet.shape[1]}×{sheet.shape[0]} -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import format_table, run_all

    results = run_all(fast=args.fast)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: "
              + ", ".join(r.name for r in failed))
        return EXIT_QUALITY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _set_thread_env(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # config/data errors are usage errors too
        from .config import ConfigError
        if isinstance(exc, (ConfigError, FileNotFoundError, NotADirectoryError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
