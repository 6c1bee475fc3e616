"""Deterministic synthetic corpora for smoke training and dataset tests.

Nothing here ships real data: the two-shape domains stand in for the
photo/icon pair at desk scale, and the annotated mini-corpus exercises the
extraction pipeline end to end.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .data import save_domain_dir, to_unit_range, DomainDataset

__all__ = [
    "make_shape_domains",
    "shape_domain_datasets",
    "make_annotated_corpus",
    "make_icon_set",
    "make_logo_set",
    "write_shape_domains",
]

ANNOTATED_CORPUS_SEED = 4
ANNOTATED_CORPUS_IMAGES = 20


def make_shape_domains(n: int = 64, res: int = 32, seed: int = 0):
    """Two unpaired domains: filled squares (X) vs outlined circles (Y)."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for _ in range(n):
        im = Image.new("RGB", (res, res), (255, 255, 255))
        d = ImageDraw.Draw(im)
        side = int(rng.integers(res // 4, res // 2 + 1))
        x0 = int(rng.integers(1, res - side - 1))
        y0 = int(rng.integers(1, res - side - 1))
        shade = int(rng.integers(0, 120))
        d.rectangle([x0, y0, x0 + side, y0 + side], fill=(shade, shade, shade))
        xs.append(np.asarray(im))
    for _ in range(n):
        im = Image.new("RGB", (res, res), (255, 255, 255))
        d = ImageDraw.Draw(im)
        r = int(rng.integers(res // 5, res // 3 + 1))
        cx = int(rng.integers(r + 1, res - r - 1))
        cy = int(rng.integers(r + 1, res - r - 1))
        d.ellipse([cx - r, cy - r, cx + r, cy + r], outline=(0, 0, 0),
                  width=max(1, res // 16))
        ys.append(np.asarray(im))
    return xs, ys


def shape_domain_datasets(n: int = 64, res: int = 32, seed: int = 0):
    xs, ys = make_shape_domains(n=n, res=res, seed=seed)
    x_set = DomainDataset(role="photos",
                          items=np.stack([to_unit_range(i) for i in xs]))
    y_set = DomainDataset(role="icons",
                          items=np.stack([to_unit_range(i) for i in ys]))
    return x_set, y_set


def write_shape_domains(out_root, n: int = 64, res: int = 32, seed: int = 0):
    """Materialize the two-shape domains as prepared domain directories."""
    out_root = Path(out_root)
    xs, ys = make_shape_domains(n=n, res=res, seed=seed)
    save_domain_dir(out_root / "x", xs, labels=["square"] * len(xs))
    save_domain_dir(out_root / "y", ys, labels=["circle"] * len(ys))
    return out_root / "x", out_root / "y"


def _mask_to_rle(mask: np.ndarray) -> dict:
    """Uncompressed column-major run-length counts."""
    flat = mask.reshape(-1, order="F")
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0] == 1:  # counts always start with a zero-run
        counts = [0] + counts
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def make_annotated_corpus(out_dir, n_images: int = ANNOTATED_CORPUS_IMAGES,
                          seed: int = ANNOTATED_CORPUS_SEED,
                          canvas: int = 128) -> Path:
    """COCO-style mini-corpus of colored rectangles and ellipses.

    Shapes are placed without touching each other, some deliberately below
    the default min-area threshold; masks are stored as exact uncompressed
    RLE so no rasterization ambiguity enters the counts.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    categories = [{"id": 1, "name": "box"}, {"id": 2, "name": "disk"}]
    images, annotations = [], []
    ann_id = 1
    for img_id in range(1, n_images + 1):
        im = Image.new("RGB", (canvas, canvas), (255, 255, 255))
        draw = ImageDraw.Draw(im)
        occupied = np.zeros((canvas, canvas), dtype=np.uint8)
        n_shapes = int(rng.integers(1, 4))
        for _ in range(n_shapes):
            for _attempt in range(30):
                big = rng.random() < 0.7
                if big:
                    w = int(rng.integers(34, 70))
                    h = int(rng.integers(34, 70))
                else:  # deliberately under the 1024 px default threshold
                    w = int(rng.integers(6, 24))
                    h = int(rng.integers(6, 24))
                x0 = int(rng.integers(2, canvas - w - 2))
                y0 = int(rng.integers(2, canvas - h - 2))
                pad = 2
                region = occupied[max(0, y0 - pad):y0 + h + pad,
                                  max(0, x0 - pad):x0 + w + pad]
                if region.any():
                    continue
                kind = int(rng.integers(1, 3))
                color = tuple(int(c) for c in rng.integers(0, 200, size=3))
                shape_mask = np.zeros((canvas, canvas), dtype=np.uint8)
                if kind == 1:
                    draw.rectangle([x0, y0, x0 + w - 1, y0 + h - 1], fill=color)
                    shape_mask[y0:y0 + h, x0:x0 + w] = 1
                else:
                    mi = Image.new("L", (canvas, canvas), 0)
                    ImageDraw.Draw(mi).ellipse(
                        [x0, y0, x0 + w - 1, y0 + h - 1], fill=1)
                    shape_mask = np.asarray(mi, dtype=np.uint8)
                    draw.ellipse([x0, y0, x0 + w - 1, y0 + h - 1], fill=color)
                occupied |= shape_mask
                annotations.append({
                    "id": ann_id,
                    "image_id": img_id,
                    "category_id": kind,
                    "segmentation": _mask_to_rle(shape_mask),
                    "area": int(shape_mask.sum()),
                })
                ann_id += 1
                break
        name = f"img_{img_id:03d}.png"
        im.save(out_dir / name)
        images.append({"id": img_id, "file_name": name,
                       "width": canvas, "height": canvas})

    manifest = out_dir / "annotations.json"
    with open(manifest, "w") as fh:
        json.dump({"images": images, "categories": categories,
                   "annotations": annotations}, fh)
    return manifest


_GLYPHS = ("circle", "square", "triangle", "cross", "bar")


def make_icon_set(n: int, seed: int = 0, size: int = 256) -> list[np.ndarray]:
    """Black-and-white glyphs on white, one of a few stencil families."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        im = Image.new("RGB", (size, size), (255, 255, 255))
        d = ImageDraw.Draw(im)
        kind = _GLYPHS[i % len(_GLYPHS)]
        m = size // 5 + int(rng.integers(0, size // 8))
        lo, hi = m, size - m
        width = max(2, size // 24)
        if kind == "circle":
            d.ellipse([lo, lo, hi, hi], outline=(0, 0, 0), width=width)
        elif kind == "square":
            d.rectangle([lo, lo, hi, hi], outline=(0, 0, 0), width=width)
        elif kind == "triangle":
            d.polygon([(size // 2, lo), (hi, hi), (lo, hi)],
                      outline=(0, 0, 0), width=width)
        elif kind == "cross":
            c = size // 2
            d.line([(lo, c), (hi, c)], fill=(0, 0, 0), width=width * 2)
            d.line([(c, lo), (c, hi)], fill=(0, 0, 0), width=width * 2)
        else:
            d.rectangle([lo, size // 2 - width * 2, hi, size // 2 + width * 2],
                        fill=(0, 0, 0))
        out.append(np.asarray(im))
    return out


def make_logo_set(n: int, seed: int = 0, size: int = 400) -> list[np.ndarray]:
    """Colorful blob-and-letterbox squares standing in for logo images."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        bg = tuple(int(c) for c in rng.integers(180, 256, size=3))
        im = Image.new("RGB", (size, size), bg)
        d = ImageDraw.Draw(im)
        for _ in range(int(rng.integers(2, 5))):
            color = tuple(int(c) for c in rng.integers(0, 220, size=3))
            x0, y0 = rng.integers(0, size // 2, size=2)
            x1 = int(x0 + rng.integers(size // 5, size // 2))
            y1 = int(y0 + rng.integers(size // 5, size // 2))
            if rng.random() < 0.5:
                d.ellipse([int(x0), int(y0), x1, y1], fill=color)
            else:
                d.rectangle([int(x0), int(y0), x1, y1], fill=color)
        out.append(np.asarray(im))
    return out
