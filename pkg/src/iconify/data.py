"""Dataset preparation and loading.

Three preparation procedures feed the two training domains: object cutouts
lifted from segmentation ground truth, icon replication by random
translate/rotate/scale, and logo rescaling onto the white-margin canvas.
Prepared domains live on disk as one directory of numbered PNGs plus a
``manifest.json`` listing file, class label, and source id per image.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .tensor import Tensor
from .ops import resize_area

__all__ = [
    "CANVAS_SIZE",
    "CONTENT_SIZE",
    "MARGIN",
    "AnnotatedImage",
    "ObjectCutout",
    "ExtractionResult",
    "AugmentParams",
    "DomainDataset",
    "extract_objects",
    "augment_icons",
    "prepare_logos",
    "sample_unpaired_batch",
    "stage_resize",
    "load_annotations",
    "to_unit_range",
    "from_unit_range",
    "load_png",
    "save_png",
    "save_domain_dir",
    "load_domain_dir",
]

CANVAS_SIZE = 256
CONTENT_SIZE = 232
MARGIN = (CANVAS_SIZE - CONTENT_SIZE) // 2  # 12 px of guaranteed white
STAGE_RESOLUTIONS = (32, 64, 128, 256)
WHITE = (255, 255, 255)


# -- pixel <-> tensor conversion ---------------------------------------------


def to_unit_range(img: np.ndarray) -> np.ndarray:
    """H×W×3 uint8 -> 3×H×W float32 in [−1, 1]."""
    return (img.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def from_unit_range(chw: np.ndarray) -> np.ndarray:
    """3×H×W float in [−1, 1] -> H×W×3 uint8, clamped after scaling."""
    flat = (np.asarray(chw, dtype=np.float32) + 1.0) * 127.5
    return np.clip(np.rint(flat), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_png(path, img: np.ndarray) -> None:
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


# -- domain types -------------------------------------------------------------


@dataclass
class AnnotatedImage:
    """Photo plus its per-instance binary masks."""

    image: np.ndarray                       # H×W×3 uint8
    instances: list[tuple[str, np.ndarray]]  # (class label, H×W {0,1} mask)
    source_id: str = ""

    def __post_init__(self):
        h, w = self.image.shape[:2]
        for label, mask in self.instances:
            if mask.shape != (h, w):
                raise ValueError(
                    f"mask for {label!r} has shape {mask.shape}, image is {h}×{w}"
                )
            if not np.isin(mask, (0, 1)).all():
                raise ValueError(f"mask for {label!r} is not {{0,1}}-valued")


@dataclass
class ObjectCutout:
    """One extracted object on the white 256×256 canvas."""

    image: np.ndarray  # 256×256×3 uint8
    label: str
    source_area: int
    source_id: str = ""


@dataclass
class ExtractionResult:
    cutouts: list[ObjectCutout]
    skipped: int


@dataclass
class AugmentParams:
    """Replication settings: each icon yields ``replicas`` outputs, the
    first being the untouched original."""

    replicas: int = 10
    max_translate: float = 0.1   # fraction of the canvas
    rotation_deg: float = 15.0
    scale_min: float = 0.8
    scale_max: float = 1.2

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if self.scale_min <= 0 or self.scale_max < self.scale_min:
            raise ValueError(
                f"scale range ({self.scale_min}, {self.scale_max}) must be positive"
            )


@dataclass
class DomainDataset:
    """Ordered, normalized square images of one domain."""

    role: str            # "photos" or "icons"
    items: np.ndarray    # N×3×H×W float32 in [−1, 1]
    seed: int = 0

    def __post_init__(self):
        if self.items.ndim != 4 or self.items.shape[1] != 3:
            raise ValueError(f"items must be N×3×H×W, got {self.items.shape}")
        lo, hi = float(self.items.min()), float(self.items.max())
        if lo < -1.0 or hi > 1.0:
            raise ValueError(f"items must lie in [−1, 1], found [{lo}, {hi}]")

    def __len__(self):
        return self.items.shape[0]

    @property
    def resolution(self) -> int:
        return self.items.shape[2]


# -- object extraction ---------------------------------------------------------


def _fit_on_canvas(rgb: np.ndarray) -> np.ndarray:
    """Scale to the 232×232 content box preserving aspect, center on white."""
    h, w = rgb.shape[:2]
    scale = CONTENT_SIZE / max(h, w)
    nh = max(1, round(h * scale))
    nw = max(1, round(w * scale))
    resized = Image.fromarray(rgb).resize((nw, nh), Image.LANCZOS)
    canvas = Image.new("RGB", (CANVAS_SIZE, CANVAS_SIZE), WHITE)
    canvas.paste(resized, ((CANVAS_SIZE - nw) // 2, (CANVAS_SIZE - nh) // 2))
    return np.asarray(canvas)


def extract_objects(src: AnnotatedImage, min_area: int = 1024) -> ExtractionResult:
    """One white-backed cutout per instance whose mask covers >= min_area
    pixels; smaller or empty masks are skipped and counted."""
    cutouts = []
    skipped = 0
    for label, mask in src.instances:
        area = int(mask.sum())
        if area < max(min_area, 1):
            skipped += 1
            continue
        ys, xs = np.nonzero(mask)
        y0, y1 = ys.min(), ys.max()
        x0, x1 = xs.min(), xs.max()
        crop = src.image[y0:y1 + 1, x0:x1 + 1]
        crop_mask = mask[y0:y1 + 1, x0:x1 + 1]
        rgb = np.where(crop_mask[:, :, None] == 1, crop, 255).astype(np.uint8)
        cutouts.append(ObjectCutout(
            image=_fit_on_canvas(rgb),
            label=label,
            source_area=area,
            source_id=src.source_id,
        ))
    return ExtractionResult(cutouts=cutouts, skipped=skipped)


# -- icon augmentation ---------------------------------------------------------


def _affine_white(img: np.ndarray, tx: float, ty: float, angle_deg: float,
                  scale: float) -> np.ndarray:
    """Translate/rotate/scale about the center, exposing white."""
    h, w = img.shape[:2]
    cx, cy = w / 2.0, h / 2.0
    theta = math.radians(angle_deg)
    # PIL wants the inverse map (output -> input coordinates)
    m00 = math.cos(theta) / scale
    m01 = math.sin(theta) / scale
    m10 = -math.sin(theta) / scale
    m11 = math.cos(theta) / scale
    ox, oy = cx + tx, cy + ty
    coeffs = (
        m00, m01, cx - m00 * ox - m01 * oy,
        m10, m11, cy - m10 * ox - m11 * oy,
    )
    out = Image.fromarray(img).transform(
        (w, h), Image.AFFINE, coeffs, resample=Image.BILINEAR, fillcolor=WHITE)
    return np.asarray(out)


def augment_icons(icons: list[np.ndarray], params: AugmentParams,
                  seed: int = 0) -> list[np.ndarray]:
    """Replicate each icon ``params.replicas`` times; copy 0 is the original.

    Per-icon rngs are derived from (seed, icon index), so the output is
    deterministic and independent of any parallel execution order.
    """
    out = []
    for idx, icon in enumerate(icons):
        out.append(icon)
        if params.replicas == 1:
            continue
        rng = np.random.default_rng([seed, idx])
        h, w = icon.shape[:2]
        for _ in range(params.replicas - 1):
            tx = rng.uniform(-params.max_translate, params.max_translate) * w
            ty = rng.uniform(-params.max_translate, params.max_translate) * h
            angle = rng.uniform(-params.rotation_deg, params.rotation_deg)
            scale = rng.uniform(params.scale_min, params.scale_max)
            out.append(_affine_white(icon, tx, ty, angle, scale))
    return out


# -- logo preparation ----------------------------------------------------------


def prepare_logos(logos: list[np.ndarray]) -> list[np.ndarray]:
    """Rescale square logos onto the 256 canvas with the 12 px white margin."""
    out = []
    for i, logo in enumerate(logos):
        h, w = logo.shape[:2]
        if h != w:
            raise ValueError(f"logo {i} is {h}×{w}, expected a square image")
        resized = Image.fromarray(logo).resize(
            (CONTENT_SIZE, CONTENT_SIZE), Image.LANCZOS)
        canvas = Image.new("RGB", (CANVAS_SIZE, CANVAS_SIZE), WHITE)
        canvas.paste(resized, (MARGIN, MARGIN))
        out.append(np.asarray(canvas))
    return out


# -- sampling and stage resizing -------------------------------------------------


def sample_unpaired_batch(x_set: DomainDataset, y_set: DomainDataset,
                          batch: int, rng: np.random.Generator):
    """Independent uniform draws from each domain; nothing pairs them."""
    if len(x_set) == 0 or len(y_set) == 0:
        raise ValueError("cannot sample from an empty domain")
    xi = rng.integers(0, len(x_set), size=batch)
    yi = rng.integers(0, len(y_set), size=batch)
    return Tensor(x_set.items[xi]), Tensor(y_set.items[yi])


def stage_resize(dataset: DomainDataset, resolution: int) -> DomainDataset:
    """Area-resize every item to one of the schedule resolutions."""
    if resolution not in STAGE_RESOLUTIONS:
        raise ValueError(
            f"resolution {resolution} not in {STAGE_RESOLUTIONS}"
        )
    if resolution == dataset.resolution:
        return dataset
    resized = resize_area(Tensor(dataset.items), (resolution, resolution))
    return DomainDataset(role=dataset.role, items=resized.data, seed=dataset.seed)


# -- annotation manifests ---------------------------------------------------------


def _decode_rle(counts, size) -> np.ndarray:
    """Uncompressed COCO run-length counts, column-major."""
    h, w = size
    values = np.repeat(np.arange(len(counts), dtype=np.uint8) % 2, counts)
    if values.size != h * w:
        raise ValueError(
            f"RLE covers {values.size} pixels, mask is {h}×{w} = {h * w}"
        )
    return values.reshape((h, w), order="F")


def _rasterize_polygons(polygons, size) -> np.ndarray:
    h, w = size
    canvas = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(canvas)
    for poly in polygons:
        draw.polygon(list(map(float, poly)), fill=1)
    return np.asarray(canvas, dtype=np.uint8)


def load_annotations(manifest_path, images_dir=None) -> list[AnnotatedImage]:
    """COCO-style JSON: images, categories, and per-instance segmentation as
    polygon lists or uncompressed RLE dicts (compressed string counts are
    not supported)."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        doc = json.load(fh)
    base = Path(images_dir) if images_dir is not None else manifest_path.parent
    categories = {c["id"]: c["name"] for c in doc.get("categories", [])}
    by_image: dict = {}
    for ann in doc.get("annotations", []):
        by_image.setdefault(ann["image_id"], []).append(ann)

    out = []
    for info in doc.get("images", []):
        img = load_png(base / info["file_name"])
        h, w = img.shape[:2]
        instances = []
        for ann in by_image.get(info["id"], []):
            seg = ann["segmentation"]
            if isinstance(seg, dict):
                counts = seg["counts"]
                if isinstance(counts, str):
                    raise ValueError(
                        "compressed RLE strings are not supported; use "
                        "polygon or uncompressed counts"
                    )
                mask = _decode_rle(counts, seg["size"])
            else:
                mask = _rasterize_polygons(seg, (h, w))
            label = categories.get(ann["category_id"], str(ann["category_id"]))
            instances.append((label, mask))
        out.append(AnnotatedImage(image=img, instances=instances,
                                  source_id=str(info["id"])))
    return out


# -- prepared-domain directories ---------------------------------------------------


def save_domain_dir(directory, images: list[np.ndarray],
                    labels=None, sources=None) -> Path:
    """Write numbered PNGs plus manifest.json (file, label, source id)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, img in enumerate(images):
        name = f"{i:06d}.png"
        save_png(directory / name, img)
        entries.append({
            "file": name,
            "label": labels[i] if labels else "",
            "source": sources[i] if sources else "",
        })
    with open(directory / "manifest.json", "w") as fh:
        json.dump(entries, fh, indent=1)
    return directory


def _read_name_list(path) -> set[str]:
    with open(path) as fh:
        return {line.strip() for line in fh if line.strip()}


def load_domain_dir(directory, role: str, seed: int = 0,
                    allowlist=None, denylist=None) -> DomainDataset:
    """Load a prepared domain directory into normalized tensors.

    ``allowlist``/``denylist`` are optional text files of PNG names (one per
    line) applied to the manifest order; this is how manual curation of a
    subset is expressed.
    """
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            names = [e["file"] for e in json.load(fh)]
    else:
        names = sorted(p.name for p in directory.glob("*.png"))
    if allowlist is not None:
        allowed = _read_name_list(allowlist)
        names = [n for n in names if n in allowed]
    if denylist is not None:
        denied = _read_name_list(denylist)
        names = [n for n in names if n not in denied]
    if not names:
        raise ValueError(f"no images selected from {directory}")
    items = np.stack([to_unit_range(load_png(directory / n)) for n in names])
    return DomainDataset(role=role, items=items, seed=seed)
