"""Synthetic paired-domain benchmark: label maps, rendered photos, splits.

Domain 1 is a color-coded label image (one fixed color per class), domain 2
is a "photo" rendering of the same label map with procedural texture and
shading. The perturbation budget (<= 0.15 texture + <= 0.10 shading, applied
as a per-pixel brightness offset) is strictly smaller than half the minimum
distance between base colors, so nearest-base-color classification recovers
the source label exactly and evaluation is noise-free.

Every operation here is a pure function of its explicit arguments;
per-sample seeds are derived from (master seed, stream tag, index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image as PILImage

from .config import DataConfig
from .errors import (
    DimensionError,
    DimensionMismatchError,
    MalformedManifestError,
    MissingFileError,
    MissingManifestError,
)
from .seeds import derive_seed

# Base colors: cube corners then face centers at radius 0.75, in [-1,1] RGB.
# Minimum pairwise Euclidean distance is ~1.06; the rendering perturbation is
# bounded by 0.25 per channel (0.433 Euclidean), leaving a strict margin.
CLASS_COLORS = np.array(
    [
        [-0.75, -0.75, -0.75],
        [0.75, 0.75, 0.75],
        [0.75, -0.75, -0.75],
        [-0.75, 0.75, -0.75],
        [-0.75, -0.75, 0.75],
        [0.75, 0.75, -0.75],
        [0.75, -0.75, 0.75],
        [-0.75, 0.75, 0.75],
        [0.75, 0.0, 0.0],
        [-0.75, 0.0, 0.0],
        [0.0, 0.75, 0.0],
        [0.0, -0.75, 0.0],
        [0.0, 0.0, 0.75],
        [0.0, 0.0, -0.75],
    ],
    dtype=np.float32,
)

TEXTURE_AMPLITUDE = 0.15
SHADING_AMPLITUDE = 0.10
MIN_CLASS_COVERAGE = 0.02

# Stream tags for per-sample seed derivation inside build_dataset.
_S_LABEL = "label"
_S_STYLE = "style"
_S_PAIRING = "pairing"
_S_EXTRA_LABEL = "extra_label"
_S_EXTRA_STYLE = "extra_style"


def _check_dims(width: int, height: int) -> None:
    if width <= 0 or height <= 0 or width % 8 != 0 or height % 8 != 0:
        raise DimensionError(f"width/height must be positive multiples of 8, got {width}x{height}")


@dataclass
class LabelMap:
    """H x W integer class map with values in [0, num_classes)."""

    pixels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64)
        if self.pixels.ndim != 2:
            raise DimensionError(f"label map must be 2-D, got shape {self.pixels.shape}")
        h, w = self.pixels.shape
        _check_dims(w, h)
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.num_classes > len(CLASS_COLORS):
            raise ValueError(
                f"num_classes={self.num_classes} exceeds the fixed color table ({len(CLASS_COLORS)})"
            )
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() >= self.num_classes):
            raise ValueError("label values must lie in [0, num_classes)")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabelMap)
            and self.num_classes == other.num_classes
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass
class PairedSample:
    """Aligned (domain-1 image, domain-2 image) pair with a stable id."""

    a: np.ndarray
    b: np.ndarray
    id: str

    def __post_init__(self):
        if self.a.shape != self.b.shape:
            raise DimensionError(
                f"paired images must share dimensions, got {self.a.shape} vs {self.b.shape}"
            )


@dataclass
class DatasetBundle:
    """Per-domain pools plus the paired subset.

    Paired images are also members of the unpaired pools (stage-1 training
    uses all images of each domain); `ids1`/`ids2` run parallel to the
    pools, and `labels` runs parallel to `unpaired1`.
    """

    unpaired1: list[np.ndarray]
    unpaired2: list[np.ndarray]
    paired: list[PairedSample]
    labels: list[LabelMap] | None
    paired_fraction: float
    ids1: list[str] = field(default_factory=list)
    ids2: list[str] = field(default_factory=list)
    num_classes: int = 0
    image_size: int = 0
    seed: int | None = None

    def __post_init__(self):
        if len(set(self.ids1)) != len(self.ids1) or len(set(self.ids2)) != len(self.ids2):
            raise ValueError("identifier collision inside a domain pool")
        paired_ids = [p.id for p in self.paired]
        if len(set(paired_ids)) != len(paired_ids):
            raise ValueError("identifier collision among paired samples")
        if not set(paired_ids) <= set(self.ids1) or not set(paired_ids) <= set(self.ids2):
            raise ValueError("paired ids must be a subset of both unpaired pools")

    @property
    def paired_ids(self) -> list[str]:
        return [p.id for p in self.paired]


def check_image(pixels: np.ndarray) -> np.ndarray:
    """Validate the H x W x 3, [-1,1], finite, multiple-of-8 image contract."""
    arr = np.asarray(pixels, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"image must be HxWx3, got shape {arr.shape}")
    _check_dims(arr.shape[1], arr.shape[0])
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < -1.0 or arr.max() > 1.0:
        raise ValueError("image values must lie in [-1, 1]")
    return arr


def generate_label_map(seed: int, width: int, height: int, num_classes: int) -> LabelMap:
    """Background class 0 plus random rectangles/ellipses labeled 1..K-1.

    Later shapes overwrite earlier ones. Resamples the whole layout until
    every class covers at least 2% of the pixels (direct pixel counting),
    so scores are never dominated by vanishing classes.
    """
    _check_dims(width, height)
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if num_classes > len(CLASS_COLORS):
        raise ValueError(
            f"num_classes={num_classes} exceeds the fixed color table ({len(CLASS_COLORS)})"
        )
    if num_classes == 1:
        return LabelMap(np.zeros((height, width), dtype=np.int64), 1)

    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    min_side = min(width, height)
    needed = int(np.ceil(MIN_CLASS_COVERAGE * width * height))

    for _ in range(200):
        pixels = np.zeros((height, width), dtype=np.int64)
        n_extra = int(rng.integers(0, num_classes))
        # One shape per foreground class guarantees presence; extras add overlap.
        classes = list(range(1, num_classes)) + list(rng.integers(1, num_classes, size=n_extra))
        for k in classes:
            kind = rng.integers(0, 2)
            cx = rng.uniform(0.15, 0.85) * width
            cy = rng.uniform(0.15, 0.85) * height
            sx = rng.uniform(0.18, 0.42) * min_side / 2
            sy = rng.uniform(0.18, 0.42) * min_side / 2
            if kind == 0:
                mask = (np.abs(xx - cx) <= sx) & (np.abs(yy - cy) <= sy)
            else:
                mask = ((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2 <= 1.0
            pixels[mask] = k
        counts = np.bincount(pixels.ravel(), minlength=num_classes)
        if (counts >= needed).all():
            return LabelMap(pixels, num_classes)
    raise RuntimeError(
        f"could not reach {MIN_CLASS_COVERAGE:.0%} coverage for all {num_classes} classes"
    )


def _texture_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Sum of sinusoidal plane waves, bounded by TEXTURE_AMPLITUDE."""
    y = np.linspace(0.0, 1.0, height, endpoint=False)[:, None]
    x = np.linspace(0.0, 1.0, width, endpoint=False)[None, :]
    n_waves = 4
    t = np.zeros((height, width), dtype=np.float64)
    for _ in range(n_waves):
        freq = rng.uniform(4.0, 11.0)
        theta = rng.uniform(0.0, 2 * np.pi)
        phase = rng.uniform(0.0, 2 * np.pi)
        t += np.sin(2 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta)) + phase)
    return (TEXTURE_AMPLITUDE / n_waves) * t


def _shading_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Single low-frequency wave, bounded by SHADING_AMPLITUDE."""
    y = np.linspace(0.0, 1.0, height, endpoint=False)[:, None]
    x = np.linspace(0.0, 1.0, width, endpoint=False)[None, :]
    fx = rng.uniform(0.4, 1.0)
    fy = rng.uniform(0.4, 1.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    return SHADING_AMPLITUDE * np.sin(2 * np.pi * (fx * x + fy * y) + phase)


def render_photo(label: LabelMap, style_seed: int) -> np.ndarray:
    """Base color per class plus brightness texture and smooth shading.

    The per-channel deviation from the base color is at most 0.25, so each
    pixel stays strictly nearer to its own base color than to any other.
    """
    rng = np.random.default_rng(style_seed)
    h, w = label.shape
    base = CLASS_COLORS[label.pixels]
    offset = _texture_field(rng, h, w) + _shading_field(rng, h, w)
    photo = base + offset[:, :, None].astype(np.float32)
    return photo.astype(np.float32)


def label_to_image(label: LabelMap) -> np.ndarray:
    """Domain-1 rendering: flat color-coded label image."""
    return CLASS_COLORS[label.pixels].astype(np.float32)


def build_dataset(config: DataConfig) -> DatasetBundle:
    """Generate the benchmark bundle: pools, paired subset, aligned labels.

    The first n_domain1 label maps drive domain 1; n_paired of them (chosen
    by a seeded permutation) also get photos, and the remaining photos come
    from freshly drawn independent label maps so their content is genuinely
    unpaired.
    """
    config.validate()
    n1, n2, np_ = config.n_domain1, config.n_domain2, config.n_paired
    size, k, seed = config.image_size, config.num_classes, config.seed

    labels = [
        generate_label_map(derive_seed(seed, _S_LABEL, i), size, size, k) for i in range(n1)
    ]
    images1 = [label_to_image(lab) for lab in labels]
    ids1 = [f"{i:06d}" for i in range(n1)]

    pair_rng = np.random.default_rng(derive_seed(seed, _S_PAIRING))
    paired_idx = sorted(pair_rng.permutation(n1)[:np_].tolist())

    paired: list[PairedSample] = []
    photos: dict[str, np.ndarray] = {}
    for i in paired_idx:
        photo = render_photo(labels[i], derive_seed(seed, _S_STYLE, i))
        photos[ids1[i]] = photo
        paired.append(PairedSample(a=images1[i], b=photo, id=ids1[i]))
    for j in range(n2 - np_):
        extra = generate_label_map(derive_seed(seed, _S_EXTRA_LABEL, j), size, size, k)
        photos[f"{n1 + j:06d}"] = render_photo(extra, derive_seed(seed, _S_EXTRA_STYLE, j))

    ids2 = sorted(photos)
    return DatasetBundle(
        unpaired1=images1,
        unpaired2=[photos[i] for i in ids2],
        paired=paired,
        labels=labels,
        paired_fraction=np_ / min(n1, n2) if np_ else 0.0,
        ids1=ids1,
        ids2=ids2,
        num_classes=k,
        image_size=size,
        seed=seed,
    )


def quantize_image(pixels: np.ndarray) -> np.ndarray:
    """[-1,1] float -> uint8, the on-disk representation."""
    return np.clip(np.rint((pixels + 1.0) * 127.5), 0, 255).astype(np.uint8)


def dequantize_image(raw: np.ndarray) -> np.ndarray:
    """uint8 -> [-1,1] float32; inverse of quantize_image up to 1/255."""
    return (raw.astype(np.float32) / 127.5) - 1.0


def images_to_tensor(images: list[np.ndarray] | np.ndarray) -> torch.Tensor:
    """Stack HxWx3 [-1,1] images into an N x 3 x H x W float32 tensor."""
    if isinstance(images, np.ndarray) and images.ndim == 3:
        images = [images]
    if len(images) == 0:
        raise ValueError("empty image list")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DimensionError(f"images have inconsistent shapes: {sorted(shapes)}")
    arr = np.stack([check_image(img) for img in images])
    return torch.from_numpy(arr).permute(0, 3, 1, 2).contiguous()


def tensor_to_images(t: torch.Tensor) -> list[np.ndarray]:
    """Inverse of images_to_tensor; clamps into [-1, 1]."""
    arr = t.detach().cpu().clamp(-1.0, 1.0).permute(0, 2, 3, 1).contiguous().numpy()
    return [a.astype(np.float32) for a in arr]


MANIFEST_NAME = "manifest.json"
_MANIFEST_VERSION = 1


def write_dataset(bundle: DatasetBundle, root_path: str | Path) -> None:
    """Write the bit-exact directory layout: manifest + PNGs per domain."""
    root = Path(root_path)
    (root / "domain1").mkdir(parents=True, exist_ok=True)
    (root / "domain2").mkdir(parents=True, exist_ok=True)
    if bundle.labels is not None:
        (root / "labels").mkdir(parents=True, exist_ok=True)

    for img, id_ in zip(bundle.unpaired1, bundle.ids1):
        PILImage.fromarray(quantize_image(img), mode="RGB").save(root / "domain1" / f"{id_}.png")
    for img, id_ in zip(bundle.unpaired2, bundle.ids2):
        PILImage.fromarray(quantize_image(img), mode="RGB").save(root / "domain2" / f"{id_}.png")
    if bundle.labels is not None:
        for lab, id_ in zip(bundle.labels, bundle.ids1):
            PILImage.fromarray(lab.pixels.astype(np.uint8), mode="L").save(
                root / "labels" / f"{id_}.png"
            )

    manifest = {
        "version": _MANIFEST_VERSION,
        "n_domain1": len(bundle.unpaired1),
        "n_domain2": len(bundle.unpaired2),
        "n_paired": len(bundle.paired),
        "image_size": bundle.image_size,
        "num_classes": bundle.num_classes,
        "seed": bundle.seed,
        "paired_fraction": bundle.paired_fraction,
        "ids1": bundle.ids1,
        "ids2": bundle.ids2,
        "paired_ids": bundle.paired_ids,
        "has_labels": bundle.labels is not None,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _load_png(path: Path, mode: str, expected_size: int) -> np.ndarray:
    if not path.exists():
        raise MissingFileError(f"missing file: {path}")
    arr = np.asarray(PILImage.open(path).convert(mode))
    if arr.shape[0] != expected_size or arr.shape[1] != expected_size:
        raise DimensionMismatchError(
            f"{path}: expected {expected_size}x{expected_size}, got {arr.shape[0]}x{arr.shape[1]}"
        )
    return arr


def read_dataset(root_path: str | Path) -> DatasetBundle:
    """Read a directory written by write_dataset; inverse up to quantization."""
    root = Path(root_path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingManifestError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise MalformedManifestError(f"{manifest_path}: {e}") from e
    required = {"version", "image_size", "num_classes", "ids1", "ids2", "paired_ids", "has_labels"}
    missing = required - manifest.keys()
    if missing:
        raise MalformedManifestError(f"{manifest_path}: missing keys {sorted(missing)}")

    size = manifest["image_size"]
    images1 = {
        i: dequantize_image(_load_png(root / "domain1" / f"{i}.png", "RGB", size))
        for i in manifest["ids1"]
    }
    images2 = {
        i: dequantize_image(_load_png(root / "domain2" / f"{i}.png", "RGB", size))
        for i in manifest["ids2"]
    }
    labels = None
    if manifest["has_labels"]:
        labels = [
            LabelMap(
                _load_png(root / "labels" / f"{i}.png", "L", size).astype(np.int64),
                manifest["num_classes"],
            )
            for i in manifest["ids1"]
        ]
    paired = [PairedSample(a=images1[i], b=images2[i], id=i) for i in manifest["paired_ids"]]
    return DatasetBundle(
        unpaired1=[images1[i] for i in manifest["ids1"]],
        unpaired2=[images2[i] for i in manifest["ids2"]],
        paired=paired,
        labels=labels,
        paired_fraction=manifest.get("paired_fraction", 0.0),
        ids1=list(manifest["ids1"]),
        ids2=list(manifest["ids2"]),
        num_classes=manifest["num_classes"],
        image_size=size,
        seed=manifest.get("seed"),
    )
