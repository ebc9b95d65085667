"""Segmentation-score evaluation on the synthetic benchmark.

The oracle segmenter classifies each pixel to its nearest base color.
Because rendered photos stay strictly nearer to their own class color than
to any other, the oracle is exact on ground-truth photos, so every score
deficit measured on translated images is attributable to the translation.
Scores: per-pixel accuracy, per-class accuracy, and class IoU, all from
one global confusion matrix (rows = ground truth, columns = prediction);
the per-class means average only over classes present in the ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .data import CLASS_COLORS, LabelMap, images_to_tensor, tensor_to_images
from .infer import TranslationPipeline, translate_image


def oracle_segment(photo: np.ndarray, num_classes: int | None = None) -> LabelMap:
    """Nearest-base-color classification; ties go to the lowest class index."""
    k = len(CLASS_COLORS) if num_classes is None else num_classes
    colors = CLASS_COLORS[:k]
    arr = np.asarray(photo, dtype=np.float32)
    d2 = ((arr[:, :, None, :] - colors[None, None, :, :]) ** 2).sum(axis=-1)
    return LabelMap(np.argmin(d2, axis=2).astype(np.int64), k)


@dataclass
class MetricsReport:
    """Scores plus the confusion matrix they are derived from."""

    per_pixel_acc: float
    per_class_acc: float
    class_iou: float
    confusion: np.ndarray
    n_images: int
    seed: int | None = None
    config_hash: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_pixel_acc": self.per_pixel_acc,
                "per_class_acc": self.per_class_acc,
                "class_iou": self.class_iou,
                "confusion": self.confusion.tolist(),
                "n_images": self.n_images,
                "seed": self.seed,
                "config_hash": self.config_hash,
            },
            sort_keys=True,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        return cls(
            per_pixel_acc=d["per_pixel_acc"],
            per_class_acc=d["per_class_acc"],
            class_iou=d["class_iou"],
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            n_images=d["n_images"],
            seed=d.get("seed"),
            config_hash=d.get("config_hash"),
        )


def scores_from_confusion(confusion: np.ndarray) -> tuple[float, float, float]:
    """(per_pixel, per_class, iou) from a confusion matrix, means over
    classes present in the ground truth (nonzero rows)."""
    c = np.asarray(confusion, dtype=np.int64)
    total = c.sum()
    diag = np.diag(c)
    row = c.sum(axis=1)
    col = c.sum(axis=0)
    present = row > 0
    per_pixel = float(diag.sum() / total) if total else 0.0
    per_class = float((diag[present] / row[present]).mean()) if present.any() else 0.0
    union = row + col - diag
    iou = float((diag[present] / union[present]).mean()) if present.any() else 0.0
    return per_pixel, per_class, iou


def _accumulate_confusion(pred: LabelMap, gt: LabelMap, confusion: np.ndarray) -> None:
    k = confusion.shape[0]
    idx = gt.pixels.ravel() * k + pred.pixels.ravel()
    confusion += np.bincount(idx, minlength=k * k).reshape(k, k)


def fcn_scores(
    pred: Sequence[LabelMap],
    gt: Sequence[LabelMap],
    seed: int | None = None,
    config_hash: str | None = None,
) -> MetricsReport:
    """Score predicted label maps against ground truth."""
    if len(pred) != len(gt):
        raise ValueError(f"prediction/ground-truth length mismatch: {len(pred)} vs {len(gt)}")
    if not pred:
        raise ValueError("cannot score an empty list")
    k = gt[0].num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for p, g in zip(pred, gt):
        if p.shape != g.shape:
            raise ValueError(f"label shape mismatch: {p.shape} vs {g.shape}")
        if p.num_classes > k:
            raise ValueError("prediction uses more classes than ground truth")
        _accumulate_confusion(p, g, confusion)
    per_pixel, per_class, iou = scores_from_confusion(confusion)
    return MetricsReport(
        per_pixel_acc=per_pixel,
        per_class_acc=per_class,
        class_iou=iou,
        confusion=confusion,
        n_images=len(pred),
        seed=seed,
        config_hash=config_hash,
    )


TranslateFn = Callable[[np.ndarray], np.ndarray]


def evaluate_images(
    translate_fn: TranslateFn,
    images1: Sequence[np.ndarray],
    labels: Sequence[LabelMap],
    seed: int | None = None,
    config_hash: str | None = None,
) -> MetricsReport:
    """Translate domain-1 images, oracle-segment the results, and score them."""
    if len(images1) != len(labels):
        raise ValueError("test set images and labels must align")
    if not images1:
        raise ValueError("cannot evaluate an empty test set")
    k = labels[0].num_classes
    preds = [oracle_segment(translate_fn(img), k) for img in images1]
    return fcn_scores(preds, list(labels), seed=seed, config_hash=config_hash)


def evaluate_pipeline(
    pipeline: TranslationPipeline,
    images1: Sequence[np.ndarray],
    labels: Sequence[LabelMap],
    seed: int | None = None,
    config_hash: str | None = None,
    batch_size: int = 16,
) -> MetricsReport:
    """Run the trained pipeline over a labeled test set and score it."""
    if len(images1) != len(labels):
        raise ValueError("test set images and labels must align")
    if not images1:
        raise ValueError("cannot evaluate an empty test set")
    k = labels[0].num_classes
    preds: list[LabelMap] = []
    with torch.no_grad():
        for start in range(0, len(images1), batch_size):
            chunk = list(images1[start : start + batch_size])
            out = translate_image(pipeline, images_to_tensor(chunk))
            preds.extend(oracle_segment(img, k) for img in tensor_to_images(out))
    return fcn_scores(preds, list(labels), seed=seed, config_hash=config_hash)
