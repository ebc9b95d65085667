"""Ablation harness: train-and-evaluate grids over method, pairing, and loss.

Methods:
    FT+U&P    feature translation with unpaired and paired data (the full
              two-stage pipeline; stage 1 sees each domain's whole pool).
    FT w/o U  same pipeline with stage-1 pools restricted to paired images.
    IT+P      image-level supervised baseline: the same encoder/decoder
              backbone trained directly on pairs with LSGAN + feature
              matching + image L1.

The image-level baseline trained on both unpaired and paired data (a
shared-latent unsupervised hybrid) is deliberately not implemented; the
report header records the omission.

Both FT variants share per-seed training seeds, so at paired_fraction 1.0
(where the restricted pools equal the full pools) they are bit-identical
and the unpaired-data gap is exactly zero by construction.

Every cell derives its own seeds, runs single-threaded, and is independent
of scheduling, so cells can run in parallel worker processes without
changing any number.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import torch

from .config import DataConfig, TrainConfig, config_hash
from .data import DatasetBundle, LabelMap, build_dataset, generate_label_map, label_to_image
from .evaluation import MetricsReport, evaluate_pipeline
from .infer import TranslationPipeline, build_pipeline
from .seeds import derive_seed
from .train import train_image_translator, train_translator, train_vaegan

METHODS = ("FT+U&P", "FT w/o U", "IT+P")
FEATURE_METHODS = ("FT+U&P", "FT w/o U")

REPORT_HEADER = (
    "Image-level translation trained on unpaired+paired data is omitted "
    "(it would require a shared-latent unsupervised training scheme); "
    "IT+P is the in-repo image-level supervised baseline."
)

CSV_COLUMNS = (
    "method",
    "paired_fraction",
    "mode",
    "seed",
    "per_pixel_acc",
    "per_class_acc",
    "class_iou",
)


@dataclass
class AblationSpec:
    """Grid definition plus the shared data/train templates."""

    methods: tuple[str, ...] = METHODS
    paired_fractions: tuple[float, ...] = (0.05, 0.1, 0.2, 0.5, 1.0)
    modes: tuple[str, ...] = ("full",)
    seeds: tuple[int, ...] = (0, 1, 2)
    n_domain1: int = 1000
    n_domain2: int = 1000
    image_size: int = 64
    num_classes: int = 4
    n_test: int = 100
    train: TrainConfig = field(default_factory=TrainConfig)
    jobs: int = 1

    def validate(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown ablation method: {m!r}")
        for mode in self.modes:
            if mode not in ("full", "l1_only", "feat_adv"):
                raise ValueError(f"unknown translation loss mode: {mode!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")


@dataclass
class CellResult:
    """Outcome of one (method, fraction, mode, seed) cell."""

    method: str
    paired_fraction: float
    mode: str
    seed: int
    report: MetricsReport | None = None
    skipped: str | None = None


@dataclass
class AblationReport:
    """All cell results plus aggregate medians."""

    rows: list[CellResult]
    header: str = REPORT_HEADER

    def completed(self) -> list[CellResult]:
        return [r for r in self.rows if r.report is not None]

    def medians(self) -> dict[tuple[str, float, str], dict[str, float]]:
        groups: dict[tuple[str, float, str], list[MetricsReport]] = {}
        for r in self.completed():
            groups.setdefault((r.method, r.paired_fraction, r.mode), []).append(r.report)
        return {
            key: {
                "per_pixel_acc": statistics.median(m.per_pixel_acc for m in reports),
                "per_class_acc": statistics.median(m.per_class_acc for m in reports),
                "class_iou": statistics.median(m.class_iou for m in reports),
            }
            for key, reports in groups.items()
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        for r in self.completed():
            writer.writerow(
                [
                    r.method,
                    r.paired_fraction,
                    r.mode,
                    r.seed,
                    r.report.per_pixel_acc,
                    r.report.per_class_acc,
                    r.report.class_iou,
                ]
            )
        return buf.getvalue()

    def summary_json(self) -> str:
        medians = [
            {"method": m, "paired_fraction": f, "mode": mode, **scores}
            for (m, f, mode), scores in sorted(self.medians().items())
        ]
        skipped = [
            {
                "method": r.method,
                "paired_fraction": r.paired_fraction,
                "mode": r.mode,
                "seed": r.seed,
                "reason": r.skipped,
            }
            for r in self.rows
            if r.skipped is not None
        ]
        return json.dumps(
            {"header": self.header, "medians": medians, "skipped": skipped},
            indent=2,
            sort_keys=True,
        )

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.csv").write_text(self.to_csv())
        (out / "ablation_summary.json").write_text(self.summary_json() + "\n")


def make_test_set(
    seed: int, n_test: int, image_size: int, num_classes: int
) -> tuple[list, list[LabelMap]]:
    """Held-out labeled domain-1 images, independent of any training pool."""
    labels = [
        generate_label_map(derive_seed(seed, "test_label", i), image_size, image_size, num_classes)
        for i in range(n_test)
    ]
    return [label_to_image(lab) for lab in labels], labels


def _paired_pools(bundle: DatasetBundle) -> tuple[list, list]:
    return [p.a for p in bundle.paired], [p.b for p in bundle.paired]


def _cell_hash(spec: AblationSpec, method: str, fraction: float, mode: str, seed: int) -> str:
    payload = {
        "method": method,
        "paired_fraction": fraction,
        "mode": mode,
        "seed": seed,
        "n_domain1": spec.n_domain1,
        "n_domain2": spec.n_domain2,
        "image_size": spec.image_size,
        "num_classes": spec.num_classes,
        "n_test": spec.n_test,
        "train": {
            k: v for k, v in vars(spec.train).items() if not k.startswith("_")
        },
    }
    return config_hash(payload)


def run_cell(
    spec: AblationSpec, method: str, fraction: float, mode: str, seed: int
) -> CellResult:
    """Train and evaluate one grid cell end-to-end (single-threaded)."""
    prev_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        n_paired = round(fraction * min(spec.n_domain1, spec.n_domain2))
        if n_paired < 1:
            return CellResult(
                method, fraction, mode, seed, skipped="paired_fraction yields 0 pairs"
            )
        data_cfg = DataConfig(
            n_domain1=spec.n_domain1,
            n_domain2=spec.n_domain2,
            n_paired=n_paired,
            image_size=spec.image_size,
            num_classes=spec.num_classes,
            seed=derive_seed(seed, "data", n_paired),
        )
        bundle = build_dataset(data_cfg)
        test_images, test_labels = make_test_set(
            derive_seed(seed, "test"), spec.n_test, spec.image_size, spec.num_classes
        )
        chash = _cell_hash(spec, method, fraction, mode, seed)

        if method == "IT+P":
            tc = replace(spec.train, seed=derive_seed(seed, "image_translator"))
            ckpt = train_image_translator(bundle.paired, tc)
            pipeline = _encdec_pipeline(ckpt)
        else:
            if method == "FT+U&P":
                pool1, pool2 = bundle.unpaired1, bundle.unpaired2
            else:  # FT w/o U
                pool1, pool2 = _paired_pools(bundle)
            tc1 = replace(spec.train, seed=derive_seed(seed, "vaegan1"), mode=mode)
            tc2 = replace(spec.train, seed=derive_seed(seed, "vaegan2"), mode=mode)
            tct = replace(spec.train, seed=derive_seed(seed, "translator"), mode=mode)
            ckpt1 = train_vaegan(pool1, tc1, domain=1)
            ckpt2 = train_vaegan(pool2, tc2, domain=2)
            ckpt_t = train_translator(ckpt1, ckpt2, bundle.paired, tct)
            pipeline = build_pipeline(ckpt1, ckpt2, ckpt_t)

        report = evaluate_pipeline(
            pipeline, test_images, test_labels, seed=seed, config_hash=chash
        )
        return CellResult(method, fraction, mode, seed, report=report)
    finally:
        torch.set_num_threads(prev_threads)


def _encdec_pipeline(ckpt) -> TranslationPipeline:
    """Wrap the supervised baseline as a pipeline via an identity translator."""
    from .nets import Arch, build_model

    e = ckpt.models["encoder"]
    identity = build_model(
        Arch(
            kind="translator_resblocks",
            num_blocks=1,
            base_channels=e.arch.base_channels,
            latent_channels=e.arch.latent_channels,
        ),
        init_seed=0,
    )
    return TranslationPipeline(e1=e, t=identity, g2=ckpt.models["decoder"])


def _cells(spec: AblationSpec) -> list[tuple[str, float, str, int]]:
    cells = []
    for method in spec.methods:
        method_modes = spec.modes if method in FEATURE_METHODS else ("-",)
        for fraction in spec.paired_fractions:
            for mode in method_modes:
                for seed in spec.seeds:
                    cells.append((method, fraction, mode, seed))
    return cells


def _run_cell_star(args) -> CellResult:
    return run_cell(*args)


def run_ablation(spec: AblationSpec, out_dir: str | Path | None = None) -> AblationReport:
    """Run the full grid; `spec.jobs` worker processes run cells in parallel.

    The supervised baseline runs with its translation mode marked "-"
    (translation loss modes apply only to the feature-translation methods).
    """
    spec.validate()
    cells = _cells(spec)
    args = [(spec, method, fraction, mode, seed) for method, fraction, mode, seed in cells]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            rows = list(pool.map(_run_cell_star, args))
    else:
        rows = [run_cell(*a) for a in args]
    report = AblationReport(rows=rows)
    if out_dir is not None:
        report.save(out_dir)
    return report
