"""Command-line entry point for the full workflow.

Subcommands: gen-data, train-vaegan, train-translator, translate, evaluate,
ablate. Config resolution is defaults < --config file < flags; the resolved
config and its hash are echoed into every output directory. Exit codes:
0 success, 2 config/usage error, 3 runtime failure (e.g. non-finite loss).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .ablation import AblationSpec, run_ablation
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, config_hash, resolve_config
from .data import (
    build_dataset,
    dequantize_image,
    images_to_tensor,
    quantize_image,
    read_dataset,
    tensor_to_images,
    write_dataset,
)
from .errors import CheckpointError, ConfigError, DatasetError, LatentTranslationError
from .evaluation import evaluate_pipeline
from .infer import build_pipeline, translate_image, translate_image_stochastic
from .seeds import derive_seed
from .train import train_image_translator, train_translator, train_vaegan

# Config keys exposed as command-line override flags (kebab-cased).
_OVERRIDE_KEYS = (
    "seed",
    "n_domain1",
    "n_domain2",
    "n_paired",
    "image_size",
    "num_classes",
    "learning_rate",
    "beta1",
    "beta2",
    "batch_size",
    "epochs_vaegan",
    "epochs_translator",
    "steps_vaegan",
    "steps_translator",
    "lambda_f",
    "lambda_fm",
    "mode",
    "latent_channels",
    "base_channels",
    "translator_kind",
    "translator_blocks",
    "disc_scales",
    "n_test",
    "jobs",
    "num_samples",
    "sigma",
)

_KEY_TYPES = {
    "seed": int,
    "n_domain1": int,
    "n_domain2": int,
    "n_paired": int,
    "image_size": int,
    "num_classes": int,
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "batch_size": int,
    "epochs_vaegan": int,
    "epochs_translator": int,
    "steps_vaegan": int,
    "steps_translator": int,
    "lambda_f": float,
    "lambda_fm": float,
    "mode": str,
    "latent_channels": int,
    "base_channels": int,
    "translator_kind": str,
    "translator_blocks": int,
    "disc_scales": int,
    "n_test": int,
    "jobs": int,
    "num_samples": int,
    "sigma": float,
}


def _add_common(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--out", type=str, required=out_required, help="output directory")
    for key in _OVERRIDE_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", type=_KEY_TYPES[key], default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latent-translation",
        description="Semi-supervised image translation via latent-space mapping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic benchmark dataset")
    _add_common(p)

    p = sub.add_parser("train-vaegan", help="stage 1: train one domain's VAE-GAN")
    _add_common(p)
    p.add_argument("--data", type=str, required=True, help="dataset directory")
    p.add_argument("--domain", type=int, choices=(1, 2), required=True)

    p = sub.add_parser("train-translator", help="stage 2: train the feature translator")
    _add_common(p)
    p.add_argument("--data", type=str, required=True, help="dataset directory")
    p.add_argument("--ckpt1", type=str, required=True, help="domain-1 VAE-GAN checkpoint")
    p.add_argument("--ckpt2", type=str, required=True, help="domain-2 VAE-GAN checkpoint")
    p.add_argument(
        "--pairs-fraction",
        type=float,
        default=None,
        help="use only this fraction of the dataset's pairs (seeded subsample)",
    )

    p = sub.add_parser("translate", help="translate domain-1 images")
    _add_common(p)
    p.add_argument("--ckpt1", type=str, required=True)
    p.add_argument("--ckpt2", type=str, required=True)
    p.add_argument("--ckpt-t", type=str, required=True, help="translator checkpoint")
    p.add_argument("--input", type=str, required=True, help="PNG file or directory of PNGs")

    p = sub.add_parser("evaluate", help="score a pipeline on a labeled dataset")
    _add_common(p)
    p.add_argument("--data", type=str, required=True, help="labeled dataset directory")
    p.add_argument("--ckpt1", type=str, required=True)
    p.add_argument("--ckpt2", type=str, required=True)
    p.add_argument("--ckpt-t", type=str, required=True)
    p.add_argument("--report", type=str, default=None, help="metrics JSON path")

    p = sub.add_parser("ablate", help="run the method/fraction/mode/seed grid")
    _add_common(p)
    p.add_argument("--report", type=str, default=None, help="summary JSON path")

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    return {k: getattr(args, k) for k in _OVERRIDE_KEYS if getattr(args, k, None) is not None}


def _write_resolved(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    payload = {"config": cfg.to_dict(), "config_hash": config_hash(cfg)}
    (out / "resolved_config.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require_checkpoint(path: str):
    if not Path(path).exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def _load_input_images(path: Path) -> list[tuple[str, np.ndarray]]:
    if path.is_dir():
        files = sorted(path.glob("*.png"))
        if not files:
            raise ConfigError(f"no PNG files found in {path}")
    elif path.exists():
        files = [path]
    else:
        raise ConfigError(f"input not found: {path}")
    return [
        (f.stem, dequantize_image(np.asarray(PILImage.open(f).convert("RGB")))) for f in files
    ]


def _cmd_gen_data(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    bundle = build_dataset(cfg.data_config())
    write_dataset(bundle, out)
    _write_resolved(cfg, out)
    print(f"wrote dataset ({len(bundle.unpaired1)}+{len(bundle.unpaired2)} images, "
          f"{len(bundle.paired)} paired) to {out}")
    return 0


def _cmd_train_vaegan(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    bundle = read_dataset(args.data)
    images = bundle.unpaired1 if args.domain == 1 else bundle.unpaired2
    tc = cfg.train_config(seed=derive_seed(cfg.seed, f"vaegan{args.domain}"))
    _write_resolved(cfg, out)
    ckpt = train_vaegan(
        images, tc, domain=args.domain, log_path=out / f"train_log_domain{args.domain}.jsonl"
    )
    ckpt_path = out / f"vaegan_domain{args.domain}.ckpt"
    save_checkpoint(ckpt, ckpt_path)
    print(f"wrote {ckpt_path}")
    return 0


def _subsample_pairs(paired, fraction: float, seed: int):
    if not 0 < fraction <= 1:
        raise ConfigError(f"--pairs-fraction must lie in (0, 1], got {fraction}")
    n = max(1, round(fraction * len(paired)))
    order = np.random.default_rng(derive_seed(seed, "pairs_fraction")).permutation(len(paired))
    keep = sorted(order[:n].tolist())
    return [paired[i] for i in keep]


def _cmd_train_translator(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    ckpt1 = _require_checkpoint(args.ckpt1)
    ckpt2 = _require_checkpoint(args.ckpt2)
    bundle = read_dataset(args.data)
    if not bundle.paired:
        raise ConfigError(f"dataset at {args.data} has no paired samples")
    paired = bundle.paired
    if args.pairs_fraction is not None:
        paired = _subsample_pairs(paired, args.pairs_fraction, cfg.seed)
    tc = cfg.train_config(seed=derive_seed(cfg.seed, "translator"))
    _write_resolved(cfg, out)
    ckpt = train_translator(ckpt1, ckpt2, paired, tc, log_path=out / "train_log_translator.jsonl")
    ckpt_path = out / "translator.ckpt"
    save_checkpoint(ckpt, ckpt_path)
    print(f"wrote {ckpt_path}")
    return 0


def _cmd_translate(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    pipeline = build_pipeline(
        _require_checkpoint(args.ckpt1),
        _require_checkpoint(args.ckpt2),
        _require_checkpoint(args.ckpt_t),
    )
    inputs = _load_input_images(Path(args.input))
    _write_resolved(cfg, out)
    for stem, img in inputs:
        x = images_to_tensor([img])
        if cfg.num_samples == 1:
            results = {f"{stem}.png": translate_image(pipeline, x)}
        else:
            samples = translate_image_stochastic(
                pipeline, x, num_samples=cfg.num_samples, sigma=cfg.sigma, seed=cfg.seed
            )
            results = {f"{stem}_{k:02d}.png": s for k, s in enumerate(samples)}
        for name, tensor in results.items():
            PILImage.fromarray(quantize_image(tensor_to_images(tensor)[0]), mode="RGB").save(
                out / name
            )
    print(f"translated {len(inputs)} image(s) into {out}")
    return 0


def _cmd_evaluate(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    pipeline = build_pipeline(
        _require_checkpoint(args.ckpt1),
        _require_checkpoint(args.ckpt2),
        _require_checkpoint(args.ckpt_t),
    )
    bundle = read_dataset(args.data)
    if bundle.labels is None:
        raise ConfigError(f"dataset at {args.data} has no labels/ directory to score against")
    _write_resolved(cfg, out)
    report = evaluate_pipeline(
        pipeline,
        bundle.unpaired1,
        bundle.labels,
        seed=cfg.seed,
        config_hash=config_hash(cfg),
    )
    report_path = Path(args.report) if args.report else out / "metrics.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report.save(report_path)
    print(
        f"per_pixel={report.per_pixel_acc:.4f} per_class={report.per_class_acc:.4f} "
        f"iou={report.class_iou:.4f} -> {report_path}"
    )
    return 0


def _cmd_ablate(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    spec = AblationSpec(
        methods=tuple(cfg.ablation_methods),
        paired_fractions=tuple(cfg.ablation_fractions),
        modes=tuple(cfg.ablation_modes),
        seeds=tuple(cfg.ablation_seeds),
        n_domain1=cfg.n_domain1,
        n_domain2=cfg.n_domain2,
        image_size=cfg.image_size,
        num_classes=cfg.num_classes,
        n_test=cfg.n_test,
        train=replace(cfg.train_config(), seed=0),
        jobs=cfg.jobs,
    )
    _write_resolved(cfg, out)
    report = run_ablation(spec, out_dir=out)
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(report.summary_json() + "\n")
    done = len(report.completed())
    print(f"completed {done}/{len(report.rows)} cells -> {out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train-vaegan": _cmd_train_vaegan,
    "train-translator": _cmd_train_translator,
    "translate": _cmd_translate,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
}


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        cfg = resolve_config(args.config, _overrides_from_args(args))
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, DatasetError, CheckpointError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except LatentTranslationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
