"""Two-stage training: per-domain VAE-GANs, then the frozen-backbone translator.

Both stages alternate one discriminator update and one generator update per
batch, using Adam with bias-corrected moments (eps 1e-8). All randomness
(init aside) flows through a single torch.Generator seeded from the config,
whose state is captured in checkpoints; given a seed, a config, and a data
order the whole loss trace is reproducible bit-for-bit.

Any non-finite loss term aborts training with the offending term named
rather than letting NaNs propagate.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import PairedSample, images_to_tensor
from .errors import ArchitectureError, FrozenParameterError, NonFiniteLossError
from .losses import (
    LossBreakdown,
    image_translation_objective,
    translation_objective,
    vaegan_objective,
)
from .nets import ModelParams, build_model, default_archs
from .seeds import derive_seed

EpochCallback = Callable[["EpochRecord"], bool | None]


@dataclass
class EpochRecord:
    """One training-log line: per-epoch mean loss terms and timing."""

    epoch: int
    stage: str
    terms: dict[str, float]
    total_g: float
    total_d: float | None
    wall_seconds: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "stage": self.stage,
                "terms": self.terms,
                "total_g": self.total_g,
                "total_d": self.total_d,
                "wall_seconds": self.wall_seconds,
            },
            sort_keys=True,
        )


def _draw_seed(gen: torch.Generator) -> int:
    return int(torch.randint(0, 2**62, (1,), generator=gen).item())


def _check_finite(bd: LossBreakdown, step: int) -> None:
    for name, value in bd.terms.items():
        v = float(value.detach())
        if not math.isfinite(v):
            raise NonFiniteLossError(name, step, v)


class _EpochAccumulator:
    def __init__(self):
        self.sums: dict[str, float] = {}
        self.total_g = 0.0
        self.total_d = 0.0
        self.has_d = False
        self.n = 0

    def add(self, bd: LossBreakdown) -> None:
        for name, value in bd.terms.items():
            self.sums[name] = self.sums.get(name, 0.0) + float(value.detach())
        self.total_g += float(bd.total_g.detach())
        if bd.total_d is not None:
            self.total_d += float(bd.total_d.detach())
            self.has_d = True
        self.n += 1

    def record(self, epoch: int, stage: str, wall: float) -> EpochRecord:
        n = max(self.n, 1)
        return EpochRecord(
            epoch=epoch,
            stage=stage,
            terms={k: v / n for k, v in self.sums.items()},
            total_g=self.total_g / n,
            total_d=self.total_d / n if self.has_d else None,
            wall_seconds=wall,
        )


class _LogSink:
    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, record: EpochRecord) -> None:
        if self.path is not None:
            with self.path.open("a") as f:
                f.write(record.to_json() + "\n")


def _adam(params, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        params, lr=config.learning_rate, betas=(config.beta1, config.beta2), eps=1e-8
    )


def _epoch_batches(n: int, batch_size: int, gen: torch.Generator):
    perm = torch.randperm(n, generator=gen)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def _total_steps(n: int, config: TrainConfig, epochs: int, steps: int | None) -> int:
    if steps is not None:
        return steps
    return epochs * math.ceil(n / config.batch_size)


def _rng_state_bytes(gen: torch.Generator) -> bytes:
    return gen.get_state().numpy().tobytes()


def _restore_rng(gen: torch.Generator, state: bytes) -> None:
    gen.set_state(torch.from_numpy(np.frombuffer(state, dtype=np.uint8).copy()))


def train_vaegan(
    images: list[np.ndarray],
    config: TrainConfig,
    domain: int = 1,
    log_path: str | Path | None = None,
    on_epoch: EpochCallback | None = None,
    resume_from: Checkpoint | None = None,
) -> Checkpoint:
    """Stage 1: train one domain's encoder/decoder/discriminator.

    Per batch: a discriminator LSGAN step and an encoder/decoder step on
    kl + recon + gan_g + lambda_fm * feature matching. Deterministic given
    (config.seed, data order). `on_epoch` may return True to stop early.
    """
    config.validate()
    if len(images) == 0:
        raise ValueError("cannot train a VAE-GAN on an empty image list")
    if domain not in (1, 2):
        raise ValueError(f"domain must be 1 or 2, got {domain}")
    stage = f"vaegan_domain{domain}"
    x_all = images_to_tensor(images)
    n = x_all.shape[0]

    gen = torch.Generator()
    if resume_from is not None:
        if resume_from.stage != stage:
            raise ValueError(f"cannot resume {stage} from a {resume_from.stage} checkpoint")
        e, g, d = (resume_from.models[k] for k in ("encoder", "decoder", "discriminator"))
        _restore_rng(gen, resume_from.rng_state)
        start_epoch = resume_from.epoch + 1
    else:
        gen.manual_seed(config.seed % 2**63)
        archs = default_archs(
            base_channels=config.base_channels,
            latent_channels=config.latent_channels,
            disc_scales=config.disc_scales,
            head_gain=config.head_gain,
        )
        e = build_model(archs["encoder"], derive_seed(config.seed, stage, "encoder"))
        g = build_model(archs["decoder"], derive_seed(config.seed, stage, "decoder"))
        d = build_model(
            archs["image_discriminator"], derive_seed(config.seed, stage, "discriminator")
        )
        start_epoch = 0

    opt_g = _adam([*e.module.parameters(), *g.module.parameters()], config)
    opt_d = _adam(d.module.parameters(), config)
    sink = _LogSink(log_path)

    target = _total_steps(n, config, config.epochs_vaegan, config.steps_vaegan)
    step = 0
    epoch = start_epoch
    while step < target:
        t0 = time.monotonic()
        acc = _EpochAccumulator()
        for idx in _epoch_batches(n, config.batch_size, gen):
            bd = vaegan_objective(
                x_all[idx], e, g, d, noise_seed=_draw_seed(gen), lambda_fm=config.lambda_fm
            )
            _check_finite(bd, step)
            opt_g.zero_grad()
            bd.total_g.backward()
            opt_d.zero_grad()
            bd.total_d.backward()
            opt_d.step()
            opt_g.step()
            acc.add(bd)
            step += 1
            if step >= target:
                break
        record = acc.record(epoch, stage, time.monotonic() - t0)
        sink.write(record)
        if on_epoch is not None and on_epoch(record):
            break
        epoch += 1

    return Checkpoint(
        models={"encoder": e, "decoder": g, "discriminator": d},
        config=config,
        epoch=epoch,
        rng_state=_rng_state_bytes(gen),
        stage=stage,
    )


def _pairs_to_tensors(paired: list[PairedSample]) -> tuple[torch.Tensor, torch.Tensor]:
    if len(paired) == 0:
        raise ValueError("cannot train a translator on an empty paired list")
    a = images_to_tensor([p.a for p in paired])
    b = images_to_tensor([p.b for p in paired])
    return a, b


def train_translator(
    ckpt1: Checkpoint,
    ckpt2: Checkpoint,
    paired: list[PairedSample],
    config: TrainConfig,
    log_path: str | Path | None = None,
    on_epoch: EpochCallback | None = None,
) -> Checkpoint:
    """Stage 2: train the feature translator with both VAE-GANs frozen.

    Latents are posterior means of the frozen encoders. Only the translator
    (and its discriminator, when the mode has one) receive updates; the
    frozen parameters are checksummed before and after as a hard guarantee.
    """
    config.validate()
    a_all, b_all = _pairs_to_tensors(paired)
    n = a_all.shape[0]

    e1 = ckpt1.models["encoder"]
    e2, g2 = ckpt2.models["encoder"], ckpt2.models["decoder"]
    if e1.arch.latent_channels != e2.arch.latent_channels:
        raise ArchitectureError(
            "incompatible latent shapes: encoder latent channels "
            f"{e1.arch.latent_channels} vs {e2.arch.latent_channels}"
        )

    frozen = {"encoder1": e1, "encoder2": e2, "decoder2": g2}
    checksums = {k: mp.checksum() for k, mp in frozen.items()}
    for mp in frozen.values():
        mp.module.requires_grad_(False)

    gen = torch.Generator().manual_seed(config.seed % 2**63)
    archs = default_archs(
        base_channels=config.base_channels,
        latent_channels=config.latent_channels,
        disc_scales=config.disc_scales,
        translator_kind=config.translator_kind,
        translator_blocks=config.translator_blocks,
        fc_layers=config.fc_layers,
        fc_width=config.fc_width,
        image_size=a_all.shape[2],
    )
    t = build_model(archs["translator"], derive_seed(config.seed, "translator", "T"))
    d_t = None
    if config.mode == "full":
        d_t = build_model(
            archs["image_discriminator"], derive_seed(config.seed, "translator", "D_T")
        )
    elif config.mode == "feat_adv":
        d_t = build_model(
            archs["translation_discriminator"], derive_seed(config.seed, "translator", "D_T")
        )

    opt_t = _adam(t.module.parameters(), config)
    opt_d = _adam(d_t.module.parameters(), config) if d_t is not None else None
    sink = _LogSink(log_path)

    target = _total_steps(n, config, config.epochs_translator, config.steps_translator)
    step = 0
    epoch = 0
    try:
        while step < target:
            t0 = time.monotonic()
            acc = _EpochAccumulator()
            for idx in _epoch_batches(n, config.batch_size, gen):
                bd = translation_objective(
                    a_all[idx],
                    b_all[idx],
                    e1,
                    e2,
                    g2,
                    t,
                    d_t,
                    mode=config.mode,
                    lambda_f=config.lambda_f,
                    lambda_fm=config.lambda_fm,
                )
                _check_finite(bd, step)
                opt_t.zero_grad()
                bd.total_g.backward()
                if opt_d is not None:
                    opt_d.zero_grad()
                    bd.total_d.backward()
                    opt_d.step()
                opt_t.step()
                acc.add(bd)
                step += 1
                if step >= target:
                    break
            record = acc.record(epoch, "translator", time.monotonic() - t0)
            sink.write(record)
            if on_epoch is not None and on_epoch(record):
                break
            epoch += 1
    finally:
        for mp in frozen.values():
            mp.module.requires_grad_(True)

    for key, mp in frozen.items():
        if mp.checksum() != checksums[key]:
            raise FrozenParameterError(f"frozen network '{key}' changed during stage 2")

    models = {"translator": t}
    if d_t is not None:
        models["translation_discriminator"] = d_t
    return Checkpoint(
        models=models,
        config=config,
        epoch=epoch,
        rng_state=_rng_state_bytes(gen),
        stage="translator",
    )


def train_image_translator(
    paired: list[PairedSample],
    config: TrainConfig,
    log_path: str | Path | None = None,
    on_epoch: EpochCallback | None = None,
) -> Checkpoint:
    """Supervised image-level baseline: direct encoder-decoder on pairs.

    Same backbone as the VAE-GANs, trained with LSGAN + feature matching +
    image L1 on paired data only; used as the ablation harness baseline.
    """
    config.validate()
    a_all, b_all = _pairs_to_tensors(paired)
    n = a_all.shape[0]

    gen = torch.Generator().manual_seed(config.seed % 2**63)
    archs = default_archs(
        base_channels=config.base_channels,
        latent_channels=config.latent_channels,
        disc_scales=config.disc_scales,
        head_gain=config.head_gain,
    )
    e = build_model(archs["encoder"], derive_seed(config.seed, "image_translator", "encoder"))
    g = build_model(archs["decoder"], derive_seed(config.seed, "image_translator", "decoder"))
    d = build_model(
        archs["image_discriminator"], derive_seed(config.seed, "image_translator", "discriminator")
    )
    opt_g = _adam([*e.module.parameters(), *g.module.parameters()], config)
    opt_d = _adam(d.module.parameters(), config)
    sink = _LogSink(log_path)

    target = _total_steps(n, config, config.epochs_translator, config.steps_translator)
    step = 0
    epoch = 0
    while step < target:
        t0 = time.monotonic()
        acc = _EpochAccumulator()
        for idx in _epoch_batches(n, config.batch_size, gen):
            bd = image_translation_objective(
                a_all[idx], b_all[idx], e, g, d, lambda_fm=config.lambda_fm
            )
            _check_finite(bd, step)
            opt_g.zero_grad()
            bd.total_g.backward()
            opt_d.zero_grad()
            bd.total_d.backward()
            opt_d.step()
            opt_g.step()
            acc.add(bd)
            step += 1
            if step >= target:
                break
        record = acc.record(epoch, "image_translator", time.monotonic() - t0)
        sink.write(record)
        if on_epoch is not None and on_epoch(record):
            break
        epoch += 1

    return Checkpoint(
        models={"encoder": e, "decoder": g, "discriminator": d},
        config=config,
        epoch=epoch,
        rng_state=_rng_state_bytes(gen),
        stage="image_translator",
    )
