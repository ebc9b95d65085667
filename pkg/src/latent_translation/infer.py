"""Translation pipelines: compose frozen encoder, translator, and decoder.

translate_image is the deterministic composition G2(T(E1(x))) on the
posterior mean; the stochastic variant perturbs the mean with seeded
Gaussian noise before translation, one independent sub-seed per sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .checkpoint import Checkpoint
from .errors import PipelineError
from .nets import ModelParams, decode, encode, sample_latent, translate_features
from .seeds import derive_seed


@dataclass
class TranslationPipeline:
    """Frozen E1 -> T -> G2 composition for domain 1 -> domain 2."""

    e1: ModelParams
    t: ModelParams
    g2: ModelParams

    def __post_init__(self):
        c1 = self.e1.arch.latent_channels
        ct = self.t.arch.latent_channels
        c2 = self.g2.arch.latent_channels
        if not (c1 == ct == c2):
            raise PipelineError(
                f"latent channels disagree: encoder {c1}, translator {ct}, decoder {c2}"
            )


def build_pipeline(
    ckpt1: Checkpoint, ckpt2: Checkpoint, ckpt_t: Checkpoint
) -> TranslationPipeline:
    """Assemble a pipeline from the two stage-1 and one stage-2 checkpoints."""
    try:
        return TranslationPipeline(
            e1=ckpt1.models["encoder"], t=ckpt_t.models["translator"], g2=ckpt2.models["decoder"]
        )
    except KeyError as e:
        raise PipelineError(f"checkpoint missing required model: {e}") from e


def translate_image(pipeline: TranslationPipeline, x1: torch.Tensor) -> torch.Tensor:
    """Deterministic translation of a batch: decode(translate(encode(x)))."""
    with torch.no_grad():
        return decode(pipeline.g2, translate_features(pipeline.t, encode(pipeline.e1, x1)))


def translate_image_stochastic(
    pipeline: TranslationPipeline,
    x1: torch.Tensor,
    num_samples: int,
    sigma: float,
    seed: int,
) -> list[torch.Tensor]:
    """One-to-many translation: perturb the latent mean before translating.

    Sample k uses noise seeded by (seed, k) only, so individual samples are
    reproducible regardless of how many are requested. sigma=0 collapses
    every sample onto the deterministic output.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    outputs = []
    with torch.no_grad():
        mean = encode(pipeline.e1, x1)
        for k in range(num_samples):
            z = sample_latent(mean, derive_seed(seed, "eta", k), sigma)
            outputs.append(decode(pipeline.g2, translate_features(pipeline.t, z)))
    return outputs
