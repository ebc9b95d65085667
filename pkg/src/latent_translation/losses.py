"""Loss terms and composite training objectives.

Conventions, fixed across the package:
- L1-style terms use the element mean (not the sum), so loss weights are
  independent of image and latent sizes.
- All losses are per-sample means over the batch.
- LSGAN uses the 0/1-target least-squares form minimized by both players:
  D minimizes (D(real)-1)^2 + D(fake)^2, G minimizes (D(fake)-1)^2.
- KL against the unit Gaussian prior with identity posterior covariance is
  the closed form 0.5 * sum(mu^2), summed per sample, averaged over batch.

Inside the composite objectives the discriminator side sees detached fakes
and the feature-matching term treats real activations as constant targets;
everything a given optimizer updates keeps an exact analytic gradient
(verified against central finite differences in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import NonFiniteInputError
from .nets import (
    ModelParams,
    decode,
    discriminate,
    encode,
    perceptual_features,
    sample_latent,
    translate_features,
)

TRANSLATION_MODES = ("full", "l1_only", "feat_adv")


def _require_finite(name: str, t: torch.Tensor) -> None:
    if not torch.isfinite(t).all():
        raise NonFiniteInputError(f"{name} received non-finite values")


def _require_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def kl_unit_gaussian(mean: torch.Tensor) -> torch.Tensor:
    """KL(N(mean, I) || N(0, I)) = 0.5 * ||mean||^2 per sample, batch mean."""
    _require_finite("kl_unit_gaussian", mean)
    n = mean.shape[0]
    return 0.5 * mean.pow(2).sum() / n


def reconstruction_loss(x: torch.Tensor, x_bar: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    _require_same_shape(x, x_bar, "reconstruction_loss")
    return (x - x_bar).abs().mean()


def lsgan_discriminator_loss(
    real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]
) -> torch.Tensor:
    """Mean over scales of mean[(real - 1)^2] + mean[fake^2]."""
    if len(real_scores) != len(fake_scores):
        raise ValueError("real/fake score lists must have equal length")
    total = sum(
        ((r - 1.0) ** 2).mean() + (f**2).mean() for r, f in zip(real_scores, fake_scores)
    )
    return total / len(real_scores)


def lsgan_generator_loss(fake_scores: list[torch.Tensor]) -> torch.Tensor:
    """Mean over scales of mean[(fake - 1)^2]."""
    total = sum(((f - 1.0) ** 2).mean() for f in fake_scores)
    return total / len(fake_scores)


def feature_matching_loss(
    real_feats: list[torch.Tensor], fake_feats: list[torch.Tensor]
) -> torch.Tensor:
    """Sum over taps of the per-tap mean absolute activation difference."""
    if len(real_feats) != len(fake_feats):
        raise ValueError("feature pyramids must have equal length")
    total = None
    for r, f in zip(real_feats, fake_feats):
        _require_same_shape(r, f, "feature_matching_loss tap")
        term = (r - f).abs().mean()
        total = term if total is None else total + term
    if total is None:
        raise ValueError("feature pyramids must be non-empty")
    return total


def feature_l1_loss(z_hat: torch.Tensor, z_target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between latent codes."""
    _require_same_shape(z_hat, z_target, "feature_l1_loss")
    return (z_hat - z_target).abs().mean()


@dataclass
class LossBreakdown:
    """Scalar loss terms plus the weighted totals for each optimizer side.

    total_g = the documented weighted sum of `terms` with `weights`;
    recomputable from the breakdown (tested to 1e-6 relative).
    """

    total_g: torch.Tensor
    total_d: torch.Tensor | None
    terms: dict[str, torch.Tensor]
    weights: dict[str, float] = field(default_factory=dict)

    def term_floats(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.terms.items()}


def _detached(feats: list[torch.Tensor]) -> list[torch.Tensor]:
    return [f.detach() for f in feats]


def vaegan_objective(
    x: torch.Tensor,
    e: ModelParams,
    g: ModelParams,
    d: ModelParams,
    noise_seed: int,
    lambda_fm: float = 10.0,
    sigma: float = 1.0,
) -> LossBreakdown:
    """Stage-1 losses for one domain's VAE-GAN.

    Generator side: kl + recon + gan_g + lambda_fm * (fm_gan + fm_perc),
    with the reconstruction decoded from a seeded reparameterized sample.
    Discriminator side: LSGAN on real vs detached fake.
    """
    mu = encode(e, x)
    z = sample_latent(mu, noise_seed, sigma)
    x_bar = decode(g, z)

    real_scores, real_feats = discriminate(d, x)
    fake_scores, fake_feats = discriminate(d, x_bar)

    kl = kl_unit_gaussian(mu)
    recon = reconstruction_loss(x, x_bar)
    gan_g = lsgan_generator_loss(fake_scores)
    fm_gan = feature_matching_loss(_detached(real_feats), fake_feats)
    fm_perc = feature_matching_loss(
        _detached(perceptual_features(x)), perceptual_features(x_bar)
    )
    total_g = kl + recon + gan_g + lambda_fm * (fm_gan + fm_perc)

    fake_scores_d, _ = discriminate(d, x_bar.detach())
    gan_d = lsgan_discriminator_loss(real_scores, fake_scores_d)

    return LossBreakdown(
        total_g=total_g,
        total_d=gan_d,
        terms={
            "kl": kl,
            "recon": recon,
            "gan_g": gan_g,
            "fm_gan": fm_gan,
            "fm_perc": fm_perc,
            "gan_d": gan_d,
        },
        weights={"lambda_fm": lambda_fm},
    )


def translation_objective(
    p1: torch.Tensor,
    p2: torch.Tensor,
    e1: ModelParams,
    e2: ModelParams,
    g2: ModelParams,
    t: ModelParams,
    d_t: ModelParams | None,
    mode: str = "full",
    lambda_f: float = 60.0,
    lambda_fm: float = 10.0,
) -> LossBreakdown:
    """Stage-2 losses for the feature translator on a paired batch.

    full:     image-level LSGAN on the decoded translation (D_T on images)
              + lambda_f * feature L1 + lambda_fm * feature matching.
    l1_only:  lambda_f * feature L1; no discriminator.
    feat_adv: LSGAN applied on latent codes (D_T on latents)
              + lambda_f * feature L1.
    """
    if mode not in TRANSLATION_MODES:
        raise ValueError(f"unknown translation loss mode: {mode!r}")
    if mode != "l1_only" and d_t is None:
        raise ValueError(f"mode {mode!r} requires a translation discriminator")

    z1 = encode(e1, p1)
    z2 = encode(e2, p2)
    z2_bar = translate_features(t, z1)
    feat_l1 = feature_l1_loss(z2_bar, z2)

    terms: dict[str, torch.Tensor] = {"feat_l1": feat_l1}
    weights = {"lambda_f": lambda_f, "lambda_fm": lambda_fm}

    if mode == "l1_only":
        return LossBreakdown(
            total_g=lambda_f * feat_l1, total_d=None, terms=terms, weights=weights
        )

    if mode == "full":
        p2_bar = decode(g2, z2_bar)
        real_scores, real_feats = discriminate(d_t, p2)
        fake_scores, fake_feats = discriminate(d_t, p2_bar)
        adv = lsgan_generator_loss(fake_scores)
        fm_gan = feature_matching_loss(_detached(real_feats), fake_feats)
        fm_perc = feature_matching_loss(
            _detached(perceptual_features(p2)), perceptual_features(p2_bar)
        )
        total_g = adv + lambda_f * feat_l1 + lambda_fm * (fm_gan + fm_perc)
        fake_scores_d, _ = discriminate(d_t, p2_bar.detach())
        gan_d = lsgan_discriminator_loss(real_scores, fake_scores_d)
        terms.update(
            {"adv": adv, "fm_gan": fm_gan, "fm_perc": fm_perc, "gan_d": gan_d}
        )
        return LossBreakdown(total_g=total_g, total_d=gan_d, terms=terms, weights=weights)

    # feat_adv: the discriminator consumes latent codes instead of images.
    real_scores, _ = discriminate(d_t, z2)
    fake_scores, _ = discriminate(d_t, z2_bar)
    adv = lsgan_generator_loss(fake_scores)
    total_g = adv + lambda_f * feat_l1
    fake_scores_d, _ = discriminate(d_t, z2_bar.detach())
    gan_d = lsgan_discriminator_loss(real_scores, fake_scores_d)
    terms.update({"adv": adv, "gan_d": gan_d})
    return LossBreakdown(total_g=total_g, total_d=gan_d, terms=terms, weights=weights)


def image_translation_objective(
    p1: torch.Tensor,
    p2: torch.Tensor,
    e: ModelParams,
    g: ModelParams,
    d: ModelParams,
    lambda_fm: float = 10.0,
) -> LossBreakdown:
    """Image-level supervised baseline: direct encoder-decoder translation.

    Generator side: LSGAN + lambda_fm * feature matching + image L1 on the
    paired target; no KL and no latent sampling.
    """
    p2_hat = decode(g, encode(e, p1))
    real_scores, real_feats = discriminate(d, p2)
    fake_scores, fake_feats = discriminate(d, p2_hat)

    gan_g = lsgan_generator_loss(fake_scores)
    l1 = reconstruction_loss(p2, p2_hat)
    fm_gan = feature_matching_loss(_detached(real_feats), fake_feats)
    fm_perc = feature_matching_loss(
        _detached(perceptual_features(p2)), perceptual_features(p2_hat)
    )
    total_g = gan_g + l1 + lambda_fm * (fm_gan + fm_perc)

    fake_scores_d, _ = discriminate(d, p2_hat.detach())
    gan_d = lsgan_discriminator_loss(real_scores, fake_scores_d)
    return LossBreakdown(
        total_g=total_g,
        total_d=gan_d,
        terms={
            "gan_g": gan_g,
            "recon": l1,
            "fm_gan": fm_gan,
            "fm_perc": fm_perc,
            "gan_d": gan_d,
        },
        weights={"lambda_fm": lambda_fm},
    )
